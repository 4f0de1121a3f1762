#pragma once

// SVG figures from a benchmark output directory: phase portrait, input
// staircases, V(t), and the two trigger-signal panels. summary.csv lists the
// controllers; config.json (when present) locates the unsafe region.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "etcbf/experiment.hpp"
#include "etcbf/trace_io.hpp"

namespace etcbf {

/// Trace files named in summary.csv that do not exist.
class MissingTraces : public std::runtime_error {
 public:
  explicit MissingTraces(std::vector<std::string> files)
      : std::runtime_error("missing trace files: " + join(files)), missing(std::move(files)) {}
  std::vector<std::string> missing;

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& f : v) s += (s.empty() ? "" : ", ") + f;
    return s;
  }
};

struct Disk {
  double cx = 0.5, cy = -0.5, r = 0.3;
};

namespace svg {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x, y;
  bool steps = false;
  bool dashed = false;
};

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad(double frac) {
    if (!(hi >= lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double d = (hi - lo) * frac;
    lo -= d;
    hi += d;
  }
};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string tick_label(double v, double step) {
  char buf[32];
  const int digits = std::max(0, -static_cast<int>(std::floor(std::log10(step) + 1e-9)));
  std::snprintf(buf, sizeof buf, "%.*f", digits, std::abs(v) < step * 1e-6 ? 0.0 : v);
  return buf;
}

inline double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

/// One axes box inside a document. Coordinates map data into [left, left+w] x [top, top+h].
class Axes {
 public:
  Axes(double left, double top, double w, double h, Range xr, Range yr)
      : left_(left), top_(top), w_(w), h_(h), xr_(xr), yr_(yr) {}

  double px(double x) const { return left_ + (x - xr_.lo) / (xr_.hi - xr_.lo) * w_; }
  double py(double y) const { return top_ + h_ - (y - yr_.lo) / (yr_.hi - yr_.lo) * h_; }

  void frame(std::ostream& os, const std::string& title, const std::string& xlabel, const std::string& ylabel) const {
    os << "<rect x=\"" << num(left_) << "\" y=\"" << num(top_) << "\" width=\"" << num(w_) << "\" height=\"" << num(h_)
       << "\" fill=\"none\" stroke=\"#333\"/>\n";
    const double xs = nice_step(xr_.hi - xr_.lo), ys = nice_step(yr_.hi - yr_.lo);
    for (double v = std::ceil(xr_.lo / xs) * xs; v <= xr_.hi + 1e-9 * xs; v += xs) {
      os << "<line x1=\"" << num(px(v)) << "\" y1=\"" << num(top_ + h_) << "\" x2=\"" << num(px(v)) << "\" y2=\""
         << num(top_) << "\" stroke=\"#ddd\"/>\n";
      os << "<text x=\"" << num(px(v)) << "\" y=\"" << num(top_ + h_ + 14) << "\" text-anchor=\"middle\">"
         << tick_label(v, xs) << "</text>\n";
    }
    for (double v = std::ceil(yr_.lo / ys) * ys; v <= yr_.hi + 1e-9 * ys; v += ys) {
      os << "<line x1=\"" << num(left_) << "\" y1=\"" << num(py(v)) << "\" x2=\"" << num(left_ + w_) << "\" y2=\""
         << num(py(v)) << "\" stroke=\"#ddd\"/>\n";
      os << "<text x=\"" << num(left_ - 4) << "\" y=\"" << num(py(v) + 4) << "\" text-anchor=\"end\">"
         << tick_label(v, ys) << "</text>\n";
    }
    os << "<text x=\"" << num(left_ + w_ / 2) << "\" y=\"" << num(top_ - 8)
       << "\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    os << "<text x=\"" << num(left_ + w_ / 2) << "\" y=\"" << num(top_ + h_ + 32) << "\" text-anchor=\"middle\">"
       << xlabel << "</text>\n";
    os << "<text transform=\"translate(" << num(left_ - 44) << "," << num(top_ + h_ / 2)
       << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel << "</text>\n";
  }

  void curve(std::ostream& os, const Series& s) const {
    if (s.x.empty()) return;
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
       << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (s.steps && i > 0) os << num(px(s.x[i])) << ',' << num(py(s.y[i - 1])) << ' ';
      os << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
    }
    os << "\"/>\n";
  }

  void hline(std::ostream& os, double y) const {
    if (y < yr_.lo || y > yr_.hi) return;
    os << "<line x1=\"" << num(left_) << "\" y1=\"" << num(py(y)) << "\" x2=\"" << num(left_ + w_) << "\" y2=\""
       << num(py(y)) << "\" stroke=\"#000\" stroke-dasharray=\"2,2\"/>\n";
  }

  void legend(std::ostream& os, const std::vector<Series>& series) const {
    double y = top_ + 16;
    for (const auto& s : series) {
      if (s.label.empty()) continue;
      os << "<line x1=\"" << num(left_ + w_ - 150) << "\" y1=\"" << num(y - 4) << "\" x2=\"" << num(left_ + w_ - 128)
         << "\" y2=\"" << num(y - 4) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\""
         << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
      os << "<text x=\"" << num(left_ + w_ - 122) << "\" y=\"" << num(y) << "\">" << s.label << "</text>\n";
      y += 16;
    }
  }

 private:
  double left_, top_, w_, h_;
  Range xr_, yr_;
};

inline void open_doc(std::ostream& os, int w, int h) {
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
     << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline Range range_of(const std::vector<Series>& series, bool use_x) {
  Range r;
  for (const auto& s : series)
    for (double v : use_x ? s.x : s.y) r.add(v);
  return r;
}

inline void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << body;
}

// A single time-series panel document.
inline std::string line_plot(const std::string& title, const std::string& ylabel, std::vector<Series> series,
                             std::optional<double> zero_line = std::nullopt) {
  std::ostringstream os;
  open_doc(os, 720, 420);
  Range xr = range_of(series, true), yr = range_of(series, false);
  if (zero_line) yr.add(*zero_line);
  xr.pad(0.0);
  yr.pad(0.05);
  const Axes ax(70, 40, 620, 320, xr, yr);
  ax.frame(os, title, "t", ylabel);
  if (zero_line) ax.hline(os, *zero_line);
  for (const auto& s : series) ax.curve(os, s);
  ax.legend(os, series);
  os << "</svg>\n";
  return os.str();
}

}  // namespace svg

inline const char* controller_color(const std::string& name) {
  if (name == "greedy_et") return "#d62728";
  if (name == "greedy_st") return "#1f77b4";
  if (name == "greedy") return "#2ca02c";
  if (name == "clf_cbf_qp") return "#9467bd";
  if (name == "state_feedback") return "#ff7f0e";
  return "#555555";
}

/// Unsafe disk from the run's config.json: the builtin plant's disk, or the
/// zero level of an isotropic h = s|x - c|^2 - offset in two dimensions.
inline std::optional<Disk> unsafe_disk(const std::filesystem::path& out_dir) {
  const auto path = out_dir / "config.json";
  if (!std::filesystem::exists(path)) return Disk{};
  const ExperimentConfig cfg = load_config(path.string());
  if (!cfg.plant) return Disk{};
  const auto& lq = *cfg.plant;
  if (lq.S.rows() != 2 || lq.offset <= 0.0) return std::nullopt;
  const double s = lq.S(0, 0);
  if (s <= 0.0 || std::abs(lq.S(1, 1) - s) > 1e-12 || std::abs(lq.S(0, 1)) > 1e-12 || std::abs(lq.S(1, 0)) > 1e-12)
    return std::nullopt;
  return Disk{lq.center(0), lq.center(1), std::sqrt(lq.offset / s)};
}

/// Writes phase_portrait.svg, control_inputs.svg, lyapunov.svg and
/// trigger_conditions.svg into out_dir. Returns the written paths.
inline std::vector<std::string> render_figures(const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  const fs::path manifest = dir / "summary.csv";
  if (!fs::exists(manifest)) throw MissingTraces({manifest.string()});
  const SummaryTable table = read_summary_csv(manifest.string());

  std::vector<std::string> missing;
  std::vector<std::pair<std::string, ParsedTrace>> traces;
  for (const auto& row : table.rows) {
    const fs::path p = dir / ("trace_" + row.controller + ".csv");
    if (!fs::exists(p))
      missing.push_back(p.string());
    else
      traces.emplace_back(row.controller, read_trace_csv(p.string()));
  }
  if (!missing.empty()) throw MissingTraces(missing);

  std::vector<svg::Series> phase, inputs, lyap, stab, safe;
  for (const auto& [name, parsed] : traces) {
    const auto& samples = parsed.trace.samples;
    const std::string color = controller_color(name);
    svg::Series ph{name, color, {}, {}}, v{name, color, {}, {}}, sp{name, color, {}, {}}, sq{name, color, {}, {}};
    for (const auto& s : samples) {
      ph.x.push_back(s.x(0));
      ph.y.push_back(parsed.n > 1 ? s.x(1) : s.t);
      v.x.push_back(s.t);
      v.y.push_back(s.V);
      sp.x.push_back(s.t);
      sp.y.push_back(-s.p);
      sq.x.push_back(s.t);
      sq.y.push_back(s.q);
    }
    for (int j = 0; j < parsed.m; ++j) {
      svg::Series u{parsed.m > 1 ? name + " u" + std::to_string(j + 1) : name, color, {}, {}, true, j > 0};
      for (const auto& s : samples) {
        u.x.push_back(s.t);
        u.y.push_back(s.u(j));
      }
      inputs.push_back(std::move(u));
    }
    phase.push_back(std::move(ph));
    lyap.push_back(std::move(v));
    stab.push_back(std::move(sp));
    safe.push_back(std::move(sq));
  }

  std::vector<std::string> written;
  auto emit = [&](const char* file, const std::string& body) {
    svg::write_file(dir / file, body);
    written.push_back((dir / file).string());
  };

  {
    const auto disk = unsafe_disk(dir);
    svg::Range xr = svg::range_of(phase, true), yr = svg::range_of(phase, false);
    if (disk) {
      xr.add(disk->cx - disk->r);
      xr.add(disk->cx + disk->r);
      yr.add(disk->cy - disk->r);
      yr.add(disk->cy + disk->r);
    }
    xr.pad(0.05);
    yr.pad(0.05);
    // equal scale on both axes
    const double span = std::max(xr.hi - xr.lo, yr.hi - yr.lo);
    const double xc = 0.5 * (xr.lo + xr.hi), yc = 0.5 * (yr.lo + yr.hi);
    xr = {xc - span / 2, xc + span / 2};
    yr = {yc - span / 2, yc + span / 2};

    std::ostringstream os;
    svg::open_doc(os, 600, 600);
    const svg::Axes ax(70, 40, 500, 500, xr, yr);
    ax.frame(os, "Phase portrait", "x1", "x2");
    if (disk) {
      os << "<circle cx=\"" << svg::num(ax.px(disk->cx)) << "\" cy=\"" << svg::num(ax.py(disk->cy)) << "\" r=\""
         << svg::num(ax.px(disk->cx + disk->r) - ax.px(disk->cx))
         << "\" fill=\"#999\" fill-opacity=\"0.4\" stroke=\"#333\"/>\n";
    }
    for (const auto& s : phase) ax.curve(os, s);
    ax.legend(os, phase);
    os << "</svg>\n";
    emit("phase_portrait.svg", os.str());
  }
  emit("control_inputs.svg", svg::line_plot("Control inputs", "u", inputs));
  emit("lyapunov.svg", svg::line_plot("Lyapunov function values", "V(x)", lyap));

  {
    std::ostringstream os;
    svg::open_doc(os, 720, 760);
    for (int panel = 0; panel < 2; ++panel) {
      const auto& series = panel == 0 ? stab : safe;
      svg::Range xr = svg::range_of(series, true), yr = svg::range_of(series, false);
      yr.add(0.0);
      xr.pad(0.0);
      yr.pad(0.05);
      const svg::Axes ax(70, 40 + panel * 370, 620, 300, xr, yr);
      ax.frame(os, panel == 0 ? "Stability trigger" : "Safety trigger", "t",
               panel == 0 ? "L_fV + L_gV u" : "L_gh u + b_cbf");
      ax.hline(os, 0.0);
      for (const auto& s : series) ax.curve(os, s);
      ax.legend(os, series);
    }
    os << "</svg>\n";
    emit("trigger_conditions.svg", os.str());
  }
  return written;
}

}  // namespace etcbf
