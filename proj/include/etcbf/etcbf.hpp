#pragma once

#include "etcbf/errors.hpp"
#include "etcbf/lp.hpp"
#include "etcbf/qp.hpp"
#include "etcbf/kkt_oracle.hpp"
#include "etcbf/qp_check.hpp"
#include "etcbf/plant.hpp"
#include "etcbf/controllers.hpp"
#include "etcbf/integrate.hpp"
#include "etcbf/triggers.hpp"
#include "etcbf/sim.hpp"
#include "etcbf/trace_io.hpp"
#include "etcbf/experiment.hpp"
#include "etcbf/svg.hpp"
