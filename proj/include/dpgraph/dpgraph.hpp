#pragma once

#include "dpgraph/attacks.hpp"
#include "dpgraph/dp.hpp"
#include "dpgraph/error.hpp"
#include "dpgraph/gcn.hpp"
#include "dpgraph/graph.hpp"
#include "dpgraph/harness.hpp"
#include "dpgraph/mechanisms.hpp"
#include "dpgraph/metrics.hpp"
#include "dpgraph/rng.hpp"
#include "dpgraph/simulate.hpp"
