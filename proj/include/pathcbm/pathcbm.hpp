#pragma once

// Umbrella header: whole-slide patch features -> spatial kNN graphs ->
// graph-attention concept bottleneck -> explainable survival analysis.

#include "pathcbm/binio.hpp"
#include "pathcbm/concepts.hpp"
#include "pathcbm/config.hpp"
#include "pathcbm/error.hpp"
#include "pathcbm/graph.hpp"
#include "pathcbm/harness.hpp"
#include "pathcbm/ingest.hpp"
#include "pathcbm/matrix.hpp"
#include "pathcbm/metrics.hpp"
#include "pathcbm/nn.hpp"
#include "pathcbm/records.hpp"
#include "pathcbm/report.hpp"
#include "pathcbm/rng.hpp"
#include "pathcbm/special.hpp"
#include "pathcbm/survival.hpp"
#include "pathcbm/synth.hpp"
#include "pathcbm/table.hpp"
