#pragma once

// Graph-based vector quantization for bag-of-visual-words pipelines:
// k-NN-graph hill-climbing word assignment, warm-started for sequential
// frame streams, with instrumented tree baselines and a benchmark harness.

#include "gvq/core.hpp"
#include "gvq/knn_graph.hpp"
#include "gvq/gnns.hpp"
#include "gvq/kmeans.hpp"
#include "gvq/vocabulary.hpp"
#include "gvq/baselines.hpp"
#include "gvq/bow.hpp"
#include "gvq/sequence.hpp"
#include "gvq/bench.hpp"
