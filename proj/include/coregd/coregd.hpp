#pragma once

#include "coregd/autodiff.hpp"
#include "coregd/baselines.hpp"
#include "coregd/coarsening.hpp"
#include "coregd/delaunay.hpp"
#include "coregd/engine.hpp"
#include "coregd/error.hpp"
#include "coregd/features.hpp"
#include "coregd/generators.hpp"
#include "coregd/graph.hpp"
#include "coregd/io.hpp"
#include "coregd/kdtree.hpp"
#include "coregd/layout.hpp"
#include "coregd/metrics.hpp"
#include "coregd/nn.hpp"
#include "coregd/random.hpp"
#include "coregd/rewiring.hpp"
#include "coregd/training.hpp"
