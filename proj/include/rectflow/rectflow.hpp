#pragma once

// Umbrella header: the full tabular rectified-flow pipeline.

#include "rectflow/adam.hpp"
#include "rectflow/autodiff.hpp"
#include "rectflow/checkpoint.hpp"
#include "rectflow/csv.hpp"
#include "rectflow/error.hpp"
#include "rectflow/flow.hpp"
#include "rectflow/gauss.hpp"
#include "rectflow/linear.hpp"
#include "rectflow/matrix.hpp"
#include "rectflow/metrics.hpp"
#include "rectflow/model.hpp"
#include "rectflow/ode.hpp"
#include "rectflow/parallel.hpp"
#include "rectflow/preprocess.hpp"
#include "rectflow/quantile.hpp"
#include "rectflow/rng.hpp"
#include "rectflow/run.hpp"
#include "rectflow/sampler.hpp"
#include "rectflow/table.hpp"
#include "rectflow/training.hpp"
