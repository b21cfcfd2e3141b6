#pragma once

// Umbrella header for the whole library.

#include "cfattr/attribution.hpp"
#include "cfattr/coalition.hpp"
#include "cfattr/counterfactual.hpp"
#include "cfattr/dataset.hpp"
#include "cfattr/errors.hpp"
#include "cfattr/game.hpp"
#include "cfattr/metrics.hpp"
#include "cfattr/model.hpp"
#include "cfattr/power_indices.hpp"
#include "cfattr/quantile.hpp"
#include "cfattr/random.hpp"
#include "cfattr/rational.hpp"
#include "cfattr/serialize.hpp"
#include "cfattr/sparsity.hpp"
#include "cfattr/verify.hpp"
#include "cfattr/version.hpp"
