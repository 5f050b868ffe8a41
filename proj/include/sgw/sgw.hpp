#pragma once

// Umbrella header for the sliced Gromov-Wasserstein library.

#include "sgw/autodiff.hpp"
#include "sgw/coupling.hpp"
#include "sgw/embedding.hpp"
#include "sgw/errors.hpp"
#include "sgw/gw_exact.hpp"
#include "sgw/gw_sliced.hpp"
#include "sgw/losses.hpp"
#include "sgw/matrix.hpp"
#include "sgw/metrics.hpp"
#include "sgw/nn.hpp"
#include "sgw/rng.hpp"
#include "sgw/trainer.hpp"
