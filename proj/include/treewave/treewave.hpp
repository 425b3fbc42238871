#pragma once

#include "treewave/conditioned.hpp"
#include "treewave/error.hpp"
#include "treewave/gaussian.hpp"
#include "treewave/io.hpp"
#include "treewave/levelset.hpp"
#include "treewave/parallel.hpp"
#include "treewave/quadrature.hpp"
#include "treewave/rng.hpp"
#include "treewave/sampler.hpp"
#include "treewave/spectral.hpp"
#include "treewave/tree.hpp"
#include "treewave/version.hpp"
