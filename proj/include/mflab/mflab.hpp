// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mflab/cloud.hpp"
#include "mflab/convergence.hpp"
#include "mflab/error.hpp"
#include "mflab/filters.hpp"
#include "mflab/graph.hpp"
#include "mflab/io.hpp"
#include "mflab/manifold.hpp"
#include "mflab/navigation.hpp"
#include "mflab/navmap.hpp"
#include "mflab/response.hpp"
#include "mflab/rng.hpp"
#include "mflab/spectral.hpp"
