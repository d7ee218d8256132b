#pragma once

#include "adast/errors.hpp"
#include "adast/rng.hpp"
#include "adast/topology.hpp"
#include "adast/problems.hpp"
#include "adast/state.hpp"
#include "adast/metrics.hpp"
#include "adast/algorithms.hpp"
#include "adast/trace_io.hpp"
#include "adast/serialization.hpp"
#include "adast/config.hpp"
#include "adast/experiments.hpp"
