/// @file  caiaf.hpp
/// @brief Umbrella header for the core library (everything but the HTTP service).

#pragma once

#include "caiaf/active_selection.hpp"
#include "caiaf/batch_clustering.hpp"
#include "caiaf/common.hpp"
#include "caiaf/context_metrics.hpp"
#include "caiaf/dataset.hpp"
#include "caiaf/geo.hpp"
#include "caiaf/kmeans.hpp"
#include "caiaf/linear_classifier.hpp"
#include "caiaf/oracle_sim.hpp"
#include "caiaf/session.hpp"
