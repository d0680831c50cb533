#pragma once

// Umbrella header for the estimation library (the CLI header is separate
// because it needs CLI11 and nlohmann/json).

#include "rankcorr/core_model.hpp"
#include "rankcorr/csv.hpp"
#include "rankcorr/estimator.hpp"
#include "rankcorr/linalg.hpp"
#include "rankcorr/objectives.hpp"
#include "rankcorr/optimize.hpp"
#include "rankcorr/sandwich.hpp"
#include "rankcorr/simulation.hpp"
