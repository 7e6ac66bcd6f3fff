#pragma once

// Umbrella header.

#include "dcovica/core.hpp"
#include "dcovica/csv.hpp"
#include "dcovica/dcov.hpp"
#include "dcovica/estimator.hpp"
#include "dcovica/harness.hpp"
#include "dcovica/inference.hpp"
#include "dcovica/metrics.hpp"
#include "dcovica/normal.hpp"
#include "dcovica/objective.hpp"
#include "dcovica/pit.hpp"
#include "dcovica/rng.hpp"
#include "dcovica/rotations.hpp"
#include "dcovica/samples.hpp"
#include "dcovica/version.hpp"
