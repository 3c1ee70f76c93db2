#pragma once

// Umbrella header.
#include "kdsim/constants.hpp"
#include "kdsim/coupling.hpp"
#include "kdsim/csv.hpp"
#include "kdsim/detector.hpp"
#include "kdsim/ensemble.hpp"
#include "kdsim/errors.hpp"
#include "kdsim/fit.hpp"
#include "kdsim/kinematics.hpp"
#include "kdsim/optics.hpp"
#include "kdsim/scenario.hpp"
#include "kdsim/scenario_io.hpp"
#include "kdsim/sidebands.hpp"
#include "kdsim/version.hpp"
