#pragma once

#include "umsim/beamforming.hpp"
#include "umsim/channel.hpp"
#include "umsim/common.hpp"
#include "umsim/config.hpp"
#include "umsim/detection.hpp"
#include "umsim/estimation.hpp"
#include "umsim/geometry.hpp"
#include "umsim/measurement.hpp"
#include "umsim/presets.hpp"
#include "umsim/prior.hpp"
#include "umsim/rng.hpp"
#include "umsim/runner.hpp"
