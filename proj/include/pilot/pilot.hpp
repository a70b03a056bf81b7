#pragma once

// Umbrella header: the whole library in one include.

#include "pilot/ablation.hpp"
#include "pilot/bundle.hpp"
#include "pilot/camera.hpp"
#include "pilot/config.hpp"
#include "pilot/engine.hpp"
#include "pilot/error.hpp"
#include "pilot/feature_pyramid.hpp"
#include "pilot/image.hpp"
#include "pilot/io.hpp"
#include "pilot/jacobian_check.hpp"
#include "pilot/jngo.hpp"
#include "pilot/metrics.hpp"
#include "pilot/motion_prior.hpp"
#include "pilot/parallel.hpp"
#include "pilot/se3.hpp"
#include "pilot/synthetic_world.hpp"
#include "pilot/target_geoloc.hpp"
#include "pilot/trajectory.hpp"
