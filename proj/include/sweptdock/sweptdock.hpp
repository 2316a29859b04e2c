// Umbrella header for the sweptdock registration library.

#pragma once

#include "sweptdock/bvh.hpp"
#include "sweptdock/config.hpp"
#include "sweptdock/core.hpp"
#include "sweptdock/fft_correlate.hpp"
#include "sweptdock/grids.hpp"
#include "sweptdock/mesh.hpp"
#include "sweptdock/parallel.hpp"
#include "sweptdock/pipeline.hpp"
#include "sweptdock/proximity.hpp"
#include "sweptdock/refine.hpp"
#include "sweptdock/rng.hpp"
#include "sweptdock/scoring.hpp"
#include "sweptdock/sdf.hpp"
#include "sweptdock/se3.hpp"
#include "sweptdock/simulate.hpp"
#include "sweptdock/so3.hpp"
#include "sweptdock/trajectory.hpp"
