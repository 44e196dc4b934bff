#pragma once

#include "skdv/fft.hpp"
#include "skdv/grid.hpp"
#include "skdv/harness.hpp"
#include "skdv/modulation.hpp"
#include "skdv/noise.hpp"
#include "skdv/record.hpp"
#include "skdv/solver.hpp"
#include "skdv/soliton.hpp"
#include "skdv/spectral.hpp"
#include "skdv/trajectory.hpp"
