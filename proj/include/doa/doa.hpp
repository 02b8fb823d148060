#pragma once

#include "doa/angles.hpp"
#include "doa/errors.hpp"
#include "doa/geometry.hpp"
#include "doa/geometry_io.hpp"
#include "doa/kde.hpp"
#include "doa/resolver.hpp"
#include "doa/sim.hpp"
#include "doa/tde.hpp"
#include "doa/triangulation.hpp"
#include "doa/wav.hpp"
