#pragma once

#include "maxcoord/errors.hpp"
#include "maxcoord/graph_ldu.hpp"
#include "maxcoord/integrator.hpp"
#include "maxcoord/mechanism.hpp"
#include "maxcoord/mechanism_io.hpp"
#include "maxcoord/newton_ip.hpp"
#include "maxcoord/quat.hpp"
#include "maxcoord/scenarios.hpp"
#include "maxcoord/simulate.hpp"
#include "maxcoord/trajectory_io.hpp"
