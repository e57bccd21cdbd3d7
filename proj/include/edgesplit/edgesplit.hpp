#pragma once

#include "edgesplit/error.hpp"
#include "edgesplit/prng.hpp"
#include "edgesplit/radio.hpp"
#include "edgesplit/profiles.hpp"
#include "edgesplit/cost_model.hpp"
#include "edgesplit/policy.hpp"
#include "edgesplit/quant.hpp"
#include "edgesplit/control.hpp"
#include "edgesplit/netsim.hpp"
#include "edgesplit/wire.hpp"
#include "edgesplit/runtime.hpp"
#include "edgesplit/sweep.hpp"
#include "edgesplit/transport.hpp"
