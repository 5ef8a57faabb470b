#pragma once

#include "coopbandit/agent.hpp"
#include "coopbandit/bitset.hpp"
#include "coopbandit/environment.hpp"
#include "coopbandit/experiment.hpp"
#include "coopbandit/format.hpp"
#include "coopbandit/graph.hpp"
#include "coopbandit/independence.hpp"
#include "coopbandit/rng.hpp"
#include "coopbandit/simulator.hpp"
#include "coopbandit/verify.hpp"
