#pragma once

// Umbrella header.

#include "tidysim/comm.hpp"
#include "tidysim/decision.hpp"
#include "tidysim/harness.hpp"
#include "tidysim/learn.hpp"
#include "tidysim/ontology.hpp"
#include "tidysim/perception.hpp"
#include "tidysim/runtime.hpp"
#include "tidysim/scene.hpp"
#include "tidysim/taskgen.hpp"
#include "tidysim/world.hpp"
