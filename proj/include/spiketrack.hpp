// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "spiketrack/error.hpp"
#include "spiketrack/vec2.hpp"
#include "spiketrack/rng.hpp"
#include "spiketrack/image.hpp"
#include "spiketrack/events.hpp"
#include "spiketrack/event_file.hpp"
#include "spiketrack/statemap.hpp"
#include "spiketrack/components.hpp"
#include "spiketrack/denoise.hpp"
#include "spiketrack/kdtree.hpp"
#include "spiketrack/tracker.hpp"
#include "spiketrack/sim/scene.hpp"
#include "spiketrack/generator.hpp"
#include "spiketrack/sim/approach.hpp"
#include "spiketrack/sim/holes.hpp"
#include "spiketrack/sim/suite.hpp"
#include "spiketrack/collision.hpp"
#include "spiketrack/geometry.hpp"
#include "spiketrack/pipeline.hpp"
#include "spiketrack/config.hpp"
#include "spiketrack/svg.hpp"
