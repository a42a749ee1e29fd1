#pragma once

// Umbrella header for the tinydet library.

#include "tinydet/box.hpp"
#include "tinydet/coco_io.hpp"
#include "tinydet/errors.hpp"
#include "tinydet/eval.hpp"
#include "tinydet/harness.hpp"
#include "tinydet/loss.hpp"
#include "tinydet/relay.hpp"
#include "tinydet/report_io.hpp"
#include "tinydet/rng.hpp"
