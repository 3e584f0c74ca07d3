#pragma once

#include "arousal/bench.hpp"
#include "arousal/classifier.hpp"
#include "arousal/dpss.hpp"
#include "arousal/dsp_filters.hpp"
#include "arousal/edf_io.hpp"
#include "arousal/error.hpp"
#include "arousal/multitaper.hpp"
#include "arousal/pipeline.hpp"
#include "arousal/slope.hpp"
#include "arousal/synth.hpp"
