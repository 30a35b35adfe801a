#pragma once

#include "ptl/audio_dsp.hpp"
#include "ptl/classifiers.hpp"
#include "ptl/dataset_io.hpp"
#include "ptl/detect.hpp"
#include "ptl/error.hpp"
#include "ptl/eval.hpp"
#include "ptl/fusion.hpp"
#include "ptl/label.hpp"
#include "ptl/model_io.hpp"
#include "ptl/pipeline.hpp"
#include "ptl/synth.hpp"
#include "ptl/vision.hpp"
