#pragma once

// Umbrella header: the whole library in one include. Individual headers stay
// usable on their own; this exists for tools and quick experiments.

#include "dacse/common.hpp"
#include "dacse/rng.hpp"
#include "dacse/sha256.hpp"
#include "dacse/threading.hpp"

#include "dacse/audio/convolve.hpp"
#include "dacse/audio/fft.hpp"
#include "dacse/audio/resample.hpp"
#include "dacse/audio/wav_io.hpp"
#include "dacse/audio/waveform.hpp"

#include "dacse/degrade/apply.hpp"
#include "dacse/degrade/assets.hpp"
#include "dacse/degrade/distortion.hpp"
#include "dacse/degrade/sample.hpp"

#include "dacse/codec/config.hpp"
#include "dacse/codec/rvq.hpp"
#include "dacse/codec/transform.hpp"

#include "dacse/token/dataset.hpp"
#include "dacse/token/flatten.hpp"
#include "dacse/token/vocab.hpp"

#include "dacse/lm/adamw.hpp"
#include "dacse/lm/checkpoint.hpp"
#include "dacse/lm/config.hpp"
#include "dacse/lm/generate.hpp"
#include "dacse/lm/mat.hpp"
#include "dacse/lm/model.hpp"
#include "dacse/lm/rope.hpp"

#include "dacse/train/build.hpp"
#include "dacse/train/plan.hpp"
#include "dacse/train/trainer.hpp"

#include "dacse/enhance/enhance.hpp"

#include "dacse/eval/metrics.hpp"
#include "dacse/eval/spectrogram.hpp"

#include "dacse/synth/speechgen.hpp"
