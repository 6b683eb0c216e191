// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>

#include "mcse/audio.hpp"
#include "mcse/mcem.hpp"
#include "mcse/stft.hpp"

namespace mcse {

// Multichannel speech image estimate plus the time-domain rendering and
// per-frame variance summaries of the converged model.
struct EnhancementResult {
  Spectrogram speech_spec;  // same dims and framing as the input mixture
  AudioClip speech_clip;
  Eigen::VectorXd frame_speech_var;  // mean modeled speech variance per frame
  Eigen::VectorXd frame_noise_var;   // mean modeled noise variance per frame
};

// Multichannel Wiener filter
//   S_ft = E_r[ g_t sigma^2_f(z^(r)) R_S,f Sigma_X,ft(z^(r))^{-1} ] X_ft
// averaged over the posterior samples kept by the last E-step, followed by
// overlap-add synthesis. With both noise components absent the filter is the
// identity and the mixture is returned unchanged.
//
// The synthesis is reliable only where analysis windows fully overlap:
// filtering reshapes each frame, so the partial-overlap normalization near
// the first and last frame_len samples can amplify leakage there. Callers
// that care about clip edges should pad the mixture before the STFT and trim
// the rendered clip, as the enhance command does.
EnhancementResult wiener_filter(const Spectrogram& spec, const JointModel& model,
                                const McemState& state);

}  // namespace mcse
