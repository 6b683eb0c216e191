// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "mcse/audio.hpp"

namespace mcse {

// One-sided complex STFT, channels x freq_bins x frames.
// channel(m) is an F x T matrix whose column t is the spectrum of frame t.
struct Spectrogram {
  std::vector<Eigen::MatrixXcd> channels;
  int frame_len = 1024;
  int hop = 256;
  int sample_rate = 16000;
  // Original clip length; istft trims its output to this when nonzero.
  Eigen::Index num_samples = 0;

  int num_channels() const { return static_cast<int>(channels.size()); }
  int freq_bins() const {
    return channels.empty() ? 0 : static_cast<int>(channels[0].rows());
  }
  int frames() const {
    return channels.empty() ? 0 : static_cast<int>(channels[0].cols());
  }

  void validate() const;
};

// Periodic-Hann analysis window of the given length.
Eigen::VectorXd hann_window(int frame_len);

// Hann-windowed one-sided STFT. The tail is zero-padded to a full frame.
// Defaults are 64 ms / 25% hop at 16 kHz.
Spectrogram stft(const AudioClip& clip, int frame_len = 1024, int hop = 256);

// Weighted overlap-add synthesis; exact inverse of stft on the interior.
AudioClip istft(const Spectrogram& spec);

}  // namespace mcse
