// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <string>

namespace mcse {

// Multichannel audio buffer, samples in [-1, 1) by convention.
// Row m holds channel m.
struct AudioClip {
  Eigen::MatrixXd samples;  // channels x num_samples
  int sample_rate = 16000;

  int channels() const { return static_cast<int>(samples.rows()); }
  Eigen::Index num_samples() const { return samples.cols(); }
  double duration_s() const {
    return static_cast<double>(samples.cols()) / sample_rate;
  }

  // Throws DataError if the clip violates its invariants (finite samples,
  // at least one channel, positive rate).
  void validate() const;
};

enum class WavFormat { pcm16, float32 };

// RIFF/WAVE reader for PCM16 and IEEE float32, interleaved multichannel.
AudioClip read_wav(const std::string& path);

void write_wav(const std::string& path, const AudioClip& clip,
               WavFormat format = WavFormat::float32);

}  // namespace mcse
