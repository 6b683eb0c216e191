// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mcse/stft.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

#include "mcse/common.hpp"

namespace mcse {

namespace {

// fftw plan creation is not thread-safe; execution on distinct plans is.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// Owns one r2c/c2r plan pair plus aligned buffers for a fixed frame length.
class FftPair {
 public:
  explicit FftPair(int n) : n_(n) {
    std::lock_guard<std::mutex> lock(plan_mutex());
    real_ = fftw_alloc_real(n);
    cplx_ = fftw_alloc_complex(n / 2 + 1);
    fwd_ = fftw_plan_dft_r2c_1d(n, real_, cplx_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(n, cplx_, real_, FFTW_ESTIMATE);
  }
  ~FftPair() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(real_);
    fftw_free(cplx_);
  }
  FftPair(const FftPair&) = delete;
  FftPair& operator=(const FftPair&) = delete;

  double* real() { return real_; }
  std::complex<double>* cplx() {
    return reinterpret_cast<std::complex<double>*>(cplx_);
  }
  void forward() { fftw_execute(fwd_); }
  // c2r destroys its input and is unnormalized (scale by 1/n afterwards).
  void inverse() { fftw_execute(inv_); }
  int size() const { return n_; }

 private:
  int n_;
  double* real_;
  fftw_complex* cplx_;
  fftw_plan fwd_;
  fftw_plan inv_;
};

}  // namespace

void Spectrogram::validate() const {
  if (channels.empty()) throw DataError("Spectrogram: no channels");
  if (frame_len <= 0 || hop <= 0 || sample_rate <= 0)
    throw DataError("Spectrogram: nonpositive frame/hop/rate metadata");
  if (hop > frame_len) throw DataError("Spectrogram: hop exceeds frame_len");
  if (frame_len % hop != 0)
    throw DataError("Spectrogram: frame_len not divisible by hop");
  const int expect_f = frame_len / 2 + 1;
  for (const auto& ch : channels) {
    if (static_cast<int>(ch.rows()) != expect_f)
      throw DataError("Spectrogram: freq_bins != frame_len/2 + 1");
    if (ch.cols() != channels[0].cols())
      throw DataError("Spectrogram: ragged channel frame counts");
    if (!ch.allFinite()) throw DataError("Spectrogram: non-finite coefficients");
  }
}

Eigen::VectorXd hann_window(int frame_len) {
  Eigen::VectorXd w(frame_len);
  for (int n = 0; n < frame_len; ++n)
    w[n] = 0.5 * (1.0 - std::cos(2.0 * M_PI * n / frame_len));
  return w;
}

Spectrogram stft(const AudioClip& clip, int frame_len, int hop) {
  clip.validate();
  if (hop <= 0 || frame_len <= 0) throw DataError("stft: nonpositive frame/hop");
  if (hop > frame_len) throw DataError("stft: hop exceeds frame_len");
  if (frame_len % hop != 0) throw DataError("stft: frame_len not divisible by hop");
  const Eigen::Index n = clip.num_samples();
  if (n < frame_len) throw DataError("stft: clip shorter than one frame");

  const int num_frames =
      1 + static_cast<int>((n - frame_len + hop - 1) / hop);
  const int freq_bins = frame_len / 2 + 1;
  const Eigen::VectorXd window = hann_window(frame_len);

  Spectrogram out;
  out.frame_len = frame_len;
  out.hop = hop;
  out.sample_rate = clip.sample_rate;
  out.num_samples = n;
  out.channels.assign(clip.channels(), Eigen::MatrixXcd(freq_bins, num_frames));

  FftPair fft(frame_len);
  for (int m = 0; m < clip.channels(); ++m) {
    for (int t = 0; t < num_frames; ++t) {
      const Eigen::Index start = static_cast<Eigen::Index>(t) * hop;
      for (int i = 0; i < frame_len; ++i) {
        const Eigen::Index idx = start + i;
        const double s = idx < n ? clip.samples(m, idx) : 0.0;
        fft.real()[i] = s * window[i];
      }
      fft.forward();
      for (int f = 0; f < freq_bins; ++f)
        out.channels[m](f, t) = fft.cplx()[f];
    }
  }
  return out;
}

AudioClip istft(const Spectrogram& spec) {
  spec.validate();
  const int frame_len = spec.frame_len;
  const int hop = spec.hop;
  const int num_frames = spec.frames();
  const Eigen::Index full_len =
      static_cast<Eigen::Index>(num_frames - 1) * hop + frame_len;
  const Eigen::VectorXd window = hann_window(frame_len);

  AudioClip out;
  out.sample_rate = spec.sample_rate;
  out.samples = Eigen::MatrixXd::Zero(spec.num_channels(), full_len);
  Eigen::VectorXd norm = Eigen::VectorXd::Zero(full_len);
  for (int t = 0; t < num_frames; ++t) {
    const Eigen::Index start = static_cast<Eigen::Index>(t) * hop;
    for (int i = 0; i < frame_len; ++i) norm[start + i] += window[i] * window[i];
  }

  FftPair fft(frame_len);
  for (int m = 0; m < spec.num_channels(); ++m) {
    for (int t = 0; t < num_frames; ++t) {
      for (int f = 0; f < spec.freq_bins(); ++f) fft.cplx()[f] = spec.channels[m](f, t);
      fft.inverse();
      const Eigen::Index start = static_cast<Eigen::Index>(t) * hop;
      for (int i = 0; i < frame_len; ++i)
        out.samples(m, start + i) += window[i] * fft.real()[i] / frame_len;
    }
  }
  for (Eigen::Index i = 0; i < full_len; ++i) {
    if (norm[i] > 1e-12) out.samples.col(i) /= norm[i];
  }

  if (spec.num_samples > 0) {
    if (spec.num_samples > full_len)
      throw DataError("istft: recorded num_samples exceeds synthesized length");
    out.samples.conservativeResize(Eigen::NoChange, spec.num_samples);
  }
  return out;
}

}  // namespace mcse
