// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mcse/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "mcse/common.hpp"
#include "mcse/stft.hpp"

namespace mcse {
namespace {

using Cplx = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kDiagLoad = 0.05;   // isotropic part of the ego covariance
constexpr double kGateFloor = 0.02;  // activation of a gated-off atom

Eigen::Index sample_count(const SceneSpec& s) {
  return std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::lround(s.duration_s * s.sample_rate)));
}

int frame_count(Eigen::Index n, int frame_len, int hop) {
  if (n <= frame_len) return 1;
  return 1 + static_cast<int>((n - frame_len + hop - 1) / hop);
}

// Per-channel delay-and-gain steering of the ego signature; channel 0 is the
// reference.
struct Steering {
  std::vector<double> delay;
  std::vector<double> gain;
};

Steering draw_steering(Rng& rng, int channels, double max_delay, double gain_lo,
                       double gain_hi) {
  Steering s;
  s.delay.assign(static_cast<std::size_t>(channels), 0.0);
  s.gain.assign(static_cast<std::size_t>(channels), 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int m = 1; m < channels; ++m) {
    s.delay[m] = max_delay * (2.0 * unif(rng) - 1.0);
    s.gain[m] = gain_lo + (gain_hi - gain_lo) * unif(rng);
  }
  return s;
}

Steering ego_steering(const SceneSpec& s) {
  Rng rng = make_rng(derive_seed(s.ego_spatial_seed, 2));
  return draw_steering(rng, s.channels, 4.0, 0.75, 1.3);
}

Eigen::VectorXcd steering_at(const Steering& s, int f, int frame_len) {
  const int channels = static_cast<int>(s.delay.size());
  Eigen::VectorXcd a(channels);
  for (int m = 0; m < channels; ++m) {
    const double phase = -2.0 * kPi * f * s.delay[m] / frame_len;
    a(m) = s.gain[m] * Cplx(std::cos(phase), std::sin(phase));
  }
  return a;
}

Spectrogram empty_spec(const SceneSpec& s, Eigen::Index n, int frames) {
  Spectrogram spec;
  spec.frame_len = s.frame_len;
  spec.hop = s.hop;
  spec.sample_rate = s.sample_rate;
  spec.num_samples = n;
  const int freq = s.frame_len / 2 + 1;
  for (int m = 0; m < s.channels; ++m)
    spec.channels.emplace_back(Eigen::MatrixXcd::Zero(freq, frames));
  return spec;
}

// Frames flanking the kept region on each side of a synthesized spectrogram.
// Frames drawn directly in the frequency domain are not tapered like analysis
// frames, so the partial-overlap edge normalization of the inverse transform
// would amplify them without bound; the padded edges are discarded instead.
int edge_pad_frames(const SceneSpec& s) { return s.frame_len / s.hop - 1; }

AudioClip interior_samples(const Spectrogram& padded, const SceneSpec& s,
                           Eigen::Index n) {
  const AudioClip full = istft(padded);
  AudioClip out;
  out.sample_rate = s.sample_rate;
  out.samples = full.samples.middleCols(
      static_cast<Eigen::Index>(edge_pad_frames(s)) * s.hop, n);
  return out;
}

}  // namespace

void SceneSpec::validate() const {
  if (channels < 1) throw ConfigError("scene spec: channels must be >= 1");
  if (!(duration_s > 0.0) || !std::isfinite(duration_s))
    throw ConfigError("scene spec: duration must be positive");
  if (sample_rate < 1) throw ConfigError("scene spec: sample_rate must be >= 1");
  if (frame_len < 2 || frame_len % 2 != 0)
    throw ConfigError("scene spec: frame_len must be even and >= 2");
  if (hop < 1 || hop > frame_len || frame_len % hop != 0)
    throw ConfigError("scene spec: hop must divide frame_len");
  if (ego_rank < 1) throw ConfigError("scene spec: ego_rank must be >= 1");
  if (!(ego_gate_rate >= 0.0))
    throw ConfigError("scene spec: ego_gate_rate must be >= 0");
  if (!(env_diffuseness >= 0.0) || !(env_diffuseness <= 1.0))
    throw ConfigError("scene spec: env_diffuseness must lie in [0, 1]");
  if (!std::isfinite(env_tilt_db))
    throw ConfigError("scene spec: env_tilt_db must be finite");
  if (formants < 1) throw ConfigError("scene spec: formants must be >= 1");
  if (!(pitch_min_hz > 0.0) || !(pitch_max_hz >= pitch_min_hz) ||
      !(pitch_max_hz < sample_rate / 2.0))
    throw ConfigError("scene spec: pitch range must satisfy 0 < min <= max < Nyquist");
  if (!std::isfinite(snr_ego_db) || !std::isfinite(snr_env_db))
    throw ConfigError("scene spec: SNRs must be finite");
}

Scenario scenario_from_string(const std::string& name) {
  if (name == "ego") return Scenario::kEgo;
  if (name == "ego_env") return Scenario::kEgoEnv;
  throw ConfigError(
      fmt::format("unknown scenario '{}' (expected ego or ego_env)", name));
}

std::string to_string(Scenario scenario) {
  return scenario == Scenario::kEgo ? "ego" : "ego_env";
}

Eigen::MatrixXd ego_dictionary(const SceneSpec& s) {
  s.validate();
  const int freq = s.frame_len / 2 + 1;
  Rng rng = make_rng(derive_seed(s.ego_spatial_seed, 1));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd w(freq, s.ego_rank);
  for (int k = 0; k < s.ego_rank; ++k) {
    if (k % 2 == 0) {
      // Narrowband resonance on a broadband floor.
      const double center = 8.0 + unif(rng) * (0.8 * freq - 8.0);
      const double width = 1.5 + 2.5 * unif(rng);
      for (int f = 0; f < freq; ++f) {
        const double d = (f - center) / width;
        w(f, k) = std::exp(-0.5 * d * d) + 0.02;
      }
    } else {
      // Smooth broadband profile from a damped log-domain random walk.
      double level = 0.0;
      for (int f = 0; f < freq; ++f) {
        level = 0.95 * level + 0.3 * normal(rng);
        w(f, k) = 0.3 * std::exp(level) + 0.02;
      }
    }
    w.col(k) /= w.col(k).mean();
  }
  return w;
}

SpatialCovSet ego_spatial_signature(const SceneSpec& s) {
  s.validate();
  const int freq = s.frame_len / 2 + 1;
  const Steering steer = ego_steering(s);
  SpatialCovSet cov(freq, s.channels);
  for (int f = 0; f < freq; ++f) {
    const Eigen::VectorXcd a = steering_at(steer, f, s.frame_len);
    cov.at(f) = a * a.adjoint() +
                kDiagLoad * Eigen::MatrixXcd::Identity(s.channels, s.channels);
  }
  return cov;
}

AudioClip gen_ego_noise(const SceneSpec& s) {
  s.validate();
  const Eigen::Index n = sample_count(s);
  const int frames =
      frame_count(n, s.frame_len, s.hop) + 2 * edge_pad_frames(s);
  const int freq = s.frame_len / 2 + 1;
  const Eigen::MatrixXd w = ego_dictionary(s);
  const Steering steer = ego_steering(s);

  Rng rng = make_rng(derive_seed(s.rng_seed, 200));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Telegraph gating: each atom toggles with the commanded expected rate.
  const double p_switch =
      std::min(1.0, s.ego_gate_rate * s.hop / s.sample_rate);
  Eigen::MatrixXd h(s.ego_rank, frames);
  std::vector<bool> on(static_cast<std::size_t>(s.ego_rank));
  for (int k = 0; k < s.ego_rank; ++k) on[k] = unif(rng) < 0.5;
  for (int t = 0; t < frames; ++t)
    for (int k = 0; k < s.ego_rank; ++k) {
      if (t > 0 && unif(rng) < p_switch) on[k] = !on[k];
      h(k, t) = on[k] ? 1.0 : kGateFloor;
    }

  Spectrogram spec = empty_spec(s, 0, frames);
  const double isq2 = 1.0 / std::sqrt(2.0);
  const double diffuse = std::sqrt(kDiagLoad);
  for (int f = 0; f < freq; ++f) {
    const Eigen::VectorXcd a = steering_at(steer, f, s.frame_len);
    for (int t = 0; t < frames; ++t) {
      const double amp = std::sqrt(w.row(f).dot(h.col(t)));
      const Cplx c0 = isq2 * Cplx(normal(rng), normal(rng));
      for (int m = 0; m < s.channels; ++m) {
        const Cplx cm = isq2 * Cplx(normal(rng), normal(rng));
        spec.channels[m](f, t) = amp * (a(m) * c0 + diffuse * cm);
      }
    }
  }
  return interior_samples(spec, s, n);
}

AudioClip gen_env_noise(const SceneSpec& s) {
  s.validate();
  const Eigen::Index n = sample_count(s);
  const int frames =
      frame_count(n, s.frame_len, s.hop) + 2 * edge_pad_frames(s);
  const int freq = s.frame_len / 2 + 1;

  Rng rng = make_rng(derive_seed(s.rng_seed, 300));
  const Steering steer = draw_steering(rng, s.channels, 4.0, 0.8, 1.25);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double wd = std::sqrt(s.env_diffuseness);
  const double ws = std::sqrt(1.0 - s.env_diffuseness);
  const double isq2 = 1.0 / std::sqrt(2.0);
  Spectrogram spec = empty_spec(s, 0, frames);
  for (int f = 0; f < freq; ++f) {
    // Smooth tilted profile, env_tilt_db from DC to Nyquist.
    const double lam =
        std::pow(10.0, s.env_tilt_db / 10.0 * f / (freq - 1.0));
    const double amp = std::sqrt(lam);
    const Eigen::VectorXcd a = steering_at(steer, f, s.frame_len);
    for (int t = 0; t < frames; ++t) {
      const Cplx c0 = isq2 * Cplx(normal(rng), normal(rng));
      for (int m = 0; m < s.channels; ++m) {
        const Cplx cm = isq2 * Cplx(normal(rng), normal(rng));
        spec.channels[m](f, t) = amp * (ws * a(m) * c0 + wd * cm);
      }
    }
  }
  return interior_samples(spec, s, n);
}

AudioClip gen_speech(const SceneSpec& s) {
  s.validate();
  const Eigen::Index n = sample_count(s);
  Rng rng = make_rng(derive_seed(s.rng_seed, 100));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::VectorXd mono = Eigen::VectorXd::Zero(n);
  const Eigen::Index fade = std::lround(0.005 * s.sample_rate);
  bool voiced = true;
  Eigen::Index pos = 0;
  while (pos < n) {
    const double dur =
        voiced ? 0.15 + 0.2 * unif(rng) : 0.06 + 0.09 * unif(rng);
    const Eigen::Index len = std::min<Eigen::Index>(
        std::max<Eigen::Index>(1, std::lround(dur * s.sample_rate)), n - pos);
    Eigen::VectorXd block(len);
    double target_rms;
    if (voiced) {
      // Pitch glides log-linearly within the segment (up to +/-3 semitones,
      // clamped to the commanded range) with vibrato on top; a single-value
      // range gives a constant pitch. The continuously moving pitch track
      // keeps the surrogate from being representable by a static spectral
      // dictionary of modest size.
      const double f0_start =
          s.pitch_min_hz + (s.pitch_max_hz - s.pitch_min_hz) * unif(rng);
      const double glide = std::pow(2.0, (6.0 * unif(rng) - 3.0) / 12.0);
      const double f0_end =
          std::clamp(f0_start * glide, s.pitch_min_hz, s.pitch_max_hz);
      std::vector<double> fc(static_cast<std::size_t>(s.formants));
      std::vector<double> bw(fc.size());
      for (int j = 0; j < s.formants; ++j) {
        fc[j] = (500.0 + 1000.0 * j) * (0.85 + 0.35 * unif(rng));
        bw[j] = 90.0 + 40.0 * j;
      }
      const double range_st =
          12.0 * std::log2(std::max(1.0, s.pitch_max_hz / s.pitch_min_hz));
      const double vib_st = std::min(0.6, range_st / 4.0);
      const double vib_rate = 4.5 + 2.5 * unif(rng);
      const double vib_phase = 2.0 * kPi * unif(rng);
      const double f0_top =
          std::max(f0_start, f0_end) * std::pow(2.0, vib_st / 12.0);
      const int nh = std::min(
          40, static_cast<int>(0.45 * s.sample_rate / f0_top));
      std::vector<double> phase(static_cast<std::size_t>(nh));
      for (int hdx = 0; hdx < nh; ++hdx) phase[hdx] = 2.0 * kPi * unif(rng);
      const double ratio = f0_end / f0_start;
      double theta = 0.0;
      for (Eigen::Index i = 0; i < len; ++i) {
        const double u =
            len > 1 ? static_cast<double>(i) / static_cast<double>(len - 1) : 0.0;
        const double vib =
            vib_st * std::sin(2.0 * kPi * vib_rate * i / s.sample_rate +
                              vib_phase);
        const double f0 =
            f0_start * std::pow(ratio, u) * std::pow(2.0, vib / 12.0);
        theta += 2.0 * kPi * f0 / s.sample_rate;
        double v = 0.0;
        for (int hdx = 0; hdx < nh; ++hdx) {
          const double f_hz = (hdx + 1) * f0;
          double env = 0.03;
          for (int j = 0; j < s.formants; ++j) {
            const double d = (f_hz - fc[j]) / bw[j];
            env += 1.0 / (1.0 + d * d);
          }
          v += env * std::sin((hdx + 1) * theta + phase[hdx]);
        }
        block(i) = v;
      }
      target_rms = 0.15 * (0.8 + 0.45 * unif(rng));
    } else {
      double state = 0.0;
      for (Eigen::Index i = 0; i < len; ++i) {
        state += 0.25 * (normal(rng) - state);
        block(i) = state;
      }
      target_rms = 0.05;
    }
    const double rms = std::sqrt(block.squaredNorm() / len);
    if (rms > 0.0) block *= target_rms / rms;
    const Eigen::Index ramp = std::min<Eigen::Index>(fade, len / 2);
    for (Eigen::Index i = 0; i < ramp; ++i) {
      const double gain = 0.5 - 0.5 * std::cos(kPi * (i + 0.5) / ramp);
      block(i) *= gain;
      block(len - 1 - i) *= gain;
    }
    mono.segment(pos, len) = block;
    pos += len;
    voiced = !voiced;
  }

  // Fixed per-channel gains and small integer delays.
  AudioClip clip;
  clip.sample_rate = s.sample_rate;
  clip.samples.resize(s.channels, n);
  for (int m = 0; m < s.channels; ++m) {
    const double gain = m == 0 ? 1.0 : 0.8 + 0.4 * unif(rng);
    const Eigen::Index delay =
        m == 0 ? 0 : 1 + static_cast<Eigen::Index>(unif(rng) * 3.0);
    for (Eigen::Index i = 0; i < n; ++i)
      clip.samples(m, i) = i >= delay ? gain * mono(i - delay) : 0.0;
  }
  clip.validate();
  return clip;
}

std::pair<AudioClip, AudioClip> mix_at_snr(const AudioClip& speech,
                                           const AudioClip& noise,
                                           double snr_db) {
  speech.validate();
  noise.validate();
  if (!std::isfinite(snr_db))
    throw ConfigError("mix_at_snr: snr_db must be finite");
  if (speech.samples.rows() != noise.samples.rows() ||
      speech.samples.cols() != noise.samples.cols() ||
      speech.sample_rate != noise.sample_rate)
    throw DataError("mix_at_snr: stems must share shape and sample rate");
  const double p_speech =
      speech.samples.squaredNorm() / static_cast<double>(speech.samples.size());
  const double p_noise =
      noise.samples.squaredNorm() / static_cast<double>(noise.samples.size());
  if (p_speech <= 0.0) throw DataError("mix_at_snr: silent speech stem");
  if (p_noise <= 0.0) throw DataError("mix_at_snr: silent noise stem");

  const double scale =
      std::sqrt(p_speech / (p_noise * std::pow(10.0, snr_db / 10.0)));
  AudioClip scaled = noise;
  scaled.samples *= scale;
  AudioClip mixture = speech;
  mixture.samples += scaled.samples;
  return {std::move(mixture), std::move(scaled)};
}

Scene gen_scene(const SceneSpec& spec, Scenario scenario) {
  spec.validate();
  Scene scene;
  scene.rng_seed = spec.rng_seed;
  scene.snr_ego_db = spec.snr_ego_db;
  scene.snr_env_db = spec.snr_env_db;
  scene.speech = gen_speech(spec);

  const AudioClip ego_raw = gen_ego_noise(spec);
  scene.ego = mix_at_snr(scene.speech, ego_raw, spec.snr_ego_db).second;
  if (scenario == Scenario::kEgoEnv) {
    const AudioClip env_raw = gen_env_noise(spec);
    scene.env = mix_at_snr(scene.speech, env_raw, spec.snr_env_db).second;
  } else {
    scene.env.sample_rate = spec.sample_rate;
    scene.env.samples = Eigen::MatrixXd::Zero(spec.channels,
                                              scene.speech.num_samples());
  }
  scene.mixture.sample_rate = spec.sample_rate;
  scene.mixture.samples =
      scene.speech.samples + scene.ego.samples + scene.env.samples;
  return scene;
}

std::vector<Scene> build_testset(int n_scenes, Scenario scenario,
                                 const SceneSpec& base, std::uint64_t seed) {
  if (n_scenes < 1) throw ConfigError("build_testset: n_scenes must be >= 1");
  base.validate();
  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(n_scenes));
  for (int i = 0; i < n_scenes; ++i) {
    SceneSpec s = base;
    s.rng_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng = make_rng(derive_seed(seed, 100000 + static_cast<std::uint64_t>(i)));
    std::uniform_int_distribution<int> snr(-5, 5);
    s.snr_ego_db = snr(rng);
    scenes.push_back(gen_scene(s, scenario));
  }
  return scenes;
}

void write_manifest(const std::string& path,
                    const std::vector<SceneInfo>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write manifest '{}'", path));
  out << "# mcse scenes v1\n";
  out << "# id\tscenario\trng_seed\tsnr_ego_db\tsnr_env_db\n";
  for (const SceneInfo& row : rows)
    out << fmt::format("{}\t{}\t{}\t{:.6f}\t{:.6f}\n", row.id,
                       to_string(row.scenario), row.rng_seed, row.snr_ego_db,
                       row.snr_env_db);
  if (!out) throw DataError(fmt::format("failed writing manifest '{}'", path));
}

std::vector<SceneInfo> read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open manifest '{}'", path));
  std::string line;
  if (!std::getline(in, line) || line != "# mcse scenes v1")
    throw DataError(fmt::format("'{}' is not a scene manifest", path));
  std::vector<SceneInfo> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    SceneInfo row;
    std::string scenario;
    unsigned long long seed = 0;
    if (!(fields >> row.id >> scenario >> seed >> row.snr_ego_db >>
          row.snr_env_db))
      throw DataError(fmt::format("malformed manifest row '{}'", line));
    row.scenario = scenario_from_string(scenario);
    row.rng_seed = seed;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace mcse
