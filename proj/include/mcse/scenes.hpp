// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mcse/audio.hpp"
#include "mcse/mnmf.hpp"

namespace mcse {

// Parameters of one synthetic multichannel scene. The ego-noise signature
// (spectral atoms and spatial steering) is drawn from ego_spatial_seed so
// that training and test clips can share one machine while rng_seed varies
// the realization (gating, phases, noise draws).
struct SceneSpec {
  int channels = 2;
  double duration_s = 3.0;
  int sample_rate = 16000;
  int frame_len = 1024;  // synthesis framing for the structured generators
  int hop = 256;

  // Ego noise: low-rank gated spectra with fixed spatial signatures.
  int ego_rank = 4;             // number of spectral atoms
  double ego_gate_rate = 2.0;   // expected on/off toggles per second
  std::uint64_t ego_spatial_seed = 0;

  // Environmental noise: diffuse colored noise.
  double env_tilt_db = -12.0;     // spectral slope from DC to Nyquist
  double env_diffuseness = 1.0;   // 1 = fully diffuse, 0 = point source

  // Speech surrogate: alternating voiced/unvoiced harmonic signal.
  double pitch_min_hz = 120.0;
  double pitch_max_hz = 220.0;
  int formants = 3;

  double snr_ego_db = 0.0;  // speech vs ego noise
  double snr_env_db = 0.0;  // speech vs environmental noise
  std::uint64_t rng_seed = 0;

  void validate() const;
};

enum class Scenario { kEgo, kEgoEnv };

Scenario scenario_from_string(const std::string& name);
std::string to_string(Scenario scenario);

// Ground-truth stems of one scene; mixture = speech + ego + env sample-wise.
// Under the Ego scenario the env stem is exactly zero.
struct Scene {
  AudioClip mixture;
  AudioClip speech;
  AudioClip ego;
  AudioClip env;
  double snr_ego_db = 0.0;
  double snr_env_db = 0.0;
  std::uint64_t rng_seed = 0;
};

// The fixed per-frequency spatial covariance of the ego signature,
// a_f a_f^H + 0.05 I with a delay-and-gain steering vector a_f.
SpatialCovSet ego_spatial_signature(const SceneSpec& spec);

// The ego spectral atoms (freq_bins x ego_rank), alternating narrowband
// resonances and smooth broadband profiles; columns have unit mean.
Eigen::MatrixXd ego_dictionary(const SceneSpec& spec);

// Structured ego noise: STFT frames drawn from lambda_ft R_f with the
// signature covariances R_f and gated atom activations, then overlap-added.
AudioClip gen_ego_noise(const SceneSpec& spec);

// Spatially diffuse colored noise with a smooth tilted spectrum.
AudioClip gen_env_noise(const SceneSpec& spec);

// Harmonic speech surrogate: voiced segments with a pitch drawn per segment
// and formant-shaped partials, alternating with soft unvoiced noise,
// rendered to all channels through fixed per-channel gains and delays.
AudioClip gen_speech(const SceneSpec& spec);

// Scales `noise` so that 10 log10(P_speech / P_noise) equals snr_db and
// returns (speech + scaled_noise, scaled_noise).
std::pair<AudioClip, AudioClip> mix_at_snr(const AudioClip& speech,
                                           const AudioClip& noise,
                                           double snr_db);

// One scene at the SNRs given in the spec.
Scene gen_scene(const SceneSpec& spec, Scenario scenario);

// n scenes derived from `base`: scene i uses rng_seed derive_seed(seed, i)
// and an ego SNR drawn uniformly from the integers -5..5 dB; the EgoEnv
// scenario adds environmental noise at base.snr_env_db.
std::vector<Scene> build_testset(int n_scenes, Scenario scenario,
                                 const SceneSpec& base, std::uint64_t seed);

// Manifest rows persisted next to the scene stems.
struct SceneInfo {
  std::string id;
  Scenario scenario = Scenario::kEgo;
  std::uint64_t rng_seed = 0;
  double snr_ego_db = 0.0;
  double snr_env_db = 0.0;
};

// Plain-text manifest ("# mcse scenes v1"), one tab-separated row per scene.
void write_manifest(const std::string& path, const std::vector<SceneInfo>& rows);
std::vector<SceneInfo> read_manifest(const std::string& path);

}  // namespace mcse
