// Copyright 2026 The mcse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mcse/cli.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "mcse/audio.hpp"
#include "mcse/common.hpp"
#include "mcse/mcem.hpp"
#include "mcse/metrics.hpp"
#include "mcse/mnmf.hpp"
#include "mcse/scenes.hpp"
#include "mcse/stft.hpp"
#include "mcse/vae.hpp"
#include "mcse/wiener.hpp"

namespace mcse {
namespace {

namespace fs = std::filesystem;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw DataError(fmt::format("cannot create directory '{}': {}", dir, ec.message()));
}

void ensure_parent_dir(const std::string& file) {
  fs::path parent = fs::path(file).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
}

std::string scene_id(int index) { return fmt::format("scene{:03d}", index); }

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string out;
  std::string scenario = "ego_env";
  int n_scenes = 10;
  std::uint64_t seed = 0;
  SceneSpec base;
  double snr_ego = 0.0;
  bool pin_snr_ego = false;  // fixed ego SNR instead of the -5..5 dB draw
};

int cmd_simulate(const SimulateArgs& args) {
  if (args.n_scenes <= 0) throw ConfigError("simulate: --n must be positive");
  Scenario scenario = scenario_from_string(args.scenario);
  SceneSpec base = args.base;
  base.validate();
  ensure_dir(args.out);

  std::vector<Scene> scenes;
  if (args.pin_snr_ego) {
    scenes.reserve(static_cast<std::size_t>(args.n_scenes));
    for (int i = 0; i < args.n_scenes; ++i) {
      SceneSpec spec = base;
      spec.rng_seed = derive_seed(args.seed, static_cast<std::uint64_t>(i));
      spec.snr_ego_db = args.snr_ego;
      scenes.push_back(gen_scene(spec, scenario));
    }
  } else {
    scenes = build_testset(args.n_scenes, scenario, base, args.seed);
  }

  fs::path out_dir(args.out);
  std::vector<SceneInfo> rows;
  rows.reserve(scenes.size());
  for (int i = 0; i < args.n_scenes; ++i) {
    const Scene& scene = scenes[static_cast<std::size_t>(i)];
    const std::string id = scene_id(i);
    write_wav((out_dir / (id + "_mixture.wav")).string(), scene.mixture);
    write_wav((out_dir / (id + "_speech.wav")).string(), scene.speech);
    write_wav((out_dir / (id + "_ego.wav")).string(), scene.ego);
    write_wav((out_dir / (id + "_env.wav")).string(), scene.env);
    rows.push_back({id, scenario, scene.rng_seed, scene.snr_ego_db, scene.snr_env_db});
  }
  write_manifest((out_dir / "manifest.tsv").string(), rows);
  fmt::print("simulate: wrote {} {} scenes to {}\n", args.n_scenes,
             to_string(scenario), args.out);
  return 0;
}

// ---------------------------------------------------------------------------
// train-vae

struct TrainVaeArgs {
  std::string out;
  int clips = 48;
  double clip_duration = 3.0;
  int latent = 16;
  int hidden_wide = 512;
  int hidden_narrow = 128;
  int frame_len = 1024;
  int hop = 256;
  int sample_rate = 16000;
  TrainingConfig train;
  std::uint64_t seed = 0;
};

int cmd_train_vae(const TrainVaeArgs& args) {
  if (args.clips <= 0) throw ConfigError("train-vae: --clips must be positive");
  const int freq = args.frame_len / 2 + 1;

  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(static_cast<std::size_t>(args.clips));
  Eigen::Index total = 0;
  for (int i = 0; i < args.clips; ++i) {
    SceneSpec spec;
    spec.channels = 1;
    spec.duration_s = args.clip_duration;
    spec.sample_rate = args.sample_rate;
    spec.frame_len = args.frame_len;
    spec.hop = args.hop;
    spec.rng_seed = derive_seed(args.seed, static_cast<std::uint64_t>(i));
    spec.validate();
    AudioClip clip = gen_speech(spec);
    Spectrogram stft_out = stft(clip, args.frame_len, args.hop);
    blocks.push_back(stft_out.channels[0].cwiseAbs2().transpose());
    total += blocks.back().rows();
  }
  Eigen::MatrixXd dataset(total, freq);
  Eigen::Index at = 0;
  for (const Eigen::MatrixXd& block : blocks) {
    dataset.middleRows(at, block.rows()) = block;
    at += block.rows();
  }
  // Train at unit mean power. Enhancement normalizes the mixture the same
  // way, and the per-frame gain absorbs the residual level offset.
  const double mean_power = dataset.mean();
  if (mean_power > 0.0) dataset /= mean_power;

  VaeModel init = VaeModel::init(freq, args.latent, derive_seed(args.seed, 90001),
                                 args.hidden_wide, args.hidden_narrow);
  TrainingConfig cfg = args.train;
  cfg.rng_seed = derive_seed(args.seed, 90002);
  cfg.validate();
  VaeTrainResult result = train(init, dataset, cfg);

  ensure_parent_dir(args.out);
  save_vae(args.out, result.model, result.train_loss, result.val_loss);
  fmt::print("train-vae: {} frames, {} epochs (best {}), checkpoint {}\n",
             dataset.rows(), result.train_loss.size(), result.best_epoch, args.out);
  return 0;
}

// ---------------------------------------------------------------------------
// train-ego

struct TrainEgoArgs {
  std::string out;
  int dict_size = 64;
  int sweeps = 50;
  double duration = 20.0;
  double gate_rate = 1.5;
  int channels = 2;
  int ego_rank = 4;
  int frame_len = 1024;
  int hop = 256;
  int sample_rate = 16000;
  std::uint64_t seed = 0;
  std::uint64_t ego_seed = 0;
};

int cmd_train_ego(const TrainEgoArgs& args) {
  SceneSpec spec;
  spec.channels = args.channels;
  spec.duration_s = args.duration;
  spec.sample_rate = args.sample_rate;
  spec.frame_len = args.frame_len;
  spec.hop = args.hop;
  spec.ego_rank = args.ego_rank;
  spec.ego_gate_rate = args.gate_rate;
  spec.ego_spatial_seed = args.ego_seed;
  spec.rng_seed = derive_seed(args.seed, 1);
  spec.validate();

  AudioClip clip = gen_ego_noise(spec);
  Spectrogram stft_out = stft(clip, args.frame_len, args.hop);

  EgoTrainConfig cfg;
  cfg.dict_size = args.dict_size;
  cfg.sweeps = args.sweeps;
  cfg.rng_seed = derive_seed(args.seed, 2);
  cfg.validate();
  EgoModel model = train_ego(stft_out, cfg);

  ensure_parent_dir(args.out);
  save_ego(args.out, model);
  if (model.loss_history.empty()) {
    fmt::print("train-ego: {} frames, checkpoint {}\n", stft_out.frames(), args.out);
  } else {
    fmt::print("train-ego: {} frames, {} sweeps, loss {:.6f} -> {:.6f}, checkpoint {}\n",
               stft_out.frames(), args.sweeps, model.loss_history.front(),
               model.loss_history.back(), args.out);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// enhance

struct EnhanceArgs {
  std::string manifest;
  std::string out;
  std::string vae;
  std::string ego;
  std::string scheme = "partial";
  int dict_size = 96;
  int em_iters = 100;
  int r_samples = 10;
  int burn_in = 30;
  double proposal_std = 0.0;
  double stop_tol = 1e-4;
  int stop_window = 5;
  std::uint64_t seed = 0;
  int workers = 0;  // 0 = one per core
  int frame_len = 1024;
  int hop = 256;
};

int cmd_enhance(const EnhanceArgs& args) {
  std::vector<SceneInfo> rows = read_manifest(args.manifest);
  if (rows.empty())
    throw DataError(fmt::format("enhance: manifest '{}' lists no scenes", args.manifest));

  Scheme scheme = scheme_from_string(args.scheme);
  SchemeConfig cfg = SchemeConfig::make(scheme, args.dict_size);
  cfg.em_iters = args.em_iters;
  cfg.r_samples = args.r_samples;
  cfg.burn_in = args.burn_in;
  cfg.proposal_std = args.proposal_std;
  cfg.stop_tol = args.stop_tol;
  cfg.stop_window = args.stop_window;
  cfg.validate();

  VaeModel prior = load_vae(args.vae);
  EgoModel ego;
  const EgoModel* ego_ptr = nullptr;
  if (cfg.ego_rank > 0) {
    if (args.ego.empty())
      throw ConfigError(fmt::format(
          "enhance: scheme '{}' keeps {} ego atoms fixed and needs a pre-trained "
          "ego checkpoint; pass --ego", to_string(scheme), cfg.ego_rank));
    ego = load_ego(args.ego);
    ego_ptr = &ego;
  }

  ensure_dir(args.out);
  const fs::path stem_dir = fs::path(args.manifest).parent_path();
  const fs::path out_dir(args.out);
  const std::string scheme_name = to_string(scheme);
  const int workers = args.workers > 0 ? args.workers : default_workers();

  std::vector<std::string> notes(rows.size());
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    const SceneInfo& row = rows[i];
    AudioClip mix = read_wav((stem_dir / (row.id + "_mixture.wav")).string());

    // Pad the mixture so every output sample has full analysis-window
    // overlap. Filtered frames lose the window's time profile, and the
    // partial-overlap normalization at the clip edges would amplify them.
    const Eigen::Index pad = args.frame_len - args.hop;
    const Eigen::Index n_orig = mix.num_samples();
    {
      Eigen::MatrixXd padded =
          Eigen::MatrixXd::Zero(mix.channels(), n_orig + 2 * pad);
      padded.middleCols(pad, n_orig) = mix.samples;
      mix.samples = std::move(padded);
    }
    Spectrogram spec = stft(mix, args.frame_len, args.hop);

    // Infer at unit mean power (the scale the prior was trained at and the
    // seeded dictionary init expects); undo the scaling on the output.
    double power_sum = 0.0;
    Eigen::Index bin_count = 0;
    for (const Eigen::MatrixXcd& ch : spec.channels) {
      power_sum += ch.cwiseAbs2().sum();
      bin_count += ch.size();
    }
    const double mean_power = bin_count > 0 ? power_sum / bin_count : 0.0;
    const double scale = mean_power > 0.0 ? 1.0 / std::sqrt(mean_power) : 1.0;
    for (Eigen::MatrixXcd& ch : spec.channels) ch *= scale;

    SchemeConfig scene_cfg = cfg;
    scene_cfg.rng_seed = derive_seed(args.seed, i);
    JointModel model = make_joint_model(spec, prior, ego_ptr, scene_cfg);

    const std::string stem = fmt::format("{}_{}_k{}", row.id, scheme_name, cfg.dict_size);
    const fs::path log_path = out_dir / (stem + ".log");
    std::ofstream log(log_path);
    if (!log) throw DataError(fmt::format("enhance: cannot open log '{}'", log_path.string()));

    McemState state = run_mcem(spec, model, scene_cfg,
                               [&log](const std::string& line) { log << line << '\n'; });
    EnhancementResult result = wiener_filter(spec, model, state);
    log << fmt::format("frame_speech_var mean={:.6e} frame_noise_var mean={:.6e}",
                       result.frame_speech_var.mean(), result.frame_noise_var.mean())
        << '\n';
    Eigen::MatrixXd trimmed =
        result.speech_clip.samples.middleCols(pad, n_orig) / scale;
    result.speech_clip.samples = std::move(trimmed);
    write_wav((out_dir / (stem + ".wav")).string(), result.speech_clip);
    notes[i] = fmt::format("{}: {} iters, loss {:.4f}", stem,
                           state.loss_history.size(), state.loss_history.back());
  });
  for (const std::string& note : notes) fmt::print("{}\n", note);
  fmt::print("enhance: {} scenes -> {}\n", rows.size(), args.out);
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string manifest;
  std::string enhanced;
  std::string out;
};

int cmd_evaluate(const EvaluateArgs& args) {
  std::vector<SceneInfo> rows = read_manifest(args.manifest);
  if (rows.empty())
    throw DataError(fmt::format("evaluate: manifest '{}' lists no scenes", args.manifest));
  if (!fs::is_directory(args.enhanced))
    throw DataError(fmt::format("evaluate: '{}' is not a directory", args.enhanced));

  std::set<std::string> ids;
  for (const SceneInfo& row : rows) ids.insert(row.id);

  // Enhanced outputs are named {id}_{scheme}_k{K}.wav; discover the
  // (scheme, K) combinations present and which scenes each one covers.
  std::map<std::pair<std::string, int>, std::set<std::string>> found;
  for (const auto& entry : fs::directory_iterator(args.enhanced)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() < 5 || name.substr(name.size() - 4) != ".wav") continue;
    const std::string base = name.substr(0, name.size() - 4);
    const auto kpos = base.rfind("_k");
    if (kpos == std::string::npos) continue;
    const std::string kstr = base.substr(kpos + 2);
    if (kstr.empty() || !std::all_of(kstr.begin(), kstr.end(), [](unsigned char c) {
          return std::isdigit(c) != 0;
        }))
      continue;
    const std::string rest = base.substr(0, kpos);
    const auto spos = rest.rfind('_');
    if (spos == std::string::npos) continue;
    const std::string scheme = rest.substr(spos + 1);
    const std::string id = rest.substr(0, spos);
    if (scheme != "fixed" && scheme != "adaptive" && scheme != "partial") continue;
    if (ids.count(id) == 0) continue;
    found[{scheme, std::stoi(kstr)}].insert(id);
  }
  if (found.empty())
    throw DataError(fmt::format("evaluate: no enhanced outputs under '{}'", args.enhanced));

  const fs::path stem_dir = fs::path(args.manifest).parent_path();
  const fs::path enhanced_dir(args.enhanced);
  std::vector<SceneMetric> metrics;
  for (const SceneInfo& row : rows) {
    AudioClip speech;
    AudioClip mix;
    bool stems_loaded = false;
    for (const auto& [key, present] : found) {
      if (present.count(row.id) == 0) {
        fmt::print(stderr, "evaluate: missing {}_{}_k{}.wav\n", row.id, key.first,
                   key.second);
        continue;
      }
      if (!stems_loaded) {
        speech = read_wav((stem_dir / (row.id + "_speech.wav")).string());
        mix = read_wav((stem_dir / (row.id + "_mixture.wav")).string());
        stems_loaded = true;
      }
      AudioClip est = read_wav(
          (enhanced_dir / fmt::format("{}_{}_k{}.wav", row.id, key.first, key.second))
              .string());
      const Eigen::VectorXd ref = speech.samples.row(0);
      const Eigen::VectorXd mix_ch = mix.samples.row(0);
      const Eigen::VectorXd est_ch = est.samples.row(0);
      const Eigen::Index n_in = std::min(ref.size(), mix_ch.size());
      const Eigen::Index n_out = std::min(ref.size(), est_ch.size());
      SceneMetric metric;
      metric.scene_id = row.id;
      metric.scheme = key.first;
      metric.dict_size = key.second;
      metric.si_sdr_in = si_sdr(ref.head(n_in), mix_ch.head(n_in));
      metric.si_sdr_out = si_sdr(ref.head(n_out), est_ch.head(n_out));
      metrics.push_back(std::move(metric));
    }
  }

  std::sort(metrics.begin(), metrics.end(),
            [](const SceneMetric& a, const SceneMetric& b) {
              return std::tie(a.scheme, a.dict_size, a.scene_id) <
                     std::tie(b.scheme, b.dict_size, b.scene_id);
            });

  std::vector<MetricReport> reports;
  std::size_t start = 0;
  while (start < metrics.size()) {
    std::size_t stop = start;
    while (stop < metrics.size() && metrics[stop].scheme == metrics[start].scheme &&
           metrics[stop].dict_size == metrics[start].dict_size)
      ++stop;
    if (stop - start >= 2) {
      std::vector<SceneMetric> group(metrics.begin() + static_cast<std::ptrdiff_t>(start),
                                     metrics.begin() + static_cast<std::ptrdiff_t>(stop));
      reports.push_back(aggregate(group));
    }
    start = stop;
  }

  ensure_parent_dir(args.out);
  write_metrics_table(args.out, metrics, reports);
  for (const MetricReport& report : reports)
    fmt::print("{:<9} k={:<4} n={:<3} in {:+.2f} dB out {:+.2f} dB delta {:+.2f} +/- {:.2f} dB\n",
               report.scheme, report.dict_size, report.n, report.mean_in,
               report.mean_out, report.mean_delta, report.ci95_delta);
  fmt::print("evaluate: wrote {}\n", args.out);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{
      "mcse: multichannel speech enhancement with a VAE speech prior and a\n"
      "partially adaptive multichannel NMF noise model"};
  app.set_config("--config", "", "INI file with [subcommand] option sections");
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "Generate synthetic scenes with ground-truth stems");
  sim_cmd->add_option("--out", sim.out, "Output directory for stems and manifest")
      ->required();
  sim_cmd->add_option("--scenario", sim.scenario, "Scene type: ego or ego_env")
      ->capture_default_str();
  sim_cmd->add_option("--n", sim.n_scenes, "Number of scenes")->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
  sim_cmd->add_option("--channels", sim.base.channels, "Microphone channels")
      ->capture_default_str();
  sim_cmd->add_option("--duration", sim.base.duration_s, "Scene length in seconds")
      ->capture_default_str();
  sim_cmd->add_option("--sample-rate", sim.base.sample_rate, "Sample rate in Hz")
      ->capture_default_str();
  sim_cmd->add_option("--frame-len", sim.base.frame_len, "Synthesis frame length")
      ->capture_default_str();
  sim_cmd->add_option("--hop", sim.base.hop, "Synthesis hop size")->capture_default_str();
  sim_cmd->add_option("--ego-rank", sim.base.ego_rank, "Ego-noise spectral atoms")
      ->capture_default_str();
  sim_cmd->add_option("--gate-rate", sim.base.ego_gate_rate, "Ego gate toggles per second")
      ->capture_default_str();
  sim_cmd
      ->add_option("--ego-seed", sim.base.ego_spatial_seed,
                   "Ego signature seed (share it with train-ego)")
      ->capture_default_str();
  sim_cmd->add_option("--env-tilt", sim.base.env_tilt_db, "Env spectral tilt in dB")
      ->capture_default_str();
  sim_cmd
      ->add_option("--diffuseness", sim.base.env_diffuseness,
                   "Env diffuseness in [0, 1]")
      ->capture_default_str();
  sim_cmd->add_option("--snr-env", sim.base.snr_env_db, "Speech-vs-env SNR in dB")
      ->capture_default_str();
  CLI::Option* snr_ego_opt = sim_cmd->add_option(
      "--snr-ego", sim.snr_ego, "Pin the ego SNR in dB instead of drawing -5..5");

  TrainVaeArgs tv;
  CLI::App* tv_cmd =
      app.add_subcommand("train-vae", "Train the VAE speech prior on generated clean speech");
  tv_cmd->add_option("--out", tv.out, "Checkpoint path")->required();
  tv_cmd->add_option("--clips", tv.clips, "Number of training clips")->capture_default_str();
  tv_cmd->add_option("--duration", tv.clip_duration, "Clip length in seconds")
      ->capture_default_str();
  tv_cmd->add_option("--latent", tv.latent, "Latent dimension")->capture_default_str();
  tv_cmd->add_option("--hidden-wide", tv.hidden_wide, "Wide hidden layer size")
      ->capture_default_str();
  tv_cmd->add_option("--hidden-narrow", tv.hidden_narrow, "Narrow hidden layer size")
      ->capture_default_str();
  tv_cmd->add_option("--frame-len", tv.frame_len, "STFT frame length")->capture_default_str();
  tv_cmd->add_option("--hop", tv.hop, "STFT hop size")->capture_default_str();
  tv_cmd->add_option("--sample-rate", tv.sample_rate, "Sample rate in Hz")
      ->capture_default_str();
  tv_cmd->add_option("--epochs", tv.train.max_epochs, "Maximum epochs")
      ->capture_default_str();
  tv_cmd->add_option("--batch", tv.train.batch_size, "Minibatch size")->capture_default_str();
  tv_cmd->add_option("--lr", tv.train.learning_rate, "Adam learning rate")
      ->capture_default_str();
  tv_cmd->add_option("--patience", tv.train.patience, "Early-stopping patience")
      ->capture_default_str();
  tv_cmd->add_option("--seed", tv.seed, "Master seed")->capture_default_str();

  TrainEgoArgs te;
  CLI::App* te_cmd = app.add_subcommand(
      "train-ego", "Pre-train the ego-noise NMF model on generated ego noise");
  te_cmd->add_option("--out", te.out, "Checkpoint path")->required();
  te_cmd->add_option("--dict-size", te.dict_size, "NMF dictionary size")
      ->capture_default_str();
  te_cmd->add_option("--sweeps", te.sweeps, "Update sweeps")->capture_default_str();
  te_cmd->add_option("--duration", te.duration, "Training clip length in seconds")
      ->capture_default_str();
  te_cmd->add_option("--gate-rate", te.gate_rate, "Ego gate toggles per second")
      ->capture_default_str();
  te_cmd->add_option("--channels", te.channels, "Microphone channels")
      ->capture_default_str();
  te_cmd->add_option("--ego-rank", te.ego_rank, "Generator spectral atoms")
      ->capture_default_str();
  te_cmd->add_option("--frame-len", te.frame_len, "STFT frame length")
      ->capture_default_str();
  te_cmd->add_option("--hop", te.hop, "STFT hop size")->capture_default_str();
  te_cmd->add_option("--sample-rate", te.sample_rate, "Sample rate in Hz")
      ->capture_default_str();
  te_cmd->add_option("--seed", te.seed, "Master seed")->capture_default_str();
  te_cmd
      ->add_option("--ego-seed", te.ego_seed,
                   "Ego signature seed (share it with simulate)")
      ->capture_default_str();

  EnhanceArgs en;
  CLI::App* en_cmd =
      app.add_subcommand("enhance", "Run MCEM inference and Wiener filtering per scene");
  en_cmd->add_option("--manifest", en.manifest, "Scene manifest path")->required();
  en_cmd->add_option("--out", en.out, "Output directory for enhanced WAVs and logs")
      ->required();
  en_cmd->add_option("--vae", en.vae, "VAE speech-prior checkpoint")->required();
  en_cmd->add_option("--ego", en.ego, "Ego-noise checkpoint (fixed/partial schemes)");
  en_cmd->add_option("--scheme", en.scheme, "fixed, adaptive, or partial")
      ->capture_default_str();
  en_cmd->add_option("--dict-size", en.dict_size, "Total noise dictionary size K")
      ->capture_default_str();
  en_cmd->add_option("--em-iters", en.em_iters, "EM iterations")->capture_default_str();
  en_cmd->add_option("--samples", en.r_samples, "Posterior samples kept per E-step")
      ->capture_default_str();
  en_cmd->add_option("--burn-in", en.burn_in, "Metropolis burn-in steps")
      ->capture_default_str();
  en_cmd
      ->add_option("--proposal-std", en.proposal_std,
                   "Random-walk proposal std (0 = auto)")
      ->capture_default_str();
  en_cmd->add_option("--stop-tol", en.stop_tol, "Relative loss tolerance for early stop")
      ->capture_default_str();
  en_cmd->add_option("--stop-window", en.stop_window, "Consecutive small steps to stop")
      ->capture_default_str();
  en_cmd->add_option("--seed", en.seed, "Master seed")->capture_default_str();
  en_cmd->add_option("--workers", en.workers, "Worker threads (0 = one per core)")
      ->capture_default_str();
  en_cmd->add_option("--frame-len", en.frame_len, "STFT frame length")
      ->capture_default_str();
  en_cmd->add_option("--hop", en.hop, "STFT hop size")->capture_default_str();

  EvaluateArgs ev;
  CLI::App* ev_cmd =
      app.add_subcommand("evaluate", "Score enhanced outputs against ground-truth stems");
  ev_cmd->add_option("--manifest", ev.manifest, "Scene manifest path")->required();
  ev_cmd->add_option("--enhanced", ev.enhanced, "Directory with enhanced WAVs")
      ->required();
  ev_cmd->add_option("--out", ev.out, "Metrics table output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim_cmd->parsed()) {
      sim.pin_snr_ego = snr_ego_opt->count() > 0;
      return cmd_simulate(sim);
    }
    if (tv_cmd->parsed()) return cmd_train_vae(tv);
    if (te_cmd->parsed()) return cmd_train_ego(te);
    if (en_cmd->parsed()) return cmd_enhance(en);
    if (ev_cmd->parsed()) return cmd_evaluate(ev);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 2;
  } catch (const DataError& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    fmt::print(stderr, "numerical error: {}\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace mcse
