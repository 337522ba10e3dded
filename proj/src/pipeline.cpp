#include "dvae/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dvae/wav.hpp"
#include "json.hpp"

namespace dvae {

namespace {

namespace fs = std::filesystem;
constexpr double kPi = 3.14159265358979323846;

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp);
    os << text;
    if (!os) throw IoError("short write to " + tmp);
  }
  fs::rename(tmp, path);
}

std::string checkpoint_path_for(const RunConfig& cfg) {
  std::string path = cfg.checkpoint.empty() ? cfg.out_dir + "/best.ckpt" : cfg.checkpoint;
  if (!fs::exists(path))
    throw IoError("checkpoint not found: " + path +
                  (cfg.checkpoint.empty() ? " (train first or pass a checkpoint)" : ""));
  return path;
}

Matrix random_phase(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix ph(rows, cols);
  for (double& v : ph.data) v = rng.uniform(-kPi, kPi);
  return ph;
}

Matrix sqrt_matrix(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data) v = std::sqrt(std::max(v, 0.0));
  return out;
}

}  // namespace

TrainArtifacts run_train(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  Dataset data = build_dataset(cfg.data);
  if (data.train.feature_dim != cfg.model.feature_dim)
    throw ConfigError("dataset feature dim " + std::to_string(data.train.feature_dim) +
                      " != model F " + std::to_string(cfg.model.feature_dim));

  auto model = DvaeModel::create(cfg.model, derive_seed(cfg.seed, "init"));

  Checkpoint resume_ckpt;
  const Checkpoint* resume = nullptr;
  if (!cfg.resume.empty()) {
    resume_ckpt = load_checkpoint(cfg.resume);
    resume = &resume_ckpt;
  }

  const std::string log_path = cfg.out_dir + "/train_log.jsonl";
  std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot open " + log_path);
  auto t0 = std::chrono::steady_clock::now();

  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = cfg.seed;
  TrainState state =
      fit(*model, data.train, data.val, train_cfg, cfg.out_dir, resume,
          [&](int epoch, double tr, double va) {
            double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            nlohmann::json line{{"epoch", epoch},
                                {"train_loss", tr},
                                {"val_loss", va},
                                {"wall_time", secs}};
            log << line.dump() << '\n';
            log.flush();
          });

  TrainArtifacts art;
  art.state = state;
  art.best_checkpoint = cfg.out_dir + "/best.ckpt";
  art.last_checkpoint = cfg.out_dir + "/last.ckpt";
  art.log_path = log_path;
  return art;
}

EvalReport run_eval(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  Dataset data = build_dataset(cfg.data);
  const std::string ckpt_path = checkpoint_path_for(cfg);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  auto model = model_from_checkpoint(ckpt, true);
  if (model->config().feature_dim != data.test.feature_dim)
    throw ConfigError("checkpoint F does not match dataset F");

  EvalReport report;
  report.model_kind = model_kind_to_string(model->kind());
  report.checkpoint_id = ckpt_path;
  report.dataset_id = data.id;

  for (std::size_t i = 0; i < data.test.sequences.size(); ++i) {
    const Matrix& x = data.test.sequences[i];
    NoiseSource noise(derive_seed(cfg.seed, "eval", static_cast<std::uint64_t>(i)));
    Matrix sigma2 = model->resynthesize(x, noise, /*use_posterior_mean=*/true);
    UtteranceEval u;
    u.id = data.test.ids[i];
    u.is_div = is_divergence(x, sigma2);
    u.spec_rmse = magnitude_spectrogram_rmse(sqrt_matrix(x), sqrt_matrix(sigma2),
                                             data.window_len, data.hop);
    if (data.has_audio) {
      const auto& spec = data.test_specs[i];
      Waveform est = resynth_waveform(sigma2, spec.phase, spec.window_len, spec.hop,
                                      spec.sample_rate);
      u.wave_rmse = waveform_rmse_interior(data.test_waves[i], est, spec.frames(), spec.hop);
    }
    report.utterances.push_back(std::move(u));
  }

  write_text_atomic(cfg.out_dir + "/eval.jsonl", report.to_jsonl());
  return report;
}

int run_resynth(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  Dataset data = build_dataset(cfg.data);
  Checkpoint ckpt = load_checkpoint(checkpoint_path_for(cfg));
  auto model = model_from_checkpoint(ckpt, true);

  int written = 0;
  for (std::size_t i = 0; i < data.test.sequences.size(); ++i) {
    const Matrix& x = data.test.sequences[i];
    NoiseSource noise(derive_seed(cfg.seed, "resynth", static_cast<std::uint64_t>(i)));
    Matrix sigma2 = model->resynthesize(x, noise, true);
    Waveform out;
    if (data.has_audio) {
      const auto& spec = data.test_specs[i];
      out = resynth_waveform(sigma2, spec.phase, spec.window_len, spec.hop, spec.sample_rate);
    } else {
      Matrix phase = random_phase(sigma2.rows, sigma2.cols,
                                  derive_seed(cfg.seed, "resynth-phase", static_cast<std::uint64_t>(i)));
      out = resynth_waveform(sigma2, phase, data.window_len, data.hop, 16000);
    }
    char name[64];
    std::snprintf(name, sizeof(name), "/resynth_%04zu.wav", i);
    write_wav(cfg.out_dir + name, out);
    ++written;
  }
  return written;
}

int run_sample(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  Checkpoint ckpt = load_checkpoint(checkpoint_path_for(cfg));
  auto model = model_from_checkpoint(ckpt, true);
  int frames = cfg.sample.frames;
  if (frames <= 0)
    frames = cfg.data.kind == "synthetic" ? cfg.data.synthetic.frames : cfg.data.wav.frames;
  int window_len = 2;
  while (window_len / 2 + 1 < model->config().feature_dim) window_len *= 2;
  if (window_len / 2 + 1 != model->config().feature_dim)
    throw ConfigError("sample: model F must be a power of two over 2 plus 1");

  for (int i = 0; i < cfg.sample.count; ++i) {
    NoiseSource noise(derive_seed(cfg.seed, "sample", static_cast<std::uint64_t>(i)));
    GenerateResult gen = model->generate(frames, noise);
    Matrix phase = random_phase(gen.sigma2.rows, gen.sigma2.cols,
                                derive_seed(cfg.seed, "sample-phase", static_cast<std::uint64_t>(i)));
    Waveform out = resynth_waveform(gen.sigma2, phase, window_len, window_len / 2, 16000);
    // Keep diagnostic audio inside PCM range.
    double peak = 0.0;
    for (double s : out.samples) peak = std::max(peak, std::abs(s));
    if (peak > 1.0)
      for (double& s : out.samples) s /= peak;
    char name[64];
    std::snprintf(name, sizeof(name), "/sample_%03d.wav", i);
    write_wav(cfg.out_dir + name, out);
  }
  return cfg.sample.count;
}

}  // namespace dvae
