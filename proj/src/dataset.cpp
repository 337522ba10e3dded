#include "dvae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "dvae/crc32.hpp"
#include "dvae/errors.hpp"
#include "dvae/metrics.hpp"
#include "dvae/random.hpp"
#include "dvae/wav.hpp"

namespace dvae {

GeneratorKind generator_kind_from_string(const std::string& s) {
  if (s == "ar2_modulated") return GeneratorKind::ar2_modulated;
  if (s == "harmonic_glide") return GeneratorKind::harmonic_glide;
  if (s == "noise_bursts") return GeneratorKind::noise_bursts;
  throw ConfigError("unknown generator kind: " + s);
}

std::string generator_kind_to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::ar2_modulated: return "ar2_modulated";
    case GeneratorKind::harmonic_glide: return "harmonic_glide";
    case GeneratorKind::noise_bursts: return "noise_bursts";
  }
  return "ar2_modulated";
}

void DatasetManifest::validate_disjoint() const {
  std::map<std::uint32_t, std::string> seen;
  for (const auto& e : entries) {
    auto it = seen.find(e.checksum);
    if (it != seen.end() && it->second != e.split)
      throw ConfigError("dataset splits overlap: " + e.path + " appears in '" +
                        it->second + "' and '" + e.split + "'");
    seen.emplace(e.checksum, e.split);
  }
}

std::vector<Matrix> chunk_spectrogram(const Matrix& power, int frames) {
  std::vector<Matrix> out;
  for (int start = 0; start + frames <= power.rows; start += frames) {
    Matrix chunk(frames, power.cols);
    for (int t = 0; t < frames; ++t)
      std::copy_n(power.row(start + t), power.cols, chunk.row(t));
    out.push_back(std::move(chunk));
  }
  return out;
}

double mean_lag1_log_autocorr(const SequenceStore& store) {
  double acc = 0.0;
  std::int64_t count = 0;
  for (const auto& seq : store.sequences) {
    if (seq.rows < 3) continue;
    for (int f = 0; f < seq.cols; ++f) {
      double mean = 0.0;
      for (int t = 0; t < seq.rows; ++t) mean += std::log(seq.at(t, f));
      mean /= seq.rows;
      double num = 0.0, den = 0.0;
      double prev = std::log(seq.at(0, f)) - mean;
      den += prev * prev;
      for (int t = 1; t < seq.rows; ++t) {
        double cur = std::log(seq.at(t, f)) - mean;
        num += prev * cur;
        den += cur * cur;
        prev = cur;
      }
      if (den > 0.0) {
        acc += num / den;
        ++count;
      }
    }
  }
  return count > 0 ? acc / static_cast<double>(count) : 0.0;
}

namespace {

struct Ar2Factor {
  double a1, a2, innovation_std;
  double rho1;  // stationary lag-1 correlation
};

Ar2Factor make_ar2(double radius, double omega) {
  Ar2Factor f;
  f.a1 = 2.0 * radius * std::cos(omega);
  f.a2 = -radius * radius;
  // Innovation variance that gives unit stationary variance.
  double var = (1.0 + f.a2) * ((1.0 - f.a2) * (1.0 - f.a2) - f.a1 * f.a1) / (1.0 - f.a2);
  f.innovation_std = std::sqrt(std::max(var, 1e-12));
  f.rho1 = f.a1 / (1.0 - f.a2);
  return f;
}

// Smooth spectral envelope: two Gaussian bumps with random sign.
std::vector<double> make_envelope(int F, Rng& rng) {
  std::vector<double> env(static_cast<std::size_t>(F), 0.0);
  for (int b = 0; b < 2; ++b) {
    double center = rng.uniform(0.05, 0.95) * (F - 1);
    double width = rng.uniform(0.08, 0.3) * F;
    double sign = rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    for (int f = 0; f < F; ++f) {
      double d = (f - center) / width;
      env[static_cast<std::size_t>(f)] += sign * std::exp(-0.5 * d * d);
    }
  }
  double peak = 0.0;
  for (double v : env) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : env) v /= peak;
  return env;
}

struct Ar2Corpus {
  std::vector<Ar2Factor> factors;
  std::vector<std::vector<double>> envelopes;  // per factor, length F
  std::vector<double> baseline;                // length F
};

Ar2Corpus make_ar2_corpus(const SyntheticSpec& spec) {
  Rng rng(derive_seed(spec.seed, "corpus"));
  Ar2Corpus c;
  for (int k = 0; k < spec.num_factors; ++k) {
    c.factors.push_back(make_ar2(rng.uniform(0.92, 0.985), rng.uniform(0.02, 0.25)));
    c.envelopes.push_back(make_envelope(spec.feature_dim, rng));
  }
  c.baseline.resize(static_cast<std::size_t>(spec.feature_dim));
  double tilt = rng.uniform(-1.0, 1.0);
  for (int f = 0; f < spec.feature_dim; ++f)
    c.baseline[static_cast<std::size_t>(f)] =
        tilt * (static_cast<double>(f) / spec.feature_dim - 0.5);
  return c;
}

Matrix ar2_sequence(const SyntheticSpec& spec, const Ar2Corpus& corpus, int frames,
                    Rng& rng) {
  const int F = spec.feature_dim;
  const int K = spec.num_factors;
  Matrix x(frames, F);

  std::vector<double> s_prev(static_cast<std::size_t>(K)), s_cur(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const auto& fac = corpus.factors[static_cast<std::size_t>(k)];
    // Exact stationary draw for the (s_{t-1}, s_t) pair.
    s_prev[static_cast<std::size_t>(k)] = rng.normal();
    s_cur[static_cast<std::size_t>(k)] =
        fac.rho1 * s_prev[static_cast<std::size_t>(k)] +
        std::sqrt(std::max(1.0 - fac.rho1 * fac.rho1, 0.0)) * rng.normal();
  }

  const double eta = spec.noise_mix;
  for (int t = 0; t < frames; ++t) {
    for (int f = 0; f < F; ++f) {
      double logp = corpus.baseline[static_cast<std::size_t>(f)];
      for (int k = 0; k < K; ++k)
        logp += spec.envelope_gain * corpus.envelopes[static_cast<std::size_t>(k)][static_cast<std::size_t>(f)] *
                s_cur[static_cast<std::size_t>(k)];
      double scale = std::exp(logp);
      double e = -std::log(1.0 - rng.uniform(0.0, 1.0));  // unit exponential
      double v = scale * ((1.0 - eta) + eta * e);
      x.at(t, f) = std::max(v, kPowerFloor);
    }
    for (int k = 0; k < K; ++k) {
      const auto& fac = corpus.factors[static_cast<std::size_t>(k)];
      double next = fac.a1 * s_cur[static_cast<std::size_t>(k)] +
                    fac.a2 * s_prev[static_cast<std::size_t>(k)] +
                    fac.innovation_std * rng.normal();
      s_prev[static_cast<std::size_t>(k)] = s_cur[static_cast<std::size_t>(k)];
      s_cur[static_cast<std::size_t>(k)] = next;
    }
  }
  return x;
}

Matrix harmonic_glide_sequence(const SyntheticSpec& spec, int frames, Rng& rng) {
  const int F = spec.feature_dim;
  Matrix x(frames, F);
  double f0_start = rng.uniform(2.0, 5.0);
  double f0_end = rng.uniform(2.0, 5.0);
  const int partials = 4;
  std::vector<double> amp(partials);
  for (auto& a : amp) a = rng.uniform(0.3, 1.0);
  for (int t = 0; t < frames; ++t) {
    double alpha = frames > 1 ? static_cast<double>(t) / (frames - 1) : 0.0;
    double f0 = f0_start * std::pow(f0_end / f0_start, alpha);
    for (int f = 0; f < F; ++f) {
      double p = 1e-4;
      for (int m = 1; m <= partials; ++m) {
        double d = (f - m * f0) / 1.2;
        p += amp[static_cast<std::size_t>(m - 1)] * std::exp(-0.5 * d * d);
      }
      double e = -std::log(1.0 - rng.uniform(0.0, 1.0));
      x.at(t, f) = std::max(p * (0.8 + 0.2 * e), kPowerFloor);
    }
  }
  return x;
}

Matrix noise_bursts_sequence(const SyntheticSpec& spec, int frames, Rng& rng) {
  const int F = spec.feature_dim;
  Matrix x(frames, F);
  const int bursts = 3;
  std::vector<double> envelope(static_cast<std::size_t>(frames), 0.0);
  std::vector<std::vector<double>> shapes;
  std::vector<std::vector<double>> gains(static_cast<std::size_t>(bursts),
                                         std::vector<double>(static_cast<std::size_t>(frames), 0.0));
  for (int b = 0; b < bursts; ++b) {
    int start = static_cast<int>(rng.index(static_cast<std::uint64_t>(std::max(1, frames - 8))));
    int len = 4 + static_cast<int>(rng.index(8));
    double level = rng.uniform(0.5, 2.0);
    // AR(1) smoothed on/off envelope
    double g = 0.0;
    for (int t = 0; t < frames; ++t) {
      double target = (t >= start && t < start + len) ? level : 0.0;
      g = 0.6 * g + 0.4 * target;
      gains[static_cast<std::size_t>(b)][static_cast<std::size_t>(t)] = g;
    }
    shapes.push_back(make_envelope(F, rng));
  }
  for (int t = 0; t < frames; ++t) {
    for (int f = 0; f < F; ++f) {
      double p = 1e-3;
      for (int b = 0; b < bursts; ++b)
        p += gains[static_cast<std::size_t>(b)][static_cast<std::size_t>(t)] *
             (0.5 + 0.5 * std::abs(shapes[static_cast<std::size_t>(b)][static_cast<std::size_t>(f)]));
      double e = -std::log(1.0 - rng.uniform(0.0, 1.0));
      x.at(t, f) = std::max(p * (0.7 + 0.3 * e), kPowerFloor);
    }
  }
  return x;
}

Matrix synthetic_sequence(const SyntheticSpec& spec, const Ar2Corpus& corpus, int frames,
                          Rng& rng) {
  switch (spec.kind) {
    case GeneratorKind::ar2_modulated: return ar2_sequence(spec, corpus, frames, rng);
    case GeneratorKind::harmonic_glide: return harmonic_glide_sequence(spec, frames, rng);
    case GeneratorKind::noise_bursts: return noise_bursts_sequence(spec, frames, rng);
  }
  throw ConfigError("invalid generator kind");
}

SequenceStore make_split(const SyntheticSpec& spec, const Ar2Corpus& corpus,
                         const std::string& split, int count, bool variable_len) {
  SequenceStore store;
  store.feature_dim = spec.feature_dim;
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(spec.seed, split, static_cast<std::uint64_t>(i)));
    int frames = spec.frames;
    if (variable_len)
      frames = spec.frames + static_cast<int>(rng.index(static_cast<std::uint64_t>(spec.frames) + 1));
    store.sequences.push_back(synthetic_sequence(spec, corpus, frames, rng));
    store.ids.push_back(split + "_" + std::to_string(i));
  }
  return store;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.feature_dim < 2) throw ConfigError("synthetic feature_dim must be >= 2");
  if (spec.frames < 2) throw ConfigError("synthetic frames must be >= 2");
  if (spec.noise_mix < 0.0 || spec.noise_mix > 1.0)
    throw ConfigError("synthetic noise_mix must be in [0,1]");
  Ar2Corpus corpus;
  if (spec.kind == GeneratorKind::ar2_modulated) corpus = make_ar2_corpus(spec);

  Dataset d;
  d.train = make_split(spec, corpus, "train", spec.num_train, false);
  d.val = make_split(spec, corpus, "val", spec.num_val, false);
  d.test = make_split(spec, corpus, "test", spec.num_test, true);
  d.has_audio = false;
  // Nominal analysis geometry for spectral metrics on synthetic data.
  int n = 2;
  while (n / 2 + 1 < spec.feature_dim) n *= 2;
  d.window_len = n;
  d.hop = n / 2;
  d.id = "synthetic:" + generator_kind_to_string(spec.kind) + ":seed" +
         std::to_string(spec.seed);
  ManifestEntry entry;
  entry.path = d.id;
  entry.split = "all";
  entry.checksum = crc32(d.id.data(), d.id.size());
  d.manifest.entries.push_back(entry);
  d.manifest.chunk_frames = spec.frames;
  return d;
}

namespace {

std::vector<std::string> list_wavs(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav")
      files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .wav files in " + dir);
  return files;
}

std::uint32_t file_checksum(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return crc32(buf.data(), buf.size());
}

void normalize_peak(Waveform& w) {
  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0)
    for (double& s : w.samples) s /= peak;
}

Matrix floored_power(const Matrix& power) {
  Matrix out = power;
  for (double& v : out.data) v = std::max(v, kPowerFloor);
  return out;
}

}  // namespace

Dataset build_dataset(const DataConfig& cfg) {
  if (cfg.kind == "synthetic") return generate_synthetic(cfg.synthetic);
  if (cfg.kind != "wav") throw ConfigError("data.kind must be 'synthetic' or 'wav'");

  const auto& wc = cfg.wav;
  Dataset d;
  d.has_audio = true;
  d.window_len = wc.window_len;
  d.hop = wc.hop;
  d.id = "wav:" + wc.train_dir;
  d.manifest.chunk_frames = wc.frames;
  d.train.feature_dim = wc.window_len / 2 + 1;
  d.val.feature_dim = d.train.feature_dim;
  d.test.feature_dim = d.train.feature_dim;

  auto ingest_chunked = [&](const std::string& dir, const std::string& split,
                            SequenceStore& store) {
    for (const auto& path : list_wavs(dir)) {
      Waveform w = read_wav(path);
      if (wc.require_16k && w.sample_rate != 16000)
        throw UnsupportedFormatError("expected 16 kHz audio, got " +
                                     std::to_string(w.sample_rate) + " Hz: " + path);
      normalize_peak(w);
      ManifestEntry entry{path, split,
                          static_cast<double>(w.samples.size()) / w.sample_rate,
                          file_checksum(path)};
      d.manifest.entries.push_back(entry);
      if (static_cast<int>(w.samples.size()) < wc.window_len) continue;
      SpectrogramSequence spec = stft(w, wc.window_len, wc.hop);
      auto chunks = chunk_spectrogram(floored_power(spec.power), wc.frames);
      int part = 0;
      for (auto& c : chunks) {
        store.sequences.push_back(std::move(c));
        store.ids.push_back(path + "#" + std::to_string(part++));
      }
    }
  };

  ingest_chunked(wc.train_dir, "train", d.train);
  ingest_chunked(wc.val_dir, "val", d.val);

  for (const auto& path : list_wavs(wc.test_dir)) {
    Waveform w = read_wav(path);
    if (wc.require_16k && w.sample_rate != 16000)
      throw UnsupportedFormatError("expected 16 kHz audio, got " +
                                   std::to_string(w.sample_rate) + " Hz: " + path);
    normalize_peak(w);
    ManifestEntry entry{path, "test",
                        static_cast<double>(w.samples.size()) / w.sample_rate,
                        file_checksum(path)};
    d.manifest.entries.push_back(entry);
    if (wc.trim_test_silence) {
      auto [b, e] = trim_silence(w, wc.trim_threshold_db, wc.trim_hangover_ms);
      w.samples = std::vector<double>(w.samples.begin() + b, w.samples.begin() + e);
    }
    if (static_cast<int>(w.samples.size()) < wc.window_len) continue;
    SpectrogramSequence spec = stft(w, wc.window_len, wc.hop);
    spec.power = floored_power(spec.power);
    d.test.sequences.push_back(spec.power);
    d.test.ids.push_back(path);
    d.test_specs.push_back(std::move(spec));
    d.test_waves.push_back(std::move(w));
  }

  d.manifest.validate_disjoint();
  if (d.train.sequences.empty()) throw ConfigError("training set is empty after chunking");
  if (d.val.sequences.empty()) throw ConfigError("validation set is empty after chunking");
  return d;
}

}  // namespace dvae
