#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dvae/matrix.hpp"
#include "dvae/stft.hpp"

namespace dvae {

// Power floor applied to every spectrogram entering the pipeline; keeps
// silence bins out of the likelihood's division.
inline constexpr double kPowerFloor = 1e-10;

// Fixed-length (train/val) or variable-length (test) power spectrogram
// sequences, each T x F with values >= kPowerFloor.
struct SequenceStore {
  int feature_dim = 0;
  std::vector<Matrix> sequences;
  std::vector<std::string> ids;

  std::size_t size() const { return sequences.size(); }
};

enum class GeneratorKind { ar2_modulated, harmonic_glide, noise_bursts };

GeneratorKind generator_kind_from_string(const std::string& s);
std::string generator_kind_to_string(GeneratorKind k);

// Deterministic synthetic corpus. ar2_modulated drives per-bin log-power with
// slow AR(2) factors through smooth spectral envelopes, giving strong lag-1
// temporal correlation; the multiplicative noise mixes a constant with a unit
// exponential so the likelihood's noise model stays appropriate.
struct SyntheticSpec {
  GeneratorKind kind = GeneratorKind::ar2_modulated;
  std::uint64_t seed = 0;
  int num_train = 500;
  int num_val = 100;
  int num_test = 100;
  int frames = 50;  // training/validation sequence length
  int feature_dim = 33;
  int num_factors = 6;        // ar2: latent envelope factors
  double envelope_gain = 1.0;  // ar2: log-power swing per factor
  double noise_mix = 0.3;      // ar2: exponential noise fraction in [0,1]
};

struct ManifestEntry {
  std::string path;  // file path, or synthetic id
  std::string split;
  double duration_sec = 0.0;
  std::uint32_t checksum = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  int chunk_frames = 0;
  // Splits must not share content (compared by checksum).
  void validate_disjoint() const;
};

struct WavDatasetConfig {
  std::string train_dir;
  std::string val_dir;
  std::string test_dir;
  int frames = 150;  // training chunk length
  int window_len = 512;
  int hop = 256;
  bool require_16k = true;
  bool trim_test_silence = true;
  double trim_threshold_db = -40.0;
  int trim_hangover_ms = 100;
};

struct DataConfig {
  std::string kind = "synthetic";  // "synthetic" | "wav"
  SyntheticSpec synthetic;
  WavDatasetConfig wav;
};

// Unified dataset: chunked fixed-length train/val stores plus variable-length
// test sequences. WAV datasets additionally keep test phase and waveform so
// evaluation can score resyntheses in the time domain.
struct Dataset {
  SequenceStore train, val, test;
  std::vector<SpectrogramSequence> test_specs;  // wav only, aligned with test
  std::vector<Waveform> test_waves;             // wav only
  bool has_audio = false;
  int window_len = 512;
  int hop = 256;
  std::string id;
  DatasetManifest manifest;
};

Dataset build_dataset(const DataConfig& cfg);

// Direct synthetic generation (used by tests as well as build_dataset).
Dataset generate_synthetic(const SyntheticSpec& spec);

// Chunks one spectrogram into fixed-length segments, dropping the partial
// tail. An input shorter than `frames` yields nothing.
std::vector<Matrix> chunk_spectrogram(const Matrix& power, int frames);

// Lag-1 autocorrelation of ln(power) per frequency bin, averaged over bins;
// the synthetic corpus must exhibit strong temporal structure.
double mean_lag1_log_autocorr(const SequenceStore& store);

}  // namespace dvae
