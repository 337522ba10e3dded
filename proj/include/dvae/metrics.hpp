#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dvae/matrix.hpp"
#include "dvae/stft.hpp"

namespace dvae {

// Plain RMSE over two equal-length sample vectors.
double waveform_rmse(const Waveform& ref, const Waveform& est);

// RMSE restricted to the fully overlapped interior [hop, frames*hop) of both
// signals; `frames` is the STFT frame count the estimate was built from.
double waveform_rmse_interior(const Waveform& ref, const Waveform& est,
                              int frames, int hop);

// RMSE between magnitude spectrograms under the frontend's Parseval scaling:
// per frame, (1/N) * (d0^2 + dN/2^2 + 2*sum(mid)) summed over frames, divided
// by the interior sample count (T-1)*hop. With this scaling it equals the
// interior waveform RMSE whenever the difference signal lives in the interior
// and the error spectrogram is consistent (phase-reuse resyntheses with a
// common per-utterance magnitude scaling are the canonical case).
double magnitude_spectrogram_rmse(const Matrix& ref_mag, const Matrix& est_mag,
                                  int window_len, int hop);

// Mean over bins of ref/est - ln(ref/est) - 1, both floored at 1e-10.
// Nonnegative; zero iff the floored inputs are equal.
double is_divergence(const Matrix& ref_power, const Matrix& est_power);

// Energy-threshold silence trimmer: returns the [begin, end) sample range
// that survives a threshold of `threshold_db` relative to the loudest 10 ms
// frame, extended by `hangover_ms` on both sides.
std::pair<int, int> trim_silence(const Waveform& w, double threshold_db = -40.0,
                                 int hangover_ms = 100);

struct UtteranceEval {
  std::string id;
  double is_div = 0.0;
  double spec_rmse = 0.0;
  std::optional<double> wave_rmse;
};

// Per-utterance scores plus corpus means; serialized as line-delimited JSON
// with a versioned schema line. pesq/stoi fields are reserved so externally
// computed scores can be merged into the same report.
struct EvalReport {
  std::string model_kind;
  std::string checkpoint_id;
  std::string dataset_id;
  std::vector<UtteranceEval> utterances;

  double mean_is_divergence() const;
  double mean_spec_rmse() const;
  std::optional<double> mean_wave_rmse() const;

  std::string to_jsonl() const;
  std::string to_table() const;
};

}  // namespace dvae
