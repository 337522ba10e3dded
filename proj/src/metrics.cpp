#include "dvae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dvae/errors.hpp"
#include "json.hpp"

namespace dvae {

namespace {
constexpr double kPowerFloor = 1e-10;
}

double waveform_rmse(const Waveform& ref, const Waveform& est) {
  if (ref.samples.size() != est.samples.size())
    throw LengthMismatchError("waveform_rmse: lengths " + std::to_string(ref.samples.size()) +
                              " vs " + std::to_string(est.samples.size()));
  if (ref.samples.empty()) throw LengthMismatchError("waveform_rmse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < ref.samples.size(); ++i) {
    double d = ref.samples[i] - est.samples[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(ref.samples.size()));
}

double waveform_rmse_interior(const Waveform& ref, const Waveform& est, int frames,
                              int hop) {
  const int begin = interior_begin(hop);
  const int end = interior_end(frames, hop);
  if (end <= begin) throw LengthMismatchError("waveform_rmse_interior: empty interior");
  if (static_cast<int>(ref.samples.size()) < end ||
      static_cast<int>(est.samples.size()) < end)
    throw LengthMismatchError("waveform_rmse_interior: signals shorter than interior");
  double acc = 0.0;
  for (int n = begin; n < end; ++n) {
    double d = ref.samples[static_cast<std::size_t>(n)] - est.samples[static_cast<std::size_t>(n)];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(end - begin));
}

double magnitude_spectrogram_rmse(const Matrix& ref_mag, const Matrix& est_mag,
                                  int window_len, int hop) {
  if (!ref_mag.same_shape(est_mag))
    throw ShapeError("magnitude_spectrogram_rmse: shape mismatch");
  const int T = ref_mag.rows, F = ref_mag.cols;
  if (F != window_len / 2 + 1)
    throw ShapeError("magnitude_spectrogram_rmse: bins inconsistent with window_len");
  double energy = 0.0;
  for (int t = 0; t < T; ++t) {
    const double* r = ref_mag.row(t);
    const double* e = est_mag.row(t);
    double frame = 0.0;
    for (int f = 0; f < F; ++f) {
      double d = r[f] - e[f];
      double w = (f == 0 || f == F - 1) ? 1.0 : 2.0;  // conjugate-symmetric bins
      frame += w * d * d;
    }
    energy += frame / static_cast<double>(window_len);
  }
  const double n_interior = static_cast<double>(T - 1) * hop;
  if (n_interior <= 0) throw ShapeError("magnitude_spectrogram_rmse: need at least 2 frames");
  return std::sqrt(energy / n_interior);
}

double is_divergence(const Matrix& ref_power, const Matrix& est_power) {
  if (!ref_power.same_shape(est_power))
    throw ShapeError("is_divergence: shape mismatch");
  if (ref_power.size() == 0) throw ShapeError("is_divergence: empty input");
  for (double v : ref_power.data)
    if (v < 0.0) throw DomainError("is_divergence: negative reference power");
  for (double v : est_power.data)
    if (v < 0.0) throw DomainError("is_divergence: negative estimate power");
  double acc = 0.0;
  for (std::size_t i = 0; i < ref_power.data.size(); ++i) {
    double r = std::max(ref_power.data[i], kPowerFloor);
    double e = std::max(est_power.data[i], kPowerFloor);
    double q = r / e;
    acc += q - std::log(q) - 1.0;
  }
  return acc / static_cast<double>(ref_power.data.size());
}

std::pair<int, int> trim_silence(const Waveform& w, double threshold_db, int hangover_ms) {
  const int n = static_cast<int>(w.samples.size());
  const int frame = std::max(1, w.sample_rate / 100);  // 10 ms
  const int hangover = hangover_ms * w.sample_rate / 1000;
  if (n == 0) return {0, 0};

  std::vector<double> energy;
  for (int start = 0; start < n; start += frame) {
    double acc = 0.0;
    int end = std::min(n, start + frame);
    for (int i = start; i < end; ++i) acc += w.samples[static_cast<std::size_t>(i)] * w.samples[static_cast<std::size_t>(i)];
    energy.push_back(acc / static_cast<double>(end - start));
  }
  double peak = *std::max_element(energy.begin(), energy.end());
  if (peak <= 0.0) return {0, n};
  const double thresh = peak * std::pow(10.0, threshold_db / 10.0);

  int first = -1, last = -1;
  for (std::size_t i = 0; i < energy.size(); ++i) {
    if (energy[i] >= thresh) {
      if (first < 0) first = static_cast<int>(i);
      last = static_cast<int>(i);
    }
  }
  if (first < 0) return {0, n};
  int begin = std::max(0, first * frame - hangover);
  int end = std::min(n, (last + 1) * frame + hangover);
  return {begin, end};
}

double EvalReport::mean_is_divergence() const {
  double acc = 0.0;
  for (const auto& u : utterances) acc += u.is_div;
  return utterances.empty() ? 0.0 : acc / static_cast<double>(utterances.size());
}

double EvalReport::mean_spec_rmse() const {
  double acc = 0.0;
  for (const auto& u : utterances) acc += u.spec_rmse;
  return utterances.empty() ? 0.0 : acc / static_cast<double>(utterances.size());
}

std::optional<double> EvalReport::mean_wave_rmse() const {
  double acc = 0.0;
  int count = 0;
  for (const auto& u : utterances)
    if (u.wave_rmse) {
      acc += *u.wave_rmse;
      ++count;
    }
  if (count == 0 || count != static_cast<int>(utterances.size())) return std::nullopt;
  return acc / static_cast<double>(count);
}

std::string EvalReport::to_jsonl() const {
  using nlohmann::json;
  std::ostringstream os;
  json header{{"schema", "dvae-eval/1"},
              {"model", model_kind},
              {"checkpoint", checkpoint_id},
              {"dataset", dataset_id},
              {"utterances", utterances.size()}};
  os << header.dump() << '\n';
  for (const auto& u : utterances) {
    json line{{"id", u.id}, {"is_div", u.is_div}, {"spec_rmse", u.spec_rmse}};
    line["wave_rmse"] = u.wave_rmse ? json(*u.wave_rmse) : json(nullptr);
    line["pesq"] = nullptr;  // reserved for externally computed scores
    line["stoi"] = nullptr;
    os << line.dump() << '\n';
  }
  json summary{{"summary", true},
               {"mean_is_div", mean_is_divergence()},
               {"mean_spec_rmse", mean_spec_rmse()}};
  auto mw = mean_wave_rmse();
  summary["mean_wave_rmse"] = mw ? nlohmann::json(*mw) : nlohmann::json(nullptr);
  os << summary.dump() << '\n';
  return os.str();
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << "model=" << model_kind << " dataset=" << dataset_id
     << " utterances=" << utterances.size() << "\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %14s %14s %14s\n", "metric", "mean", "min", "max");
  os << buf;
  auto row = [&](const char* name, auto getter) {
    double mn = 1e300, mx = -1e300, acc = 0.0;
    int count = 0;
    for (const auto& u : utterances) {
      auto v = getter(u);
      if (!v) continue;
      mn = std::min(mn, *v);
      mx = std::max(mx, *v);
      acc += *v;
      ++count;
    }
    if (count == 0) return;
    std::snprintf(buf, sizeof(buf), "%-12s %14.6g %14.6g %14.6g\n", name, acc / count, mn, mx);
    os << buf;
  };
  row("is_div", [](const UtteranceEval& u) { return std::optional<double>(u.is_div); });
  row("spec_rmse", [](const UtteranceEval& u) { return std::optional<double>(u.spec_rmse); });
  row("wave_rmse", [](const UtteranceEval& u) { return u.wave_rmse; });
  return os.str();
}

}  // namespace dvae
