#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <random>

#include "doctest.h"
#include "dvae/stft.hpp"
#include "dvae/errors.hpp"

using namespace dvae;

namespace {

constexpr double kPi = 3.14159265358979323846;

Waveform random_signal(int n, std::uint64_t seed, int rate = 16000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<std::size_t>(n));
  for (auto& s : w.samples) s = u(rng);
  return w;
}

}  // namespace

TEST_CASE("sine window satisfies constant overlap-add at half hop") {
  CHECK(cola_deviation(512, 256) < 1e-12);
  CHECK(cola_deviation(64, 32) < 1e-12);
}

TEST_CASE("window length 512 gives 257 bins") {
  Waveform w = random_signal(4096, 1);
  auto spec = stft(w, 512, 256);
  CHECK(spec.bins() == 257);
  CHECK(spec.frames() == (4096 - 512) / 256 + 1);
}

TEST_CASE("all-zero input gives all-zero power") {
  Waveform w;
  w.samples.assign(2048, 0.0);
  auto spec = stft(w, 512, 256);
  for (double v : spec.power.data) CHECK(v == 0.0);
}

TEST_CASE("bin-centered sinusoid concentrates its energy") {
  const int N = 512, rate = 16000;
  const int k = 37;  // absorbed exactly by bin k
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<std::size_t>(4 * N));
  for (std::size_t n = 0; n < w.samples.size(); ++n)
    w.samples[n] = std::sin(2.0 * kPi * k * static_cast<double>(n) / N);
  auto spec = stft(w, N, N / 2);
  for (int t = 0; t < spec.frames(); ++t) {
    double total = 0.0;
    for (int f = 0; f < spec.bins(); ++f) total += spec.power.at(t, f);
    // The sine window spreads a bin-centered tone over bins k-1, k, k+1.
    double near = spec.power.at(t, k - 1) + spec.power.at(t, k) + spec.power.at(t, k + 1);
    CHECK(spec.power.at(t, k) / total > 0.45);
    CHECK(near / total > 0.95);
  }
}

TEST_CASE("istft(stft(x)) reproduces the interior exactly") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Waveform w = random_signal(16000, seed);
    auto spec = stft(w, 512, 256);
    Waveform back = istft(spec);
    const int begin = interior_begin(spec.hop);
    const int end = interior_end(spec.frames(), spec.hop);
    double worst = 0.0;
    for (int n = begin; n < end; ++n)
      worst = std::max(worst, std::abs(back.samples[static_cast<std::size_t>(n)] -
                                       w.samples[static_cast<std::size_t>(n)]));
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("spectrogram round trip: stft(istft(S)) is the identity on consistent input") {
  Waveform w = random_signal(8192, 17);
  auto spec = stft(w, 256, 128);
  Waveform mid = istft(spec);
  // The resynthesized signal matches on the interior; crop one hop on both
  // ends so the re-analysis sees only exact samples.
  Waveform inner;
  inner.sample_rate = mid.sample_rate;
  inner.samples.assign(mid.samples.begin() + spec.hop, mid.samples.end() - spec.hop);
  auto spec2 = stft(inner, 256, 128);
  // Compare against the stft of the equally cropped original.
  Waveform ref_inner;
  ref_inner.sample_rate = w.sample_rate;
  ref_inner.samples.assign(w.samples.begin() + spec.hop,
                           w.samples.begin() + (mid.samples.size() - spec.hop));
  auto ref2 = stft(ref_inner, 256, 128);
  for (std::size_t i = 0; i < spec2.power.data.size(); ++i)
    CHECK(std::abs(spec2.power.data[i] - ref2.power.data[i]) < 1e-10);
}

TEST_CASE("zero spectrogram synthesizes silence") {
  SpectrogramSequence spec;
  spec.window_len = 64;
  spec.hop = 32;
  spec.power = Matrix(5, 33, 0.0);
  spec.phase = Matrix(5, 33, 0.0);
  Waveform w = istft(spec);
  for (double s : w.samples) CHECK(s == 0.0);
}

TEST_CASE("single-frame energy obeys Parseval under the forward convention") {
  const int N = 256;
  Waveform w = random_signal(N, 3);
  auto spec = stft(w, N, N / 2);
  REQUIRE(spec.frames() == 1);
  // direct DFT oracle on the windowed frame
  auto win = sine_window(N);
  double time_energy = 0.0;
  for (int n = 0; n < N; ++n) {
    double v = w.samples[static_cast<std::size_t>(n)] * win[static_cast<std::size_t>(n)];
    time_energy += v * v;
  }
  double spec_energy = 0.0;
  for (int f = 0; f < spec.bins(); ++f) {
    double c = (f == 0 || f == spec.bins() - 1) ? 1.0 : 2.0;
    spec_energy += c * spec.power.at(0, f);
  }
  spec_energy /= N;
  CHECK(std::abs(spec_energy - time_energy) / time_energy < 1e-9);
}

TEST_CASE("resynth_waveform reduces to istft of the original spectrogram") {
  Waveform w = random_signal(6000, 9);
  auto spec = stft(w, 512, 256);
  Waveform back = resynth_waveform(spec.power, spec.phase, 512, 256, w.sample_rate);
  const int begin = interior_begin(spec.hop);
  const int end = interior_end(spec.frames(), spec.hop);
  for (int n = begin; n < end; ++n)
    CHECK(std::abs(back.samples[static_cast<std::size_t>(n)] -
                   w.samples[static_cast<std::size_t>(n)]) < 1e-10);
}

TEST_CASE("scaling the variance scales the waveform by the square root") {
  Waveform w = random_signal(6000, 11);
  auto spec = stft(w, 512, 256);
  const double c = 2.7;
  Matrix scaled = spec.power;
  for (double& v : scaled.data) v *= c;
  Waveform a = resynth_waveform(spec.power, spec.phase, 512, 256);
  Waveform b = resynth_waveform(scaled, spec.phase, 512, 256);
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    CHECK(b.samples[i] == doctest::Approx(std::sqrt(c) * a.samples[i]).epsilon(1e-9));
}

TEST_CASE("white-noise spectrogram synthesizes the predicted RMS") {
  // sigma2 constant with random phase: per-frame Parseval gives frame energy
  // sigma2, i.e. per-sample variance sigma2/N, and the squared synthesis
  // window sums to one, so RMS -> sqrt(sigma2/N).
  const int N = 256, T = 200;
  const double sigma2 = 3.0;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> uph(-kPi, kPi);
  double err_acc = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    SpectrogramSequence spec;
    spec.window_len = N;
    spec.hop = N / 2;
    spec.power = Matrix(T, N / 2 + 1, sigma2);
    spec.phase = Matrix(T, N / 2 + 1);
    for (double& p : spec.phase.data) p = uph(rng);
    Waveform w = istft(spec);
    const int begin = interior_begin(spec.hop);
    const int end = interior_end(T, spec.hop);
    double acc = 0.0;
    for (int n = begin; n < end; ++n)
      acc += w.samples[static_cast<std::size_t>(n)] * w.samples[static_cast<std::size_t>(n)];
    double rms = std::sqrt(acc / (end - begin));
    double predicted = std::sqrt(sigma2 / N);
    err_acc += std::abs(rms - predicted) / predicted;
  }
  CHECK(err_acc / 10.0 < 0.05);
}

TEST_CASE("stft input contracts") {
  Waveform tiny;
  tiny.samples.assign(100, 0.0);
  CHECK_THROWS_AS(stft(tiny, 512, 256), LengthMismatchError);
  Waveform ok = random_signal(2048, 1);
  CHECK_THROWS_AS(stft(ok, 500, 250), ShapeError);  // not a power of two
}

TEST_CASE("istft validates shapes") {
  SpectrogramSequence spec;
  spec.window_len = 64;
  spec.hop = 32;
  spec.power = Matrix(4, 20, 1.0);  // wrong bin count
  spec.phase = Matrix(4, 20, 0.0);
  CHECK_THROWS_AS(istft(spec), ShapeError);
}
