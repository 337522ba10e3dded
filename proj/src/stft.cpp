#include "dvae/stft.hpp"

#include <cmath>

#include "dvae/errors.hpp"

namespace dvae {

namespace {
constexpr double kPi = 3.14159265358979323846;

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }
}  // namespace

std::vector<double> sine_window(int window_len) {
  std::vector<double> w(static_cast<std::size_t>(window_len));
  for (int n = 0; n < window_len; ++n)
    w[static_cast<std::size_t>(n)] = std::sin(kPi * (n + 0.5) / window_len);
  return w;
}

double cola_deviation(int window_len, int hop) {
  auto w = sine_window(window_len);
  // One interior hop-span receives contributions from every frame phase.
  double worst = 0.0;
  for (int n = 0; n < hop; ++n) {
    double s = 0.0;
    for (int start = 0; start + window_len <= 4 * window_len; start += hop) {
      int pos = n + 2 * window_len - start;  // sample fixed, frames slide
      if (pos >= 0 && pos < window_len) s += w[static_cast<std::size_t>(pos)] * w[static_cast<std::size_t>(pos)];
    }
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

void fft(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!power_of_two(static_cast<int>(n)))
    throw ShapeError("fft: size must be a power of two");
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

SpectrogramSequence stft(const Waveform& w, int window_len, int hop) {
  if (!power_of_two(window_len))
    throw ShapeError("stft: window_len must be a power of two");
  if (static_cast<int>(w.samples.size()) < window_len)
    throw LengthMismatchError("stft: signal too short for one frame");

  const int T = (static_cast<int>(w.samples.size()) - window_len) / hop + 1;
  const int F = window_len / 2 + 1;
  auto win = sine_window(window_len);

  SpectrogramSequence out;
  out.power = Matrix(T, F);
  out.phase = Matrix(T, F);
  out.window_len = window_len;
  out.hop = hop;
  out.sample_rate = w.sample_rate;

  std::vector<std::complex<double>> buf(static_cast<std::size_t>(window_len));
  for (int t = 0; t < T; ++t) {
    const int start = t * hop;
    for (int n = 0; n < window_len; ++n)
      buf[static_cast<std::size_t>(n)] = w.samples[static_cast<std::size_t>(start + n)] *
                                         win[static_cast<std::size_t>(n)];
    fft(buf, false);
    for (int f = 0; f < F; ++f) {
      const auto& c = buf[static_cast<std::size_t>(f)];
      out.power.at(t, f) = c.real() * c.real() + c.imag() * c.imag();
      out.phase.at(t, f) = (c.real() == 0.0 && c.imag() == 0.0) ? 0.0 : std::atan2(c.imag(), c.real());
    }
  }
  return out;
}

Waveform istft(const SpectrogramSequence& spec) {
  const int N = spec.window_len;
  const int hop = spec.hop;
  const int T = spec.frames();
  const int F = spec.bins();
  if (F != N / 2 + 1)
    throw ShapeError("istft: bins " + std::to_string(F) + " inconsistent with window_len " +
                     std::to_string(N));
  if (!spec.power.same_shape(spec.phase))
    throw ShapeError("istft: power/phase shapes differ");

  auto win = sine_window(N);
  Waveform out;
  out.sample_rate = spec.sample_rate;
  out.samples.assign(static_cast<std::size_t>((T - 1) * hop + N), 0.0);

  std::vector<std::complex<double>> buf(static_cast<std::size_t>(N));
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) {
      double mag = std::sqrt(std::max(spec.power.at(t, f), 0.0));
      double ph = spec.phase.at(t, f);
      buf[static_cast<std::size_t>(f)] = std::polar(mag, ph);
    }
    for (int f = F; f < N; ++f)
      buf[static_cast<std::size_t>(f)] = std::conj(buf[static_cast<std::size_t>(N - f)]);
    fft(buf, true);
    const int start = t * hop;
    for (int n = 0; n < N; ++n)
      out.samples[static_cast<std::size_t>(start + n)] +=
          buf[static_cast<std::size_t>(n)].real() * win[static_cast<std::size_t>(n)];
  }
  return out;
}

Waveform resynth_waveform(const Matrix& sigma2, const Matrix& phase, int window_len,
                          int hop, int sample_rate) {
  if (!sigma2.same_shape(phase))
    throw ShapeError("resynth_waveform: sigma2/phase shapes differ");
  SpectrogramSequence spec;
  spec.power = sigma2;
  spec.phase = phase;
  spec.window_len = window_len;
  spec.hop = hop;
  spec.sample_rate = sample_rate;
  return istft(spec);
}

int interior_begin(int hop) { return hop; }
int interior_end(int frames, int hop) { return frames * hop; }

}  // namespace dvae
