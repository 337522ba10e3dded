#pragma once

#include <complex>
#include <vector>

#include "dvae/matrix.hpp"

namespace dvae {

struct Waveform {
  std::vector<double> samples;  // amplitudes in [-1, 1]
  int sample_rate = 16000;
};

// Power spectrogram plus the phase needed to resynthesize. power(t,f) is the
// squared STFT magnitude; bins run over f = 0..window_len/2.
struct SpectrogramSequence {
  Matrix power;  // T x F, nonnegative
  Matrix phase;  // T x F, radians in [-pi, pi]
  int window_len = 512;
  int hop = 256;
  int sample_rate = 16000;

  int frames() const { return power.rows; }
  int bins() const { return power.cols; }
};

// Analysis/synthesis window, w[n] = sin(pi*(n+0.5)/N). At hop = N/2 its
// square is constant-overlap-add with constant exactly 1.
std::vector<double> sine_window(int window_len);

// Max deviation of the w^2 overlap-add sum from 1 on the fully overlapped
// interior; should be at machine precision.
double cola_deviation(int window_len, int hop);

// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse);

// Sine-windowed STFT. Frames start at multiples of hop; trailing samples that
// do not fill a frame are dropped. T = (len - window_len)/hop + 1.
// Throws LengthMismatchError ("too short") when len < window_len, and
// ShapeError when window_len is not a power of two.
SpectrogramSequence stft(const Waveform& w, int window_len = 512, int hop = 256);

// Inverse STFT: per-frame spectrum sqrt(power)*exp(i*phase), inverse FFT,
// synthesis sine window, overlap-add. Output covers (T-1)*hop + window_len
// samples; istft(stft(x)) equals x on the interior [hop, (T-1)*hop + hop).
Waveform istft(const SpectrogramSequence& spec);

// Resynthesis from a model variance spectrogram and a reused phase:
// istft of sqrt(sigma2) * exp(i*phase).
Waveform resynth_waveform(const Matrix& sigma2, const Matrix& phase,
                          int window_len = 512, int hop = 256,
                          int sample_rate = 16000);

// Index range [begin, end) of the fully overlapped samples for T frames.
int interior_begin(int hop);
int interior_end(int frames, int hop);

}  // namespace dvae
