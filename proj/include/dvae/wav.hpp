#pragma once

#include <string>

#include "dvae/stft.hpp"

namespace dvae {

// Reads a RIFF/WAVE file; only 16-bit linear PCM mono is supported
// (UnsupportedFormatError otherwise). Samples are scaled by 1/32768, so
// -32768 maps to -1.0 and +32767 to 32767/32768.
Waveform read_wav(const std::string& path);

// Writes 16-bit PCM mono; samples are rounded back by the same scaling and
// clipped to the representable range. The write is atomic (temp + rename).
void write_wav(const std::string& path, const Waveform& w);

}  // namespace dvae
