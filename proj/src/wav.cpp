#include "dvae/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "dvae/errors.hpp"

namespace dvae {

namespace {

std::uint32_t read_u32(const std::string& b, std::size_t at) {
  std::uint32_t v;
  std::memcpy(&v, b.data() + at, 4);
  return v;
}

std::uint16_t read_u16(const std::string& b, std::size_t at) {
  std::uint16_t v;
  std::memcpy(&v, b.data() + at, 2);
  return v;
}

void append_u32(std::string& b, std::uint32_t v) {
  b.append(reinterpret_cast<const char*>(&v), 4);
}

void append_u16(std::string& b, std::uint16_t v) {
  b.append(reinterpret_cast<const char*>(&v), 2);
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open wav file: " + path);
  std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || buf.compare(0, 4, "RIFF") != 0 || buf.compare(8, 4, "WAVE") != 0)
    throw UnsupportedFormatError("not a RIFF/WAVE file: " + path);

  int sample_rate = 0;
  bool have_fmt = false;
  std::size_t data_at = 0, data_len = 0;

  std::size_t at = 12;
  while (at + 8 <= buf.size()) {
    std::string id = buf.substr(at, 4);
    std::uint32_t len = read_u32(buf, at + 4);
    std::size_t body = at + 8;
    if (body + len > buf.size())
      throw UnsupportedFormatError("truncated chunk '" + id + "' in " + path);
    if (id == "fmt ") {
      if (len < 16) throw UnsupportedFormatError("short fmt chunk in " + path);
      std::uint16_t format = read_u16(buf, body);
      std::uint16_t channels = read_u16(buf, body + 2);
      sample_rate = static_cast<int>(read_u32(buf, body + 4));
      std::uint16_t bits = read_u16(buf, body + 14);
      if (format != 1) throw UnsupportedFormatError("wav is not linear PCM: " + path);
      if (channels != 1) throw UnsupportedFormatError("wav is not mono: " + path);
      if (bits != 16) throw UnsupportedFormatError("wav is not 16-bit: " + path);
      have_fmt = true;
    } else if (id == "data") {
      data_at = body;
      data_len = len;
    }
    at = body + len + (len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data_at == 0)
    throw UnsupportedFormatError("missing fmt/data chunk in " + path);

  Waveform w;
  w.sample_rate = sample_rate;
  const std::size_t n = data_len / 2;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::int16_t s;
    std::memcpy(&s, buf.data() + data_at + i * 2, 2);
    w.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return w;
}

void write_wav(const std::string& path, const Waveform& w) {
  const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
  const std::uint32_t data_len = n * 2;
  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  append_u32(out, 36 + data_len);
  out.append("WAVE");
  out.append("fmt ");
  append_u32(out, 16);
  append_u16(out, 1);  // PCM
  append_u16(out, 1);  // mono
  append_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  append_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);  // byte rate
  append_u16(out, 2);   // block align
  append_u16(out, 16);  // bits
  out.append("data");
  append_u32(out, data_len);
  for (double x : w.samples) {
    double scaled = std::lround(x * 32768.0);
    scaled = std::min(32767.0, std::max(-32768.0, scaled));
    std::int16_t s = static_cast<std::int16_t>(scaled);
    out.append(reinterpret_cast<const char*>(&s), 2);
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write wav file: " + tmp);
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) throw IoError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace dvae
