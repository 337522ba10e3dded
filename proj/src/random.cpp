#include "dvae/random.hpp"

#include <stdexcept>

namespace dvae {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t counter) {
  std::uint64_t h = splitmix64(base);
  for (char c : tag) h = splitmix64(h ^ static_cast<std::uint64_t>(c));
  return splitmix64(h ^ counter);
}

std::vector<double> NoiseSource::standard_normal(std::size_t n) {
  std::vector<double> out(n);
  if (replay_mode_) {
    if (replay_pos_ + n > replay_.size())
      throw std::runtime_error("NoiseSource replay exhausted");
    for (std::size_t i = 0; i < n; ++i) out[i] = replay_[replay_pos_++];
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = rng_.normal();
  }
  if (record_ != nullptr)
    record_->insert(record_->end(), out.begin(), out.end());
  return out;
}

}  // namespace dvae
