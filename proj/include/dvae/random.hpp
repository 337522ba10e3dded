#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace dvae {

// Mixes a base seed with a purpose tag (and optional counter) into an
// independent stream seed. Training derives one stream per (purpose, epoch)
// so a run resumed from a checkpoint replays the exact same draws.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t counter = 0);

// Deterministic RNG used everywhere. Wraps mt19937_64 so that every consumer
// goes through one seeding discipline.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return normal_(engine_); }
  // Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }
  std::uint64_t bits() { return engine_(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

// Source of standard-normal draws injected into sampling paths. Models never
// own RNG state; they consume from a NoiseSource so tests can replay or
// pre-record the exact noise used by a pass.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : rng_(seed) {}
  // Replay constructor: serves the given values in order, then throws.
  explicit NoiseSource(std::vector<double> replay)
      : rng_(0), replay_(std::move(replay)), replay_mode_(true) {}

  std::vector<double> standard_normal(std::size_t n);

  // When recording, every draw is also appended to *record so the same
  // sequence can be replayed later (finite-difference oracles rely on this).
  void record_into(std::vector<double>* record) { record_ = record; }

 private:
  Rng rng_;
  std::vector<double> replay_;
  std::size_t replay_pos_ = 0;
  bool replay_mode_ = false;
  std::vector<double>* record_ = nullptr;
};

}  // namespace dvae
