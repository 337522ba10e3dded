#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dvae/model.hpp"
#include "dvae/trainer.hpp"

namespace dvae {

// On-disk training snapshot. Binary layout:
//   magic "DVAECKP1", u32 format version,
//   u64 header length + JSON header (config, seed, train state, tensor index),
//   payload of little-endian f64 tensor data in index order
//   (parameters, then best parameters if present, then Adam moments),
//   u32 CRC-32 over everything before it.
// Writes go through a temp file + rename so readers never see partial files.
struct Checkpoint {
  DvaeConfig config;
  std::uint64_t seed = 0;
  TrainState state;
  AdamConfig adam_config;

  std::vector<std::string> names;
  std::vector<Shape> shapes;
  std::vector<std::vector<double>> values;       // live parameters
  std::vector<std::vector<double>> best_values;  // empty when best == live
  std::int64_t adam_step = 0;
  std::vector<std::vector<double>> adam_m, adam_v;  // empty when no optimizer
};

Checkpoint make_checkpoint(const DvaeModel& model, const Adam* adam,
                           const TrainState& state, std::uint64_t seed,
                           const std::vector<std::vector<double>>* best_values = nullptr);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Restores live parameter values into a model built from ckpt.config.
void apply_checkpoint_params(DvaeModel& model, const Checkpoint& ckpt,
                             bool use_best = false);

// Rebuilds the model a checkpoint was taken from, with parameters restored.
std::unique_ptr<DvaeModel> model_from_checkpoint(const Checkpoint& ckpt,
                                                 bool use_best = true);

}  // namespace dvae
