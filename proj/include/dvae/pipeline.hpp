#pragma once

#include <string>

#include "dvae/checkpoint.hpp"
#include "dvae/config.hpp"
#include "dvae/metrics.hpp"

namespace dvae {

struct TrainArtifacts {
  TrainState state;
  std::string best_checkpoint;
  std::string last_checkpoint;
  std::string log_path;
};

// Builds the dataset, trains with early stopping, writes checkpoints and a
// line-delimited training log under cfg.out_dir.
TrainArtifacts run_train(const RunConfig& cfg);

// Loads cfg.checkpoint (default: <out_dir>/best.ckpt) and scores every test
// utterance with posterior-mean resynthesis; writes <out_dir>/eval.jsonl.
EvalReport run_eval(const RunConfig& cfg);

// Writes one resynthesized WAV per test utterance; returns the count. WAV
// datasets reuse the input phase; synthetic spectrograms get uniform random
// phase (diagnostic output only).
int run_resynth(const RunConfig& cfg);

// Ancestral generation to WAV with uniform random phase (diagnostic output).
int run_sample(const RunConfig& cfg);

}  // namespace dvae
