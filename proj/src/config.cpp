#include "dvae/config.hpp"

#include <fstream>

#include "json.hpp"

namespace dvae {

namespace {

using nlohmann::json;

json preset_json(const std::string& name) {
  if (name == "desk") {
    return json::parse(R"({
      "model": "vae",
      "dims": {"F": 33, "L": 4, "H": 16, "T": 50},
      "train": {"lr": 3e-3, "batch": 32, "patience": 6, "max_epochs": 40,
                "clip_norm": 10.0, "kl_anneal_epochs": 0},
      "data": {"kind": "synthetic", "generator": "ar2_modulated", "data_seed": 7,
               "num_train": 500, "num_val": 100, "num_test": 100,
               "frames": 50, "F": 33, "num_factors": 6,
               "envelope_gain": 1.0, "noise_mix": 0.3}
    })");
  }
  if (name == "paper-wsj0") {
    return json::parse(R"({
      "model": "vae",
      "dims": {"F": 257, "L": 16, "H": 128, "T": 150},
      "train": {"lr": 1e-4, "batch": 32, "patience": 20, "max_epochs": 300,
                "clip_norm": 10.0, "kl_anneal_epochs": 0},
      "data": {"kind": "wav", "frames": 150, "window_len": 512, "hop": 256,
               "require_16k": true, "trim_test_silence": true}
    })");
  }
  throw ConfigError("unknown preset: " + name);
}

void merge_over(json& base, const json& over) {
  if (!base.is_object() || !over.is_object()) {
    base = over;
    return;
  }
  for (auto it = over.begin(); it != over.end(); ++it) {
    if (base.contains(it.key()))
      merge_over(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

void reject_unknown(const json& j, const std::vector<std::string>& allowed,
                    const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const auto& k : allowed)
      if (it.key() == k) { known = true; break; }
    if (!known)
      throw ConfigError("unknown config key '" + (where.empty() ? it.key() : where + "." + it.key()) + "'");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

void apply_set_override(json& root, const std::string& expr) {
  auto eq = expr.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--set expects key.path=value, got: " + expr);
  std::string path = expr.substr(0, eq);
  std::string raw = expr.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // bare strings need no quotes
  }
  json* at = &root;
  std::size_t begin = 0;
  while (true) {
    auto dot = path.find('.', begin);
    std::string part = path.substr(begin, dot == std::string::npos ? dot : dot - begin);
    if (part.empty()) throw ConfigError("bad --set path: " + path);
    if (dot == std::string::npos) {
      (*at)[part] = value;
      break;
    }
    at = &(*at)[part];
    begin = dot + 1;
  }
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (train.batch_size < 1) throw ConfigError("train.batch must be >= 1");
  if (train.patience < 0) throw ConfigError("train.patience must be >= 0");
  if (train.max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (train.adam.lr < 0.0) throw ConfigError("train.lr must be >= 0");
  if (data.kind != "synthetic" && data.kind != "wav")
    throw ConfigError("data.kind must be 'synthetic' or 'wav'");
  if (data.kind == "synthetic") {
    if (data.synthetic.feature_dim != model.feature_dim)
      throw ConfigError("data F and model F differ");
  }
  if (data.kind == "wav") {
    if (data.wav.window_len / 2 + 1 != model.feature_dim)
      throw ConfigError("model F must equal window_len/2+1 for wav data");
    if (data.wav.train_dir.empty() || data.wav.val_dir.empty() || data.wav.test_dir.empty())
      throw ConfigError("wav data needs train_dir/val_dir/test_dir");
  }
  if (sample.count < 1) throw ConfigError("sample.count must be >= 1");
}

RunConfig parse_run_config(const std::string& json_text,
                           const std::vector<std::string>& set_overrides,
                           std::optional<std::uint64_t> seed_override,
                           std::optional<std::string> out_override) {
  json file = json::parse(json_text);
  if (!file.is_object()) throw ConfigError("config root must be a JSON object");

  json j = json::object();
  if (file.contains("preset")) {
    if (!file.at("preset").is_string()) throw ConfigError("preset must be a string");
    j = preset_json(file.at("preset").get<std::string>());
    j["preset"] = file.at("preset");
  }
  merge_over(j, file);
  for (const auto& s : set_overrides) apply_set_override(j, s);

  reject_unknown(j, {"preset", "model", "dims", "dsae_v_dim", "rvae_hidden",
                     "head_activation", "sever_temporal", "max_seq_len", "train",
                     "data", "sample", "seed", "out_dir", "checkpoint", "resume"},
                 "");
  if (j.contains("dims"))
    reject_unknown(j.at("dims"), {"F", "L", "H", "T"}, "dims");
  if (j.contains("train"))
    reject_unknown(j.at("train"),
                   {"lr", "batch", "patience", "max_epochs", "clip_norm",
                    "kl_anneal_epochs", "beta1", "beta2", "eps"},
                   "train");
  if (j.contains("data"))
    reject_unknown(j.at("data"),
                   {"kind", "generator", "data_seed", "num_train", "num_val",
                    "num_test", "frames", "F", "num_factors", "envelope_gain",
                    "noise_mix", "train_dir", "val_dir", "test_dir", "window_len",
                    "hop", "require_16k", "trim_test_silence", "trim_threshold_db",
                    "trim_hangover_ms"},
                   "data");
  if (j.contains("sample"))
    reject_unknown(j.at("sample"), {"count", "frames"}, "sample");

  RunConfig cfg;
  cfg.preset = get_or<std::string>(j, "preset", "");
  if (j.contains("model"))
    cfg.model.kind = model_kind_from_string(j.at("model").get<std::string>());
  json dims = j.contains("dims") ? j.at("dims") : json::object();
  cfg.model.feature_dim = get_or<int>(dims, "F", 257);
  cfg.model.latent_dim = get_or<int>(dims, "L", 16);
  cfg.model.hidden_dim = get_or<int>(dims, "H", 128);
  int chunk_frames = get_or<int>(dims, "T", 150);
  cfg.model.dsae_v_dim = get_or<int>(j, "dsae_v_dim", 8);
  if (j.contains("rvae_hidden")) cfg.model.rvae_hidden = j.at("rvae_hidden").get<int>();
  cfg.model.head_activation =
      activation_from_string(get_or<std::string>(j, "head_activation", "tanh"));
  cfg.model.sever_temporal = get_or<bool>(j, "sever_temporal", false);
  // Evaluation runs complete variable-length sequences; leave headroom above
  // the training chunk length unless pinned explicitly.
  cfg.model.max_seq_len = get_or<int>(j, "max_seq_len", std::max(1000, 4 * chunk_frames));

  json tr = j.contains("train") ? j.at("train") : json::object();
  cfg.train.adam.lr = get_or<double>(tr, "lr", 1e-4);
  cfg.train.adam.beta1 = get_or<double>(tr, "beta1", 0.9);
  cfg.train.adam.beta2 = get_or<double>(tr, "beta2", 0.999);
  cfg.train.adam.eps = get_or<double>(tr, "eps", 1e-8);
  cfg.train.batch_size = get_or<int>(tr, "batch", 32);
  cfg.train.patience = get_or<int>(tr, "patience", 20);
  cfg.train.max_epochs = get_or<int>(tr, "max_epochs", 300);
  cfg.train.clip_norm = get_or<double>(tr, "clip_norm", 10.0);
  cfg.train.kl_anneal_epochs = get_or<int>(tr, "kl_anneal_epochs", 0);

  json da = j.contains("data") ? j.at("data") : json::object();
  cfg.data.kind = get_or<std::string>(da, "kind", "synthetic");
  cfg.data.synthetic.kind =
      generator_kind_from_string(get_or<std::string>(da, "generator", "ar2_modulated"));
  cfg.data.synthetic.seed = get_or<std::uint64_t>(da, "data_seed", 7);
  cfg.data.synthetic.num_train = get_or<int>(da, "num_train", 500);
  cfg.data.synthetic.num_val = get_or<int>(da, "num_val", 100);
  cfg.data.synthetic.num_test = get_or<int>(da, "num_test", 100);
  cfg.data.synthetic.frames = get_or<int>(da, "frames", chunk_frames);
  cfg.data.synthetic.feature_dim = get_or<int>(da, "F", cfg.model.feature_dim);
  cfg.data.synthetic.num_factors = get_or<int>(da, "num_factors", 6);
  cfg.data.synthetic.envelope_gain = get_or<double>(da, "envelope_gain", 1.0);
  cfg.data.synthetic.noise_mix = get_or<double>(da, "noise_mix", 0.3);
  cfg.data.wav.train_dir = get_or<std::string>(da, "train_dir", "");
  cfg.data.wav.val_dir = get_or<std::string>(da, "val_dir", "");
  cfg.data.wav.test_dir = get_or<std::string>(da, "test_dir", "");
  cfg.data.wav.frames = get_or<int>(da, "frames", chunk_frames);
  cfg.data.wav.window_len = get_or<int>(da, "window_len", 512);
  cfg.data.wav.hop = get_or<int>(da, "hop", 256);
  cfg.data.wav.require_16k = get_or<bool>(da, "require_16k", true);
  cfg.data.wav.trim_test_silence = get_or<bool>(da, "trim_test_silence", true);
  cfg.data.wav.trim_threshold_db = get_or<double>(da, "trim_threshold_db", -40.0);
  cfg.data.wav.trim_hangover_ms = get_or<int>(da, "trim_hangover_ms", 100);

  json sa = j.contains("sample") ? j.at("sample") : json::object();
  cfg.sample.count = get_or<int>(sa, "count", 4);
  cfg.sample.frames = get_or<int>(sa, "frames", 0);

  cfg.seed = get_or<std::uint64_t>(j, "seed", 0);
  cfg.out_dir = get_or<std::string>(j, "out_dir", "out");
  cfg.checkpoint = get_or<std::string>(j, "checkpoint", "");
  cfg.resume = get_or<std::string>(j, "resume", "");

  if (seed_override) cfg.seed = *seed_override;
  if (out_override) cfg.out_dir = *out_override;

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& set_overrides,
                          std::optional<std::uint64_t> seed_override,
                          std::optional<std::string> out_override) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return parse_run_config(text, set_overrides, seed_override, out_override);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["model"] = model_kind_to_string(cfg.model.kind);
  j["dims"] = {{"F", cfg.model.feature_dim},
               {"L", cfg.model.latent_dim},
               {"H", cfg.model.hidden_dim},
               {"T", cfg.data.kind == "synthetic" ? cfg.data.synthetic.frames
                                                  : cfg.data.wav.frames}};
  j["dsae_v_dim"] = cfg.model.dsae_v_dim;
  if (cfg.model.rvae_hidden) j["rvae_hidden"] = *cfg.model.rvae_hidden;
  j["head_activation"] = activation_to_string(cfg.model.head_activation);
  j["sever_temporal"] = cfg.model.sever_temporal;
  j["max_seq_len"] = cfg.model.max_seq_len;
  j["train"] = {{"lr", cfg.train.adam.lr},
                {"batch", cfg.train.batch_size},
                {"patience", cfg.train.patience},
                {"max_epochs", cfg.train.max_epochs},
                {"clip_norm", cfg.train.clip_norm},
                {"kl_anneal_epochs", cfg.train.kl_anneal_epochs}};
  json da;
  da["kind"] = cfg.data.kind;
  if (cfg.data.kind == "synthetic") {
    da["generator"] = generator_kind_to_string(cfg.data.synthetic.kind);
    da["data_seed"] = cfg.data.synthetic.seed;
    da["num_train"] = cfg.data.synthetic.num_train;
    da["num_val"] = cfg.data.synthetic.num_val;
    da["num_test"] = cfg.data.synthetic.num_test;
    da["frames"] = cfg.data.synthetic.frames;
    da["F"] = cfg.data.synthetic.feature_dim;
    da["num_factors"] = cfg.data.synthetic.num_factors;
    da["envelope_gain"] = cfg.data.synthetic.envelope_gain;
    da["noise_mix"] = cfg.data.synthetic.noise_mix;
  } else {
    da["train_dir"] = cfg.data.wav.train_dir;
    da["val_dir"] = cfg.data.wav.val_dir;
    da["test_dir"] = cfg.data.wav.test_dir;
    da["frames"] = cfg.data.wav.frames;
    da["window_len"] = cfg.data.wav.window_len;
    da["hop"] = cfg.data.wav.hop;
    da["require_16k"] = cfg.data.wav.require_16k;
    da["trim_test_silence"] = cfg.data.wav.trim_test_silence;
  }
  j["data"] = da;
  j["sample"] = {{"count", cfg.sample.count}, {"frames", cfg.sample.frames}};
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  if (!cfg.checkpoint.empty()) j["checkpoint"] = cfg.checkpoint;
  if (!cfg.resume.empty()) j["resume"] = cfg.resume;
  return j.dump(2);
}

}  // namespace dvae
