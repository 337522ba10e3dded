#include "dvae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "dvae/crc32.hpp"
#include "json.hpp"

namespace dvae {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written as native little-endian doubles");

namespace {

constexpr char kMagic[8] = {'D', 'V', 'A', 'E', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

using nlohmann::json;

json config_to_json(const DvaeConfig& c) {
  json j{{"kind", model_kind_to_string(c.kind)},
         {"feature_dim", c.feature_dim},
         {"latent_dim", c.latent_dim},
         {"hidden_dim", c.hidden_dim},
         {"max_seq_len", c.max_seq_len},
         {"dsae_v_dim", c.dsae_v_dim},
         {"head_activation", activation_to_string(c.head_activation)},
         {"sever_temporal", c.sever_temporal}};
  if (c.rvae_hidden) j["rvae_hidden"] = *c.rvae_hidden;
  return j;
}

DvaeConfig config_from_json(const json& j) {
  DvaeConfig c;
  c.kind = model_kind_from_string(j.at("kind").get<std::string>());
  c.feature_dim = j.at("feature_dim").get<int>();
  c.latent_dim = j.at("latent_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.dsae_v_dim = j.at("dsae_v_dim").get<int>();
  c.head_activation = activation_from_string(j.at("head_activation").get<std::string>());
  c.sever_temporal = j.at("sever_temporal").get<bool>();
  if (j.contains("rvae_hidden")) c.rvae_hidden = j.at("rvae_hidden").get<int>();
  return c;
}

void append_doubles(std::string& out, const std::vector<double>& v) {
  std::size_t at = out.size();
  out.resize(at + v.size() * sizeof(double));
  std::memcpy(out.data() + at, v.data(), v.size() * sizeof(double));
}

std::vector<double> read_doubles(const std::string& buf, std::size_t& at, std::size_t n) {
  if (at + n * sizeof(double) > buf.size())
    throw CorruptChecksumError("checkpoint payload truncated");
  std::vector<double> v(n);
  std::memcpy(v.data(), buf.data() + at, n * sizeof(double));
  at += n * sizeof(double);
  return v;
}

}  // namespace

Checkpoint make_checkpoint(const DvaeModel& model, const Adam* adam,
                           const TrainState& state, std::uint64_t seed,
                           const std::vector<std::vector<double>>* best_values) {
  Checkpoint c;
  c.config = model.config();
  c.seed = seed;
  c.state = state;
  for (const auto& [name, t] : model.params().entries()) {
    c.names.push_back(name);
    c.shapes.push_back(t.shape());
    c.values.push_back(t.values());
  }
  if (best_values != nullptr && !best_values->empty()) c.best_values = *best_values;
  if (adam != nullptr) {
    c.adam_config = adam->config();
    c.adam_step = adam->step_count();
    c.adam_m = adam->first_moments();
    c.adam_v = adam->second_moments();
  }
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json header;
  header["config"] = config_to_json(ckpt.config);
  header["seed"] = ckpt.seed;
  header["state"] = {{"epoch", ckpt.state.epoch},
                     {"best_val", ckpt.state.best_val},
                     {"epochs_since_best", ckpt.state.epochs_since_best},
                     {"patience", ckpt.state.patience},
                     {"rng_seed", ckpt.state.rng_seed}};
  json hist = json::array();
  for (const auto& [tr, va] : ckpt.state.history) hist.push_back({tr, va});
  header["state"]["history"] = hist;
  header["adam"] = {{"step", ckpt.adam_step},
                    {"lr", ckpt.adam_config.lr},
                    {"beta1", ckpt.adam_config.beta1},
                    {"beta2", ckpt.adam_config.beta2},
                    {"eps", ckpt.adam_config.eps},
                    {"present", !ckpt.adam_m.empty()}};
  header["has_best"] = !ckpt.best_values.empty();
  json tensors = json::array();
  for (std::size_t i = 0; i < ckpt.names.size(); ++i)
    tensors.push_back({{"name", ckpt.names[i]}, {"shape", ckpt.shapes[i]}});
  header["tensors"] = tensors;

  std::string blob;
  blob.append(kMagic, sizeof(kMagic));
  std::uint32_t version = kVersion;
  blob.append(reinterpret_cast<const char*>(&version), sizeof(version));
  std::string htext = header.dump();
  std::uint64_t hlen = htext.size();
  blob.append(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  blob.append(htext);
  for (const auto& v : ckpt.values) append_doubles(blob, v);
  for (const auto& v : ckpt.best_values) append_doubles(blob, v);
  for (const auto& v : ckpt.adam_m) append_doubles(blob, v);
  for (const auto& v : ckpt.adam_v) append_doubles(blob, v);
  std::uint32_t crc = crc32(blob.data(), blob.size());
  blob.append(reinterpret_cast<const char*>(&crc), sizeof(crc));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write checkpoint: " + tmp);
    os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!os) throw IoError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  if (buf.size() < sizeof(kMagic) + sizeof(std::uint32_t) * 2 + sizeof(std::uint64_t))
    throw CorruptChecksumError("checkpoint too small: " + path);
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw VersionMismatchError("bad checkpoint magic in " + path);

  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, buf.data() + buf.size() - sizeof(stored_crc), sizeof(stored_crc));
  std::uint32_t actual = crc32(buf.data(), buf.size() - sizeof(stored_crc));
  if (stored_crc != actual)
    throw CorruptChecksumError("checkpoint checksum mismatch in " + path);

  std::size_t at = sizeof(kMagic);
  std::uint32_t version;
  std::memcpy(&version, buf.data() + at, sizeof(version));
  at += sizeof(version);
  if (version != kVersion)
    throw VersionMismatchError("unsupported checkpoint version " + std::to_string(version));
  std::uint64_t hlen;
  std::memcpy(&hlen, buf.data() + at, sizeof(hlen));
  at += sizeof(hlen);
  if (at + hlen > buf.size()) throw CorruptChecksumError("checkpoint header truncated");
  json header = json::parse(buf.substr(at, hlen));
  at += hlen;

  Checkpoint c;
  c.config = config_from_json(header.at("config"));
  c.seed = header.at("seed").get<std::uint64_t>();
  const auto& st = header.at("state");
  c.state.epoch = st.at("epoch").get<int>();
  c.state.best_val = st.at("best_val").get<double>();
  c.state.epochs_since_best = st.at("epochs_since_best").get<int>();
  c.state.patience = st.at("patience").get<int>();
  c.state.rng_seed = st.at("rng_seed").get<std::uint64_t>();
  for (const auto& pair : st.at("history"))
    c.state.history.emplace_back(pair.at(0).get<double>(), pair.at(1).get<double>());
  const auto& ad = header.at("adam");
  c.adam_step = ad.at("step").get<std::int64_t>();
  c.adam_config.lr = ad.at("lr").get<double>();
  c.adam_config.beta1 = ad.at("beta1").get<double>();
  c.adam_config.beta2 = ad.at("beta2").get<double>();
  c.adam_config.eps = ad.at("eps").get<double>();
  const bool has_adam = ad.at("present").get<bool>();
  const bool has_best = header.at("has_best").get<bool>();

  for (const auto& tj : header.at("tensors")) {
    c.names.push_back(tj.at("name").get<std::string>());
    c.shapes.push_back(tj.at("shape").get<Shape>());
  }
  for (const auto& s : c.shapes)
    c.values.push_back(read_doubles(buf, at, static_cast<std::size_t>(shape_numel(s))));
  if (has_best)
    for (const auto& s : c.shapes)
      c.best_values.push_back(read_doubles(buf, at, static_cast<std::size_t>(shape_numel(s))));
  if (has_adam) {
    for (const auto& s : c.shapes)
      c.adam_m.push_back(read_doubles(buf, at, static_cast<std::size_t>(shape_numel(s))));
    for (const auto& s : c.shapes)
      c.adam_v.push_back(read_doubles(buf, at, static_cast<std::size_t>(shape_numel(s))));
  }
  if (at != buf.size() - sizeof(stored_crc))
    throw CorruptChecksumError("checkpoint has trailing bytes");
  return c;
}

void apply_checkpoint_params(DvaeModel& model, const Checkpoint& ckpt, bool use_best) {
  const auto& source = (use_best && !ckpt.best_values.empty()) ? ckpt.best_values : ckpt.values;
  if (model.params().size() != ckpt.names.size())
    throw ShapeError("checkpoint parameter count mismatch");
  std::size_t i = 0;
  for (auto& [name, t] : model.params().entries()) {
    if (name != ckpt.names[i]) throw ShapeError("checkpoint parameter order mismatch at " + name);
    if (t.shape() != ckpt.shapes[i]) throw ShapeError("checkpoint shape mismatch for " + name);
    t.mutable_data() = source[i];
    ++i;
  }
}

std::unique_ptr<DvaeModel> model_from_checkpoint(const Checkpoint& ckpt, bool use_best) {
  auto model = DvaeModel::create(ckpt.config, ckpt.seed);
  apply_checkpoint_params(*model, ckpt, use_best);
  return model;
}

}  // namespace dvae
