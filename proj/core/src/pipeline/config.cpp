#include "mbridge/pipeline/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mbridge/numcore/errors.hpp"

namespace mbridge::pipeline {

namespace {

using Json = nlohmann::ordered_json;

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw InputError("config." + field + " " + what);
}

Json to_object(const RunConfig& c) {
  Json j;
  j["n_scenes"] = c.n_scenes;
  j["split_ratios"] = c.split_ratios;
  j["noise_sigma"] = c.noise_sigma;
  j["d_v"] = c.d_v;
  j["d_e"] = c.d_e;
  j["ae_layers"] = c.ae_layers;
  j["ae_epochs"] = c.ae_epochs;
  j["ae_lr"] = c.ae_lr;
  j["ae_init_bound"] = c.ae_init_bound;
  j["d_emb"] = c.d_emb;
  j["d_h"] = c.d_h;
  j["d_att"] = c.d_att;
  j["attention"] = c.attention;
  j["use_mtm"] = c.use_mtm;
  j["modality_loss"] = std::string(mtm::to_string(c.modality_loss));
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["init_bound"] = c.init_bound;
  j["lr_decay"] = c.lr_decay;
  j["lr_decay_every"] = c.lr_decay_every;
  j["batch_size"] = c.batch_size;
  j["max_len"] = c.max_len;
  j["seed"] = c.seed;
  return j;
}

template <typename T>
void read_field(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError(std::string("config.") + key + " has the wrong type");
  }
}

void read_size(const Json& j, const char* key, std::size_t& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw InputError(std::string("config.") + key + " must be a nonnegative integer");
  }
  out = v.get<std::size_t>();
}

}  // namespace

void validate(const RunConfig& c) {
  require(c.n_scenes >= 1, "n_scenes", "must be at least 1");
  synthdata::split_counts(c.n_scenes, c.split_ratios);
  require(c.noise_sigma >= 0.0, "noise_sigma", "must be nonnegative");
  require(c.d_v >= 16, "d_v", "must be at least 16");
  for (auto [name, v] : {std::pair{"d_e", c.d_e}, {"ae_layers", c.ae_layers}, {"d_emb", c.d_emb},
                         {"d_h", c.d_h}, {"d_att", c.d_att}, {"batch_size", c.batch_size},
                         {"max_len", c.max_len}, {"lr_decay_every", c.lr_decay_every}}) {
    require(v >= 1, name, "must be at least 1");
  }
  require(c.ae_lr > 0.0, "ae_lr", "must be positive");
  require(c.lr > 0.0, "lr", "must be positive");
  require(c.ae_init_bound > 0.0, "ae_init_bound", "must be positive");
  require(c.init_bound > 0.0, "init_bound", "must be positive");
  require(c.lr_decay > 0.0 && c.lr_decay <= 1.0, "lr_decay", "must be in (0, 1]");
  require(c.modality_loss != mtm::ModalityLossKind::MMD || c.batch_size >= 2, "batch_size",
          "must be at least 2 for the mmd loss");
}

std::string to_json(const RunConfig& config) { return to_object(config).dump(); }

RunConfig merge_json(const RunConfig& base, const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("config must be a JSON object");
  const Json known = to_object(base);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw InputError("unknown config key '" + key + "'");
  }
  RunConfig c = base;
  read_size(j, "n_scenes", c.n_scenes);
  read_field(j, "split_ratios", c.split_ratios);
  read_field(j, "noise_sigma", c.noise_sigma);
  read_size(j, "d_v", c.d_v);
  read_size(j, "d_e", c.d_e);
  read_size(j, "ae_layers", c.ae_layers);
  read_size(j, "ae_epochs", c.ae_epochs);
  read_field(j, "ae_lr", c.ae_lr);
  read_field(j, "ae_init_bound", c.ae_init_bound);
  read_size(j, "d_emb", c.d_emb);
  read_size(j, "d_h", c.d_h);
  read_size(j, "d_att", c.d_att);
  read_field(j, "attention", c.attention);
  read_field(j, "use_mtm", c.use_mtm);
  if (j.contains("modality_loss")) {
    std::string name;
    read_field(j, "modality_loss", name);
    c.modality_loss = mtm::parse_loss_kind(name);
  }
  read_size(j, "epochs", c.epochs);
  read_field(j, "lr", c.lr);
  read_field(j, "init_bound", c.init_bound);
  read_field(j, "lr_decay", c.lr_decay);
  read_size(j, "lr_decay_every", c.lr_decay_every);
  read_size(j, "batch_size", c.batch_size);
  read_size(j, "max_len", c.max_len);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw InputError("config.seed must be a nonnegative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return merge_json(base, ss.str());
}

synthdata::CorpusConfig corpus_config(const RunConfig& c) {
  return synthdata::CorpusConfig{c.n_scenes, c.split_ratios, c.seed, c.d_v, c.noise_sigma};
}

textae::AutoEncoderConfig ae_model_config(const RunConfig& c, std::size_t vocab_size) {
  return textae::AutoEncoderConfig{vocab_size, c.d_emb, c.d_e, c.ae_layers, c.max_len};
}

textae::AeTrainConfig ae_train_config(const RunConfig& c) {
  return textae::AeTrainConfig{c.ae_epochs, c.batch_size, c.ae_lr, c.lr_decay, c.lr_decay_every, c.seed, c.ae_init_bound};
}

captioner::CaptionerConfig captioner_config(const RunConfig& c, std::size_t vocab_size) {
  captioner::CaptionerConfig out;
  out.vocab_size = vocab_size;
  out.bridge_in = c.use_mtm ? c.d_e : c.d_v;
  out.d_emb = c.d_emb;
  out.d_h = c.d_h;
  out.attention = c.attention;
  out.d_v = c.d_v;
  out.d_att = c.d_att;
  out.max_len = c.max_len;
  return out;
}

captioner::CaptionerTrainConfig captioner_train_config(const RunConfig& c) {
  captioner::CaptionerTrainConfig out;
  out.epochs = c.epochs;
  out.batch_size = c.batch_size;
  out.lr = c.lr;
  out.lr_decay = c.lr_decay;
  out.lr_decay_every = c.lr_decay_every;
  out.seed = c.seed;
  out.kind = c.modality_loss;
  out.use_mtm = c.use_mtm;
  return out;
}

}  // namespace mbridge::pipeline
