#include "towe/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "towe/io.hpp"

namespace towe {

void to_json(json& j, const InputConfig& c) {
  j = json{{"mode", to_string(c.mode)},
           {"use_posn", c.use_posn},
           {"use_post", c.use_post},
           {"word_dim", c.word_dim},
           {"posn_dim", c.posn_dim},
           {"post_dim", c.post_dim},
           {"dropout_rate", c.dropout_rate},
           {"max_distance", c.max_distance},
           {"train_word_embeddings", c.train_word_embeddings}};
}

void from_json(const json& j, InputConfig& c) {
  std::string mode = j.value("mode", "G");
  if (mode == "G" || mode == "g") {
    c.mode = InputMode::G;
  } else if (mode == "B" || mode == "b") {
    c.mode = InputMode::B;
    c.use_post = false;
    c.posn_dim = 100;
  } else {
    throw ConfigError("input mode must be G or B, got '" + mode + "'");
  }
  c.use_posn = j.value("use_posn", c.use_posn);
  c.use_post = j.value("use_post", c.use_post);
  c.word_dim = j.value("word_dim", c.word_dim);
  c.posn_dim = j.value("posn_dim", c.posn_dim);
  c.post_dim = j.value("post_dim", c.post_dim);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  c.max_distance = j.value("max_distance", c.max_distance);
  c.train_word_embeddings = j.value("train_word_embeddings", c.train_word_embeddings);
}

void to_json(json& j, const EncoderConfig& c) {
  j = json{{"kind", to_string(c.kind)},
           {"hidden_dim", c.hidden_dim},
           {"cnn_filter_widths", c.cnn_filter_widths},
           {"transformer_layers", c.transformer_layers},
           {"transformer_heads", c.transformer_heads},
           {"transformer_ffn_dim", c.transformer_ffn_dim},
           {"onlstm_chunk_factor", c.onlstm_chunk_factor}};
}

void from_json(const json& j, EncoderConfig& c) {
  if (j.contains("kind")) {
    c.kind = encoder_kind_from_string(j.at("kind").get<std::string>());
    c.hidden_dim = c.kind == EncoderKind::CNN ? 300 : 200;
  }
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.cnn_filter_widths = j.value("cnn_filter_widths", c.cnn_filter_widths);
  c.transformer_layers = j.value("transformer_layers", c.transformer_layers);
  c.transformer_heads = j.value("transformer_heads", c.transformer_heads);
  c.transformer_ffn_dim = j.value("transformer_ffn_dim", c.transformer_ffn_dim);
  c.onlstm_chunk_factor = j.value("onlstm_chunk_factor", c.onlstm_chunk_factor);
}

void to_json(json& j, const GcnConfig& c) {
  j = json{{"num_layers", c.num_layers}, {"normalize", c.normalize}};
}

void from_json(const json& j, GcnConfig& c) {
  c.num_layers = j.value("num_layers", c.num_layers);
  c.normalize = j.value("normalize", c.normalize);
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"input", c.input}, {"encoder", c.encoder}, {"gcn", c.gcn},
           {"num_labels", c.num_labels}};
}

void from_json(const json& j, ModelConfig& c) {
  if (j.contains("input")) j.at("input").get_to(c.input);
  if (j.contains("encoder")) j.at("encoder").get_to(c.encoder);
  if (j.contains("gcn")) j.at("gcn").get_to(c.gcn);
  c.num_labels = j.value("num_labels", c.num_labels);
}

void to_json_model_config(nlohmann::json& j, const ModelConfig& c) { to_json(j, c); }
void from_json_model_config(const nlohmann::json& j, ModelConfig& c) { from_json(j, c); }

void to_json(json& j, const TrainConfig& c) {
  j = json{{"learning_rate", c.learning_rate},
           {"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"seed", c.seed},
           {"dev_fraction", c.dev_fraction},
           {"patience", c.patience},
           {"clip_norm", c.clip_norm}};
}

void from_json(const json& j, TrainConfig& c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.dev_fraction = j.value("dev_fraction", c.dev_fraction);
  c.patience = j.value("patience", c.patience);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
}

void to_json(json& j, const GridSpec& c) {
  std::vector<std::string> encoders, modes;
  for (EncoderKind k : c.encoders) encoders.push_back(to_string(k));
  for (InputMode m : c.modes) modes.push_back(to_string(m));
  j = json{{"datasets", c.datasets}, {"encoders", encoders},
           {"modes", modes},         {"gcn_flags", c.gcn_flags},
           {"seeds", c.seeds},       {"ablations", c.ablations},
           {"gcn_k", c.gcn_k}};
}

void from_json(const json& j, GridSpec& c) {
  c.datasets = j.value("datasets", c.datasets);
  if (j.contains("encoders")) {
    c.encoders.clear();
    for (const auto& s : j.at("encoders"))
      c.encoders.push_back(encoder_kind_from_string(s.get<std::string>()));
  }
  if (j.contains("modes")) {
    c.modes.clear();
    for (const auto& s : j.at("modes")) {
      std::string m = s.get<std::string>();
      if (m == "G" || m == "g")
        c.modes.push_back(InputMode::G);
      else if (m == "B" || m == "b")
        c.modes.push_back(InputMode::B);
      else
        throw ConfigError("grid mode must be G or B, got '" + m + "'");
    }
  }
  c.gcn_flags = j.value("gcn_flags", c.gcn_flags);
  c.seeds = j.value("seeds", c.seeds);
  c.ablations = j.value("ablations", c.ablations);
  c.gcn_k = j.value("gcn_k", c.gcn_k);
}

void to_json(json& j, const DatasetPaths& c) {
  j = json{{"train", c.train}, {"test", c.test}};
  if (!c.contextual_train.empty()) j["contextual_train"] = c.contextual_train;
  if (!c.contextual_test.empty()) j["contextual_test"] = c.contextual_test;
}

void from_json(const json& j, DatasetPaths& c) {
  c.train = j.value("train", "");
  c.test = j.value("test", "");
  c.contextual_train = j.value("contextual_train", "");
  c.contextual_test = j.value("contextual_test", "");
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"datasets", c.datasets}, {"word_vectors", c.word_vectors},
           {"model", c.model},       {"train", c.train},
           {"grid", c.grid},         {"out_dir", c.out_dir}};
}

void from_json(const json& j, ExperimentConfig& c) {
  if (j.contains("datasets")) j.at("datasets").get_to(c.datasets);
  c.word_vectors = j.value("word_vectors", c.word_vectors);
  if (j.contains("model")) j.at("model").get_to(c.model);
  if (j.contains("train")) j.at("train").get_to(c.train);
  if (j.contains("grid")) j.at("grid").get_to(c.grid);
  c.out_dir = j.value("out_dir", c.out_dir);
}

namespace {

std::string resolve_against_data_root(const std::string& path) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  const char* root = std::getenv("TOWE_DATA_ROOT");
  if (root == nullptr || *root == '\0') return path;
  return (std::filesystem::path(root) / p).string();
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  ExperimentConfig cfg;
  try {
    j.get_to(cfg);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  for (auto& [name, ds] : cfg.datasets) {
    ds.train = resolve_against_data_root(ds.train);
    ds.test = resolve_against_data_root(ds.test);
    ds.contextual_train = resolve_against_data_root(ds.contextual_train);
    ds.contextual_test = resolve_against_data_root(ds.contextual_test);
  }
  cfg.word_vectors = resolve_against_data_root(cfg.word_vectors);
  return cfg;
}

void validate_experiment_paths(const ExperimentConfig& cfg) {
  std::vector<std::string> missing;
  auto check = [&missing](const std::string& p) {
    if (!p.empty() && !std::filesystem::exists(p)) missing.push_back(p);
  };
  for (const auto& [name, ds] : cfg.datasets) {
    check(ds.train);
    check(ds.test);
    check(ds.contextual_train);
    check(ds.contextual_test);
  }
  check(cfg.word_vectors);
  if (!missing.empty()) {
    std::string msg = "missing paths:";
    for (const auto& p : missing) msg += " " + p;
    throw ConfigError(msg);
  }
  bool wants_b = cfg.model.input.mode == InputMode::B;
  for (InputMode m : cfg.grid.modes) wants_b = wants_b || m == InputMode::B;
  if (wants_b) {
    for (const auto& [name, ds] : cfg.datasets)
      if (ds.contextual_train.empty() || ds.contextual_test.empty())
        throw ConfigError("mode B requires contextual sidecars; dataset '" + name +
                          "' has none configured");
  }
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = cfg;
  std::uint64_t h = fnv1a(j.dump());
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

}  // namespace towe
