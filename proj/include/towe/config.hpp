#ifndef TOWE_CONFIG_HPP
#define TOWE_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "towe/model.hpp"

namespace towe {

struct DatasetPaths {
  std::string train;
  std::string test;
  std::string contextual_train;  // mode B sidecars, optional otherwise
  std::string contextual_test;
};

// Axes of a comparison/ablation run. Ablations are lists of component names
// ("gcn", "post", "posn") removed from the BiLSTM+GCN reference model.
struct GridSpec {
  std::vector<std::string> datasets;
  std::vector<EncoderKind> encoders = {EncoderKind::BILSTM};
  std::vector<InputMode> modes = {InputMode::G};
  std::vector<bool> gcn_flags = {false, true};
  int seeds = 5;
  std::vector<std::vector<std::string>> ablations;
  int gcn_k = 0;  // fixed GCN depth; 0 tunes over 1..5 on the dev split

  void validate() const {
    if (datasets.empty()) throw ConfigError("grid needs at least one dataset");
    if (encoders.empty()) throw ConfigError("grid needs at least one encoder");
    if (modes.empty()) throw ConfigError("grid needs at least one input mode");
    if (gcn_flags.empty()) throw ConfigError("grid needs at least one gcn flag");
    if (seeds <= 0) throw ConfigError("grid needs at least one seed");
    for (const auto& ab : ablations)
      for (const auto& c : ab)
        if (c != "gcn" && c != "post" && c != "posn")
          throw ConfigError("unknown ablation component '" + c + "'");
  }
};

struct ExperimentConfig {
  std::map<std::string, DatasetPaths> datasets;
  std::string word_vectors;  // empty: randomly initialised, trainable word table
  ModelConfig model;
  TrainConfig train;
  GridSpec grid;
  std::string out_dir = "runs";
};

using nlohmann::json;

// ---- json round-trips -------------------------------------------------------

void to_json(json& j, const InputConfig& c);
void from_json(const json& j, InputConfig& c);
void to_json(json& j, const EncoderConfig& c);
void from_json(const json& j, EncoderConfig& c);
void to_json(json& j, const GcnConfig& c);
void from_json(const json& j, GcnConfig& c);
void to_json(json& j, const ModelConfig& c);
void from_json(const json& j, ModelConfig& c);
void to_json(json& j, const TrainConfig& c);
void from_json(const json& j, TrainConfig& c);
void to_json(json& j, const GridSpec& c);
void from_json(const json& j, GridSpec& c);
void to_json(json& j, const DatasetPaths& c);
void from_json(const json& j, DatasetPaths& c);
void to_json(json& j, const ExperimentConfig& c);
void from_json(const json& j, ExperimentConfig& c);

// Reads a config file, resolving relative dataset paths against
// $TOWE_DATA_ROOT when it is set.
ExperimentConfig load_experiment_config(const std::string& path);

// Throws ConfigError naming every referenced path that does not exist, and
// rejects mode-B configurations without contextual sidecars.
void validate_experiment_paths(const ExperimentConfig& cfg);

// Stable fingerprint used to name run directories.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace towe

#endif
