#ifndef TOWE_IO_HPP
#define TOWE_IO_HPP

#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "towe/corpus.hpp"
#include "towe/model.hpp"

namespace towe {

// ---- canonical dataset files (one JSON record per line) ----------------------
//
// {"sent_id": "...", "tokens": [...], "target": [start, end],
//  "labels": ["O", ...], "pos_tags": [...], "heads": [...]}
//
// pos_tags/heads are present only after parses are joined; heads use -1 for
// the root.

std::string instance_to_jsonl(const Instance& inst);
Instance instance_from_jsonl(const std::string& line, std::size_t line_no = 0);

void save_dataset(const DatasetSplit& split, const std::string& path);
DatasetSplit load_dataset(const std::string& path, const std::string& name = "");

// ---- raw import ---------------------------------------------------------------
//
// Two container layouts for the inline-annotated format:
//   (a) TSV: id <TAB> sentence <TAB> target-tagged <TAB> opinion-tagged
//   (b) three consecutive lines per record (sentence / target / opinion)
// Detected per file by the presence of tabs on the first line.

std::vector<Instance> read_inline_annotated_file(const std::string& path);

// Parse files: one JSON record per line, {"pos_tags": [...], "heads": [...]},
// aligned with the raw records in order; heads use -1 for the root.
std::vector<ParseRecord> read_parse_file(const std::string& path);

// ---- contextual sidecar ----------------------------------------------------------
//
// Binary layout, little-endian:
//   magic "TOWECTX1", u32 record count, then per record:
//   u32 id length, id bytes, u32 rows, u32 cols, rows*cols float32 row-major.
// Row order equals token order.

void save_contextual_sidecar(const std::string& path,
                             const std::vector<std::pair<std::string, MatF>>& records);
ContextualStore<float> load_contextual_sidecar(const std::string& path);

template <typename S>
ContextualStore<S> load_contextual_sidecar_as(const std::string& path) {
  ContextualStore<S> out;
  for (auto& [id, mat] : load_contextual_sidecar(path)) out.emplace(id, mat.template cast<S>());
  return out;
}

// ---- checkpoint container ----------------------------------------------------------
//
// "TOWECKPT", u32 format version, u32 scalar width (4 or 8), u64 header
// length, JSON header (config, seed, vocab, tensor manifest), raw blobs.

// Implemented in config.cpp next to the other json round-trips.
void to_json_model_config(nlohmann::json& j, const ModelConfig& c);
void from_json_model_config(const nlohmann::json& j, ModelConfig& c);

namespace detail {

void write_checkpoint_file(const std::string& path, int scalar_width,
                           const nlohmann::json& header,
                           const std::vector<const void*>& blobs,
                           const std::vector<std::size_t>& blob_bytes);

struct RawCheckpoint {
  int scalar_width = 0;
  nlohmann::json header;
  std::vector<std::vector<char>> blobs;
};
RawCheckpoint read_checkpoint_file(const std::string& path);

}  // namespace detail

template <typename S>
void save_checkpoint(const Checkpoint<S>& ck, const std::string& path) {
  nlohmann::json header;
  header["version"] = ck.version;
  header["seed"] = ck.seed;
  header["vocab"] = ck.vocab_words;
  header["tagset"] = ck.tagset_words;
  header["vocab_hash"] = ck.vocab_hash();
  header["tagset_hash"] = ck.tagset_hash();
  {
    nlohmann::json jc;
    to_json_model_config(jc, ck.config);
    header["config"] = jc;
  }
  nlohmann::json manifest = nlohmann::json::array();
  std::vector<const void*> blobs;
  std::vector<std::size_t> bytes;
  for (const auto& [name, mat] : ck.tensors) {
    manifest.push_back({{"name", name}, {"rows", mat.rows()}, {"cols", mat.cols()}});
    blobs.push_back(mat.data());
    bytes.push_back(static_cast<std::size_t>(mat.size()) * sizeof(S));
  }
  header["tensors"] = manifest;
  detail::write_checkpoint_file(path, sizeof(S), header, blobs, bytes);
}

template <typename S>
Checkpoint<S> load_checkpoint(const std::string& path) {
  detail::RawCheckpoint raw = detail::read_checkpoint_file(path);
  if (raw.scalar_width != sizeof(S))
    throw LoadError(path + ": checkpoint stores " + std::to_string(raw.scalar_width * 8) +
                    "-bit scalars, expected " + std::to_string(sizeof(S) * 8) + "-bit");
  Checkpoint<S> ck;
  ck.version = raw.header.at("version").get<int>();
  ck.seed = raw.header.at("seed").get<std::uint64_t>();
  ck.vocab_words = raw.header.at("vocab").get<std::vector<std::string>>();
  ck.tagset_words = raw.header.at("tagset").get<std::vector<std::string>>();
  from_json_model_config(raw.header.at("config"), ck.config);
  if (raw.header.at("vocab_hash").get<std::uint64_t>() != ck.vocab_hash())
    throw LoadError(path + ": vocabulary hash mismatch");
  if (raw.header.at("tagset_hash").get<std::uint64_t>() != ck.tagset_hash())
    throw LoadError(path + ": tagset hash mismatch");
  const auto& manifest = raw.header.at("tensors");
  if (manifest.size() != raw.blobs.size())
    throw LoadError(path + ": tensor manifest and blob count disagree");
  for (std::size_t k = 0; k < raw.blobs.size(); ++k) {
    const auto& entry = manifest[k];
    Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
    Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
    if (raw.blobs[k].size() != static_cast<std::size_t>(rows * cols) * sizeof(S))
      throw LoadError(path + ": tensor '" + entry.at("name").get<std::string>() +
                      "' blob size mismatch");
    Mat<S> mat(rows, cols);
    std::memcpy(mat.data(), raw.blobs[k].data(), raw.blobs[k].size());
    ck.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(mat));
  }
  return ck;
}

}  // namespace towe

#endif
