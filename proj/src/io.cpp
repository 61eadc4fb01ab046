#include "towe/io.hpp"

#include <cstring>
#include <filesystem>

namespace towe {

using nlohmann::json;

std::string instance_to_jsonl(const Instance& inst) {
  json j;
  j["sent_id"] = inst.sent_id;
  json toks = json::array();
  for (const Token& t : inst.tokens) toks.push_back(t.surface);
  j["tokens"] = std::move(toks);
  j["target"] = {inst.target_span.start, inst.target_span.end};
  json labels = json::array();
  for (BioTag t : inst.gold_labels) labels.push_back(std::string(1, bio_char(t)));
  j["labels"] = std::move(labels);
  if (inst.has_parses()) {
    json tags = json::array(), heads = json::array();
    for (const Token& t : inst.tokens) {
      tags.push_back(t.pos_tag);
      heads.push_back(*t.head);
    }
    j["pos_tags"] = std::move(tags);
    j["heads"] = std::move(heads);
  }
  return j.dump();
}

Instance instance_from_jsonl(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
  }
  try {
    Instance inst;
    inst.sent_id = j.value("sent_id", "");
    auto tokens = j.at("tokens").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < tokens.size(); ++i)
      inst.tokens.push_back(Token{static_cast<int>(i), tokens[i], "", std::nullopt});
    inst.target_span = {j.at("target").at(0).get<int>(), j.at("target").at(1).get<int>()};
    for (const auto& l : j.at("labels")) {
      std::string s = l.get<std::string>();
      if (s.size() != 1) throw FormatError("label '" + s + "' is not one of B/I/O");
      inst.gold_labels.push_back(bio_from_char(s[0]));
    }
    if (j.contains("pos_tags")) {
      auto tags = j.at("pos_tags").get<std::vector<std::string>>();
      auto heads = j.at("heads").get<std::vector<int>>();
      if (tags.size() != inst.tokens.size() || heads.size() != inst.tokens.size())
        throw FormatError("pos_tags/heads length mismatch");
      for (std::size_t i = 0; i < inst.tokens.size(); ++i) {
        inst.tokens[i].pos_tag = tags[i];
        inst.tokens[i].head = heads[i];
      }
    }
    const int n = inst.size();
    if (static_cast<int>(inst.gold_labels.size()) != n)
      throw FormatError("labels length does not match tokens");
    if (inst.target_span.start < 0 || inst.target_span.start >= inst.target_span.end ||
        inst.target_span.end > n)
      throw FormatError("target span out of range");
    validate_bio(inst.gold_labels);
    for (int i = inst.target_span.start; i < inst.target_span.end; ++i)
      if (inst.gold_labels[static_cast<std::size_t>(i)] != BioTag::O)
        throw AnnotationError("target token " + std::to_string(i) +
                              " carries a non-O opinion tag");
    return inst;
  } catch (const json::exception& e) {
    throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
  }
}

void save_dataset(const DatasetSplit& split, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary keeps output byte-stable
  if (!out) throw IoError("cannot write " + path);
  for (const Instance& inst : split.instances) out << instance_to_jsonl(inst) << "\n";
}

DatasetSplit load_dataset(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path);
  DatasetSplit split;
  split.name = name.empty() ? std::filesystem::path(path).stem().string() : name;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Instance inst = instance_from_jsonl(line, line_no);
    inst.split_id = split.name;
    split.instances.push_back(std::move(inst));
  }
  if (split.instances.empty()) throw FormatError(path + ": no records");
  return split;
}

namespace {

std::vector<std::string> split_on_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

std::vector<Instance> read_inline_annotated_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(strip_cr(line));
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw FormatError(path + ": empty file");

  std::vector<Instance> out;
  const bool tsv = lines.front().find('\t') != std::string::npos;
  if (tsv) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      auto fields = split_on_tabs(lines[i]);
      // Header rows in some distributions: skip a first line that does not
      // carry tag suffixes.
      if (i == 0 && fields.size() >= 4 && fields[3].find('\\') == std::string::npos)
        continue;
      if (fields.size() != 4)
        throw FormatError(path + ":" + std::to_string(i + 1) + ": expected 4 tab-separated fields, got " +
                          std::to_string(fields.size()));
      try {
        Instance inst = import_inline_annotated(fields[1], fields[2], fields[3]);
        inst.sent_id = fields[0];
        out.push_back(std::move(inst));
      } catch (const Error& e) {
        throw FormatError(path + ":" + std::to_string(i + 1) + ": " + e.what());
      }
    }
  } else {
    if (lines.size() % 3 != 0)
      throw FormatError(path + ": three-line format needs a multiple of 3 lines, got " +
                        std::to_string(lines.size()));
    for (std::size_t i = 0; i + 2 < lines.size() + 1; i += 3) {
      try {
        Instance inst = import_inline_annotated(lines[i], lines[i + 1], lines[i + 2]);
        inst.sent_id = std::to_string(i / 3);
        out.push_back(std::move(inst));
      } catch (const Error& e) {
        throw FormatError(path + ":" + std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
  if (out.empty()) throw FormatError(path + ": no records");
  return out;
}

std::vector<ParseRecord> read_parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open parse file " + path);
  std::vector<ParseRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      ParseRecord rec;
      rec.pos_tags = j.at("pos_tags").get<std::vector<std::string>>();
      rec.heads = j.at("heads").get<std::vector<int>>();
      out.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---- contextual sidecar ---------------------------------------------------

namespace {

constexpr char kCtxMagic[8] = {'T', 'O', 'W', 'E', 'C', 'T', 'X', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw LoadError(path + ": truncated sidecar");
  return v;
}

}  // namespace

void save_contextual_sidecar(const std::string& path,
                             const std::vector<std::pair<std::string, MatF>>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kCtxMagic, sizeof kCtxMagic);
  write_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& [id, mat] : records) {
    write_u32(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    write_u32(out, static_cast<std::uint32_t>(mat.rows()));
    write_u32(out, static_cast<std::uint32_t>(mat.cols()));
    // row-major on disk, row order = token order
    for (Eigen::Index i = 0; i < mat.rows(); ++i)
      for (Eigen::Index j = 0; j < mat.cols(); ++j) {
        float v = mat(i, j);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
  }
}

ContextualStore<float> load_contextual_sidecar(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open sidecar " + path);
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCtxMagic, sizeof magic) != 0)
    throw LoadError(path + ": not a contextual sidecar file");
  std::uint32_t count = read_u32(in, path);
  ContextualStore<float> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    std::uint32_t id_len = read_u32(in, path);
    std::string id(id_len, '\0');
    if (!in.read(id.data(), id_len)) throw LoadError(path + ": truncated sidecar");
    std::uint32_t rows = read_u32(in, path);
    std::uint32_t cols = read_u32(in, path);
    MatF mat(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j) {
        float v;
        if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
          throw LoadError(path + ": truncated sidecar");
        mat(i, j) = v;
      }
    out.emplace(std::move(id), std::move(mat));
  }
  return out;
}

// ---- checkpoint container -----------------------------------------------------

namespace detail {

constexpr char kCkptMagic[8] = {'T', 'O', 'W', 'E', 'C', 'K', 'P', 'T'};

void write_checkpoint_file(const std::string& path, int scalar_width,
                           const nlohmann::json& header,
                           const std::vector<const void*>& blobs,
                           const std::vector<std::size_t>& blob_bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(kCkptMagic, sizeof kCkptMagic);
  write_u32(out, 1);  // container format version
  write_u32(out, static_cast<std::uint32_t>(scalar_width));
  std::string hs = header.dump();
  std::uint64_t hl = hs.size();
  out.write(reinterpret_cast<const char*>(&hl), sizeof hl);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (std::size_t k = 0; k < blobs.size(); ++k)
    out.write(static_cast<const char*>(blobs[k]), static_cast<std::streamsize>(blob_bytes[k]));
  if (!out) throw IoError("short write to " + path);
}

RawCheckpoint read_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCkptMagic, sizeof magic) != 0)
    throw LoadError(path + ": not a checkpoint file");
  std::uint32_t version = read_u32(in, path);
  if (version != 1)
    throw LoadError(path + ": unsupported checkpoint format version " +
                    std::to_string(version));
  RawCheckpoint raw;
  raw.scalar_width = static_cast<int>(read_u32(in, path));
  std::uint64_t hl = 0;
  if (!in.read(reinterpret_cast<char*>(&hl), sizeof hl))
    throw LoadError(path + ": truncated checkpoint");
  std::string hs(hl, '\0');
  if (!in.read(hs.data(), static_cast<std::streamsize>(hl)))
    throw LoadError(path + ": truncated checkpoint header");
  try {
    raw.header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path + ": bad checkpoint header: " + e.what());
  }
  for (const auto& entry : raw.header.at("tensors")) {
    auto rows = entry.at("rows").get<std::size_t>();
    auto cols = entry.at("cols").get<std::size_t>();
    std::vector<char> blob(rows * cols * static_cast<std::size_t>(raw.scalar_width));
    if (!in.read(blob.data(), static_cast<std::streamsize>(blob.size())))
      throw LoadError(path + ": truncated tensor data");
    raw.blobs.push_back(std::move(blob));
  }
  return raw;
}

}  // namespace detail

}  // namespace towe
