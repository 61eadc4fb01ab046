#include "towe/grid.hpp"

#include <atomic>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "towe/io.hpp"

namespace towe {

namespace {

struct RowSpec {
  std::string label;
  EncoderKind encoder;
  InputMode mode;
  bool gcn = false;
  bool use_posn = true;
  bool use_post = true;
};

std::string row_label(EncoderKind enc, InputMode mode, bool gcn,
                      const std::vector<std::string>& dropped = {}) {
  std::string label = to_string(enc);
  if (gcn) label += "+GCN";
  label += "(" + to_string(mode) + ")";
  if (!dropped.empty()) {
    label += " ---";
    for (std::size_t i = 0; i < dropped.size(); ++i) {
      std::string up = dropped[i];
      for (char& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      label += (i ? ", " : " ") + up;
    }
  }
  return label;
}

std::vector<RowSpec> expand_rows(const GridSpec& grid) {
  std::vector<RowSpec> rows;
  for (InputMode mode : grid.modes)
    for (EncoderKind enc : grid.encoders)
      for (bool g : grid.gcn_flags)
        rows.push_back(RowSpec{row_label(enc, mode, g), enc, mode, g, true, true});
  // Ablations strip components from the BiLSTM+GCN reference model.
  for (InputMode mode : grid.modes) {
    for (const auto& dropped : grid.ablations) {
      RowSpec row{row_label(EncoderKind::BILSTM, mode, true, dropped),
                  EncoderKind::BILSTM, mode, true, true, true};
      for (const std::string& c : dropped) {
        if (c == "gcn") row.gcn = false;
        if (c == "posn") row.use_posn = false;
        if (c == "post") row.use_post = false;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// Everything shareable across the cells of one dataset, built once up front.
struct DatasetContext {
  DatasetSplit train;
  DatasetSplit test;
  Vocab vocab;
  Vocab tagset;
  std::vector<std::vector<Span>> test_gold;
  MatF word_table;  // empty when no vector file was configured
  bool has_word_table = false;
  ContextualStore<float> contextual;  // merged train+test sidecars
  bool has_contextual = false;
};

ModelConfig cell_model_config(const ExperimentConfig& cfg, const RowSpec& row, int gcn_k) {
  ModelConfig mc = cfg.model;
  mc.encoder = default_encoder_config(row.encoder);
  // Carry tunables that are orthogonal to the encoder kind.
  mc.encoder.cnn_filter_widths = cfg.model.encoder.cnn_filter_widths;
  mc.encoder.transformer_layers = cfg.model.encoder.transformer_layers;
  mc.encoder.transformer_heads = cfg.model.encoder.transformer_heads;
  mc.encoder.transformer_ffn_dim = cfg.model.encoder.transformer_ffn_dim;
  mc.encoder.onlstm_chunk_factor = cfg.model.encoder.onlstm_chunk_factor;
  // A non-default width in the experiment config scales every row, keeping
  // the 3:2 CNN-to-recurrent ratio of the defaults.
  const int cfg_hidden = cfg.model.encoder.hidden_dim;
  if (cfg_hidden != default_encoder_config(cfg.model.encoder.kind).hidden_dim) {
    int base = cfg.model.encoder.kind == EncoderKind::CNN ? cfg_hidden * 2 / 3 : cfg_hidden;
    if (row.encoder == EncoderKind::CNN) {
      const int widths = static_cast<int>(mc.encoder.cnn_filter_widths.size());
      int w = base * 3 / 2;
      w -= w % widths;
      mc.encoder.hidden_dim = std::max(w, widths);
    } else {
      mc.encoder.hidden_dim = base;
    }
  }
  mc.input.mode = row.mode;
  if (row.mode == InputMode::B) {
    mc.input.use_post = false;
    if (cfg.model.input.mode != InputMode::B) mc.input.posn_dim = 100;
  } else {
    mc.input.use_post = row.use_post;
  }
  mc.input.use_posn = row.use_posn;
  mc.gcn.num_layers = row.gcn ? gcn_k : 0;
  return mc;
}

struct SeedRun {
  EvalReport test_report;
  double dev_f1 = 0;
};

SeedRun run_one_seed(const ExperimentConfig& cfg, const RowSpec& row,
                     const DatasetContext& ctx, int gcn_k, std::uint64_t seed) {
  ModelConfig mc = cell_model_config(cfg, row, gcn_k);
  ToweModel<float> model(mc, ctx.vocab, ctx.tagset, seed, "",
                         ctx.has_word_table ? &ctx.word_table : nullptr);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  const ContextualStore<float>* store = ctx.has_contextual ? &ctx.contextual : nullptr;
  TrainResult tr = train(model, ctx.train, tc, store);

  std::vector<std::vector<Span>> pred;
  pred.reserve(ctx.test.instances.size());
  for (const Instance& inst : ctx.test.instances) {
    const MatF* c = nullptr;
    if (row.mode == InputMode::B) {
      auto it = ctx.contextual.find(inst.sent_id);
      if (it == ctx.contextual.end())
        throw InferenceError("no contextual vectors for test sentence " + inst.sent_id);
      c = &it->second;
    }
    pred.push_back(model.predict_spans(inst, c));
  }
  return SeedRun{score(pred, ctx.test_gold), tr.best_dev_f1};
}

CellResult run_cell(const ExperimentConfig& cfg, const RowSpec& row,
                    const std::string& dataset, const DatasetContext& ctx) {
  CellResult cell;
  cell.model_label = row.label;
  cell.dataset = dataset;
  try {
    int gcn_k = 0;
    std::vector<EvalReport> per_seed;
    std::uint64_t base_seed = cfg.train.seed;

    if (row.gcn) {
      gcn_k = cfg.grid.gcn_k;
      if (gcn_k == 0) {
        // Tune the layer count on the first seed's dev split.
        double best_dev = -1;
        SeedRun best_run;
        for (int k = 1; k <= 5; ++k) {
          SeedRun run = run_one_seed(cfg, row, ctx, k, base_seed);
          if (run.dev_f1 > best_dev) {
            best_dev = run.dev_f1;
            best_run = run;
            gcn_k = k;
          }
        }
        per_seed.push_back(best_run.test_report);
        cell.seeds_used.push_back(base_seed);
      }
    }

    while (per_seed.size() < static_cast<std::size_t>(cfg.grid.seeds)) {
      std::uint64_t seed = base_seed + per_seed.size();
      per_seed.push_back(run_one_seed(cfg, row, ctx, gcn_k, seed).test_report);
      cell.seeds_used.push_back(seed);
    }

    cell.report = aggregate(std::move(per_seed));
    cell.gcn_layers = row.gcn ? gcn_k : 0;
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

}  // namespace

GridReport run_grid(const ExperimentConfig& cfg, int jobs) {
  cfg.grid.validate();
  cfg.model.validate();
  cfg.train.validate();

  GridReport report;
  report.datasets = cfg.grid.datasets;
  std::vector<RowSpec> rows = expand_rows(cfg.grid);
  for (const RowSpec& r : rows) report.row_labels.push_back(r.label);

  bool any_mode_b = false;
  for (const RowSpec& r : rows) any_mode_b = any_mode_b || r.mode == InputMode::B;

  // Shared, read-only per-dataset state.
  std::map<std::string, DatasetContext> contexts;
  for (const std::string& name : cfg.grid.datasets) {
    auto it = cfg.datasets.find(name);
    if (it == cfg.datasets.end())
      throw ConfigError("grid references unknown dataset '" + name + "'");
    DatasetContext ctx;
    ctx.train = load_dataset(it->second.train, name + "-train");
    ctx.test = load_dataset(it->second.test, name + "-test");
    ctx.vocab = build_vocab(ctx.train);
    ctx.tagset = build_tagset(ctx.train);
    for (const Instance& inst : ctx.test.instances)
      ctx.test_gold.push_back(bio_decode(inst.gold_labels));
    if (!cfg.word_vectors.empty()) {
      std::mt19937 rng(static_cast<std::mt19937::result_type>(cfg.train.seed));
      ctx.word_table = load_pretrained_vectors<float>(cfg.word_vectors, ctx.vocab, rng,
                                                      cfg.model.input.word_dim);
      ctx.has_word_table = true;
    }
    if (any_mode_b) {
      if (it->second.contextual_train.empty() || it->second.contextual_test.empty())
        throw ConfigError("dataset '" + name + "' lacks contextual sidecars needed for mode B");
      ctx.contextual = load_contextual_sidecar(it->second.contextual_train);
      for (auto& [id, mat] : load_contextual_sidecar(it->second.contextual_test))
        ctx.contextual.emplace(id, std::move(mat));
      ctx.has_contextual = true;
    }
    contexts.emplace(name, std::move(ctx));
  }

  report.cells.resize(rows.size() * cfg.grid.datasets.size());
  if (jobs <= 0)
    jobs = std::max(1u, std::thread::hardware_concurrency() / 2);
  jobs = std::min<int>(jobs, static_cast<int>(report.cells.size()));

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= report.cells.size()) return;
      std::size_t r = i / cfg.grid.datasets.size();
      std::size_t d = i % cfg.grid.datasets.size();
      const std::string& name = cfg.grid.datasets[d];
      report.cells[i] = run_cell(cfg, rows[r], name, contexts.at(name));
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return report;
}

namespace {

std::string pct(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << v * 100.0;
  return out.str();
}

}  // namespace

std::string render_grid_table(const GridReport& report) {
  std::ostringstream out;
  out << "| Model |";
  for (const auto& ds : report.datasets) out << " " << ds << " P | " << ds << " R | " << ds << " F1 |";
  out << " Avg.F1 |\n|---|";
  for (std::size_t d = 0; d < report.datasets.size(); ++d) out << "---|---|---|";
  out << "---|\n";
  for (std::size_t r = 0; r < report.row_labels.size(); ++r) {
    out << "| " << report.row_labels[r] << " |";
    double f1_sum = 0;
    bool all_ok = true;
    for (std::size_t d = 0; d < report.datasets.size(); ++d) {
      const CellResult& cell = report.cell(r, d);
      if (cell.ok) {
        out << " " << pct(cell.report.mean_precision) << " | "
            << pct(cell.report.mean_recall) << " | " << pct(cell.report.mean_f1) << " |";
        f1_sum += cell.report.mean_f1;
      } else {
        out << " FAILED | FAILED | FAILED |";
        all_ok = false;
      }
    }
    if (all_ok && !report.datasets.empty())
      out << " " << pct(f1_sum / static_cast<double>(report.datasets.size())) << " |\n";
    else
      out << " - |\n";
  }
  bool any_gcn = false;
  for (const CellResult& c : report.cells) any_gcn = any_gcn || c.gcn_layers > 0;
  if (any_gcn) {
    out << "\nGCN layer counts:\n";
    for (const CellResult& c : report.cells)
      if (c.ok && c.gcn_layers > 0)
        out << "  " << c.model_label << " / " << c.dataset << ": K=" << c.gcn_layers << "\n";
  }
  for (const CellResult& c : report.cells)
    if (!c.ok) out << "\n" << c.model_label << " / " << c.dataset << " failed: " << c.error << "\n";
  return out.str();
}

nlohmann::json grid_report_to_json(const GridReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const CellResult& c : report.cells) {
    nlohmann::json jc{{"model", c.model_label}, {"dataset", c.dataset}, {"ok", c.ok}};
    if (c.ok) {
      jc["mean"] = {{"precision", c.report.mean_precision},
                    {"recall", c.report.mean_recall},
                    {"f1", c.report.mean_f1}};
      nlohmann::json seeds = nlohmann::json::array();
      for (std::size_t i = 0; i < c.report.per_seed.size(); ++i) {
        const EvalReport& r = c.report.per_seed[i];
        seeds.push_back({{"precision", r.precision},
                         {"recall", r.recall},
                         {"f1", r.f1},
                         {"num_pred", r.num_pred_spans},
                         {"num_gold", r.num_gold_spans},
                         {"num_correct", r.num_correct}});
      }
      jc["per_seed"] = std::move(seeds);
      jc["seeds"] = c.seeds_used;
      jc["gcn_layers"] = c.gcn_layers;
    } else {
      jc["error"] = c.error;
    }
    cells.push_back(std::move(jc));
  }
  return nlohmann::json{{"datasets", report.datasets},
                        {"rows", report.row_labels},
                        {"cells", std::move(cells)}};
}

}  // namespace towe
