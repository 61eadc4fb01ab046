#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "towe/config.hpp"
#include "towe/grid.hpp"
#include "towe/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct StatsRow {
  std::string name;
  towe::CorpusStats stats;
};

void print_stats(const std::vector<StatsRow>& rows, const std::string& format) {
  if (format == "json") {
    json out = json::array();
    for (const auto& r : rows)
      out.push_back({{"split", r.name},
                     {"num_sentences", r.stats.num_sentences},
                     {"avg_sentence_length", r.stats.avg_sentence_length},
                     {"num_aspect_terms", r.stats.num_aspect_terms},
                     {"num_opinion_terms", r.stats.num_opinion_terms},
                     {"avg_dependency_distance", r.stats.avg_dependency_distance},
                     {"avg_sequential_distance", r.stats.avg_sequential_distance}});
    std::cout << out.dump(2) << "\n";
    return;
  }
  std::cout << std::left << std::setw(24) << "Split" << std::right << std::setw(8)
            << "#Sent" << std::setw(8) << "#ASL" << std::setw(8) << "#AT"
            << std::setw(8) << "#OT" << std::setw(9) << "#D.Dist" << std::setw(9)
            << "#S.Dist" << "\n";
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(24) << r.name << std::right << std::setw(8)
              << r.stats.num_sentences << std::setw(8) << std::fixed
              << std::setprecision(2) << r.stats.avg_sentence_length << std::setw(8)
              << r.stats.num_aspect_terms << std::setw(8) << r.stats.num_opinion_terms
              << std::setw(9) << r.stats.avg_dependency_distance << std::setw(9)
              << r.stats.avg_sequential_distance << "\n";
  }
}

fs::path run_directory(const towe::ExperimentConfig& cfg, std::uint64_t seed,
                       const std::string& out_override) {
  fs::path base = out_override.empty() ? fs::path(cfg.out_dir) : fs::path(out_override);
  return base / (towe::config_hash(cfg) + "-seed" + std::to_string(seed));
}

towe::ContextualStore<float> load_contextual_for(const towe::DatasetPaths& ds) {
  towe::ContextualStore<float> store = towe::load_contextual_sidecar(ds.contextual_train);
  for (auto& [id, mat] : towe::load_contextual_sidecar(ds.contextual_test))
    store.emplace(id, std::move(mat));
  return store;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw towe::IoError("cannot write " + path.string());
  out << content;
}

int cmd_import(const std::string& raw_path, const std::string& parse_path,
               const std::string& out_path, std::string split_name) {
  if (!fs::exists(raw_path)) throw towe::ConfigError("raw file not found: " + raw_path);
  if (!parse_path.empty() && !fs::exists(parse_path))
    throw towe::ConfigError("parse file not found: " + parse_path);
  if (split_name.empty()) split_name = fs::path(out_path).stem().string();

  towe::DatasetSplit split;
  split.name = split_name;
  split.instances = towe::read_inline_annotated_file(raw_path);
  for (auto& inst : split.instances) inst.split_id = split_name;
  if (!parse_path.empty())
    split = towe::join_parses(std::move(split), towe::read_parse_file(parse_path));
  towe::save_dataset(split, out_path);
  std::cout << split_name << ": " << split.instances.size() << " instances -> "
            << out_path << "\n";
  return 0;
}

int cmd_stats(const std::vector<std::string>& data_paths, const std::string& config_path,
              std::vector<std::string> dataset_filter, const std::string& format) {
  std::vector<StatsRow> rows;
  if (!data_paths.empty()) {
    for (const auto& p : data_paths) {
      towe::DatasetSplit split = towe::load_dataset(p);
      rows.push_back({split.name, towe::compute_statistics(split)});
    }
  } else {
    if (config_path.empty())
      throw towe::ConfigError("stats needs --data files or --config");
    towe::ExperimentConfig cfg = towe::load_experiment_config(config_path);
    if (dataset_filter.empty())
      for (const auto& [name, ds] : cfg.datasets) dataset_filter.push_back(name);
    if (dataset_filter.empty()) throw towe::ConfigError("config defines no datasets");
    for (const auto& name : dataset_filter) {
      auto it = cfg.datasets.find(name);
      if (it == cfg.datasets.end()) {
        std::string available;
        for (const auto& [n, ds] : cfg.datasets) available += " " + n;
        throw towe::ConfigError("unknown dataset '" + name + "'; available:" + available);
      }
      towe::DatasetSplit train = towe::load_dataset(it->second.train, name + "-train");
      towe::DatasetSplit test = towe::load_dataset(it->second.test, name + "-test");
      rows.push_back({train.name, towe::compute_statistics(train)});
      rows.push_back({test.name, towe::compute_statistics(test)});
    }
  }
  print_stats(rows, format);
  return 0;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::string dataset, const std::string& out_override) {
  towe::ExperimentConfig cfg = towe::load_experiment_config(config_path);
  if (seed) cfg.train.seed = *seed;
  towe::validate_experiment_paths(cfg);
  if (dataset.empty()) {
    if (cfg.datasets.size() != 1)
      throw towe::ConfigError("config has " + std::to_string(cfg.datasets.size()) +
                              " datasets; pick one with --dataset");
    dataset = cfg.datasets.begin()->first;
  }
  auto it = cfg.datasets.find(dataset);
  if (it == cfg.datasets.end()) throw towe::ConfigError("unknown dataset '" + dataset + "'");

  towe::DatasetSplit train_split = towe::load_dataset(it->second.train, dataset + "-train");
  towe::DatasetSplit test_split = towe::load_dataset(it->second.test, dataset + "-test");

  towe::ContextualStore<float> store;
  const towe::ContextualStore<float>* store_ptr = nullptr;
  if (cfg.model.input.mode == towe::InputMode::B) {
    store = load_contextual_for(it->second);
    store_ptr = &store;
  }

  towe::ToweModel<float> model(cfg.model, towe::build_vocab(train_split),
                               towe::build_tagset(train_split), cfg.train.seed,
                               cfg.word_vectors);
  towe::TrainResult result = towe::train(model, train_split, cfg.train, store_ptr);

  std::vector<std::vector<towe::Span>> pred, gold;
  for (const towe::Instance& inst : test_split.instances) {
    const towe::MatF* ctx = nullptr;
    if (store_ptr) {
      auto cit = store.find(inst.sent_id);
      if (cit == store.end())
        throw towe::InferenceError("no contextual vectors for test sentence " + inst.sent_id);
      ctx = &cit->second;
    }
    pred.push_back(model.predict_spans(inst, ctx));
    gold.push_back(towe::bio_decode(inst.gold_labels));
  }
  towe::EvalReport test_report = towe::score(pred, gold);

  fs::path dir = run_directory(cfg, cfg.train.seed, out_override);
  fs::create_directories(dir);
  towe::save_checkpoint(towe::make_checkpoint(model), (dir / "checkpoint.towe").string());
  {
    std::ostringstream curve;
    for (const auto& e : result.curve)
      curve << json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"dev_f1", e.dev_f1}}
            << "\n";
    write_text_file(dir / "dev_curve.jsonl", curve.str());
  }
  write_text_file(dir / "config.json", json(cfg).dump(2) + "\n");
  write_text_file(dir / "report.json",
                  json{{"dataset", dataset},
                       {"seed", cfg.train.seed},
                       {"best_epoch", result.best_epoch},
                       {"best_dev_f1", result.best_dev_f1},
                       {"epochs_run", result.epochs_run},
                       {"test", {{"precision", test_report.precision},
                                 {"recall", test_report.recall},
                                 {"f1", test_report.f1},
                                 {"num_pred", test_report.num_pred_spans},
                                 {"num_gold", test_report.num_gold_spans},
                                 {"num_correct", test_report.num_correct}}}}
                      .dump(2) +
                      "\n");

  std::cout << "trained " << dataset << " seed " << cfg.train.seed << ": best dev F1 "
            << std::fixed << std::setprecision(2) << result.best_dev_f1 * 100
            << " (epoch " << result.best_epoch << "), test F1 "
            << test_report.f1 * 100 << "\n"
            << "artifacts in " << dir.string() << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
             const std::string& contextual_path, const std::string& format) {
  towe::Checkpoint<float> ck = towe::load_checkpoint<float>(checkpoint_path);
  towe::ToweModel<float> model = towe::model_from_checkpoint(ck);
  towe::DatasetSplit split = towe::load_dataset(data_path);

  towe::ContextualStore<float> store;
  if (!contextual_path.empty()) store = towe::load_contextual_sidecar(contextual_path);
  if (model.config().input.mode == towe::InputMode::B && contextual_path.empty())
    throw towe::ConfigError("checkpoint expects mode B input; pass --contextual");

  std::vector<std::vector<towe::Span>> pred, gold;
  for (const towe::Instance& inst : split.instances) {
    const towe::MatF* ctx = nullptr;
    if (model.config().input.mode == towe::InputMode::B) {
      auto cit = store.find(inst.sent_id);
      if (cit == store.end())
        throw towe::InferenceError("no contextual vectors for sentence " + inst.sent_id);
      ctx = &cit->second;
    }
    pred.push_back(model.predict_spans(inst, ctx));
    gold.push_back(towe::bio_decode(inst.gold_labels));
  }
  towe::EvalReport r = towe::score(pred, gold);
  if (format == "json") {
    std::cout << json{{"split", split.name},
                      {"precision", r.precision},
                      {"recall", r.recall},
                      {"f1", r.f1},
                      {"num_pred", r.num_pred_spans},
                      {"num_gold", r.num_gold_spans},
                      {"num_correct", r.num_correct}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << split.name << ": P " << std::fixed << std::setprecision(2)
              << r.precision * 100 << "  R " << r.recall * 100 << "  F1 " << r.f1 * 100
              << "  (" << r.num_correct << "/" << r.num_pred_spans << " pred, "
              << r.num_gold_spans << " gold)\n";
  }
  return 0;
}

int cmd_grid(const std::string& config_path, std::optional<std::uint64_t> seed, int jobs,
             const std::string& out_override, const std::string& format) {
  towe::ExperimentConfig cfg = towe::load_experiment_config(config_path);
  if (seed) cfg.train.seed = *seed;
  if (cfg.grid.datasets.empty())
    for (const auto& [name, ds] : cfg.datasets) cfg.grid.datasets.push_back(name);
  towe::validate_experiment_paths(cfg);

  towe::GridReport report = towe::run_grid(cfg, jobs);
  std::string table = towe::render_grid_table(report);

  fs::path dir = run_directory(cfg, cfg.train.seed, out_override);
  fs::create_directories(dir);
  write_text_file(dir / "grid_report.json", towe::grid_report_to_json(report).dump(2) + "\n");
  write_text_file(dir / "grid_table.md", table);
  write_text_file(dir / "config.json", json(cfg).dump(2) + "\n");

  if (format == "json")
    std::cout << towe::grid_report_to_json(report).dump(2) << "\n";
  else
    std::cout << table;
  std::cout << "artifacts in " << dir.string() << "\n";

  for (const auto& cell : report.cells)
    if (!cell.ok) return kExitRuntime;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"target-oriented opinion extraction toolkit"};
  app.require_subcommand(1);

  // import
  auto* import = app.add_subcommand("import", "convert inline-annotated data to dataset files");
  std::string raw_path, parse_path, out_path, split_name;
  import->add_option("--raw", raw_path, "inline-annotated input file")->required();
  import->add_option("--parses", parse_path, "parse file (pos_tags/heads JSONL)");
  import->add_option("--out", out_path, "output dataset file")->required();
  import->add_option("--split-name", split_name, "split name recorded in the dataset");

  // stats
  auto* stats = app.add_subcommand("stats", "corpus statistics per split");
  std::vector<std::string> stats_data, stats_datasets;
  std::string stats_config, stats_format = "text";
  stats->add_option("--data", stats_data, "dataset files");
  stats->add_option("--config", stats_config, "experiment config");
  stats->add_option("--dataset", stats_datasets, "dataset names from the config");
  stats->add_option("--format", stats_format, "text or json")
      ->check(CLI::IsMember({"text", "json"}));

  // train
  auto* train = app.add_subcommand("train", "train one model");
  std::string train_config, train_dataset, train_out;
  std::optional<std::uint64_t> train_seed;
  train->add_option("--config", train_config, "experiment config")->required();
  train->add_option("--seed", train_seed, "override the config seed");
  train->add_option("--dataset", train_dataset, "dataset name from the config");
  train->add_option("--out", train_out, "output directory override");

  // eval
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a dataset file");
  std::string eval_ckpt, eval_data, eval_ctx, eval_format = "text";
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "dataset file")->required();
  eval->add_option("--contextual", eval_ctx, "contextual sidecar for mode B");
  eval->add_option("--format", eval_format, "text or json")
      ->check(CLI::IsMember({"text", "json"}));

  // grid
  auto* grid = app.add_subcommand("grid", "run the comparison/ablation grid");
  std::string grid_config, grid_out, grid_format = "text";
  std::optional<std::uint64_t> grid_seed;
  int grid_jobs = 0;
  grid->add_option("--config", grid_config, "experiment config")->required();
  grid->add_option("--seed", grid_seed, "override the config seed");
  grid->add_option("--jobs", grid_jobs, "parallel cells (default: half the cores)");
  grid->add_option("--out", grid_out, "output directory override");
  grid->add_option("--format", grid_format, "text or json")
      ->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*import) return cmd_import(raw_path, parse_path, out_path, split_name);
    if (*stats) return cmd_stats(stats_data, stats_config, stats_datasets, stats_format);
    if (*train) return cmd_train(train_config, train_seed, train_dataset, train_out);
    if (*eval) return cmd_eval(eval_ckpt, eval_data, eval_ctx, eval_format);
    if (*grid) return cmd_grid(grid_config, grid_seed, grid_jobs, grid_out, grid_format);
  } catch (const towe::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const towe::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
