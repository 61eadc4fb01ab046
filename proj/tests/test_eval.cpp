#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "testutil.hpp"
#include "towe/grid.hpp"
#include "towe/io.hpp"

using namespace towe;

TEST_CASE("perfect predictions on the example pair score 100") {
  auto instances = testing::example_pair();
  std::vector<std::vector<Span>> gold{bio_decode(instances[0].gold_labels),
                                      bio_decode(instances[1].gold_labels)};
  EvalReport r = score(gold, gold);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.f1 == 1.0);
  CHECK(r.num_correct == 2);
}

TEST_CASE("a partial span is not a match") {
  // gold "extremely slow" = [8,10); predicting just "slow" = [9,10) scores zero
  std::vector<std::vector<Span>> gold{{{8, 10}}};
  std::vector<std::vector<Span>> pred{{{9, 10}}};
  EvalReport r = score(pred, gold);
  CHECK(r.num_correct == 0);
  CHECK(r.precision == 0.0);
  CHECK(r.recall == 0.0);
  CHECK(r.f1 == 0.0);

  // brute-force check over all boundary pairs of a 4-token sentence
  for (int s = 0; s < 4; ++s)
    for (int e = s + 1; e <= 4; ++e) {
      EvalReport one = score({{{s, e}}}, {{{1, 3}}});
      CHECK(one.num_correct == ((s == 1 && e == 3) ? 1 : 0));
    }
}

TEST_CASE("empty predictions give zero by convention") {
  EvalReport r = score({{}}, {{{0, 1}}});
  CHECK(r.precision == 0.0);
  CHECK(r.recall == 0.0);
  CHECK(r.f1 == 0.0);
  EvalReport both_empty = score({{}}, {{}});
  CHECK(both_empty.f1 == 0.0);
}

TEST_CASE("the same span for a different instance does not match") {
  EvalReport r = score({{{2, 3}}, {}}, {{}, {{2, 3}}});
  CHECK(r.num_correct == 0);
}

TEST_CASE("score is invariant to instance reordering and duplication") {
  std::vector<std::vector<Span>> pred{{{0, 1}, {4, 6}}, {{2, 3}}, {}};
  std::vector<std::vector<Span>> gold{{{0, 1}}, {{2, 3}, {5, 6}}, {{1, 2}}};
  EvalReport base = score(pred, gold);

  std::vector<std::vector<Span>> pred_r{pred[2], pred[0], pred[1]};
  std::vector<std::vector<Span>> gold_r{gold[2], gold[0], gold[1]};
  EvalReport reordered = score(pred_r, gold_r);
  CHECK(base.precision == reordered.precision);
  CHECK(base.recall == reordered.recall);
  CHECK(base.f1 == reordered.f1);

  auto pred_d = pred, gold_d = gold;
  pred_d.insert(pred_d.end(), pred.begin(), pred.end());
  gold_d.insert(gold_d.end(), gold.begin(), gold.end());
  EvalReport doubled = score(pred_d, gold_d);
  CHECK(doubled.precision == doctest::Approx(base.precision));
  CHECK(doubled.recall == doctest::Approx(base.recall));
  CHECK(doubled.f1 == doctest::Approx(base.f1));
}

TEST_CASE("count arithmetic moves monotonically") {
  std::vector<std::vector<Span>> pred{{{0, 1}}};
  std::vector<std::vector<Span>> gold{{{0, 1}, {3, 4}}};
  EvalReport before = score(pred, gold);

  auto with_correct = pred;
  with_correct[0].push_back({3, 4});
  EvalReport after_correct = score(with_correct, gold);
  CHECK(after_correct.recall >= before.recall);

  auto with_wrong = pred;
  with_wrong[0].push_back({2, 3});
  EvalReport after_wrong = score(with_wrong, gold);
  CHECK(after_wrong.num_correct == before.num_correct);
  CHECK(after_wrong.precision <= before.precision);
  CHECK(after_wrong.recall == before.recall);
}

TEST_CASE("f1 is the harmonic mean and respects count bounds") {
  std::vector<std::vector<Span>> pred{{{0, 1}, {2, 3}}};
  std::vector<std::vector<Span>> gold{{{0, 1}, {4, 5}, {6, 7}}};
  EvalReport r = score(pred, gold);
  CHECK(r.num_correct <= std::min(r.num_pred_spans, r.num_gold_spans));
  CHECK(r.f1 ==
        doctest::Approx(2 * r.precision * r.recall / (r.precision + r.recall)));
  CHECK(r.precision == doctest::Approx(0.5));
  CHECK(r.recall == doctest::Approx(1.0 / 3));
}

TEST_CASE("misaligned lists are rejected") {
  CHECK_THROWS_AS(score({{}}, {{}, {}}), Error);
}

TEST_CASE("aggregate averages the per-seed metrics") {
  EvalReport a;
  a.precision = 0.5;
  a.recall = 0.25;
  a.f1 = 1.0 / 3;
  EvalReport b;
  b.precision = 1.0;
  b.recall = 0.75;
  b.f1 = 6.0 / 7;
  AggregateReport agg = aggregate({a, b});
  CHECK(agg.mean_precision == doctest::Approx(0.75));
  CHECK(agg.mean_recall == doctest::Approx(0.5));
  CHECK(agg.mean_f1 == doctest::Approx(0.5 * (1.0 / 3 + 6.0 / 7)));
  CHECK(agg.per_seed.size() == 2);
}

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("towe_eval_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

ExperimentConfig tiny_grid_config(const TempDir& dir, bool with_parses = true) {
  DatasetSplit train = testing::positional_corpus(24, 5);
  DatasetSplit test = testing::positional_corpus(10, 6);
  if (!with_parses) {
    for (Instance& inst : train.instances)
      for (Token& t : inst.tokens) t.head.reset();
    for (Instance& inst : test.instances)
      for (Token& t : inst.tokens) t.head.reset();
  }
  save_dataset(train, (dir.path / "train.jsonl").string());
  save_dataset(test, (dir.path / "test.jsonl").string());

  ExperimentConfig cfg;
  cfg.datasets["toy"] = DatasetPaths{(dir.path / "train.jsonl").string(),
                                     (dir.path / "test.jsonl").string(), "", ""};
  cfg.model.input.word_dim = 12;
  cfg.model.input.posn_dim = 8;
  cfg.model.input.post_dim = 4;
  cfg.model.input.dropout_rate = 0.2;
  cfg.model.input.max_distance = 20;
  cfg.model.input.train_word_embeddings = true;
  cfg.model.encoder.hidden_dim = 12;
  cfg.model.encoder.onlstm_chunk_factor = 2;
  cfg.train.learning_rate = 1e-2;
  cfg.train.epochs = 25;
  cfg.train.batch_size = 8;
  cfg.train.seed = 1;
  cfg.grid.datasets = {"toy"};
  cfg.grid.encoders = {EncoderKind::BILSTM};
  cfg.grid.modes = {InputMode::G};
  cfg.grid.gcn_flags = {false, true};
  cfg.grid.seeds = 2;
  cfg.grid.gcn_k = 1;
  return cfg;
}

}  // namespace

TEST_CASE("a small grid runs, renders, and is deterministic") {
  TempDir dir;
  ExperimentConfig cfg = tiny_grid_config(dir);
  GridReport a = run_grid(cfg, 2);
  REQUIRE(a.cells.size() == 2);
  for (const CellResult& cell : a.cells) {
    CAPTURE(cell.error);
    CHECK(cell.ok);
    CHECK(cell.report.per_seed.size() == 2);
    CHECK(cell.report.mean_f1 >= 0.5);  // the toy task is easy
  }
  CHECK(a.cell(1, 0).gcn_layers == 1);

  GridReport b = run_grid(cfg, 1);
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].report.mean_f1 == b.cells[i].report.mean_f1);
    CHECK(a.cells[i].report.mean_precision == b.cells[i].report.mean_precision);
  }

  std::string table = render_grid_table(a);
  CHECK(table.find("BiLSTM(G)") != std::string::npos);
  CHECK(table.find("BiLSTM+GCN(G)") != std::string::npos);
  CHECK(table.find("Avg.F1") != std::string::npos);

  nlohmann::json j = grid_report_to_json(a);
  CHECK(j["cells"].size() == 2);
  CHECK(j["cells"][0]["ok"].get<bool>());
}

TEST_CASE("ablation rows drop the named components") {
  TempDir dir;
  ExperimentConfig cfg = tiny_grid_config(dir);
  cfg.grid.gcn_flags = {true};
  cfg.grid.seeds = 1;
  cfg.grid.ablations = {{"gcn"}, {"gcn", "post"}, {"gcn", "post", "posn"}};
  GridReport report = run_grid(cfg, 2);
  REQUIRE(report.row_labels.size() == 4);
  CHECK(report.row_labels[0] == "BiLSTM+GCN(G)");
  CHECK(report.row_labels[1] == "BiLSTM+GCN(G) --- GCN");
  CHECK(report.row_labels[2] == "BiLSTM+GCN(G) --- GCN, POST");
  CHECK(report.row_labels[3] == "BiLSTM+GCN(G) --- GCN, POST, POSN");
  for (const CellResult& cell : report.cells) {
    CAPTURE(cell.model_label);
    CAPTURE(cell.error);
    CHECK(cell.ok);
  }
  // dropping position information collapses the position-defined toy task
  CHECK(report.cell(0, 0).report.mean_f1 >= 0.5);
  CHECK(report.cell(3, 0).report.mean_f1 < report.cell(0, 0).report.mean_f1);
}

TEST_CASE("cell failures are isolated and recorded") {
  TempDir dir;
  ExperimentConfig cfg = tiny_grid_config(dir, /*with_parses=*/false);
  GridReport report = run_grid(cfg, 1);
  REQUIRE(report.cells.size() == 2);
  CHECK(report.cells[0].ok);        // plain BiLSTM needs no parses
  CHECK_FALSE(report.cells[1].ok);  // the GCN row cannot build adjacency
  CHECK(report.cells[1].error.find("heads") != std::string::npos);
  std::string table = render_grid_table(report);
  CHECK(table.find("FAILED") != std::string::npos);
}
