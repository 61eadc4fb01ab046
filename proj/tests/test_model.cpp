#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "testutil.hpp"
#include "towe/model.hpp"

using namespace towe;
using ag::Var;

namespace {

MatD random_mat(Eigen::Index r, Eigen::Index c, std::mt19937& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  MatD m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = dist(rng);
  return m;
}

// Small BiLSTM(G)-shaped model for fast training tests.
ModelConfig tiny_model_config(bool posn = true, bool post = true, int gcn_layers = 0) {
  ModelConfig mc;
  mc.input.word_dim = 12;
  mc.input.posn_dim = 8;
  mc.input.post_dim = 4;
  mc.input.use_posn = posn;
  mc.input.use_post = post;
  mc.input.dropout_rate = 0.2;
  mc.input.max_distance = 20;
  mc.input.train_word_embeddings = true;
  mc.encoder.kind = EncoderKind::BILSTM;
  mc.encoder.hidden_dim = 16;
  mc.gcn.num_layers = gcn_layers;
  return mc;
}

}  // namespace

TEST_CASE("classifier probabilities behave like a softmax") {
  std::mt19937 rng(3);
  ag::ParameterCollection<double> pc;
  Classifier<double> cls(pc, 4, 3, rng);

  SUBCASE("zero hidden states and zero weights give uniform rows") {
    cls.w->value.setZero();
    ag::Tape<double> tape;
    MatD probs = cls.probs(tape, tape.input(MatD::Zero(3, 4))).value();
    for (Eigen::Index i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(probs(i, j) == doctest::Approx(1.0 / 3));
  }

  SUBCASE("rows sum to one with entries in (0,1)") {
    ag::Tape<double> tape;
    MatD probs = cls.probs(tape, tape.input(random_mat(5, 4, rng))).value();
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      CHECK(probs.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
      for (int j = 0; j < 3; ++j) {
        CHECK(probs(i, j) > 0.0);
        CHECK(probs(i, j) < 1.0);
      }
    }
  }

  SUBCASE("adding a constant to a row of logits changes nothing") {
    ag::Tape<double> tape;
    MatD logits = random_mat(2, 3, rng);
    MatD shifted = logits;
    shifted.row(1).array() += 17.5;
    MatD a = ag::softmax_rows(tape.input(logits)).value();
    MatD b = ag::softmax_rows(tape.input(shifted)).value();
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("matches the explicit exp/sum oracle") {
    ag::Tape<double> tape;
    MatD h = random_mat(2, 4, rng);
    MatD probs = cls.probs(tape, tape.input(h)).value();
    MatD logits = (h * cls.w->value).rowwise() + cls.b->value.row(0);
    for (Eigen::Index i = 0; i < 2; ++i) {
      std::vector<double> row{logits(i, 0), logits(i, 1), logits(i, 2)};
      std::vector<double> expect = oracle::softmax(row);
      for (int j = 0; j < 3; ++j)
        CHECK(probs(i, j) == doctest::Approx(expect[static_cast<std::size_t>(j)]).epsilon(1e-12));
    }
  }

  SUBCASE("classifier gradient check through softmax and cross entropy") {
    ag::ParameterCollection<double> gc;
    auto& h = gc.add("h", random_mat(3, 4, rng));
    Classifier<double> c2(gc, 4, 3, rng);
    double err = testing::max_grad_error(gc, [&](ag::Tape<double>& t) {
      return ag::cross_entropy_rows(c2.logits(t, ag::param(t, h)),
                                    std::vector<int>{0, 2, 1});
    });
    CHECK(err < 1e-4);
  }
}

TEST_CASE("token-level loss values") {
  MatD uniform = MatD::Constant(4, 3, 1.0 / 3);
  std::vector<BioTag> gold{BioTag::B, BioTag::O, BioTag::I, BioTag::O};
  CHECK(nll(uniform, gold) == doctest::Approx(std::log(3.0)));

  MatD onehot = MatD::Zero(2, 3);
  onehot(0, static_cast<int>(BioTag::B)) = 1.0;
  onehot(1, static_cast<int>(BioTag::O)) = 1.0;
  CHECK(nll(onehot, {BioTag::B, BioTag::O}) == 0.0);

  MatD probs(1, 3);
  probs << 0.7, 0.2, 0.1;
  CHECK(nll(probs, {BioTag::B}) == doctest::Approx(-std::log(0.7)));

  CHECK_THROWS_AS(nll(probs, {BioTag::B, BioTag::O}), DimensionError);
}

TEST_CASE("argmax labeling breaks ties toward O then B then I") {
  Eigen::Matrix<double, 1, Eigen::Dynamic> row(3);
  row << 1.0 / 3, 1.0 / 3, 1.0 / 3;
  CHECK(argmax_label<double>(row) == BioTag::O);
  row << 0.4, 0.4, 0.2;
  CHECK(argmax_label<double>(row) == BioTag::B);  // B/I tie goes to B
  row << 0.2, 0.4, 0.4;
  CHECK(argmax_label<double>(row) == BioTag::O);  // I/O tie goes to O
  row << 0.2, 0.5, 0.3;
  CHECK(argmax_label<double>(row) == BioTag::I);
  row << 0.1, 0.2, 0.7;
  CHECK(argmax_label<double>(row) == BioTag::O);

  // one-hot rows reproduce the gold labeling exactly
  MatD onehot = MatD::Zero(3, 3);
  onehot(0, static_cast<int>(BioTag::O)) = 1.0;
  onehot(1, static_cast<int>(BioTag::B)) = 1.0;
  onehot(2, static_cast<int>(BioTag::I)) = 1.0;
  std::vector<BioTag> expect{BioTag::O, BioTag::B, BioTag::I};
  for (int i = 0; i < 3; ++i) {
    Eigen::Matrix<double, 1, Eigen::Dynamic> r = onehot.row(i);
    CHECK(argmax_label<double>(r) == expect[static_cast<std::size_t>(i)]);
  }

  // positive scaling never changes the winner
  std::mt19937 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Matrix<double, 1, Eigen::Dynamic> r = random_mat(1, 3, rng);
    Eigen::Matrix<double, 1, Eigen::Dynamic> scaled = 3.7 * r;
    CHECK(argmax_label<double>(r) == argmax_label<double>(scaled));
  }
}

TEST_CASE("end-to-end gradient check on a tiny model") {
  ModelConfig mc;
  mc.input.word_dim = 4;
  mc.input.posn_dim = 3;
  mc.input.post_dim = 2;
  mc.input.dropout_rate = 0;
  mc.input.max_distance = 6;
  mc.input.train_word_embeddings = true;
  mc.encoder.hidden_dim = 3;
  mc.gcn.num_layers = 1;

  Instance inst = testing::chain_instance(4, {1, 2}, {{2, 3}});
  DatasetSplit split{"t", {inst}};
  std::vector<int> gold;
  for (BioTag t : inst.gold_labels) gold.push_back(static_cast<int>(t));

  for (EncoderKind kind : {EncoderKind::CNN, EncoderKind::TRANSFORMER,
                           EncoderKind::BILSTM, EncoderKind::ONLSTM}) {
    CAPTURE(to_string(kind));
    mc.encoder = default_encoder_config(kind);
    mc.encoder.hidden_dim = kind == EncoderKind::CNN ? 6 : 3;
    mc.encoder.transformer_layers = 1;
    mc.encoder.transformer_heads = 1;
    mc.encoder.transformer_ffn_dim = 6;
    mc.encoder.onlstm_chunk_factor = 3;
    ToweModel<double> model(mc, build_vocab(split), build_tagset(split), 11);
    double err = testing::max_grad_error(model.params(), [&](ag::Tape<double>& t) {
      return ag::cross_entropy_rows(model.logits(t, inst, false, nullptr, nullptr), gold);
    });
    CHECK(err < 1e-4);
  }
}

TEST_CASE("training on the positional toy corpus reaches high dev F1") {
  DatasetSplit split = testing::positional_corpus(10, 123);
  ToweModel<float> model(tiny_model_config(), build_vocab(split), build_tagset(split), 1);
  TrainConfig tc;
  tc.learning_rate = 1e-2;
  tc.epochs = 50;
  tc.batch_size = 4;
  tc.seed = 1;
  TrainResult result = train(model, split, tc);
  CHECK(result.best_dev_f1 >= 0.95);

  // best dev F1 is the running maximum of the curve
  double max_seen = 0;
  for (const EpochLog& e : result.curve) max_seen = std::max(max_seen, e.dev_f1);
  CHECK(result.best_dev_f1 == doctest::Approx(max_seen));
}

TEST_CASE("zero learning rate leaves parameters untouched") {
  DatasetSplit split = testing::positional_corpus(8, 7);
  ToweModel<float> model(tiny_model_config(), build_vocab(split), build_tagset(split), 2);
  std::vector<MatF> before = model.params().snapshot_values();
  TrainConfig tc;
  tc.learning_rate = 0;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.seed = 2;
  TrainResult result = train(model, split, tc);
  std::vector<MatF> after = model.params().snapshot_values();
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
  for (const EpochLog& e : result.curve) CHECK(e.dev_f1 == result.curve[0].dev_f1);
}

TEST_CASE("identical seeds give bitwise-identical training trajectories") {
  DatasetSplit split = testing::positional_corpus(12, 99);
  TrainConfig tc;
  tc.learning_rate = 5e-3;
  tc.epochs = 6;
  tc.batch_size = 4;
  tc.seed = 42;

  auto run = [&]() {
    ToweModel<float> model(tiny_model_config(), build_vocab(split), build_tagset(split), 42);
    return train(model, split, tc);
  };
  TrainResult a = run(), b = run();
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].train_loss == b.curve[i].train_loss);
    CHECK(a.curve[i].dev_f1 == b.curve[i].dev_f1);
  }
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  DatasetSplit split = testing::positional_corpus(6, 5);
  ToweModel<float> model(tiny_model_config(), build_vocab(split), build_tagset(split), 3);
  for (auto& p : model.params())
    if (p.name == "cls_w") p.value(0, 0) = std::numeric_limits<float>::quiet_NaN();
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 4;
  CHECK_THROWS_WITH_AS(train(model, split, tc), doctest::Contains("non-finite"), Error);
}

TEST_CASE("mode B training demands sidecar coverage before any compute") {
  DatasetSplit split = testing::positional_corpus(6, 11);
  ModelConfig mc = tiny_model_config();
  mc.input.mode = InputMode::B;
  mc.input.use_post = false;
  mc.input.word_dim = 10;
  ToweModel<float> model(mc, Vocab{}, Vocab{}, 4);
  TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(train(model, split, tc), InferenceError);

  ContextualStore<float> partial;
  partial.emplace(split.instances[0].sent_id, MatF::Random(split.instances[0].size(), 10));
  CHECK_THROWS_AS(train(model, split, tc, &partial), InferenceError);
}

TEST_CASE("mode B trains and predicts from fixed contextual vectors") {
  DatasetSplit split = testing::positional_corpus(8, 13);
  ModelConfig mc = tiny_model_config();
  mc.input.mode = InputMode::B;
  mc.input.use_post = false;
  mc.input.word_dim = 10;
  mc.input.posn_dim = 8;
  ToweModel<float> model(mc, Vocab{}, Vocab{}, 5);

  std::mt19937 rng(21);
  ContextualStore<float> store;
  for (const Instance& inst : split.instances)
    store.emplace(inst.sent_id, random_mat(inst.size(), 10, rng).cast<float>());

  TrainConfig tc;
  tc.learning_rate = 1e-2;
  tc.epochs = 5;
  tc.batch_size = 4;
  TrainResult result = train(model, split, tc, &store);
  CHECK(result.epochs_run == 5);

  const Instance& inst = split.instances[0];
  CHECK_THROWS_AS(model.predict(inst, nullptr), InferenceError);
  CHECK(model.predict(inst, &store.at(inst.sent_id)).size() ==
        static_cast<std::size_t>(inst.size()));
}

TEST_CASE("an untrained model scores near zero") {
  DatasetSplit split = testing::positional_corpus(40, 55);
  ToweModel<float> model(tiny_model_config(), build_vocab(split), build_tagset(split), 17);
  std::vector<std::vector<Span>> pred;
  for (const Instance& inst : split.instances) pred.push_back(model.predict_spans(inst));
  EvalReport r = score(pred, testing::gold_spans(split));
  CHECK(r.f1 < 0.2);
}

TEST_CASE("checkpoint round-trip reproduces predictions on 100 random instances") {
  DatasetSplit split = testing::positional_corpus(100, 77);
  ToweModel<float> model(tiny_model_config(true, true, 1), build_vocab(split),
                         build_tagset(split), 8);
  Checkpoint<float> ck = make_checkpoint(model);
  ToweModel<float> restored = model_from_checkpoint(ck);
  for (const Instance& inst : split.instances)
    CHECK(model.predict(inst) == restored.predict(inst));
}

TEST_CASE("a trained model distinguishes targets within one sentence") {
  DatasetSplit split = testing::positional_corpus(40, 321);
  ToweModel<float> model(tiny_model_config(), build_vocab(split), build_tagset(split), 6);
  TrainConfig tc;
  tc.learning_rate = 1e-2;
  tc.epochs = 40;
  tc.batch_size = 8;
  tc.seed = 6;
  TrainResult result = train(model, split, tc);
  REQUIRE(result.best_dev_f1 >= 0.9);

  Instance first = split.instances[0];
  first.target_span = {1, 2};
  Instance second = first;
  second.target_span = {4, 5};
  CHECK(model.predict_spans(first) == std::vector<Span>{{2, 3}});
  CHECK(model.predict_spans(second) == std::vector<Span>{{5, 6}});
}

TEST_CASE("gcn-enabled prediction requires parses") {
  DatasetSplit split = testing::positional_corpus(6, 15);
  ToweModel<float> model(tiny_model_config(true, true, 1), build_vocab(split),
                         build_tagset(split), 9);
  Instance inst = split.instances[0];
  for (Token& t : inst.tokens) t.head.reset();
  CHECK_THROWS_AS(model.predict(inst), PreconditionError);
}
