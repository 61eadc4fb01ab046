#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "testutil.hpp"
#include "towe/gcn.hpp"

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

MatD chain_adjacency(int n) {
  MatD a = MatD::Identity(n, n);
  for (int i = 1; i < n; ++i) {
    a(i, i - 1) = 1;
    a(i - 1, i) = 1;
  }
  return a;
}

}  // namespace

TEST_CASE("adjacency of a one-token sentence is the 1x1 identity") {
  Instance inst = testing::chain_instance(1, {0, 1}, {});
  MatD a = build_adjacency<double>(inst);
  CHECK(a.rows() == 1);
  CHECK(a(0, 0) == 1.0);
}

TEST_CASE("adjacency of a three-token chain has seven ones") {
  Instance inst = testing::chain_instance(3, {0, 1}, {{2, 3}});
  MatD a = build_adjacency<double>(inst);
  CHECK(a.sum() == doctest::Approx(7.0));  // 3 self-loops + 2 undirected edges
  CHECK(a == chain_adjacency(3));
}

TEST_CASE("adjacency is symmetric with a unit diagonal on random trees") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    std::uniform_int_distribution<int> len(1, 12);
    const int n = len(rng);
    Instance inst;
    inst.sent_id = "t";
    for (int i = 0; i < n; ++i) {
      int head = kRootHead;
      if (i > 0) {
        std::uniform_int_distribution<int> hd(0, i - 1);
        head = hd(rng);
      }
      inst.tokens.push_back(Token{i, "w", "NN", head});
    }
    inst.target_span = {0, 1};
    inst.gold_labels.assign(static_cast<std::size_t>(n), BioTag::O);
    MatD a = build_adjacency<double>(inst);
    CHECK(a == a.transpose().eval());
    CHECK(a.diagonal().minCoeff() == 1.0);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) CHECK((a(i, j) == 0.0 || a(i, j) == 1.0));
  }
}

TEST_CASE("adjacency requires joined parses") {
  Instance inst;
  inst.sent_id = "t";
  inst.tokens.push_back(Token{0, "w", "", std::nullopt});
  inst.target_span = {0, 1};
  inst.gold_labels = {BioTag::O};
  CHECK_THROWS_AS(build_adjacency<double>(inst), PreconditionError);
}

TEST_CASE("a zero weight matrix makes the layer an identity") {
  std::mt19937 rng(5);
  ag::Tape<double> tape;
  MatD h = random_mat(4, 3, rng);
  Var<double> out = gcn_layer<double>(tape, tape.input(h), tape.input(chain_adjacency(4)),
                                      tape.input(MatD::Zero(3, 3)));
  CHECK(out.value() == h);
}

TEST_CASE("single-node layer against hand arithmetic") {
  ag::Tape<double> tape;
  MatD h(1, 2);
  h << -2.0, 3.0;
  Var<double> out = gcn_layer<double>(tape, tape.input(h), tape.input(MatD::Ones(1, 1)),
                                      tape.input(MatD::Identity(2, 2)));
  CHECK(out.value()(0, 0) == -2.0);  // relu(-2) + -2
  CHECK(out.value()(0, 1) == 6.0);   // relu(3) + 3
}

TEST_CASE("layer equals the triple-loop oracle") {
  std::mt19937 rng(7);
  MatD h = random_mat(3, 4, rng), w = random_mat(4, 4, rng);
  MatD a = chain_adjacency(3);
  ag::Tape<double> tape;
  MatD got = gcn_layer<double>(tape, tape.input(h), tape.input(a), tape.input(w)).value();

  oracle::Grid prod = oracle::matmul(oracle::matmul(oracle::to_grid(a), oracle::to_grid(h)),
                                     oracle::to_grid(w));
  for (std::size_t i = 0; i < prod.size(); ++i)
    for (std::size_t j = 0; j < prod[0].size(); ++j)
      prod[i][j] = std::max(prod[i][j], 0.0) +
                   h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  CHECK(oracle::max_abs_diff(prod, got) < 1e-10);
}

TEST_CASE("output minus input is the non-negative relu term") {
  std::mt19937 rng(9);
  MatD h = random_mat(5, 3, rng), w = random_mat(3, 3, rng);
  ag::Tape<double> tape;
  MatD out =
      gcn_layer<double>(tape, tape.input(h), tape.input(chain_adjacency(5)), tape.input(w))
          .value();
  CHECK(((out - h).array() >= 0.0).all());
}

TEST_CASE("a token's update only sees its neighbors") {
  std::mt19937 rng(11);
  MatD h = random_mat(5, 3, rng), w = random_mat(3, 3, rng);
  MatD a = chain_adjacency(5);
  ag::Tape<double> tape;
  MatD base = gcn_layer<double>(tape, tape.input(h), tape.input(a), tape.input(w)).value();

  MatD perturbed = h;
  perturbed.row(4).array() += 10.0;  // token 4 is not adjacent to tokens 0..2
  MatD moved =
      gcn_layer<double>(tape, tape.input(perturbed), tape.input(a), tape.input(w)).value();
  for (int i = 0; i < 3; ++i)
    CHECK((moved.row(i) - base.row(i)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((moved.row(3) - base.row(3)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("relabeling tokens by a permutation is equivariant") {
  std::mt19937 rng(13);
  const int n = 5;
  MatD h = random_mat(n, 3, rng), w = random_mat(3, 3, rng);
  MatD a = chain_adjacency(n);
  std::vector<int> perm{2, 0, 4, 1, 3};
  MatD p = MatD::Zero(n, n);
  for (int i = 0; i < n; ++i) p(i, perm[static_cast<std::size_t>(i)]) = 1.0;

  ag::Tape<double> tape;
  MatD base = gcn_layer<double>(tape, tape.input(h), tape.input(a), tape.input(w)).value();
  MatD permuted = gcn_layer<double>(tape, tape.input(MatD(p * h)),
                                    tape.input(MatD(p * a * p.transpose())), tape.input(w))
                      .value();
  CHECK((permuted - p * base).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("layer parameters pass a tight gradient check") {
  std::mt19937 rng(17);
  ag::ParameterCollection<double> pc;
  auto& h = pc.add("h", random_mat(4, 3, rng));
  auto& w = pc.add("w", random_mat(3, 3, rng));
  MatD a = chain_adjacency(4);
  double err = testing::max_grad_error(pc, [&](ag::Tape<double>& t) {
    return ag::sum_all(gcn_layer<double>(t, ag::param(t, h), t.input(a), ag::param(t, w)));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("layer rejects mismatched shapes") {
  std::mt19937 rng(19);
  ag::Tape<double> tape;
  CHECK_THROWS_AS(gcn_layer<double>(tape, tape.input(random_mat(3, 4, rng)),
                                    tape.input(chain_adjacency(2)),
                                    tape.input(random_mat(4, 4, rng))),
                  DimensionError);
  CHECK_THROWS_AS(gcn_layer<double>(tape, tape.input(random_mat(3, 4, rng)),
                                    tape.input(chain_adjacency(3)),
                                    tape.input(random_mat(4, 2, rng))),
                  DimensionError);
}

TEST_CASE("stack with zero layers is the identity") {
  std::mt19937 rng(23);
  ag::ParameterCollection<double> pc;
  GcnStack<double> stack(pc, GcnConfig{0, false}, 3, rng);
  CHECK_FALSE(stack.enabled());
  ag::Tape<double> tape;
  Var<double> h = tape.input(random_mat(4, 3, rng));
  Var<double> out = stack.apply(tape, h, chain_adjacency(4));
  CHECK(out.id == h.id);
}

TEST_CASE("stack with zeroed weights propagates the input unchanged") {
  std::mt19937 rng(29);
  ag::ParameterCollection<double> pc;
  GcnStack<double> stack(pc, GcnConfig{2, false}, 3, rng);
  for (auto& p : pc) p.value.setZero();
  ag::Tape<double> tape;
  MatD h = random_mat(4, 3, rng);
  CHECK(stack.apply(tape, tape.input(h), chain_adjacency(4)).value() == h);
}

TEST_CASE("a two-layer stack equals manual composition") {
  std::mt19937 rng(31);
  ag::ParameterCollection<double> pc;
  GcnStack<double> stack(pc, GcnConfig{2, false}, 3, rng);
  std::vector<MatD> weights;
  for (auto& p : pc) weights.push_back(p.value);
  REQUIRE(weights.size() == 2);

  MatD h = random_mat(4, 3, rng);
  MatD a = chain_adjacency(4);
  ag::Tape<double> tape;
  MatD got = stack.apply(tape, tape.input(h), a).value();
  MatD manual = gcn_layer<double>(tape,
                                  gcn_layer<double>(tape, tape.input(h), tape.input(a),
                                                    tape.input(weights[0])),
                                  tape.input(a), tape.input(weights[1]))
                    .value();
  CHECK((got - manual).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("optional symmetric normalisation rescales rows by degree") {
  MatD a = chain_adjacency(3);
  MatD norm = normalize_adjacency<double>(a);
  // middle node has degree 3, the ends 2
  CHECK(norm(0, 0) == doctest::Approx(0.5));
  CHECK(norm(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)));
  CHECK(norm(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(norm == norm.transpose().eval());
}
