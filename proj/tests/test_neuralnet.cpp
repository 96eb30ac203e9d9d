#include <cstdio>
#include <filesystem>

#include "braidforge/error.hpp"
#include "braidforge/neuralnet.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace braidforge;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

TEST_CASE("neuralnet: encode_signed") {
  const VectorXd v = encode_signed(BraidWord({1, -1}, 2), 4, Scaler{});
  CHECK(v == (VectorXd(4) << 1, -1, 0, 0).finished());
  CHECK_THROWS_AS(encode_signed(BraidWord({1, 1, 1}, 2), 2, Scaler{}), Error);
}

TEST_CASE("neuralnet: fitted scaler centres the corpus") {
  KnotClassDataset ds;
  KnotClass c;
  c.reps = {BraidWord({1, -2, 3}, 4), BraidWord({-1, 2, -3}, 4), BraidWord({2, 2}, 3)};
  c.rep_indices = {0, 1, 2};
  ds.classes.push_back(c);
  const Scaler s = Scaler::fit(ds, 3);
  double sum = 0, sum_sq = 0;
  for (const auto& w : c.reps) {
    const VectorXd v = encode_signed(w, 3, s);
    sum += v.sum();
    sum_sq += v.squaredNorm();
  }
  CHECK(std::abs(sum / 9) < 1e-9);
  CHECK(sum_sq / 9 == doctest::Approx(1.0));
}

TEST_CASE("neuralnet: encode_one_hot") {
  CHECK(encode_one_hot(BraidWord({1}, 3), 3) == (MatrixXd(1, 4) << 1, 0, 0, 0).finished());
  CHECK(encode_one_hot(BraidWord({-1}, 3), 3) == (MatrixXd(1, 4) << 0, 1, 0, 0).finished());
  const MatrixXd e = encode_one_hot(BraidWord({}, 3), 3);
  CHECK(e.rows() == 0);
  CHECK(e.cols() == 4);
  CHECK_THROWS_AS(encode_one_hot(BraidWord({3}, 4), 3), Error);
}

TEST_CASE("neuralnet: zero weights give the bias") {
  Encoder enc({DenseSpec{3, 2, Activation::Identity}});
  enc.parameters().tail(2) << 0.5, -1.5;
  Rng rng(1);
  const MatrixXd out = enc.forward(random_matrix(3, 5, rng));
  for (Eigen::Index c = 0; c < 5; ++c) {
    CHECK(out(0, c) == 0.5);
    CHECK(out(1, c) == -1.5);
  }
}

TEST_CASE("neuralnet: shapes") {
  Encoder mlp = make_mlp(26, 16);
  CHECK(mlp.output_dim() == 16);
  CHECK(mlp.param_count() == 26 * 64 + 64 + 64 * 64 + 64 + 64 * 16 + 16);
  CHECK_THROWS_AS(mlp.forward(MatrixXd::Zero(25, 1)), Error);
  CHECK_THROWS_AS(Encoder({DenseSpec{3, 4}, DenseSpec{5, 2}}), Error);
  Encoder cnn = make_circular_cnn(10, 2, 8, 16);
  CHECK(cnn.input_dim() == 20);
  CHECK(cnn.forward(MatrixXd::Zero(20, 3)).rows() == 16);
}

TEST_CASE("neuralnet: forward is deterministic") {
  Rng rng(2);
  Encoder enc = make_circular_cnn(6, 1, 5, 4, {7});
  enc.init_uniform(rng);
  const MatrixXd X = random_matrix(6, 4, rng);
  CHECK(enc.forward(X) == enc.forward(X));
}

TEST_CASE("neuralnet: gradient check for every layer type and activation") {
  Rng rng(3);
  const Activation acts[] = {Activation::Tanh, Activation::LeakyRelu, Activation::Gelu, Activation::Identity};
  for (Activation a : acts) {
    for (int trial = 0; trial < 10; ++trial) {
      Encoder dense({DenseSpec{5, 4, a}, DenseSpec{4, 3, Activation::Identity}});
      dense.init_uniform(rng);
      CHECK(bftest::gradient_check(dense, random_matrix(5, 3, rng), random_matrix(3, 3, rng)) < 1e-4);

      Encoder conv({CircularConvSpec{5, 2, 4, a}, DenseSpec{4, 3, Activation::Identity}});
      conv.init_uniform(rng);
      CHECK(bftest::gradient_check(conv, random_matrix(10, 3, rng), random_matrix(3, 3, rng)) < 1e-4);
    }
  }
}

TEST_CASE("neuralnet: constant loss gives zero gradients") {
  Rng rng(4);
  Encoder enc = make_mlp(4, 3, {5});
  enc.init_uniform(rng);
  auto [loss, g] = gradients(enc, random_matrix(4, 6, rng), [](const MatrixXd& E) {
    return LossAndGrad{7.0, MatrixXd::Zero(E.rows(), E.cols())};
  });
  CHECK(loss == 7.0);
  CHECK(g.isZero(0.0));
}

TEST_CASE("neuralnet: linear net with squared loss matches the closed form") {
  Rng rng(5);
  Encoder enc({DenseSpec{3, 2, Activation::Identity}});
  enc.init_uniform(rng);
  const MatrixXd X = random_matrix(3, 8, rng), Y = random_matrix(2, 8, rng);
  auto [loss, g] = gradients(enc, X, [&](const MatrixXd& E) {
    return LossAndGrad{0.5 * (E - Y).squaredNorm(), E - Y};
  });
  Eigen::Map<const MatrixXd> W(enc.parameters().data(), 2, 3);
  Eigen::Map<const VectorXd> b(enc.parameters().data() + 6, 2);
  const MatrixXd resid = (W * X).colwise() + b - Y;
  const MatrixXd gW = resid * X.transpose();
  CHECK((Eigen::Map<const MatrixXd>(g.data(), 2, 3) - gW).norm() < 1e-12);
  CHECK((g.tail(2) - resid.rowwise().sum()).norm() < 1e-12);
}

TEST_CASE("neuralnet: circular conv is invariant under cyclic rotation") {
  Rng rng(6);
  Encoder enc = make_circular_cnn(12, 1, 16, 8, {10});
  enc.init_uniform(rng);
  const MatrixXd X = random_matrix(12, 1, rng);
  const VectorXd ref = enc.forward(X).col(0);
  for (int r = 1; r < 12; ++r) {
    MatrixXd R(12, 1);
    for (int i = 0; i < 12; ++i) R(i, 0) = X((i + r) % 12, 0);
    CHECK((enc.forward(R).col(0) - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("neuralnet: Adam") {
  AdamState st;
  VectorXd p = VectorXd::Constant(3, 1.0);
  adam_step(st, p, VectorXd::Zero(3));
  CHECK(p == VectorXd::Constant(3, 1.0));

  AdamState s2;
  VectorXd q = VectorXd::Zero(3);
  adam_step(s2, q, (VectorXd(3) << 2.0, -0.5, 1e-3).finished());
  // First bias-corrected step moves each coordinate by about lr against the gradient sign.
  CHECK(q(0) == doctest::Approx(-1e-3).epsilon(1e-4));
  CHECK(q(1) == doctest::Approx(1e-3).epsilon(1e-4));
  CHECK(q(2) == doctest::Approx(-1e-3).epsilon(1e-3));
  CHECK_THROWS_AS(adam_step(s2, q, VectorXd::Zero(2)), Error);
}

TEST_CASE("neuralnet: checkpoint round trip") {
  Rng rng(7);
  Checkpoint ck;
  ck.encoder = make_circular_cnn(6, 2, 4, 3, {5});
  ck.encoder.init_uniform(rng);
  ck.encoding.scheme = Scheme::OneHot;
  ck.encoding.length = 6;
  ck.encoding.n_strands = 2;
  ck.encoding.scaler = Scaler{0.1234567890123, 2.718281828459045};
  ck.meta = {{"note", "x"}};
  const auto path = (std::filesystem::temp_directory_path() / "bf_ckpt_test.bin").string();
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.encoder.layers() == ck.encoder.layers());
  CHECK(back.encoder.parameters() == ck.encoder.parameters());
  CHECK(back.encoding == ck.encoding);
  CHECK(back.meta == ck.meta);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_checkpoint(path), Error);
}
