#include <cmath>
#include <sstream>

#include "braidforge/contrastive.hpp"
#include "braidforge/error.hpp"
#include "doctest.h"

using namespace braidforge;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd v1(double x) { return (VectorXd(1) << x).finished(); }

MatrixXd gaussian(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> n;
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

double numeric_grad_error(const std::function<double(const MatrixXd&)>& f, const MatrixXd& E, const MatrixXd& g) {
  double worst = 0;
  const double h = 1e-6;
  MatrixXd P = E;
  for (Eigen::Index i = 0; i < E.size(); ++i) {
    const double o = P.data()[i];
    P.data()[i] = o + h;
    const double up = f(P);
    P.data()[i] = o - h;
    const double down = f(P);
    P.data()[i] = o;
    worst = std::max(worst, std::abs((up - down) / (2 * h) - g.data()[i]));
  }
  return worst;
}

}  // namespace

TEST_CASE("contrastive: triplet loss") {
  const double kappa = 0.5;
  CHECK(triplet_loss(v1(0), v1(0), v1(std::sqrt(kappa)), kappa) == doctest::Approx(0.0));
  CHECK(triplet_loss(v1(0), v1(1), v1(0), 0.5) == doctest::Approx(1.5));
  CHECK(triplet_loss(v1(0), v1(0), v1(std::sqrt(2 * kappa)), kappa) == 0.0);
  CHECK_THROWS_AS(triplet_loss(v1(0), VectorXd::Zero(2), v1(0), 1.0), Error);
}

TEST_CASE("contrastive: semi-hard mining") {
  Rng rng(1);
  // Anchor 0 at 0, positive at 1 (d=1), negative at sqrt(1.5) (d=1.5).
  MatrixXd E(1, 3);
  E << 0.0, 1.0, std::sqrt(1.5);
  const auto t = mine_semi_hard(E, {0, 0, 1}, 1.0, rng);
  CHECK(std::find(t.begin(), t.end(), Triplet{0, 1, 2}) != t.end());

  MatrixXd far(1, 3);
  far << 0.0, 0.1, 100.0;
  CHECK_THROWS_AS(mine_semi_hard(far, {0, 0, 1}, 1.0, rng), Error);

  MatrixXd closer(1, 3);
  closer << 0.0, 1.0, 0.5;
  try {
    const auto ts = mine_semi_hard(closer, {0, 0, 1}, 1.0, rng);
    for (const auto& x : ts) CHECK_FALSE((x.anchor == 0 && x.negative == 2));
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoTripletsFound);
  }
}

TEST_CASE("contrastive: mined triples satisfy the semi-hard inequality") {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const MatrixXd E = gaussian(3, 24, rng);
    std::vector<int> labels;
    for (int i = 0; i < 24; ++i) labels.push_back(i % 6);
    std::vector<Triplet> ts;
    try {
      ts = mine_semi_hard(E, labels, 1.0, rng);
    } catch (const Error&) {
      continue;
    }
    for (const auto& t : ts) {
      const double dap = (E.col(t.anchor) - E.col(t.positive)).squaredNorm();
      const double dan = (E.col(t.anchor) - E.col(t.negative)).squaredNorm();
      CHECK(labels[static_cast<std::size_t>(t.anchor)] == labels[static_cast<std::size_t>(t.positive)]);
      CHECK(labels[static_cast<std::size_t>(t.anchor)] != labels[static_cast<std::size_t>(t.negative)]);
      CHECK(dap < dan);
      CHECK(dan < dap + 1.0);
    }
  }
}

TEST_CASE("contrastive: centroid loss values") {
  CentroidTable t;
  t.class_ids = {0};
  t.centroids = MatrixXd::Zero(1, 1);
  t.counts = {2};
  MatrixXd E(1, 2);
  E << -1.0, 1.0;
  CHECK(centroid_loss(t, E, {0, 0}) == doctest::Approx(1.0));
  CHECK(centroid_loss(t, MatrixXd::Zero(1, 2), {0, 0}) == 0.0);
  CHECK_THROWS_AS(centroid_loss(t, E, {0, 5}), Error);

  CentroidTable two;
  two.class_ids = {0, 1};
  two.centroids = (MatrixXd(1, 2) << 0.0, 10.0).finished();
  two.counts = {2, 1};
  MatrixXd F(1, 3);
  F << -1.0, 1.0, 12.0;
  CHECK(centroid_loss(two, F, {0, 0, 1}) == doctest::Approx((1.0 + 4.0) / 2));
}

TEST_CASE("contrastive: repulsion term") {
  CentroidTable t;
  t.class_ids = {0, 1};
  t.centroids = MatrixXd::Zero(2, 2);
  t.counts = {1, 1};
  CHECK(repulsion_term(t, 1.0, 1.0) == doctest::Approx(2.0));
  t.centroids(0, 1) = 1.5;
  CHECK(repulsion_term(t, 1.0, 1.0) == 0.0);
  MatrixXd E = t.centroids;
  CHECK(centroid_repulsion_loss(t, E, {0, 1}, 1.0, 0.0) == centroid_loss(t, E, {0, 1}));
}

TEST_CASE("contrastive: centroid loss decreases moving toward the centroid") {
  Rng rng(3);
  const MatrixXd E = gaussian(3, 12, rng);
  std::vector<int> labels;
  for (int i = 0; i < 12; ++i) labels.push_back(i % 3);
  const CentroidTable t = CentroidTable::from_embeddings(gaussian(3, 3, rng), {0, 1, 2});
  const double base = centroid_loss(t, E, labels);
  for (Eigen::Index i = 0; i < 12; ++i) {
    MatrixXd moved = E;
    const VectorXd c = t.centroids.col(t.index_of(labels[static_cast<std::size_t>(i)]));
    moved.col(i) = E.col(i) + 0.3 * (c - E.col(i));
    CHECK(centroid_loss(t, moved, labels) <= base);
  }
}

TEST_CASE("contrastive: loss gradients match finite differences") {
  Rng rng(4);
  const MatrixXd E = gaussian(3, 10, rng);
  std::vector<int> labels{0, 0, 1, 1, 1, 2, 2, 0, 3, 3};
  const CentroidTable t = CentroidTable::from_embeddings(gaussian(3, 4, rng) * 0.3, {0, 1, 2, 3});
  const LossAndGrad c = centroid_loss_grad(t, E, labels);
  CHECK(numeric_grad_error([&](const MatrixXd& M) { return centroid_loss(t, M, labels); }, E, c.grad) < 1e-6);

  std::vector<Triplet> ts{{0, 1, 2}, {2, 3, 0}, {5, 6, 8}};
  const LossAndGrad tl = batch_triplet_loss(E, ts, 5.0);
  CHECK(numeric_grad_error([&](const MatrixXd& M) { return batch_triplet_loss(M, ts, 5.0).loss; }, E, tl.grad) < 1e-6);

  // Repulsion gradient with centroids recomputed from the batch itself.
  auto rep = [&](const MatrixXd& M) {
    const CentroidTable own = CentroidTable::from_embeddings(M, labels);
    return centroid_repulsion_loss_grad(own, M, labels, 3.0, 0.7).loss - centroid_loss(own, M, labels);
  };
  const CentroidTable own = CentroidTable::from_embeddings(E, labels);
  const LossAndGrad rg = centroid_repulsion_loss_grad(own, E, labels, 3.0, 0.7);
  const LossAndGrad cg = centroid_loss_grad(own, E, labels);
  CHECK(numeric_grad_error(rep, E, rg.grad - cg.grad) < 1e-6);
  CHECK(rg.loss - cg.loss == doctest::Approx(repulsion_term(own, 3.0, 0.7)));
}

TEST_CASE("contrastive: update_centroids") {
  MatrixXd E(1, 3);
  E << 0.0, 2.0, 5.0;
  const CentroidTable t = update_centroids(CentroidTable{}, E, {1, 1, 2});
  CHECK(t.centroids(0, t.index_of(1)) == 1.0);
  CHECK(t.centroids(0, t.index_of(2)) == 5.0);
}

namespace {

DatasetSplits tiny_splits(std::uint64_t seed) {
  GenParams p;
  p.n_letters = 8;
  p.n_strands = 3;
  p.n_scrambles = 2;
  p.n_classes = 6;
  p.reps_per_class = 6;
  p.seed = seed;
  const KnotClassDataset ds = generate_dataset(p, 1);
  Rng rng(seed);
  return split_dataset(ds, 2, 0.0, rng);
}

}  // namespace

TEST_CASE("contrastive: zero epochs leave the encoder unchanged") {
  const DatasetSplits s = tiny_splits(1);
  const InputEncoding cfg_in = InputEncoding::fit(s.train, Scheme::SignedInteger);
  Rng rng(1);
  Encoder enc = make_mlp(cfg_in.input_dim(), 4, {8});
  enc.init_uniform(rng);
  const Eigen::VectorXd before = enc.parameters();
  LossConfig cfg;
  cfg.epochs = 0;
  const TrainResult r = train_contrastive(enc, cfg_in, s, cfg, rng);
  CHECK(enc.parameters() == before);
  CHECK(r.log.empty());
}

TEST_CASE("contrastive: training is reproducible for every loss kind") {
  const DatasetSplits s = tiny_splits(2);
  const InputEncoding cfg_in = InputEncoding::fit(s.train, Scheme::SignedInteger);
  for (LossKind kind : {LossKind::TripletSemiHard, LossKind::Centroid, LossKind::CentroidRepulsion}) {
    LossConfig cfg;
    cfg.kind = kind;
    cfg.epochs = 5;
    cfg.batch_size = 16;
    std::string logs[2];
    Eigen::VectorXd params[2];
    for (int run = 0; run < 2; ++run) {
      Rng rng(9);
      Encoder enc = make_mlp(cfg_in.input_dim(), 4, {8});
      enc.init_uniform(rng);
      const TrainResult r = train_contrastive(enc, cfg_in, s, cfg, rng);
      std::ostringstream os;
      write_train_log(os, r.log);
      logs[run] = os.str();
      params[run] = enc.parameters();
    }
    CHECK(logs[0] == logs[1]);
    CHECK(params[0] == params[1]);
    CHECK_FALSE(logs[0].empty());
  }
}

TEST_CASE("contrastive: invalid config") {
  LossConfig cfg;
  cfg.kappa = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_THROWS_AS(loss_kind_from_name("nope"), Error);
}
