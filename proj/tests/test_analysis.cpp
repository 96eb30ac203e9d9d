#include <cmath>

#include "braidforge/analysis.hpp"
#include "braidforge/error.hpp"
#include "doctest.h"

using namespace braidforge;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd gaussian(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> n;
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

MatrixXd random_rotation(int d, Rng& rng) {
  Eigen::HouseholderQR<MatrixXd> qr(gaussian(d, d, rng));
  return qr.householderQ();
}

}  // namespace

TEST_CASE("analysis: PCA on single-axis data") {
  MatrixXd X = MatrixXd::Zero(3, 5);
  X.row(0) << 1, 2, 3, 4, 5;
  const PCAModel m = fit_pca(X);
  CHECK(m.explained_ratio(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(m.explained_ratio(1)) < 1e-9);
  CHECK(std::abs(m.explained_ratio(2)) < 1e-9);
  CHECK(effective_dim(m, 0.95) == 1);
  CHECK(m.components(0, 0) > 0);
}

TEST_CASE("analysis: PCA on an isotropic sample") {
  Rng rng(1);
  const PCAModel m = fit_pca(gaussian(2, 20000, rng));
  CHECK(m.explained_ratio(0) == doctest::Approx(0.5).epsilon(0.05));
  CHECK(m.explained_ratio(1) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("analysis: PCA components are orthonormal and invertible") {
  Rng rng(2);
  const MatrixXd X = gaussian(6, 40, rng);
  const PCAModel m = fit_pca(X);
  CHECK((m.components * m.components.transpose() - MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((m.inverse_transform(m.transform(X)) - X).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(m.explained_ratio.sum() <= 1 + 1e-8);
  CHECK(m.explained_ratio.minCoeff() >= 0);
  for (Eigen::Index r = 0; r < 6; ++r) {
    Eigen::Index arg;
    m.components.row(r).cwiseAbs().maxCoeff(&arg);
    CHECK(m.components(r, arg) > 0);
  }
  CHECK_THROWS_AS(fit_pca(MatrixXd::Zero(3, 1)), Error);
}

TEST_CASE("analysis: effective_dim") {
  PCAModel m;
  m.explained_ratio = (VectorXd(3) << 0.6, 0.3, 0.1).finished();
  CHECK(effective_dim(m, 0.85) == 2);
  CHECK(effective_dim(m, 1.0) == 3);
  m.explained_ratio = (VectorXd(4) << 0.7, 0.3, 0.0, 0.0).finished();
  CHECK(effective_dim(m, 1.0) == 2);
  int prev = 0;
  for (double t = 0.05; t <= 1.0; t += 0.05) {
    const int k = effective_dim(m, t);
    CHECK(k >= prev);
    prev = k;
  }
}

TEST_CASE("analysis: nearest centroid") {
  CentroidTable t;
  t.class_ids = {3, 7};
  t.centroids = (MatrixXd(1, 2) << -1.0, 1.0).finished();
  t.counts = {1, 1};
  CHECK(nearest_centroid_classify((VectorXd(1) << -1.0).finished(), t) == 3);
  CHECK(nearest_centroid_classify((VectorXd(1) << 0.0).finished(), t) == 3);
  CHECK(nearest_centroid_classify((VectorXd(1) << 0.2).finished(), t) == 7);
  CentroidTable one = CentroidTable::from_embeddings((MatrixXd(1, 1) << 5.0).finished(), {4});
  CHECK(nearest_centroid_classify((VectorXd(1) << -100.0).finished(), one) == 4);
  CHECK_THROWS_AS(nearest_centroid_classify(VectorXd::Zero(1), CentroidTable{}), Error);
}

TEST_CASE("analysis: nearest centroid is invariant under isometries") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd E = gaussian(4, 30, rng);
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) labels.push_back(i % 5);
    const CentroidTable t = CentroidTable::from_embeddings(E, labels);
    const MatrixXd Q = random_rotation(4, rng);
    const VectorXd shift = gaussian(4, 1, rng);
    CentroidTable moved = t;
    moved.centroids = (Q * t.centroids).colwise() + shift;
    const MatrixXd E2 = (Q * E).colwise() + shift;
    for (Eigen::Index i = 0; i < 30; ++i)
      CHECK(nearest_centroid_classify(E.col(i), t) == nearest_centroid_classify(E2.col(i), moved));
  }
}

TEST_CASE("analysis: accuracies and cluster statistics") {
  MatrixXd E(1, 6);
  E << 0.0, 0.0, 0.1, 10.0, 10.0, 10.1;
  const std::vector<int> labels{1, 1, 1, 2, 2, 2};
  const CentroidTable t = CentroidTable::from_embeddings(E, labels);
  CHECK(nearest_centroid_accuracy(E, labels, t) == 1.0);
  CHECK(leave_one_out_accuracy(E, labels) == 1.0);
  const ClusterStats s = cluster_stats(E, labels);
  CHECK(s.mean_inter_distance == doctest::Approx(10.0));
  CHECK(s.mean_intra_spread < 0.1);
  CHECK(s.class_ids == std::vector<int>{1, 2});
}

TEST_CASE("analysis: identical representatives give perfect in-distribution accuracy") {
  GenParams p;
  p.n_letters = 10;
  p.n_strands = 4;
  p.n_scrambles = 0;
  p.n_classes = 8;
  p.reps_per_class = 4;
  const KnotClassDataset ds = generate_dataset(p, 1);
  Rng rng(1);
  const DatasetSplits splits = split_dataset(ds, 1, 0.25, rng);
  const InputEncoding enc_cfg = InputEncoding::fit(ds, Scheme::SignedInteger);
  Encoder enc = make_mlp(enc_cfg.input_dim(), 4, {8});
  enc.init_uniform(rng);
  const ClusterReport r = evaluate_splits(enc, enc_cfg, splits);
  CHECK(r.train_accuracy == 1.0);
  REQUIRE(r.in_dist_accuracy);
  CHECK(*r.in_dist_accuracy == 1.0);
  CHECK(r.train.mean_intra_spread < 1e-12);
  CHECK(r.plot.size() == ds.rep_count());
  const auto j = report_to_json(r);
  CHECK(j.contains("plot_data"));
  CHECK(j["effective_dim"].get<int>() == r.effective_dim);
}

TEST_CASE("analysis: Jones collisions across classes") {
  KnotClassDataset ds;
  const std::vector<BraidWord> words{BraidWord({1, 1, 1}, 2), BraidWord({1, -2, 1, -2}, 3), BraidWord({1, 1, 1, 2}, 3),
                                     BraidWord({1}, 2), BraidWord({2, 1}, 3)};
  for (std::size_t i = 0; i < words.size(); ++i) {
    KnotClass c;
    c.class_id = static_cast<int>(i);
    c.canonical = words[i];
    c.reps = {words[i]};
    ds.classes.push_back(c);
  }
  const JonesCollisions j = jones_collisions(ds);
  CHECK(j.classes == 5);
  CHECK(j.distinct == 3);
  CHECK(j.groups == std::vector<std::vector<int>>{{0, 2}, {3, 4}});
  CHECK(collisions_to_json(j)["distinct_jones"] == 3);
}
