#include "braidforge/analysis.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "braidforge/error.hpp"
#include "braidforge/invariants.hpp"

namespace braidforge {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

MatrixXd PCAModel::transform(const MatrixXd& X) const { return components * (X.colwise() - mean); }

MatrixXd PCAModel::inverse_transform(const MatrixXd& Z) const {
  return (components.transpose() * Z).colwise() + mean;
}

PCAModel PCAModel::truncated(int k) const {
  k = std::clamp(k, 0, static_cast<int>(components.rows()));
  PCAModel m;
  m.mean = mean;
  m.components = components.topRows(k);
  m.variances = variances.head(k);
  m.explained_ratio = explained_ratio.head(k);
  return m;
}

PCAModel fit_pca(const MatrixXd& X) {
  if (X.cols() < 2) throw Error(Errc::DegenerateInput, "PCA needs at least two samples");
  PCAModel m;
  m.mean = X.rowwise().mean();
  const MatrixXd centred = X.colwise() - m.mean;
  const MatrixXd cov = centred * centred.transpose() / static_cast<double>(X.cols() - 1);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  const Eigen::Index d = X.rows();
  m.components.resize(d, d);
  m.variances.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const Eigen::Index src = d - 1 - i;  // solver sorts ascending
    VectorXd v = eig.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    m.components.row(i) = v.transpose();
    m.variances(i) = std::max(0.0, eig.eigenvalues()(src));
  }
  const double total = m.variances.sum();
  m.explained_ratio = total > 0 ? VectorXd(m.variances / total) : VectorXd::Zero(d);
  return m;
}

int effective_dim(const PCAModel& model, double threshold) {
  double cum = 0.0;
  for (Eigen::Index k = 0; k < model.explained_ratio.size(); ++k) {
    if (model.explained_ratio(k) <= 0.0) break;
    cum += model.explained_ratio(k);
    if (cum >= threshold - 1e-12) return static_cast<int>(k) + 1;
  }
  Eigen::Index nonzero = 0;
  for (Eigen::Index k = 0; k < model.explained_ratio.size(); ++k)
    if (model.explained_ratio(k) > 0.0) ++nonzero;
  return static_cast<int>(nonzero);
}

int CentroidTable::index_of(int class_id) const noexcept {
  const auto it = std::lower_bound(class_ids.begin(), class_ids.end(), class_id);
  if (it == class_ids.end() || *it != class_id) return -1;
  return static_cast<int>(it - class_ids.begin());
}

CentroidTable CentroidTable::from_embeddings(const MatrixXd& E, const std::vector<int>& labels) {
  std::map<int, int> slot;
  for (int l : labels) slot.emplace(l, 0);
  CentroidTable t;
  for (auto& [id, s] : slot) {
    s = static_cast<int>(t.class_ids.size());
    t.class_ids.push_back(id);
  }
  t.centroids = MatrixXd::Zero(E.rows(), static_cast<Eigen::Index>(t.class_ids.size()));
  t.counts.assign(t.class_ids.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int s = slot[labels[i]];
    t.centroids.col(s) += E.col(static_cast<Eigen::Index>(i));
    ++t.counts[static_cast<std::size_t>(s)];
  }
  for (std::size_t s = 0; s < t.counts.size(); ++s)
    t.centroids.col(static_cast<Eigen::Index>(s)) /= static_cast<double>(t.counts[s]);
  return t;
}

int nearest_centroid_classify(const VectorXd& e, const CentroidTable& table) {
  if (table.size() == 0) throw Error(Errc::DegenerateInput, "empty centroid table");
  int best = 0;
  double best_d = (table.centroids.col(0) - e).squaredNorm();
  for (Eigen::Index j = 1; j < table.centroids.cols(); ++j) {
    const double d = (table.centroids.col(j) - e).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return table.class_ids[static_cast<std::size_t>(best)];
}

double nearest_centroid_accuracy(const MatrixXd& E, const std::vector<int>& labels, const CentroidTable& table) {
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (nearest_centroid_classify(E.col(static_cast<Eigen::Index>(i)), table) == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double leave_one_out_accuracy(const MatrixXd& E, const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  const CentroidTable full = CentroidTable::from_embeddings(E, labels);
  const MatrixXd sums = full.centroids.array().rowwise() *
                        Eigen::Map<const Eigen::VectorXi>(full.counts.data(), static_cast<Eigen::Index>(full.counts.size()))
                            .cast<double>()
                            .transpose()
                            .array();
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int own = full.index_of(labels[i]);
    const int n = full.counts[static_cast<std::size_t>(own)];
    if (n < 2) continue;
    ++total;
    const VectorXd e = E.col(static_cast<Eigen::Index>(i));
    const VectorXd own_c = (sums.col(own) - e) / static_cast<double>(n - 1);
    double best_d = (own_c - e).squaredNorm();
    int best = own;
    for (Eigen::Index j = 0; j < full.centroids.cols(); ++j) {
      if (j == own) continue;
      const double d = (full.centroids.col(j) - e).squaredNorm();
      if (d < best_d || (d == best_d && j < best)) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    if (best == own) ++hits;
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

EmbeddedSet embed_dataset(const Encoder& enc, const InputEncoding& encoding, const KnotClassDataset& ds) {
  std::vector<BraidWord> words;
  EmbeddedSet out;
  for (const auto& c : ds.classes) {
    for (std::size_t r = 0; r < c.reps.size(); ++r) {
      words.push_back(c.reps[r]);
      out.labels.push_back(c.class_id);
      out.rep_indices.push_back(c.rep_indices.empty() ? static_cast<int>(r) : c.rep_indices[r]);
    }
  }
  out.E = words.empty() ? MatrixXd(enc.output_dim(), 0) : enc.forward(encoding.encode_batch(words));
  return out;
}

ClusterStats cluster_stats(const MatrixXd& E, const std::vector<int>& labels) {
  ClusterStats s;
  if (labels.empty()) return s;
  const CentroidTable t = CentroidTable::from_embeddings(E, labels);
  s.class_ids = t.class_ids;
  s.class_spread.assign(t.size(), 0.0);
  double total_spread = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int j = t.index_of(labels[i]);
    const double d = (E.col(static_cast<Eigen::Index>(i)) - t.centroids.col(j)).norm();
    s.class_spread[static_cast<std::size_t>(j)] += d;
    total_spread += d;
  }
  for (std::size_t j = 0; j < t.size(); ++j) s.class_spread[j] /= static_cast<double>(t.counts[j]);
  s.mean_intra_spread = total_spread / static_cast<double>(labels.size());

  s.nearest_other_centroid.assign(t.size(), 0.0);
  double inter = 0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < t.size(); ++a) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < t.size(); ++b) {
      if (a == b) continue;
      const double d = (t.centroids.col(static_cast<Eigen::Index>(a)) - t.centroids.col(static_cast<Eigen::Index>(b))).norm();
      nearest = std::min(nearest, d);
      if (b > a) {
        inter += d;
        ++pairs;
      }
    }
    s.nearest_other_centroid[a] = t.size() > 1 ? nearest : 0.0;
  }
  s.mean_inter_distance = pairs ? inter / static_cast<double>(pairs) : 0.0;
  s.spread_separation_ratio = s.mean_inter_distance > 0 ? s.mean_intra_spread / s.mean_inter_distance : 0.0;
  return s;
}

ClusterReport evaluate_splits(const Encoder& enc, const InputEncoding& encoding, const DatasetSplits& splits,
                              double threshold) {
  ClusterReport r;
  r.threshold = threshold;
  const EmbeddedSet train = embed_dataset(enc, encoding, splits.train);
  const CentroidTable table = CentroidTable::from_embeddings(train.E, train.labels);
  r.train_accuracy = nearest_centroid_accuracy(train.E, train.labels, table);
  r.train = cluster_stats(train.E, train.labels);

  const PCAModel pca = fit_pca(train.E);
  r.effective_dim = effective_dim(pca, threshold);
  r.explained_ratio.assign(pca.explained_ratio.data(), pca.explained_ratio.data() + pca.explained_ratio.size());

  auto add_plot = [&](const std::string& name, const EmbeddedSet& set) {
    const MatrixXd Z = pca.truncated(2).transform(set.E);
    for (Eigen::Index i = 0; i < Z.cols(); ++i) {
      r.plot.push_back(PlotPoint{name, set.labels[static_cast<std::size_t>(i)],
                                 set.rep_indices[static_cast<std::size_t>(i)], Z.rows() > 0 ? Z(0, i) : 0.0,
                                 Z.rows() > 1 ? Z(1, i) : 0.0});
    }
  };
  add_plot("train", train);

  if (!splits.in_dist.classes.empty()) {
    const EmbeddedSet in = embed_dataset(enc, encoding, splits.in_dist);
    r.in_dist_accuracy = nearest_centroid_accuracy(in.E, in.labels, table);
    r.in_dist = cluster_stats(in.E, in.labels);
    add_plot("in_dist", in);
  }
  if (!splits.out_dist.classes.empty()) {
    const EmbeddedSet out = embed_dataset(enc, encoding, splits.out_dist);
    r.out_dist_loo_accuracy = leave_one_out_accuracy(out.E, out.labels);
    r.out_dist = cluster_stats(out.E, out.labels);
    add_plot("out_dist", out);
  }
  return r;
}

namespace {

json stats_to_json(const ClusterStats& s) {
  json classes = json::array();
  for (std::size_t i = 0; i < s.class_ids.size(); ++i) {
    classes.push_back({{"class_id", s.class_ids[i]},
                       {"spread", s.class_spread[i]},
                       {"nearest_other_centroid", s.nearest_other_centroid[i]}});
  }
  return json{{"mean_intra_spread", s.mean_intra_spread},
              {"mean_inter_distance", s.mean_inter_distance},
              {"spread_separation_ratio", s.spread_separation_ratio},
              {"classes", classes}};
}

}  // namespace

JonesCollisions jones_collisions(const KnotClassDataset& ds, int strand_cap) {
  JonesCollisions out;
  std::map<std::pair<int, std::vector<std::int64_t>>, std::vector<int>> by_poly;
  for (const auto& c : ds.classes) {
    ++out.classes;
    try {
      const JonesPolynomial j = jones_polynomial(simplify(c.canonical), strand_cap);
      auto key = j.poly.coeffs();
      key.push_back(j.root);
      by_poly[{j.poly.offset(), key}].push_back(c.class_id);
    } catch (const Error&) {
      out.failed.push_back(c.class_id);
    }
  }
  out.distinct = static_cast<int>(by_poly.size());
  for (auto& [key, ids] : by_poly)
    if (ids.size() > 1) out.groups.push_back(ids);
  std::sort(out.groups.begin(), out.groups.end());
  return out;
}

json collisions_to_json(const JonesCollisions& c) {
  return {{"classes", c.classes}, {"distinct_jones", c.distinct}, {"groups", c.groups}, {"failed", c.failed}};
}

json report_to_json(const ClusterReport& r) {
  json j{{"train_accuracy", r.train_accuracy},
         {"train", stats_to_json(r.train)},
         {"threshold", r.threshold},
         {"effective_dim", r.effective_dim},
         {"explained_ratio", r.explained_ratio}};
  j["in_dist_accuracy"] = r.in_dist_accuracy ? json(*r.in_dist_accuracy) : json(nullptr);
  j["out_dist_loo_accuracy"] = r.out_dist_loo_accuracy ? json(*r.out_dist_loo_accuracy) : json(nullptr);
  if (r.in_dist) j["in_dist"] = stats_to_json(*r.in_dist);
  if (r.out_dist) j["out_dist"] = stats_to_json(*r.out_dist);
  json plot = json::array();
  for (const auto& p : r.plot)
    plot.push_back({{"split", p.split}, {"class_id", p.class_id}, {"rep_index", p.rep_index}, {"pc1", p.pc1}, {"pc2", p.pc2}});
  j["plot_data"] = plot;
  return j;
}

void write_report(const std::string& path, const json& report) {
  json out = report;
  out["format"] = "bf-report-1";
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::FormatError, "cannot open " + path + " for writing");
  f << out.dump(2) << '\n';
  if (!f) throw Error(Errc::FormatError, "write failed for " + path);
}

}  // namespace braidforge
