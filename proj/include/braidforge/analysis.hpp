#pragma once

// Embedding-space analysis: PCA, effective dimension, centroid tables and
// cluster statistics.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "braidforge/datagen.hpp"
#include "braidforge/neuralnet.hpp"
#include "json.hpp"

namespace braidforge {

/// Principal components of column samples. Rows of `components` are
/// orthonormal and ordered by decreasing variance; the largest-magnitude entry
/// of each row is positive.
struct PCAModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  ///< k x d
  Eigen::VectorXd variances;   ///< eigenvalues of the sample covariance
  Eigen::VectorXd explained_ratio;

  /// d x n -> k x n
  Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& Z) const;
  /// Keeps the leading `k` components.
  PCAModel truncated(int k) const;
};

/// X: d x n with n >= 2. Throws DegenerateInput.
PCAModel fit_pca(const Eigen::MatrixXd& X);

/// Smallest k whose cumulative explained ratio reaches `threshold`. Returns 0
/// when the data has no variance at all.
int effective_dim(const PCAModel& model, double threshold);

struct CentroidTable {
  std::vector<int> class_ids;  ///< ascending
  Eigen::MatrixXd centroids;   ///< dim x classes
  std::vector<int> counts;

  std::size_t size() const noexcept { return class_ids.size(); }
  /// Column of `class_id`, or -1.
  int index_of(int class_id) const noexcept;
  /// Column means per label. Labels need not be sorted.
  static CentroidTable from_embeddings(const Eigen::MatrixXd& E, const std::vector<int>& labels);
};

/// Euclidean argmin; ties go to the smallest class id. Throws DegenerateInput on an empty table.
int nearest_centroid_classify(const Eigen::VectorXd& e, const CentroidTable& table);

/// Fraction of columns whose nearest centroid carries their own label.
double nearest_centroid_accuracy(const Eigen::MatrixXd& E, const std::vector<int>& labels,
                                 const CentroidTable& table);

/// Nearest-centroid accuracy where each sample's own class centroid is
/// computed without that sample. Classes with a single sample are skipped.
double leave_one_out_accuracy(const Eigen::MatrixXd& E, const std::vector<int>& labels);

/// Every representative of `ds` as one column, with the class id per column.
struct EmbeddedSet {
  Eigen::MatrixXd E;
  std::vector<int> labels;
  std::vector<int> rep_indices;
};
EmbeddedSet embed_dataset(const Encoder& enc, const InputEncoding& encoding, const KnotClassDataset& ds);

struct ClusterStats {
  double mean_intra_spread = 0.0;       ///< mean distance of a sample to its class centroid
  double mean_inter_distance = 0.0;     ///< mean distance between distinct class centroids
  double spread_separation_ratio = 0.0;  ///< intra / inter
  std::vector<int> class_ids;
  std::vector<double> class_spread;
  std::vector<double> nearest_other_centroid;  ///< per class
};

ClusterStats cluster_stats(const Eigen::MatrixXd& E, const std::vector<int>& labels);

struct PlotPoint {
  std::string split;
  int class_id = 0;
  int rep_index = 0;
  double pc1 = 0.0;
  double pc2 = 0.0;
};

struct ClusterReport {
  double train_accuracy = 0.0;
  std::optional<double> in_dist_accuracy;
  std::optional<double> out_dist_loo_accuracy;
  ClusterStats train;
  std::optional<ClusterStats> in_dist;
  std::optional<ClusterStats> out_dist;
  double threshold = 0.95;
  int effective_dim = 0;
  std::vector<double> explained_ratio;
  std::vector<PlotPoint> plot;
};

/// Embeds every split. In-distribution accuracy uses centroids of the
/// training embeddings; PCA is fitted on the training embeddings.
ClusterReport evaluate_splits(const Encoder& enc, const InputEncoding& encoding, const DatasetSplits& splits,
                              double threshold = 0.95);

/// Classes whose canonical knots share a Jones polynomial. Equal Jones
/// polynomials do not prove equivalence, so this only reports collisions.
struct JonesCollisions {
  int classes = 0;
  int distinct = 0;                      ///< distinct Jones polynomials
  std::vector<std::vector<int>> groups;  ///< class ids, groups of two or more
  std::vector<int> failed;               ///< classes whose Jones could not be computed
};
JonesCollisions jones_collisions(const KnotClassDataset& ds, int strand_cap = 12);
nlohmann::json collisions_to_json(const JonesCollisions& c);

nlohmann::json report_to_json(const ClusterReport& r);
/// Writes {"format": "bf-report-1", ...} with `meta` merged in.
void write_report(const std::string& path, const nlohmann::json& report);

}  // namespace braidforge
