#pragma once

// Contrastive objectives and the training loop.

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "braidforge/analysis.hpp"
#include "braidforge/datagen.hpp"
#include "braidforge/neuralnet.hpp"

namespace braidforge {

enum class LossKind { TripletSemiHard, Centroid, CentroidRepulsion };

std::string loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);

struct LossConfig {
  LossKind kind = LossKind::Centroid;
  double kappa = 1.0;
  double lambda = 1.0;
  int batch_size = 128;
  int epochs = 300;
  double lr = 1e-3;
  int patience = 20;  ///< epochs without in-distribution improvement
  double ema_decay = 0.9;
  /// Recompute every centroid from the full training set after each step
  /// instead of the per-batch moving average.
  bool full_refresh = false;

  /// Throws InvalidParams.
  void validate() const;
};

/// max(|a-p|^2 - |a-n|^2 + kappa, 0). Throws DimensionMismatch.
double triplet_loss(const Eigen::VectorXd& a, const Eigen::VectorXd& p, const Eigen::VectorXd& n, double kappa);

struct Triplet {
  int anchor = 0;
  int positive = 0;
  int negative = 0;
  bool operator==(const Triplet&) const = default;
};

/// For every (anchor, positive) pair, one negative drawn uniformly among those
/// with d(a,p) < d(a,n) < d(a,p) + kappa (squared distances). Throws NoTripletsFound.
std::vector<Triplet> mine_semi_hard(const Eigen::MatrixXd& E, const std::vector<int>& labels, double kappa, Rng& rng);

/// For every (anchor, positive) pair, the closest negative if it violates the
/// margin. May be empty.
std::vector<Triplet> mine_hardest(const Eigen::MatrixXd& E, const std::vector<int>& labels, double kappa);

/// Mean triplet loss over `triplets` with its embedding gradient.
LossAndGrad batch_triplet_loss(const Eigen::MatrixXd& E, const std::vector<Triplet>& triplets, double kappa);

/// Mean over classes present in `labels` of the mean squared distance to the
/// class centroid. Centroids are held fixed for the gradient. Throws UnknownClass.
LossAndGrad centroid_loss_grad(const CentroidTable& table, const Eigen::MatrixXd& E, const std::vector<int>& labels);
double centroid_loss(const CentroidTable& table, const Eigen::MatrixXd& E, const std::vector<int>& labels);

/// lambda * sum over ordered pairs i != j of max(kappa - |c_i - c_j|, 0).
double repulsion_term(const CentroidTable& table, double kappa, double lambda);

/// centroid_loss plus repulsion_term over the whole table.
double centroid_repulsion_loss(const CentroidTable& table, const Eigen::MatrixXd& E, const std::vector<int>& labels,
                               double kappa, double lambda);

/// Training-time repulsion: pairs restricted to classes present in the batch.
/// Centroid values come from the table; the gradient reaches each batch member
/// of class i with weight 1 / (batch count of class i).
LossAndGrad centroid_repulsion_loss_grad(const CentroidTable& table, const Eigen::MatrixXd& E,
                                         const std::vector<int>& labels, double kappa, double lambda);

/// Centroids as class means of `E`.
CentroidTable update_centroids(const CentroidTable& table, const Eigen::MatrixXd& E, const std::vector<int>& labels);

struct TrainLogRecord {
  long step = 0;
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> in_dist_acc;
  std::optional<double> out_dist_acc;
};

struct TrainResult {
  std::vector<TrainLogRecord> log;
  int best_epoch = 0;
  double best_score = 0.0;
  int epochs_run = 0;
  CentroidTable centroids;  ///< from the full training set at the best epoch
};

/// Trains `enc` in place and restores the parameters of the best epoch (by
/// in-distribution nearest-centroid accuracy, falling back to training
/// accuracy when the in-distribution split is empty).
TrainResult train_contrastive(Encoder& enc, const InputEncoding& encoding, const DatasetSplits& splits,
                              const LossConfig& cfg, Rng& rng,
                              const std::function<void(const TrainLogRecord&)>& on_epoch = {});

void write_train_log(std::ostream& out, const std::vector<TrainLogRecord>& log);

}  // namespace braidforge
