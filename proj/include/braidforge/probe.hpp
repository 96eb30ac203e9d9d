#pragma once

// Student-teacher probes: regress teacher embedding PCs from invariant
// features and compare how well each invariant reproduces them.

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "braidforge/analysis.hpp"
#include "braidforge/invariants.hpp"
#include "braidforge/neuralnet.hpp"
#include "json.hpp"

namespace braidforge {

inline const std::vector<std::string> kProbeChannels = {"braid-word", "jones", "alexander", "goeritz", "scalars"};

/// One row per class. Matrices are samples x features.
struct ProbeDataset {
  std::vector<int> class_ids;
  std::map<std::string, Eigen::MatrixXd> inputs;
  Eigen::MatrixXd targets;  ///< samples x retained PCs
  PaddingSpec padding;
  std::vector<double> explained_ratio;  ///< of the retained PCs

  Eigen::Index rows() const noexcept { return targets.rows(); }
};

/// Featurizes the canonical representative of every class. Invariants use the
/// simplified canonical word; the braid-word channel and the targets use its
/// padded form as the teacher saw it. The PC count is
/// min(pc_count, embedding dim, effective_dim(variance_cap)). Throws
/// PaddingOverflow, NotAKnot or DegenerateInput.
ProbeDataset build_probe_dataset(const Encoder& teacher, const InputEncoding& encoding, const KnotClassDataset& ds,
                                 int pc_count = 200, double variance_cap = 0.95);

struct StudentConfig {
  std::vector<int> hidden = {64, 64};
  Activation act = Activation::Tanh;
  int epochs = 2000;
  int batch_size = 64;
  double lr = 1e-3;
  double validation_fraction = 0.2;
};

struct StudentResult {
  double best_val_mse = 0.0;
  int best_epoch = 0;
  std::vector<double> val_mse;  ///< per epoch
  Encoder student;
};

/// Rows split by class into train and validation with `split_rng`. Inputs are
/// standardised with training-row statistics.
struct ProbeSplit {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> validation;
};
ProbeSplit split_probe_rows(Eigen::Index rows, double validation_fraction, Rng& rng);

/// Mean squared error over all entries of the validation targets around zero
/// mean, i.e. the error of the constant training-mean predictor up to sampling.
double target_variance(const Eigen::MatrixXd& targets, const ProbeSplit& split);

/// Throws DegenerateInput on an empty channel.
StudentResult train_student(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, const ProbeSplit& split,
                            const StudentConfig& cfg, Rng& rng);

/// Ridge-regularised least squares with intercept; validation MSE.
double linear_probe(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, const ProbeSplit& split,
                    double ridge = 1e-6);

/// Same rows with the targets permuted.
Eigen::MatrixXd shuffled_targets(const Eigen::MatrixXd& targets, Rng& rng);

struct ChannelResult {
  std::string name;
  double val_mse = 0.0;
  double shuffled_mse = 0.0;
  double linear_mse = 0.0;
  int rank = 0;  ///< 1 = lowest validation MSE
};

struct ProbeReport {
  std::vector<ChannelResult> channels;  ///< ranked
  double target_variance = 0.0;
  int target_width = 0;
  std::uint64_t seed = 0;
  std::string architecture;
};

/// Sorts by validation MSE (name as tie-break) and assigns ranks.
ProbeReport compare_invariants(std::vector<ChannelResult> results);

/// Trains a student, its shuffled twin and a linear probe per channel. Channel
/// c uses the streams derived from (seed, c); workers only affect speed.
ProbeReport run_probe(const ProbeDataset& data, const StudentConfig& cfg, std::uint64_t seed, int workers = 1);

/// Spearman correlation of two rankings over the same channel names.
double rank_correlation(const ProbeReport& a, const ProbeReport& b);

nlohmann::json probe_report_to_json(const ProbeReport& r);

}  // namespace braidforge
