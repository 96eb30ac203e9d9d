#pragma once

// End-to-end steps shared by the command-line tool and the acceptance run.

#include <functional>
#include <string>
#include <vector>

#include "braidforge/analysis.hpp"
#include "braidforge/contrastive.hpp"
#include "json.hpp"

namespace braidforge {

struct TrainOptions {
  LossConfig loss;
  std::string arch = "mlp";  ///< mlp | cnn
  Scheme scheme = Scheme::OneHot;
  int embedding_dim = 16;
  std::vector<int> hidden = {64, 64};
  int filters = 64;
  std::uint64_t seed = 0;
  int reps_held_out = 5;
  double ood_fraction = 0.1;
  double threshold = 0.95;

  /// Throws InvalidParams.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainOptions from_json(const nlohmann::json& j);
};

/// Random streams derived from the training seed.
inline constexpr std::uint64_t kSplitStream = 1000001;
inline constexpr std::uint64_t kInitStream = 1000002;
inline constexpr std::uint64_t kTrainStream = 1000003;

DatasetSplits make_splits(const KnotClassDataset& ds, const TrainOptions& opt);

struct TrainRun {
  Checkpoint checkpoint;  ///< meta carries the options under "train"
  TrainResult result;
  DatasetSplits splits;
  ClusterReport report;
};

TrainRun run_training(const KnotClassDataset& ds, const TrainOptions& opt,
                      const std::function<void(const TrainLogRecord&)>& on_epoch = {});

/// Rebuilds the splits recorded in the checkpoint and evaluates on them.
ClusterReport evaluate_checkpoint(const Checkpoint& ckpt, const KnotClassDataset& ds, DatasetSplits* splits = nullptr);

/// Report JSON with the run's options and best epoch.
nlohmann::json train_report_json(const TrainRun& run);

}  // namespace braidforge
