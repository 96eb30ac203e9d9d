#include "braidforge/pipeline.hpp"

#include "braidforge/error.hpp"

namespace braidforge {

using nlohmann::json;

void TrainOptions::validate() const {
  loss.validate();
  if (arch != "mlp" && arch != "cnn") throw Error(Errc::InvalidParams, "arch must be mlp or cnn");
  if (embedding_dim < 1 || filters < 1) throw Error(Errc::InvalidParams, "embedding_dim and filters must be positive");
  for (int h : hidden)
    if (h < 1) throw Error(Errc::InvalidParams, "hidden widths must be positive");
  if (reps_held_out < 0) throw Error(Errc::InvalidParams, "reps_held_out must be nonnegative");
  if (ood_fraction < 0 || ood_fraction >= 1) throw Error(Errc::InvalidParams, "ood_fraction must be in [0, 1)");
  if (threshold <= 0 || threshold > 1) throw Error(Errc::InvalidParams, "threshold must be in (0, 1]");
}

json TrainOptions::to_json() const {
  return {{"loss", loss_kind_name(loss.kind)},
          {"kappa", loss.kappa},
          {"lambda", loss.lambda},
          {"batch_size", loss.batch_size},
          {"epochs", loss.epochs},
          {"lr", loss.lr},
          {"patience", loss.patience},
          {"ema_decay", loss.ema_decay},
          {"full_refresh", loss.full_refresh},
          {"arch", arch},
          {"scheme", scheme_name(scheme)},
          {"embedding_dim", embedding_dim},
          {"hidden", hidden},
          {"filters", filters},
          {"seed", seed},
          {"reps_held_out", reps_held_out},
          {"ood_fraction", ood_fraction},
          {"threshold", threshold}};
}

TrainOptions TrainOptions::from_json(const json& j) {
  try {
    TrainOptions o;
    o.loss.kind = loss_kind_from_name(j.at("loss").get<std::string>());
    o.loss.kappa = j.at("kappa").get<double>();
    o.loss.lambda = j.at("lambda").get<double>();
    o.loss.batch_size = j.at("batch_size").get<int>();
    o.loss.epochs = j.at("epochs").get<int>();
    o.loss.lr = j.at("lr").get<double>();
    o.loss.patience = j.at("patience").get<int>();
    o.loss.ema_decay = j.at("ema_decay").get<double>();
    o.loss.full_refresh = j.at("full_refresh").get<bool>();
    o.arch = j.at("arch").get<std::string>();
    o.scheme = scheme_from_name(j.at("scheme").get<std::string>());
    o.embedding_dim = j.at("embedding_dim").get<int>();
    o.hidden = j.at("hidden").get<std::vector<int>>();
    o.filters = j.at("filters").get<int>();
    o.seed = j.at("seed").get<std::uint64_t>();
    o.reps_held_out = j.at("reps_held_out").get<int>();
    o.ood_fraction = j.at("ood_fraction").get<double>();
    o.threshold = j.at("threshold").get<double>();
    return o;
  } catch (const json::exception& e) {
    throw Error(Errc::FormatError, std::string("bad training options: ") + e.what());
  }
}

DatasetSplits make_splits(const KnotClassDataset& ds, const TrainOptions& opt) {
  Rng rng = stream_rng(opt.seed, kSplitStream);
  return split_dataset(ds, opt.reps_held_out, opt.ood_fraction, rng);
}

TrainRun run_training(const KnotClassDataset& ds, const TrainOptions& opt,
                      const std::function<void(const TrainLogRecord&)>& on_epoch) {
  opt.validate();
  TrainRun run;
  run.splits = make_splits(ds, opt);
  const InputEncoding encoding = InputEncoding::fit(ds, opt.scheme);
  Encoder enc = opt.arch == "mlp"
                    ? make_mlp(encoding.input_dim(), opt.embedding_dim, opt.hidden)
                    : make_circular_cnn(encoding.length, encoding.channels(), opt.filters, opt.embedding_dim, opt.hidden);
  Rng init = stream_rng(opt.seed, kInitStream);
  enc.init_uniform(init);
  Rng train = stream_rng(opt.seed, kTrainStream);
  run.result = train_contrastive(enc, encoding, run.splits, opt.loss, train, on_epoch);
  run.report = evaluate_splits(enc, encoding, run.splits, opt.threshold);
  run.checkpoint.encoder = std::move(enc);
  run.checkpoint.encoding = encoding;
  run.checkpoint.meta = {{"train", opt.to_json()},
                         {"best_epoch", run.result.best_epoch},
                         {"epochs_run", run.result.epochs_run},
                         {"dataset_params_seed", ds.params.seed}};
  return run;
}

ClusterReport evaluate_checkpoint(const Checkpoint& ckpt, const KnotClassDataset& ds, DatasetSplits* splits) {
  if (!ckpt.meta.contains("train")) throw Error(Errc::FormatError, "checkpoint lacks training options");
  const TrainOptions opt = TrainOptions::from_json(ckpt.meta["train"]);
  DatasetSplits s = make_splits(ds, opt);
  ClusterReport r = evaluate_splits(ckpt.encoder, ckpt.encoding, s, opt.threshold);
  if (splits != nullptr) *splits = std::move(s);
  return r;
}

json train_report_json(const TrainRun& run) {
  json j = report_to_json(run.report);
  j["train"] = run.checkpoint.meta["train"];
  j["best_epoch"] = run.result.best_epoch;
  j["epochs_run"] = run.result.epochs_run;
  return j;
}

}  // namespace braidforge
