#include "braidforge/contrastive.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <ostream>

#include "braidforge/error.hpp"
#include "json.hpp"

namespace braidforge {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::TripletSemiHard:
      return "triplet-semi-hard";
    case LossKind::Centroid:
      return "centroid";
    case LossKind::CentroidRepulsion:
      return "centroid-repulsion";
  }
  return "centroid";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "triplet-semi-hard" || name == "triplet") return LossKind::TripletSemiHard;
  if (name == "centroid") return LossKind::Centroid;
  if (name == "centroid-repulsion") return LossKind::CentroidRepulsion;
  throw Error(Errc::InvalidParams, "unknown loss kind " + name);
}

void LossConfig::validate() const {
  if (!(kappa > 0)) throw Error(Errc::InvalidParams, "kappa must be positive");
  if (!(lambda >= 0)) throw Error(Errc::InvalidParams, "lambda must be nonnegative");
  if (batch_size < 2) throw Error(Errc::InvalidParams, "batch_size must be at least 2");
  if (epochs < 0) throw Error(Errc::InvalidParams, "epochs must be nonnegative");
  if (!(lr > 0)) throw Error(Errc::InvalidParams, "lr must be positive");
  if (patience < 1) throw Error(Errc::InvalidParams, "patience must be positive");
  if (!(ema_decay >= 0 && ema_decay < 1)) throw Error(Errc::InvalidParams, "ema_decay must lie in [0, 1)");
}

double triplet_loss(const VectorXd& a, const VectorXd& p, const VectorXd& n, double kappa) {
  if (a.size() != p.size() || a.size() != n.size()) throw Error(Errc::DimensionMismatch, "triplet dimensions differ");
  return std::max((a - p).squaredNorm() - (a - n).squaredNorm() + kappa, 0.0);
}

namespace {

MatrixXd squared_distances(const MatrixXd& E) {
  const VectorXd sq = E.colwise().squaredNorm().transpose();
  MatrixXd D = (-2.0 * E.transpose() * E).colwise() + sq;
  D.rowwise() += sq.transpose();
  return D.cwiseMax(0.0);
}

}  // namespace

std::vector<Triplet> mine_semi_hard(const MatrixXd& E, const std::vector<int>& labels, double kappa, Rng& rng) {
  const auto n = static_cast<int>(labels.size());
  std::vector<Triplet> out;
  std::vector<int> candidates;
  for (int a = 0; a < n; ++a) {
    for (int p = 0; p < n; ++p) {
      if (p == a || labels[static_cast<std::size_t>(p)] != labels[static_cast<std::size_t>(a)]) continue;
      const double dap = (E.col(a) - E.col(p)).squaredNorm();
      candidates.clear();
      for (int q = 0; q < n; ++q) {
        if (labels[static_cast<std::size_t>(q)] == labels[static_cast<std::size_t>(a)]) continue;
        const double dan = (E.col(a) - E.col(q)).squaredNorm();
        if (dap < dan && dan < dap + kappa) candidates.push_back(q);
      }
      if (candidates.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      out.push_back(Triplet{a, p, candidates[pick(rng)]});
    }
  }
  if (out.empty()) throw Error(Errc::NoTripletsFound, "no semi-hard triplets in batch");
  return out;
}

std::vector<Triplet> mine_hardest(const MatrixXd& E, const std::vector<int>& labels, double kappa) {
  const auto n = static_cast<int>(labels.size());
  const MatrixXd D = squared_distances(E);
  std::vector<Triplet> out;
  for (int a = 0; a < n; ++a) {
    int hardest = -1;
    for (int q = 0; q < n; ++q) {
      if (labels[static_cast<std::size_t>(q)] == labels[static_cast<std::size_t>(a)]) continue;
      if (hardest < 0 || D(a, q) < D(a, hardest)) hardest = q;
    }
    if (hardest < 0) continue;
    for (int p = 0; p < n; ++p) {
      if (p == a || labels[static_cast<std::size_t>(p)] != labels[static_cast<std::size_t>(a)]) continue;
      if (D(a, hardest) < D(a, p) + kappa) out.push_back(Triplet{a, p, hardest});
    }
  }
  return out;
}

LossAndGrad batch_triplet_loss(const MatrixXd& E, const std::vector<Triplet>& triplets, double kappa) {
  LossAndGrad lg{0.0, MatrixXd::Zero(E.rows(), E.cols())};
  if (triplets.empty()) return lg;
  const double w = 1.0 / static_cast<double>(triplets.size());
  for (const auto& t : triplets) {
    const VectorXd a = E.col(t.anchor), p = E.col(t.positive), n = E.col(t.negative);
    const double l = triplet_loss(a, p, n, kappa);
    if (l <= 0) continue;
    lg.loss += w * l;
    // d/da = 2(a-p) - 2(a-n) = 2(n-p); d/dp = -2(a-p); d/dn = 2(a-n)
    lg.grad.col(t.anchor) += w * 2.0 * (n - p);
    lg.grad.col(t.positive) += w * -2.0 * (a - p);
    lg.grad.col(t.negative) += w * 2.0 * (a - n);
  }
  return lg;
}

LossAndGrad centroid_loss_grad(const CentroidTable& table, const MatrixXd& E, const std::vector<int>& labels) {
  std::map<int, int> count;
  for (int l : labels) {
    if (table.index_of(l) < 0) throw Error(Errc::UnknownClass, "class " + std::to_string(l) + " has no centroid");
    ++count[l];
  }
  LossAndGrad lg{0.0, MatrixXd::Zero(E.rows(), E.cols())};
  if (labels.empty()) return lg;
  const double m = static_cast<double>(count.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const VectorXd diff = E.col(col) - table.centroids.col(table.index_of(labels[i]));
    const double w = 1.0 / (m * count[labels[i]]);
    lg.loss += w * diff.squaredNorm();
    lg.grad.col(col) = 2.0 * w * diff;
  }
  return lg;
}

double centroid_loss(const CentroidTable& table, const MatrixXd& E, const std::vector<int>& labels) {
  return centroid_loss_grad(table, E, labels).loss;
}

double repulsion_term(const CentroidTable& table, double kappa, double lambda) {
  double sum = 0;
  for (Eigen::Index i = 0; i < table.centroids.cols(); ++i)
    for (Eigen::Index j = 0; j < table.centroids.cols(); ++j)
      if (i != j) sum += std::max(kappa - (table.centroids.col(i) - table.centroids.col(j)).norm(), 0.0);
  return lambda * sum;
}

double centroid_repulsion_loss(const CentroidTable& table, const MatrixXd& E, const std::vector<int>& labels,
                               double kappa, double lambda) {
  return centroid_loss(table, E, labels) + repulsion_term(table, kappa, lambda);
}

LossAndGrad centroid_repulsion_loss_grad(const CentroidTable& table, const MatrixXd& E,
                                         const std::vector<int>& labels, double kappa, double lambda) {
  LossAndGrad lg = centroid_loss_grad(table, E, labels);
  if (lambda == 0.0) return lg;
  std::map<int, std::vector<Eigen::Index>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(static_cast<Eigen::Index>(i));
  std::vector<int> present;
  for (const auto& [id, _] : members) present.push_back(id);
  for (int ci : present) {
    const VectorXd c_i = table.centroids.col(table.index_of(ci));
    VectorXd dci = VectorXd::Zero(E.rows());
    for (int cj : present) {
      if (cj == ci) continue;
      const VectorXd diff = c_i - table.centroids.col(table.index_of(cj));
      const double d = diff.norm();
      if (d >= kappa) continue;
      // The (i, j) term; the (j, i) term is added when cj plays the outer role.
      lg.loss += lambda * (kappa - d);
      // Both ordered pairs depend on c_i with the same derivative.
      if (d > 0) dci += -2.0 * lambda * diff / d;
    }
    const auto& idx = members[ci];
    const double w = 1.0 / static_cast<double>(idx.size());
    for (Eigen::Index col : idx) lg.grad.col(col) += w * dci;
  }
  return lg;
}

CentroidTable update_centroids(const CentroidTable& table, const MatrixXd& E, const std::vector<int>& labels) {
  CentroidTable fresh = CentroidTable::from_embeddings(E, labels);
  if (table.size() == 0) return fresh;
  CentroidTable out = table;
  for (std::size_t j = 0; j < fresh.size(); ++j) {
    const int slot = out.index_of(fresh.class_ids[j]);
    if (slot < 0) return fresh;
    out.centroids.col(slot) = fresh.centroids.col(static_cast<Eigen::Index>(j));
    out.counts[static_cast<std::size_t>(slot)] = fresh.counts[j];
  }
  return out;
}

TrainResult train_contrastive(Encoder& enc, const InputEncoding& encoding, const DatasetSplits& splits,
                              const LossConfig& cfg, Rng& rng,
                              const std::function<void(const TrainLogRecord&)>& on_epoch) {
  cfg.validate();
  std::vector<BraidWord> words;
  std::vector<int> labels;
  for (const auto& c : splits.train.classes) {
    for (const auto& w : c.reps) {
      words.push_back(w);
      labels.push_back(c.class_id);
    }
  }
  if (words.empty()) throw Error(Errc::InvalidParams, "empty training set");
  const MatrixXd X = encoding.encode_batch(words);

  std::optional<MatrixXd> X_in, X_out;
  std::vector<int> labels_in, labels_out;
  auto collect = [&](const KnotClassDataset& ds, std::vector<int>& lab) {
    std::vector<BraidWord> ws;
    for (const auto& c : ds.classes)
      for (const auto& w : c.reps) {
        ws.push_back(w);
        lab.push_back(c.class_id);
      }
    return encoding.encode_batch(ws);
  };
  if (!splits.in_dist.classes.empty()) X_in = collect(splits.in_dist, labels_in);
  if (!splits.out_dist.classes.empty()) X_out = collect(splits.out_dist, labels_out);

  TrainResult result;
  AdamState adam;
  adam.lr = cfg.lr;
  CentroidTable table = CentroidTable::from_embeddings(enc.forward(X), labels);

  auto score_epoch = [&](TrainLogRecord& rec) {
    const MatrixXd E = enc.forward(X);
    table = CentroidTable::from_embeddings(E, labels);
    double score = 0;
    if (X_in) {
      rec.in_dist_acc = nearest_centroid_accuracy(enc.forward(*X_in), labels_in, table);
      score = *rec.in_dist_acc;
    } else {
      score = nearest_centroid_accuracy(E, labels, table);
    }
    if (X_out) rec.out_dist_acc = leave_one_out_accuracy(enc.forward(*X_out), labels_out);
    return score;
  };

  VectorXd best_params = enc.parameters();
  {
    TrainLogRecord rec;
    result.best_score = score_epoch(rec);
    result.centroids = table;
  }
  int since_best = 0;
  long step = 0;
  std::vector<std::size_t> order(words.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      if (end - start < 2) continue;
      MatrixXd Xb(X.rows(), static_cast<Eigen::Index>(end - start));
      std::vector<int> lb;
      for (std::size_t i = start; i < end; ++i) {
        Xb.col(static_cast<Eigen::Index>(i - start)) = X.col(static_cast<Eigen::Index>(order[i]));
        lb.push_back(labels[order[i]]);
      }
      Encoder::Tape tape;
      const MatrixXd E = enc.forward(Xb, tape);
      LossAndGrad lg;
      if (cfg.kind == LossKind::TripletSemiHard) {
        std::vector<Triplet> t;
        try {
          t = mine_semi_hard(E, lb, cfg.kappa, rng);
        } catch (const Error& e) {
          if (e.code() != Errc::NoTripletsFound) throw;
          t = mine_hardest(E, lb, cfg.kappa);
        }
        lg = batch_triplet_loss(E, t, cfg.kappa);
      } else if (cfg.kind == LossKind::Centroid) {
        lg = centroid_loss_grad(table, E, lb);
      } else {
        lg = centroid_repulsion_loss_grad(table, E, lb, cfg.kappa, cfg.lambda);
      }
      const VectorXd g = enc.backward(tape, lg.grad);
      adam_step(adam, enc.parameters(), g);
      ++step;
      loss_sum += lg.loss;
      ++batches;

      if (cfg.kind != LossKind::TripletSemiHard) {
        if (cfg.full_refresh) {
          table = CentroidTable::from_embeddings(enc.forward(X), labels);
        } else {
          const CentroidTable batch_means = CentroidTable::from_embeddings(E, lb);
          for (std::size_t j = 0; j < batch_means.size(); ++j) {
            const int slot = table.index_of(batch_means.class_ids[j]);
            table.centroids.col(slot) = cfg.ema_decay * table.centroids.col(slot) +
                                        (1.0 - cfg.ema_decay) * batch_means.centroids.col(static_cast<Eigen::Index>(j));
          }
        }
      }
    }

    TrainLogRecord rec;
    rec.step = step;
    rec.epoch = epoch;
    rec.loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    const double score = score_epoch(rec);
    result.log.push_back(rec);
    result.epochs_run = epoch;
    if (on_epoch) on_epoch(rec);
    if (score > result.best_score) {
      result.best_score = score;
      result.best_epoch = epoch;
      result.centroids = table;
      best_params = enc.parameters();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  enc.parameters() = best_params;
  return result;
}

void write_train_log(std::ostream& out, const std::vector<TrainLogRecord>& log) {
  for (const auto& r : log) {
    nlohmann::json j{{"step", r.step}, {"epoch", r.epoch}, {"loss", r.loss}};
    j["in_dist_acc"] = r.in_dist_acc ? nlohmann::json(*r.in_dist_acc) : nlohmann::json(nullptr);
    j["out_dist_acc"] = r.out_dist_acc ? nlohmann::json(*r.out_dist_acc) : nlohmann::json(nullptr);
    out << j.dump() << '\n';
  }
}

}  // namespace braidforge
