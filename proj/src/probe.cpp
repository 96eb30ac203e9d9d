#include "braidforge/probe.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "braidforge/error.hpp"

namespace braidforge {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

const BraidWord& canonical_rep(const KnotClass& c) {
  for (std::size_t r = 0; r < c.reps.size(); ++r) {
    const int idx = c.rep_indices.empty() ? static_cast<int>(r) : c.rep_indices[r];
    if (idx == c.canonical_index) return c.reps[r];
  }
  if (c.reps.empty()) throw Error(Errc::DegenerateInput, "class without representatives");
  return c.reps.front();
}

MatrixXd gather(const MatrixXd& M, const std::vector<Index>& rows) {
  MatrixXd out(static_cast<Index>(rows.size()), M.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = M.row(rows[i]);
  return out;
}

// Column standardisation with statistics from `fit_rows`.
MatrixXd standardise(const MatrixXd& M, const std::vector<Index>& fit_rows) {
  const MatrixXd F = gather(M, fit_rows);
  const VectorXd mean = F.colwise().mean().transpose();
  MatrixXd out = M.rowwise() - mean.transpose();
  for (Index c = 0; c < M.cols(); ++c) {
    const double sd = std::sqrt((F.col(c).array() - mean(c)).square().mean());
    if (sd > 1e-12) out.col(c) /= sd;
  }
  return out;
}

double mse(const MatrixXd& a, const MatrixXd& b) {
  if (a.size() == 0) return 0.0;
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

}  // namespace

ProbeDataset build_probe_dataset(const Encoder& teacher, const InputEncoding& encoding, const KnotClassDataset& ds,
                                 int pc_count, double variance_cap) {
  if (ds.classes.size() < 2) throw Error(Errc::DegenerateInput, "probe needs at least two classes");
  ProbeDataset out;
  std::vector<BraidWord> padded;
  std::vector<BraidWord> simple;
  for (const auto& c : ds.classes) {
    out.class_ids.push_back(c.class_id);
    padded.push_back(canonical_rep(c));
    simple.push_back(simplify(c.canonical.empty() ? padded.back() : c.canonical));
  }
  const Index n = static_cast<Index>(padded.size());

  const MatrixXd X = encoding.encode_batch(padded);
  out.inputs["braid-word"] = X.transpose();

  const MatrixXd E = teacher.forward(X);
  const PCAModel pca = fit_pca(E);
  const int cap = std::max(1, effective_dim(pca, variance_cap));
  const int k = std::min({pc_count, static_cast<int>(E.rows()), cap});
  const PCAModel kept = pca.truncated(k);
  out.targets = kept.transform(E).transpose();
  out.explained_ratio.assign(kept.explained_ratio.data(), kept.explained_ratio.data() + k);

  out.padding = fit_padding(simple);
  const PaddingSpec& p = out.padding;
  MatrixXd jones(n, p.jones_length), alex(n, p.alexander_length);
  MatrixXd goeritz(n, static_cast<Index>(p.goeritz_dim) * p.goeritz_dim), scalars(n, 3);
  for (Index i = 0; i < n; ++i) {
    const InvariantFeatures f = invariant_features(simple[static_cast<std::size_t>(i)], p);
    for (std::size_t j = 0; j < f.jones_coeffs.size(); ++j) jones(i, static_cast<Index>(j)) = static_cast<double>(f.jones_coeffs[j]);
    for (std::size_t j = 0; j < f.alexander_coeffs.size(); ++j)
      alex(i, static_cast<Index>(j)) = static_cast<double>(f.alexander_coeffs[j]);
    for (std::size_t j = 0; j < f.goeritz_flat.size(); ++j)
      goeritz(i, static_cast<Index>(j)) = static_cast<double>(f.goeritz_flat[j]);
    const LaurentPolynomial a = f.alexander();
    scalars(i, 0) = static_cast<double>(f.determinant);
    scalars(i, 1) = f.jones_span;
    scalars(i, 2) = a.is_zero() ? 0.0 : a.max_exponent() - a.min_exponent();
  }
  out.inputs["jones"] = jones;
  out.inputs["alexander"] = alex;
  out.inputs["goeritz"] = goeritz;
  out.inputs["scalars"] = scalars;
  return out;
}

ProbeSplit split_probe_rows(Index rows, double validation_fraction, Rng& rng) {
  std::vector<Index> order(static_cast<std::size_t>(rows));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(rows)));
  if (rows >= 2) n_val = std::clamp<std::size_t>(n_val, 1, static_cast<std::size_t>(rows) - 1);
  ProbeSplit s;
  s.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

double target_variance(const MatrixXd& targets, const ProbeSplit& split) {
  const MatrixXd T = gather(targets, split.train);
  const MatrixXd V = gather(targets, split.validation);
  const VectorXd mean = T.colwise().mean().transpose();
  return (V.rowwise() - mean.transpose()).squaredNorm() / static_cast<double>(std::max<Index>(V.size(), 1));
}

StudentResult train_student(const MatrixXd& inputs, const MatrixXd& targets, const ProbeSplit& split,
                            const StudentConfig& cfg, Rng& rng) {
  if (inputs.rows() == 0 || inputs.cols() == 0 || split.train.empty())
    throw Error(Errc::DegenerateInput, "empty probe channel");
  if (inputs.rows() != targets.rows()) throw Error(Errc::ShapeMismatch, "probe inputs and targets differ in rows");
  const MatrixXd Z = standardise(inputs, split.train);
  const MatrixXd Xtr = gather(Z, split.train).transpose();
  const MatrixXd Ytr = gather(targets, split.train).transpose();
  const MatrixXd Xva = gather(Z, split.validation).transpose();
  const MatrixXd Yva = gather(targets, split.validation).transpose();

  StudentResult res;
  res.student = make_mlp(static_cast<int>(Z.cols()), static_cast<int>(targets.cols()), cfg.hidden, cfg.act);
  res.student.init_uniform(rng);
  Eigen::VectorXd best = res.student.parameters();
  res.best_val_mse = mse(res.student.forward(Xva), Yva);

  AdamState adam;
  adam.lr = cfg.lr;
  std::vector<Index> order(static_cast<std::size_t>(Xtr.cols()));
  std::iota(order.begin(), order.end(), Index{0});
  const auto bs = static_cast<std::size_t>(std::max(1, cfg.batch_size));
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      MatrixXd xb(Xtr.rows(), static_cast<Index>(end - start)), yb(Ytr.rows(), static_cast<Index>(end - start));
      for (std::size_t i = start; i < end; ++i) {
        xb.col(static_cast<Index>(i - start)) = Xtr.col(order[i]);
        yb.col(static_cast<Index>(i - start)) = Ytr.col(order[i]);
      }
      auto [loss, grad] = gradients(res.student, xb, [&](const MatrixXd& P) {
        LossAndGrad lg;
        lg.loss = mse(P, yb);
        lg.grad = 2.0 * (P - yb) / static_cast<double>(std::max<Index>(P.size(), 1));
        return lg;
      });
      adam_step(adam, res.student.parameters(), grad);
    }
    const double v = mse(res.student.forward(Xva), Yva);
    res.val_mse.push_back(v);
    if (v < res.best_val_mse) {
      res.best_val_mse = v;
      res.best_epoch = epoch;
      best = res.student.parameters();
    }
  }
  res.student.parameters() = best;
  return res;
}

double linear_probe(const MatrixXd& inputs, const MatrixXd& targets, const ProbeSplit& split, double ridge) {
  const MatrixXd Z = standardise(inputs, split.train);
  auto design = [&](const std::vector<Index>& rows) {
    MatrixXd D(static_cast<Index>(rows.size()), Z.cols() + 1);
    D.leftCols(Z.cols()) = gather(Z, rows);
    D.col(Z.cols()).setOnes();
    return D;
  };
  const MatrixXd A = design(split.train);
  const MatrixXd B = gather(targets, split.train);
  MatrixXd G = A.transpose() * A;
  G.diagonal().array() += ridge;
  const MatrixXd W = G.ldlt().solve(A.transpose() * B);
  return mse(design(split.validation) * W, gather(targets, split.validation));
}

MatrixXd shuffled_targets(const MatrixXd& targets, Rng& rng) {
  std::vector<Index> perm(static_cast<std::size_t>(targets.rows()));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  return gather(targets, perm);
}

ProbeReport compare_invariants(std::vector<ChannelResult> results) {
  std::sort(results.begin(), results.end(), [](const ChannelResult& a, const ChannelResult& b) {
    if (a.val_mse != b.val_mse) return a.val_mse < b.val_mse;
    return a.name < b.name;
  });
  for (std::size_t i = 0; i < results.size(); ++i) results[i].rank = static_cast<int>(i) + 1;
  ProbeReport r;
  r.channels = std::move(results);
  return r;
}

ProbeReport run_probe(const ProbeDataset& data, const StudentConfig& cfg, std::uint64_t seed, int workers) {
  Rng split_rng = stream_rng(seed, 0);
  const ProbeSplit split = split_probe_rows(data.rows(), cfg.validation_fraction, split_rng);
  std::vector<std::string> names;
  for (const auto& n : kProbeChannels)
    if (data.inputs.count(n)) names.push_back(n);
  std::vector<ChannelResult> results(names.size());

  auto work = [&](std::size_t c) {
    const MatrixXd& X = data.inputs.at(names[c]);
    Rng rng = stream_rng(seed, 1 + 3 * c);
    Rng shuffle_rng = stream_rng(seed, 2 + 3 * c);
    Rng twin_rng = stream_rng(seed, 3 + 3 * c);
    ChannelResult& r = results[c];
    r.name = names[c];
    r.val_mse = train_student(X, data.targets, split, cfg, rng).best_val_mse;
    r.shuffled_mse = train_student(X, shuffled_targets(data.targets, shuffle_rng), split, cfg, twin_rng).best_val_mse;
    r.linear_mse = linear_probe(X, data.targets, split);
  };
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t c = next++; c < names.size(); c = next++) work(c);
  };
  const int n_threads = std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(names.size(), 1)));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(loop);
  loop();
  for (auto& t : pool) t.join();

  ProbeReport report = compare_invariants(std::move(results));
  report.target_variance = target_variance(data.targets, split);
  report.target_width = static_cast<int>(data.targets.cols());
  report.seed = seed;
  std::string arch = "mlp";
  for (int h : cfg.hidden) arch += "-" + std::to_string(h);
  report.architecture = arch + "-" + activation_name(cfg.act);
  return report;
}

double rank_correlation(const ProbeReport& a, const ProbeReport& b) {
  std::map<std::string, int> rb;
  for (const auto& c : b.channels) rb[c.name] = c.rank;
  const auto n = static_cast<double>(a.channels.size());
  if (n < 2) return 1.0;
  double d2 = 0;
  for (const auto& c : a.channels) {
    const auto it = rb.find(c.name);
    if (it == rb.end()) throw Error(Errc::UnknownClass, "channel missing from second report: " + c.name);
    d2 += std::pow(c.rank - it->second, 2);
  }
  return 1.0 - 6.0 * d2 / (n * (n * n - 1));
}

json probe_report_to_json(const ProbeReport& r) {
  json channels = json::array();
  for (const auto& c : r.channels)
    channels.push_back({{"name", c.name},
                        {"rank", c.rank},
                        {"val_mse", c.val_mse},
                        {"shuffled_mse", c.shuffled_mse},
                        {"linear_mse", c.linear_mse},
                        {"ratio_to_variance", r.target_variance > 0 ? c.val_mse / r.target_variance : 0.0}});
  return {{"format", "bf-probe-1"},
          {"seed", r.seed},
          {"architecture", r.architecture},
          {"target_width", r.target_width},
          {"target_variance", r.target_variance},
          {"channels", channels}};
}

}  // namespace braidforge
