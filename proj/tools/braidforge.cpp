// braidforge command-line tool.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "braidforge/error.hpp"
#include "braidforge/oracle_client.hpp"
#include "braidforge/pipeline.hpp"
#include "braidforge/probe.hpp"
#include "braidforge/sampler.hpp"

using namespace braidforge;
using nlohmann::json;

namespace {

int default_workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// Every output gets the fully resolved options of its subcommand next to it.
void write_resolved_config(const CLI::App* sub, const std::string& output) {
  std::ofstream f(output + ".config.ini", std::ios::binary);
  f << "[" << sub->get_name() << "]\n" << sub->config_to_str(true, false);
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::trunc) {
  std::ofstream f(path, std::ios::binary | mode);
  if (!f) throw Error(Errc::FormatError, "cannot open " + path + " for writing");
  return f;
}

std::pair<double, double> parse_range(const std::string& s) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) {
      const double v = std::stod(s);
      return {v, v};
    }
    return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw Error(Errc::InvalidParams, "bad range '" + s + "', expected a or a:b");
  }
}

std::vector<double> linspace(std::pair<double, double> r, int steps) {
  std::vector<double> out;
  if (steps <= 1 || r.first == r.second) return {r.first};
  for (int i = 0; i < steps; ++i) out.push_back(r.first + (r.second - r.first) * i / (steps - 1));
  return out;
}

json poly_json(const LaurentPolynomial& p) { return {{"offset", p.offset()}, {"coeffs", p.coeffs()}}; }

// ---- generate ----

struct GenerateArgs {
  GenParams params;
  std::string out = "dataset.ndjson";
  int workers = default_workers();
};

int cmd_generate(const GenerateArgs& a, const CLI::App* sub) {
  const KnotClassDataset ds = generate_dataset(a.params, static_cast<unsigned>(a.workers));
  write_dataset(a.out, ds);
  write_resolved_config(sub, a.out);
  std::cerr << "wrote " << ds.classes.size() << " classes, " << ds.rep_count() << " representatives to " << a.out
            << "\n";
  return 0;
}

// ---- invariants ----

struct InvariantsArgs {
  std::string dataset;
  std::string out = "invariants.ndjson";
  int strand_cap = kDefaultStrandCap;
};

int cmd_invariants(const InvariantsArgs& a, const CLI::App* sub) {
  const KnotClassDataset ds = read_dataset(a.dataset);
  auto f = open_out(a.out);
  f << json{{"format", "bf-invariants-1"}, {"dataset", a.dataset}}.dump() << '\n';
  std::size_t errors = 0;
  for (const auto& c : ds.classes) {
    for (std::size_t r = 0; r < c.reps.size(); ++r) {
      json row{{"class_id", c.class_id}, {"rep_index", c.rep_indices.empty() ? static_cast<int>(r) : c.rep_indices[r]}};
      try {
        // Markov moves only, so the invariants are those of the representative
        const BraidWord w = simplify(c.reps[r]);
        row["simplified"] = {{"strands", w.strands()}, {"letters", w.letters()}};
        const JonesPolynomial j = jones_polynomial(w, a.strand_cap);
        row["jones"] = poly_json(j.poly);
        row["jones_root"] = j.root;
        row["jones_span"] = jones_span(j);
        row["determinant"] = knot_determinant(w);
        row["alexander"] = poly_json(alexander_polynomial(w));
        row["goeritz"] = reduce(goeritz_matrix(w)).entries;
      } catch (const Error& e) {
        row["error"] = e.what();
        ++errors;
      }
      f << row.dump() << '\n';
    }
  }
  write_resolved_config(sub, a.out);
  if (errors) std::cerr << errors << " rows failed; see their error fields\n";
  return 0;
}

// ---- train / eval ----

struct TrainArgs {
  std::string dataset;
  std::string out = "model.ckpt";
  std::string log;
  std::string report;
  std::string loss = "centroid-repulsion";
  std::string scheme = "one-hot";
  TrainOptions opt;
};

int cmd_train(TrainArgs a, const CLI::App* sub) {
  a.opt.loss.kind = loss_kind_from_name(a.loss);
  a.opt.scheme = scheme_from_name(a.scheme);
  const KnotClassDataset ds = read_dataset(a.dataset);
  const TrainRun run = run_training(ds, a.opt, [](const TrainLogRecord& r) {
    std::cerr << "epoch " << r.epoch << " loss " << r.loss;
    if (r.in_dist_acc) std::cerr << " in_dist_acc " << *r.in_dist_acc;
    std::cerr << "\n";
  });
  save_checkpoint(a.out, run.checkpoint);
  write_resolved_config(sub, a.out);
  const std::string log = a.log.empty() ? a.out + ".log.ndjson" : a.log;
  auto lf = open_out(log);
  write_train_log(lf, run.result.log);
  const std::string report = a.report.empty() ? a.out + ".report.json" : a.report;
  write_report(report, train_report_json(run));
  std::cerr << "best epoch " << run.result.best_epoch << ", in-distribution accuracy "
            << run.report.in_dist_accuracy.value_or(run.report.train_accuracy) << ", effective dim "
            << run.report.effective_dim << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out = "report.json";
};

int cmd_eval(const EvalArgs& a, const CLI::App* sub) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const KnotClassDataset ds = read_dataset(a.dataset);
  json j = report_to_json(evaluate_checkpoint(ckpt, ds));
  j["train"] = ckpt.meta.value("train", json::object());
  write_report(a.out, j);
  write_resolved_config(sub, a.out);
  return 0;
}

// ---- probe ----

struct ProbeArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out = "probe.json";
  int pcs = 200;
  double variance_cap = 0.95;
  StudentConfig student;
  std::uint64_t seed = 0;
  int workers = default_workers();
};

int cmd_probe(const ProbeArgs& a, const CLI::App* sub) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const KnotClassDataset ds = read_dataset(a.dataset);
  const ProbeDataset pd = build_probe_dataset(ckpt.encoder, ckpt.encoding, ds, a.pcs, a.variance_cap);
  const ProbeReport r = run_probe(pd, a.student, a.seed, a.workers);
  json j = probe_report_to_json(r);
  j["explained_ratio"] = pd.explained_ratio;
  auto f = open_out(a.out);
  f << j.dump(2) << '\n';
  write_resolved_config(sub, a.out);
  for (const auto& c : r.channels)
    std::cerr << c.rank << ". " << c.name << " val_mse " << c.val_mse << " shuffled " << c.shuffled_mse << "\n";
  return 0;
}

// ---- sample ----

struct SampleArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out = "samples.ndjson";
  std::string candidates = "candidates.ndjson";
  std::string mode = "gaussian";
  std::string sigma = "0.1:0.5";
  std::string temperature = "0.5:2";
  int steps = 5;
  int samples = 100;
  int class_id = -1;  ///< -1: the unknot class, else the first class
  std::string family = "gamma1";
  int a = 0;
  int b = 1;
  int from_class = -1;
  int to_class = -1;
  double span_cap = 0.0;
  std::uint64_t seed = 0;
  int workers = default_workers();
};

int cmd_sample(const SampleArgs& a, const CLI::App* sub) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const KnotClassDataset ds = read_dataset(a.dataset);
  DatasetSplits splits;
  evaluate_checkpoint(ckpt, ds, &splits);
  const EmbeddedSet train = embed_dataset(ckpt.encoder, ckpt.encoding, splits.train);
  const CentroidTable table = CentroidTable::from_embeddings(train.E, train.labels);
  if (table.size() == 0) throw Error(Errc::DegenerateInput, "no training classes");

  auto class_embeddings = [&](int id) {
    const KnotClass* c = ds.find_class(id);
    if (c == nullptr) throw Error(Errc::UnknownClass, "no class " + std::to_string(id));
    return Eigen::MatrixXd(ckpt.encoder.forward(ckpt.encoding.encode_batch(c->reps)));
  };
  const int start_class = a.class_id >= 0 ? a.class_id : ds.unknot_class().value_or(table.class_ids.front());

  Rng rng = stream_rng(a.seed, 0);
  auto out = open_out(a.out);
  out << json{{"format", "bf-sample-1"}, {"mode", a.mode}, {"seed", a.seed}}.dump() << '\n';
  std::vector<BraidWord> decoded;
  std::vector<json> provenance;
  auto record = [&](json j, const Eigen::VectorXd& e) {
    const int id = decode_class_id(e, table);
    j["decoded_class"] = id;
    const BraidWord w = decode_to_class(e, table, ds);
    j["strands"] = w.strands();
    j["letters"] = w.letters();
    out << j.dump() << '\n';
    decoded.push_back(w);
    provenance.push_back(j);
  };

  if (a.mode == "gaussian") {
    const Eigen::MatrixXd base = class_embeddings(start_class);
    for (double sigma : linspace(parse_range(a.sigma), a.steps))
      for (int s = 0; s < a.samples; ++s) {
        const Eigen::MatrixXd e = base.col(s % base.cols());
        record({{"sigma", sigma}, {"sample", s}, {"source_class", start_class}}, gaussian_perturb(e, sigma, rng).col(0));
      }
  } else if (a.mode == "temperature") {
    const Eigen::VectorXd c = table.centroids.col(table.index_of(start_class) < 0 ? 0 : table.index_of(start_class));
    const Eigen::VectorXd logits = -(table.centroids.colwise() - c).colwise().squaredNorm().transpose();
    for (double T : linspace(parse_range(a.temperature), a.steps)) {
      const Eigen::VectorXd p = temperature_softmax(logits, T);
      for (int s = 0; s < a.samples; ++s) {
        const int k = sample_index(p, rng);
        record({{"temperature", T}, {"sample", s}, {"source_class", start_class}}, table.centroids.col(k));
      }
    }
  } else if (a.mode == "trajectory") {
    TrajectorySpec spec;
    spec.family = trajectory_family_from_name(a.family);
    spec.a = a.a;
    spec.b = a.b;
    const int from = a.from_class >= 0 ? a.from_class : start_class;
    const int to = a.to_class >= 0 ? a.to_class : table.class_ids.back();
    Eigen::MatrixXd v = class_embeddings(from), w = class_embeddings(to);
    const Eigen::Index m = std::min(v.cols(), w.cols());
    spec.v = v.leftCols(m);
    spec.w = w.leftCols(m);
    const auto pts = trajectory_points(spec);
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (Eigen::Index k = 0; k < pts[i].cols(); ++k)
        record({{"family", a.family}, {"point", i}, {"vector", k}, {"from_class", from}, {"to_class", to}},
               pts[i].col(k));
  } else {
    throw Error(Errc::InvalidParams, "mode must be gaussian, temperature or trajectory");
  }

  const ScreenResult screened = screen_simple_jones(decoded, a.span_cap, a.workers);
  auto audit = open_out(a.candidates, std::ios::app);
  std::size_t flagged = 0;
  for (const auto& s : screened.kept) {
    if (!s.candidate) continue;
    ScreenResult one;
    one.kept.push_back(s);
    append_candidates(audit, one, a.seed, provenance[s.index]);
    ++flagged;
  }
  for (const auto& e : screened.errors) std::cerr << "sample " << e.index << ": " << e.message << "\n";
  write_resolved_config(sub, a.out);
  std::cerr << decoded.size() << " samples, " << screened.kept.size() << " with Jones span <= " << a.span_cap << ", "
            << flagged << " flagged\n";
  return 0;
}

// ---- oracle-check ----

struct OracleArgs {
  std::string endpoint;
  double timeout = 30.0;
  int knots = 5;
  int copies = 20;
  double tolerance = kVolumeTolerance;
  std::uint64_t seed = 0;
};

int cmd_oracle_check(const OracleArgs& a) {
  const std::string ep = resolve_oracle_endpoint(a.endpoint);
  if (ep.empty()) {
    std::cerr << "no oracle endpoint: pass --endpoint or set BRAIDFORGE_ORACLE\n";
    return 2;
  }
  OracleClient client(ep, std::chrono::milliseconds(static_cast<long>(a.timeout * 1000)));
  bool ok = true;
  auto report = [&](const std::string& what, bool pass) {
    std::cout << (pass ? "PASS " : "FAIL ") << what << "\n";
    ok = ok && pass;
  };
  const VolumeResult fig8 = client.query(BraidWord({1, -2, 1, -2}, 3));
  report("figure-eight volume", fig8.volume && std::abs(*fig8.volume - kFigureEightVolume) < 1e-6);
  report("trefoil not hyperbolic", client.query(BraidWord({1, 1, 1}, 2)).status == VolumeStatus::NotHyperbolic);
  report("unknot not hyperbolic", client.query(BraidWord({1}, 2)).status == VolumeStatus::NotHyperbolic);

  GenParams p;
  p.n_letters = 12;
  p.n_strands = 4;
  p.max_attempts = 100000;
  int checked = 0;
  for (std::uint64_t k = 0; checked < a.knots && k < 1000; ++k) {
    Rng rng = stream_rng(a.seed, k);
    const BraidWord base = random_knot(p, rng);
    const VolumeResult ref = client.query(base);
    if (ref.status != VolumeStatus::Hyperbolic) continue;
    bool all = true;
    for (int c = 0; c < a.copies; ++c) {
      const VolumeResult r = client.query(scramble(base, 10, rng));
      all = all && r.status == VolumeStatus::Hyperbolic && volumes_equal(r, ref, a.tolerance);
    }
    report("scrambles of " + base.to_string() + " agree", all);
    ++checked;
  }
  return ok ? 0 : 1;
}

void add_gen_options(CLI::App* s, GenParams& p) {
  s->add_option("--letters", p.n_letters, "letters per representative")->capture_default_str();
  s->add_option("--strands", p.n_strands, "strands")->capture_default_str();
  s->add_option("--scrambles", p.n_scrambles, "Markov moves per representative")->capture_default_str();
  s->add_option("--classes", p.n_classes, "knot classes")->capture_default_str();
  s->add_option("--reps", p.reps_per_class, "representatives per class")->capture_default_str();
  s->add_option("--seed", p.seed, "random seed")->capture_default_str();
  s->add_option("--seed-scrambles", p.M, "moves applied while creating each seed knot")->capture_default_str();
  s->add_option("--max-attempts", p.max_attempts, "retries per seed knot")->capture_default_str();
  s->add_flag("--include-unknot", p.include_unknot, "add an unknot class");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"braidforge: knot classes, invariants and contrastive encoders"};
  app.set_config("--config", "", "INI file with one section per subcommand");
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "generate a dataset of knot classes");
  add_gen_options(g, gen.params);
  g->add_option("--out", gen.out, "dataset file")->capture_default_str();
  g->add_option("--workers", gen.workers, "worker threads")->capture_default_str();

  InvariantsArgs inv;
  auto* i = app.add_subcommand("invariants", "invariant table for every representative");
  i->add_option("--dataset", inv.dataset, "dataset file")->required();
  i->add_option("--out", inv.out, "output table")->capture_default_str();
  i->add_option("--strand-cap", inv.strand_cap, "largest strand count for the bracket")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a contrastive encoder");
  t->add_option("--dataset", tr.dataset, "dataset file")->required();
  t->add_option("--out", tr.out, "checkpoint file")->capture_default_str();
  t->add_option("--log", tr.log, "training log (default <out>.log.ndjson)");
  t->add_option("--report", tr.report, "report (default <out>.report.json)");
  t->add_option("--loss", tr.loss, "triplet-semi-hard | centroid | centroid-repulsion")->capture_default_str();
  t->add_option("--kappa", tr.opt.loss.kappa, "margin")->capture_default_str();
  t->add_option("--lambda", tr.opt.loss.lambda, "repulsion weight")->capture_default_str();
  t->add_option("--batch", tr.opt.loss.batch_size, "batch size")->capture_default_str();
  t->add_option("--epochs", tr.opt.loss.epochs, "maximum epochs")->capture_default_str();
  t->add_option("--lr", tr.opt.loss.lr, "Adam learning rate")->capture_default_str();
  t->add_option("--patience", tr.opt.loss.patience, "early stopping patience in epochs")->capture_default_str();
  t->add_option("--ema-decay", tr.opt.loss.ema_decay, "centroid moving-average decay")->capture_default_str();
  t->add_flag("--full-refresh", tr.opt.loss.full_refresh, "recompute all centroids after every step");
  t->add_option("--arch", tr.opt.arch, "mlp | cnn")->capture_default_str();
  t->add_option("--scheme", tr.scheme, "signed-integer | one-hot")->capture_default_str();
  t->add_option("--embedding-dim", tr.opt.embedding_dim, "embedding size")->capture_default_str();
  t->add_option("--hidden", tr.opt.hidden, "hidden layer widths")->capture_default_str();
  t->add_option("--filters", tr.opt.filters, "convolution filters")->capture_default_str();
  t->add_option("--seed", tr.opt.seed, "random seed")->capture_default_str();
  t->add_option("--reps-held-out", tr.opt.reps_held_out, "in-distribution representatives per class")
      ->capture_default_str();
  t->add_option("--ood-fraction", tr.opt.ood_fraction, "fraction of classes held out")->capture_default_str();
  t->add_option("--threshold", tr.opt.threshold, "explained variance threshold")->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint on its splits");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  e->add_option("--dataset", ev.dataset, "dataset file")->required();
  e->add_option("--out", ev.out, "report file")->capture_default_str();

  ProbeArgs pr;
  auto* p = app.add_subcommand("probe", "regress embedding PCs from invariants");
  p->add_option("--checkpoint", pr.checkpoint, "teacher checkpoint")->required();
  p->add_option("--dataset", pr.dataset, "dataset file")->required();
  p->add_option("--out", pr.out, "probe report")->capture_default_str();
  p->add_option("--pcs", pr.pcs, "maximum target PCs")->capture_default_str();
  p->add_option("--variance-cap", pr.variance_cap, "explained variance kept")->capture_default_str();
  p->add_option("--epochs", pr.student.epochs, "student epochs")->capture_default_str();
  p->add_option("--lr", pr.student.lr, "student learning rate")->capture_default_str();
  p->add_option("--batch", pr.student.batch_size, "student batch size")->capture_default_str();
  p->add_option("--hidden", pr.student.hidden, "student hidden widths")->capture_default_str();
  p->add_option("--seed", pr.seed, "random seed")->capture_default_str();
  p->add_option("--workers", pr.workers, "worker threads")->capture_default_str();

  SampleArgs sa;
  auto* s = app.add_subcommand("sample", "sample embedding space and screen decoded words");
  s->add_option("--checkpoint", sa.checkpoint, "checkpoint file")->required();
  s->add_option("--dataset", sa.dataset, "dataset file")->required();
  s->add_option("--out", sa.out, "samples file")->capture_default_str();
  s->add_option("--candidates", sa.candidates, "audit file for flagged candidates (appended)")->capture_default_str();
  s->add_option("--mode", sa.mode, "gaussian | temperature | trajectory")->capture_default_str();
  s->add_option("--sigma", sa.sigma, "noise range a:b")->capture_default_str();
  s->add_option("--temperature", sa.temperature, "temperature range a:b")->capture_default_str();
  s->add_option("--steps", sa.steps, "settings across each range")->capture_default_str();
  s->add_option("--samples", sa.samples, "samples per setting")->capture_default_str();
  s->add_option("--class", sa.class_id, "source class (default: the unknot class)")->capture_default_str();
  s->add_option("--family", sa.family, "gamma1 | gamma2 | gamma3 | gamma4")->capture_default_str();
  s->add_option("--a", sa.a, "first trajectory coordinate")->capture_default_str();
  s->add_option("--b", sa.b, "second trajectory coordinate")->capture_default_str();
  s->add_option("--from-class", sa.from_class, "trajectory start class")->capture_default_str();
  s->add_option("--to-class", sa.to_class, "trajectory end class")->capture_default_str();
  s->add_option("--span-cap", sa.span_cap, "largest Jones span kept")->capture_default_str();
  s->add_option("--seed", sa.seed, "random seed")->capture_default_str();
  s->add_option("--workers", sa.workers, "worker threads")->capture_default_str();

  OracleArgs oa;
  auto* o = app.add_subcommand("oracle-check", "validate a volume sidecar");
  o->add_option("--endpoint", oa.endpoint, "exec:<cmd> | unix:<path> | tcp:<host>:<port>; BRAIDFORGE_ORACLE wins");
  o->add_option("--timeout", oa.timeout, "seconds per request")->capture_default_str();
  o->add_option("--knots", oa.knots, "random hyperbolic knots to check")->capture_default_str();
  o->add_option("--copies", oa.copies, "scrambled copies per knot")->capture_default_str();
  o->add_option("--tolerance", oa.tolerance, "volume tolerance")->capture_default_str();
  o->add_option("--seed", oa.seed, "random seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (g->parsed()) return cmd_generate(gen, g);
    if (i->parsed()) return cmd_invariants(inv, i);
    if (t->parsed()) return cmd_train(tr, t);
    if (e->parsed()) return cmd_eval(ev, e);
    if (p->parsed()) return cmd_probe(pr, p);
    if (s->parsed()) return cmd_sample(sa, s);
    if (o->parsed()) return cmd_oracle_check(oa);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 1;
}
