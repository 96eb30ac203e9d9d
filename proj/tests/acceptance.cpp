// Acceptance run: one PASS/FAIL line per criterion. Exits 0 once every
// criterion has been evaluated, whatever the outcomes; 1 if the run itself
// breaks. Results are also written to acceptance_results.txt.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "braidforge/error.hpp"
#include "braidforge/invariants.hpp"
#include "braidforge/pipeline.hpp"
#include "braidforge/probe.hpp"
#include "braidforge/sampler.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace braidforge;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

std::ofstream results_file;
int passed = 0, total = 0;

void verdict(const std::string& name, bool ok, const std::string& detail) {
  ++total;
  if (ok) ++passed;
  std::ostringstream line;
  line << (ok ? "PASS " : "FAIL ") << name << ": " << detail;
  std::cout << line.str() << std::endl;
  results_file << line.str() << '\n' << std::flush;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << x;
  return os.str();
}

BraidWord generated_knot(Rng& rng, int max_strands, int max_len) {
  std::uniform_int_distribution<int> sd(2, max_strands);
  for (;;) {
    const int n = sd(rng);
    std::uniform_int_distribution<int> ld(1, max_len - (n - 1));
    const BraidWord w = knotify(random_braid(ld(rng), n, rng), rng);
    if (static_cast<int>(w.size()) <= max_len) return w;
  }
}

void markov_invariance() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  int jones_bad = 0, det_bad = 0;
  for (int k = 0; k < 100; ++k) {
    const BraidWord w = generated_knot(rng, 5, 30);
    const BraidWord m = scramble(w, 10, rng);
    if (jones_polynomial(w, 12) != jones_polynomial(m, 12)) ++jones_bad;
    if (knot_determinant(w) != knot_determinant(m)) ++det_bad;
  }
  verdict("markov-invariance", jones_bad == 0 && det_bad == 0,
          "100 knots x 10 moves, Jones mismatches " + std::to_string(jones_bad) + ", determinant mismatches " +
              std::to_string(det_bad) + ", " + fmt(seconds_since(t0), 3) + " s");
}

void bracket_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(102);
  int bad = 0;
  for (int k = 0; k < 200; ++k) {
    const BraidWord w = bftest::random_word(rng, 6, 14);
    if (kauffman_bracket(w) != bftest::state_sum_bracket(w)) ++bad;
  }
  verdict("bracket-oracle", bad == 0,
          "200 words of length <= 14, mismatches " + std::to_string(bad) + ", " + fmt(seconds_since(t0), 3) + " s");
}

void determinant_identity() {
  Rng rng(103);
  int bad = 0;
  for (int k = 0; k < 100; ++k) {
    const BraidWord w = generated_knot(rng, 5, 30);
    const std::int64_t a = alexander_polynomial(w).evaluate(std::int64_t{-1});
    const std::int64_t g = determinant(reduce(goeritz_matrix(w)));
    if (std::abs(a) != std::abs(g)) ++bad;
  }
  verdict("determinant-identity", bad == 0, "100 generated knots, mismatches " + std::to_string(bad));
}

MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

void gradient_correctness() {
  Rng rng(104);
  double worst = 0;
  const Activation acts[] = {Activation::Tanh, Activation::LeakyRelu, Activation::Gelu, Activation::Identity};
  for (int k = 0; k < 100; ++k) {
    const Activation a = acts[k % 4];
    Encoder dense({DenseSpec{6, 5, a}, DenseSpec{5, 3, Activation::Identity}});
    dense.init_uniform(rng);
    worst = std::max(worst, bftest::gradient_check(dense, random_matrix(6, 4, rng), random_matrix(3, 4, rng)));
    Encoder conv({CircularConvSpec{5, 2, 4, a}, DenseSpec{4, 3, Activation::Tanh}});
    conv.init_uniform(rng);
    worst = std::max(worst, bftest::gradient_check(conv, random_matrix(10, 4, rng), random_matrix(3, 4, rng)));
  }
  verdict("gradient-check", worst < 1e-4,
          "dense and circular-conv layers, 4 activations, 100 parameter points, worst relative error " + fmt(worst));
}

void cyclic_invariance() {
  Rng rng(105);
  const int length = 16, strands = 4;
  const InputEncoding enc_in{Scheme::OneHot, length, strands, {}};
  Encoder cnn = make_circular_cnn(length, enc_in.channels());
  cnn.init_uniform(rng);
  double worst = 0;
  for (int k = 0; k < 50; ++k) {
    BraidWord w = random_braid(length, strands, rng);
    const VectorXd ref = cnn.forward(enc_in.encode(w));
    for (int r = 1; r < length; ++r) {
      w = cyclic_rotate(w, 1);
      worst = std::max(worst, (cnn.forward(enc_in.encode(w)) - ref).cwiseAbs().maxCoeff());
    }
  }
  verdict("cyclic-invariance", worst < 1e-6, "50 inputs x all rotations, worst deviation " + fmt(worst));
}

GenParams desk_params(std::uint64_t seed) {
  GenParams p;
  p.n_letters = 16;
  p.n_strands = 4;
  p.n_scrambles = 5;
  p.n_classes = 200;
  p.reps_per_class = 20;
  p.seed = seed;
  p.include_unknot = true;
  p.max_attempts = 100000;
  return p;
}

TrainOptions desk_options(std::uint64_t seed) {
  TrainOptions o;
  o.loss.kind = LossKind::CentroidRepulsion;
  o.loss.kappa = 1.0;
  o.loss.lambda = 0.01;
  o.loss.batch_size = 128;
  o.loss.epochs = 300;
  o.loss.patience = 20;
  o.scheme = Scheme::OneHot;
  o.seed = seed;
  o.reps_held_out = 5;
  o.ood_fraction = 0.1;
  return o;
}

struct Teacher {
  KnotClassDataset ds;
  TrainRun run;
};

Teacher clustering(std::vector<Teacher>& runs) {
  const auto t0 = std::chrono::steady_clock::now();
  int seeds_ok = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto ts = std::chrono::steady_clock::now();
    Teacher t;
    t.ds = generate_dataset(desk_params(seed), 0);
    t.run = run_training(t.ds, desk_options(seed));
    const double acc = t.run.report.in_dist_accuracy.value_or(0.0);
    const int dim = t.run.report.effective_dim;
    const JonesCollisions col = jones_collisions(t.ds);
    const bool ok = acc >= 0.90 && dim <= 3;
    seeds_ok += ok;
    detail += "seed " + std::to_string(seed) + ": in-dist acc " + fmt(acc, 3) + ", effective dim " +
              std::to_string(dim) + ", classes with distinct Jones " + std::to_string(col.distinct) + "/" +
              std::to_string(col.classes) + ", " + fmt(seconds_since(ts), 3) + " s; ";
    runs.push_back(std::move(t));
  }
  verdict("desk-scale-clustering", seeds_ok >= 2,
          std::to_string(seeds_ok) + "/3 seeds reach acc >= 0.90 and dim <= 3 (" + detail + "total " +
              fmt(seconds_since(t0), 4) + " s)");
  return runs.front();
}

void probe(const Teacher& t) {
  const auto t0 = std::chrono::steady_clock::now();
  const ProbeDataset pd = build_probe_dataset(t.run.checkpoint.encoder, t.run.checkpoint.encoding, t.ds, 200, 0.95);
  const int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<ProbeReport> reports;
  for (std::uint64_t s : {1, 2, 3}) reports.push_back(run_probe(pd, StudentConfig{}, s, workers));
  bool twins = true;
  double braid_ratio = 0;
  for (const auto& r : reports)
    for (const auto& c : r.channels) {
      twins = twins && c.val_mse < c.shuffled_mse;
      if (c.name == "braid-word") braid_ratio = std::max(braid_ratio, c.val_mse / r.target_variance);
    }
  double corr = 1.0;
  for (std::size_t i = 0; i < reports.size(); ++i)
    for (std::size_t j = i + 1; j < reports.size(); ++j) corr = std::min(corr, rank_correlation(reports[i], reports[j]));
  std::string ranking;
  for (const auto& c : reports[0].channels)
    ranking += c.name + "=" + fmt(c.val_mse / reports[0].target_variance, 3) + "/" +
               fmt(c.shuffled_mse / reports[0].target_variance, 3) + " ";
  verdict("probe-baseline", braid_ratio < 0.05 && twins && corr >= 0.8,
          "target width " + std::to_string(pd.targets.cols()) + ", worst braid-word MSE/variance " +
              fmt(braid_ratio, 3) + ", every channel beats its shuffled twin: " + (twins ? "yes" : "no") +
              ", min rank correlation " + fmt(corr, 3) + ", seed-1 ranking (MSE/var real/shuffled): " + ranking +
              fmt(seconds_since(t0), 3) + " s");
}

void sampler(const Teacher& t) {
  Rng rng(106);
  bool endpoints = true;
  for (auto fam : {TrajectoryFamily::Gamma1, TrajectoryFamily::Gamma2, TrajectoryFamily::Gamma3,
                   TrajectoryFamily::Gamma4}) {
    for (int k = 0; k < 25; ++k) {
      TrajectorySpec s;
      s.family = fam;
      s.a = k % 16;
      s.b = (k + 5) % 16;
      s.v = random_matrix(16, 4, rng) * 10;
      s.w = random_matrix(16, 4, rng) * 10;
      const auto pts = trajectory_points(s);
      endpoints = endpoints && pts.front() == s.v && pts.back() == s.w && pts.size() == 10;
    }
  }
  bool shift = true;
  std::uniform_int_distribution<int> q(-8192, 8192), c(-100, 100);
  for (int k = 0; k < 1000; ++k) {
    VectorXd l(12);
    for (auto& x : l) x = q(rng) / 1024.0;
    const double T = 0.25 + (k % 8) * 0.25;
    shift = shift && temperature_softmax((l.array() + c(rng)).matrix(), T) == temperature_softmax(l, T);
  }
  const double sigma = 0.3;
  const MatrixXd d = gaussian_perturb(MatrixXd::Zero(1, 100000), sigma, rng);
  const double mean = d.mean();
  const double sd = std::sqrt((d.array() - mean).square().sum() / static_cast<double>(d.size() - 1));
  const bool sigma_ok = std::abs(sd / sigma - 1) < 0.02;

  const int unknot = *t.ds.unknot_class();
  const EmbeddedSet train = embed_dataset(t.run.checkpoint.encoder, t.run.checkpoint.encoding, t.run.splits.train);
  const CentroidTable table = CentroidTable::from_embeddings(train.E, train.labels);
  const KnotClass* uc = t.ds.find_class(unknot);
  const MatrixXd E = t.run.checkpoint.encoder.forward(t.run.checkpoint.encoding.encode_batch(uc->reps));
  int hits = 0, unknot_words = 0;
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    const VectorXd e = gaussian_perturb(E.col(k % E.cols()), 0.05, rng);
    if (decode_class_id(e, table) == unknot) ++hits;
    if (jones_polynomial(simplify(decode_to_class(e, table, t.ds)), 12).is_one()) ++unknot_words;
  }
  const double frac = static_cast<double>(hits) / draws;
  verdict("sampler-semantics", endpoints && shift && sigma_ok && frac >= 0.9,
          std::string("trajectory endpoints exact: ") + (endpoints ? "yes" : "no") +
              ", softmax shift-invariant: " + (shift ? "yes" : "no") + ", empirical sigma/sigma " + fmt(sd / sigma, 5) +
              ", sigma=0.05 draws decoding to the unknot class " + fmt(frac, 3) + " (to any word with Jones 1: " +
              fmt(static_cast<double>(unknot_words) / draws, 3) + ")");
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void reproducibility(const std::string& cli) {
  const fs::path root = fs::temp_directory_path() / ("bf-acceptance-" + std::to_string(::getpid()));
  const std::vector<std::string> steps = {
      "generate --classes 20 --reps 6 --letters 12 --strands 5 --scrambles 3 --seed 7 --include-unknot --workers 2 "
      "--out ds.ndjson",
      "invariants --dataset ds.ndjson --out inv.ndjson",
      "train --dataset ds.ndjson --out model.ckpt --epochs 5 --seed 7 --reps-held-out 2",
      "eval --checkpoint model.ckpt --dataset ds.ndjson --out eval.json",
      "probe --checkpoint model.ckpt --dataset ds.ndjson --out probe.json --epochs 50 --seed 7 --workers 2",
      "sample --checkpoint model.ckpt --dataset ds.ndjson --out samples.ndjson --candidates cand.ndjson --samples 20 "
      "--seed 7 --workers 2",
      "sample --checkpoint model.ckpt --dataset ds.ndjson --mode trajectory --out traj.ndjson --candidates "
      "cand.ndjson --seed 7",
  };
  bool ran = true;
  for (const char* run : {"a", "b"}) {
    fs::create_directories(root / run);
    for (const auto& s : steps) {
      const std::string cmd = "cd '" + (root / run).string() + "' && '" + cli + "' " + s + " 2>/dev/null";
      ran = ran && std::system(cmd.c_str()) == 0;
    }
  }
  std::vector<std::string> differing;
  int files = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    ++files;
    const fs::path other = root / "b" / e.path().filename();
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) differing.push_back(e.path().filename().string());
  }
  std::string diff;
  for (const auto& d : differing) diff += " " + d;
  fs::remove_all(root);
  verdict("reproducibility", ran && differing.empty() && files > 0,
          "two CLI pipeline runs, " + std::to_string(files) + " output files, commands succeeded: " +
              (ran ? "yes" : "no") + ", differing files:" + (diff.empty() ? " none" : diff));
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  results_file.open("acceptance_results.txt");
  try {
    markov_invariance();
    bracket_oracle();
    determinant_identity();
    gradient_correctness();
    cyclic_invariance();
    std::vector<Teacher> runs;
    const Teacher& teacher = clustering(runs);
    probe(teacher);
    sampler(teacher);
    reproducibility(cli);
  } catch (const std::exception& e) {
    std::cout << "acceptance run aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << passed << "/" << total << " criteria passed" << std::endl;
  results_file << passed << "/" << total << " criteria passed\n";
  return 0;
}
