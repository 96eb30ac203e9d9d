#include "braidforge/sampler.hpp"

#include <atomic>
#include <cmath>
#include <ostream>
#include <thread>

#include "braidforge/error.hpp"

namespace braidforge {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

MatrixXd gaussian_perturb(const MatrixXd& embedding, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw Error(Errc::InvalidParams, "sigma must be nonnegative");
  MatrixXd out = embedding;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (Index i = 0; i < out.size(); ++i) out.data()[i] += noise(rng);
  return out;
}

std::string trajectory_family_name(TrajectoryFamily f) {
  switch (f) {
    case TrajectoryFamily::Gamma1: return "gamma1";
    case TrajectoryFamily::Gamma2: return "gamma2";
    case TrajectoryFamily::Gamma3: return "gamma3";
    case TrajectoryFamily::Gamma4: return "gamma4";
  }
  return "gamma1";
}

TrajectoryFamily trajectory_family_from_name(const std::string& name) {
  for (auto f : {TrajectoryFamily::Gamma1, TrajectoryFamily::Gamma2, TrajectoryFamily::Gamma3, TrajectoryFamily::Gamma4})
    if (trajectory_family_name(f) == name) return f;
  throw Error(Errc::InvalidParams, "unknown trajectory family: " + name);
}

std::vector<MatrixXd> trajectory_points(const TrajectorySpec& spec) {
  if (spec.v.rows() != spec.w.rows() || spec.v.cols() != spec.w.cols())
    throw Error(Errc::ShapeMismatch, "trajectory endpoints differ in shape");
  if (spec.points_first_leg < 2 || spec.points_second_leg < 1)
    throw Error(Errc::InvalidParams, "trajectory legs need at least 2 and 1 points");
  const Index dim = spec.v.rows();
  const bool pair = spec.family == TrajectoryFamily::Gamma3 || spec.family == TrajectoryFamily::Gamma4;
  auto check = [&](int c) {
    if (c < 0 || c >= dim) throw Error(Errc::IndexOutOfRange, "trajectory coordinate out of range");
  };
  check(spec.a);
  if (pair) {
    check(spec.b);
    if (spec.a == spec.b) throw Error(Errc::InvalidParams, "trajectory pair needs two distinct coordinates");
  }
  std::vector<bool> selected(static_cast<std::size_t>(dim), false);
  selected[static_cast<std::size_t>(spec.a)] = true;
  if (pair) selected[static_cast<std::size_t>(spec.b)] = true;
  const bool selected_first = spec.family == TrajectoryFamily::Gamma1 || spec.family == TrajectoryFamily::Gamma3;

  // leg 0 moves coordinates with in_first == true, leg 1 the others
  auto point = [&](int leg, double t) {
    MatrixXd p(dim, spec.v.cols());
    for (Index r = 0; r < dim; ++r) {
      const bool in_first = selected[static_cast<std::size_t>(r)] == selected_first;
      double s;
      if (in_first) s = leg == 0 ? t : 1.0;
      else s = leg == 0 ? 0.0 : t;
      for (Index c = 0; c < p.cols(); ++c) p(r, c) = std::lerp(spec.v(r, c), spec.w(r, c), s);
    }
    return p;
  };
  std::vector<MatrixXd> out;
  for (int i = 0; i < spec.points_first_leg; ++i)
    out.push_back(point(0, static_cast<double>(i) / (spec.points_first_leg - 1)));
  for (int i = 1; i <= spec.points_second_leg; ++i)
    out.push_back(point(1, static_cast<double>(i) / spec.points_second_leg));
  return out;
}

VectorXd temperature_softmax(const VectorXd& logits, double T) {
  if (!(T > 0.0)) throw Error(Errc::InvalidParams, "temperature must be positive");
  if (logits.size() == 0) return logits;
  const VectorXd shifted = (logits.array() - logits.maxCoeff()) / T;
  const VectorXd e = shifted.array().exp();
  return e / e.sum();
}

int sample_index(const VectorXd& probs, Rng& rng) {
  if (probs.size() == 0) throw Error(Errc::DegenerateInput, "empty probability vector");
  std::discrete_distribution<int> d(probs.data(), probs.data() + probs.size());
  return d(rng);
}

int decode_class_id(const VectorXd& embedding, const CentroidTable& table) {
  return nearest_centroid_classify(embedding, table);
}

BraidWord decode_to_class(const VectorXd& embedding, const CentroidTable& table, const KnotClassDataset& ds) {
  const int id = decode_class_id(embedding, table);
  const KnotClass* c = ds.find_class(id);
  if (c == nullptr) throw Error(Errc::UnknownClass, "decoded class not in dataset: " + std::to_string(id));
  return c->canonical;
}

bool is_trivial_unknot_word(const BraidWord& w) { return w.strands() == 2 && w.size() == 1; }

bool is_counterexample_candidate(const ScreenedWord& s) {
  if (!s.jones.is_one() || is_trivial_unknot_word(s.word)) return false;
  const bool alexander_nontrivial = s.alexander && *s.alexander != LaurentPolynomial::constant(1);
  return s.determinant != 1 || alexander_nontrivial;
}

ScreenResult screen_simple_jones(const std::vector<BraidWord>& words, double span_cap, int workers, int strand_cap) {
  struct Slot {
    std::optional<ScreenedWord> kept;
    std::optional<std::string> error;
  };
  std::vector<Slot> slots(words.size());
  auto work = [&](std::size_t i) {
    try {
      ScreenedWord s;
      s.index = i;
      s.word = simplify(words[i]);
      s.jones = jones_polynomial(s.word, strand_cap);
      s.span = jones_span(s.jones);
      if (s.span > span_cap) return;
      s.determinant = knot_determinant(s.word);
      if (component_count(s.word) == 1) s.alexander = alexander_polynomial(s.word);
      s.candidate = is_counterexample_candidate(s);
      slots[i].kept = std::move(s);
    } catch (const Error& e) {
      if (e.code() != Errc::StrandLimitExceeded) throw;
      slots[i].error = e.what();
    }
  };
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < words.size(); i = next++) work(i);
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::max(1, workers); ++t) pool.emplace_back(loop);
  loop();
  for (auto& t : pool) t.join();

  ScreenResult r;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].kept) r.kept.push_back(std::move(*slots[i].kept));
    if (slots[i].error) r.errors.push_back({i, *slots[i].error});
  }
  return r;
}

json screened_to_json(const ScreenedWord& s) {
  json j = {{"index", s.index},
            {"strands", s.word.strands()},
            {"letters", s.word.letters()},
            {"jones", {{"offset", s.jones.poly.offset()}, {"coeffs", s.jones.poly.coeffs()}, {"root", s.jones.root}}},
            {"jones_span", s.span},
            {"determinant", s.determinant},
            {"candidate", s.candidate}};
  if (s.alexander) j["alexander"] = {{"offset", s.alexander->offset()}, {"coeffs", s.alexander->coeffs()}};
  return j;
}

void append_candidates(std::ostream& out, const ScreenResult& r, std::uint64_t seed, const json& provenance) {
  for (const auto& s : r.kept) {
    if (!s.candidate) continue;
    json j = screened_to_json(s);
    j["format"] = "bf-candidate-1";
    j["seed"] = seed;
    j["provenance"] = provenance;
    out << j.dump() << '\n';
  }
}

}  // namespace braidforge
