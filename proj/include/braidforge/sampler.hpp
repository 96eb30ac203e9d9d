#pragma once

// Sampling around points of embedding space: Gaussian noise, piecewise-linear
// trajectories, temperature softmax, and screening of decoded words for
// simple Jones polynomials.

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "braidforge/analysis.hpp"
#include "braidforge/invariants.hpp"
#include "json.hpp"

namespace braidforge {

/// Each coordinate plus independent N(0, sigma^2) noise. Throws InvalidParams for sigma < 0.
Eigen::MatrixXd gaussian_perturb(const Eigen::MatrixXd& embedding, double sigma, Rng& rng);

enum class TrajectoryFamily { Gamma1, Gamma2, Gamma3, Gamma4 };

std::string trajectory_family_name(TrajectoryFamily f);
TrajectoryFamily trajectory_family_from_name(const std::string& name);

/// Gamma1 moves coordinate a first and the rest second; Gamma2 the reverse.
/// Gamma3 and Gamma4 do the same with the pair (a, b).
struct TrajectorySpec {
  TrajectoryFamily family = TrajectoryFamily::Gamma1;
  int a = 0;
  int b = 1;
  int points_first_leg = 3;
  int points_second_leg = 7;
  Eigen::MatrixXd v;  ///< dim x m, one vector per column
  Eigen::MatrixXd w;
};

/// points_first_leg + points_second_leg collections. The first leg runs its
/// parameter over points_first_leg equidistant values from 0 to 1 inclusive;
/// the second leg over points_second_leg values in (0, 1]. The first point is
/// v and the last is w, both exactly. Throws IndexOutOfRange, ShapeMismatch or
/// InvalidParams.
std::vector<Eigen::MatrixXd> trajectory_points(const TrajectorySpec& spec);

/// softmax(logits / T) with max subtraction. Throws InvalidParams for T <= 0.
Eigen::VectorXd temperature_softmax(const Eigen::VectorXd& logits, double T);

/// Draws an index from a probability vector.
int sample_index(const Eigen::VectorXd& probs, Rng& rng);

/// Class of the nearest centroid (ties to the smallest id).
int decode_class_id(const Eigen::VectorXd& embedding, const CentroidTable& table);
/// Canonical representative of the nearest-centroid class. Throws UnknownClass
/// when that class is not in `ds`.
BraidWord decode_to_class(const Eigen::VectorXd& embedding, const CentroidTable& table, const KnotClassDataset& ds);

struct ScreenedWord {
  std::size_t index = 0;  ///< position in the input list
  BraidWord word;         ///< simplified
  JonesPolynomial jones;
  double span = 0.0;
  std::int64_t determinant = 0;
  std::optional<LaurentPolynomial> alexander;  ///< knots only
  bool candidate = false;
};

struct ScreenError {
  std::size_t index = 0;
  std::string message;
};

struct ScreenResult {
  std::vector<ScreenedWord> kept;  ///< input order
  std::vector<ScreenError> errors;
};

/// True for [1] or [-1] on two strands, the form simplify gives the unknot
/// (braids here have at least two strands).
bool is_trivial_unknot_word(const BraidWord& w);

/// Candidate rule: Jones equal to 1, not the trivial word, and either the
/// determinant or the Alexander polynomial differs from 1.
bool is_counterexample_candidate(const ScreenedWord& s);

/// Simplifies each word and keeps those with Jones span <= span_cap. Words
/// over the strand cap are reported in `errors` and skipped.
ScreenResult screen_simple_jones(const std::vector<BraidWord>& words, double span_cap, int workers = 1,
                                 int strand_cap = kDefaultStrandCap);

/// One NDJSON line per candidate: word, invariants, seed and `provenance`.
void append_candidates(std::ostream& out, const ScreenResult& r, std::uint64_t seed, const nlohmann::json& provenance);

nlohmann::json screened_to_json(const ScreenedWord& s);

}  // namespace braidforge
