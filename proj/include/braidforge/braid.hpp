#pragma once

// Braid-group word algebra: Artin generators, relations, Markov moves and
// closure combinatorics.
//
// A letter k != 0 denotes sigma_{|k|} when k > 0 and its inverse when k < 0.
// Every operation is a pure function on immutable values.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace braidforge {

using Rng = std::mt19937_64;

class BraidWord {
public:
  /// Identity braid on `strands` strands.
  explicit BraidWord(int strands = 2);
  /// Throws LetterOutOfRange if any letter is 0 or exceeds strands - 1.
  BraidWord(std::vector<int> letters, int strands);

  const std::vector<int>& letters() const noexcept { return letters_; }
  int strands() const noexcept { return strands_; }
  std::size_t size() const noexcept { return letters_.size(); }
  bool empty() const noexcept { return letters_.empty(); }
  int operator[](std::size_t i) const { return letters_[i]; }

  bool operator==(const BraidWord&) const = default;

  std::string to_string() const;

private:
  std::vector<int> letters_;
  int strands_;
};

enum class MoveKind { Conjugate, Stabilize, Destabilize, BraidRelation, Commutation, FreeReduce };

struct MarkovMove {
  MoveKind kind;
  int argument = 0;  ///< generator for Conjugate, sign for Stabilize, position otherwise
};

BraidWord free_reduce(const BraidWord& w);
/// Cancels inverse pairs across the two ends of the word (a conjugation).
BraidWord cyclic_reduce(const BraidWord& w);

BraidWord apply_commutation(const BraidWord& w, std::size_t pos);
BraidWord apply_braid_relation(const BraidWord& w, std::size_t pos);
bool can_commute(const BraidWord& w, std::size_t pos) noexcept;
bool can_apply_braid_relation(const BraidWord& w, std::size_t pos) noexcept;

BraidWord conjugate(const BraidWord& w, int g);
BraidWord stabilize(const BraidWord& w, int sign);
BraidWord destabilize(const BraidWord& w);
bool can_destabilize(const BraidWord& w) noexcept;
BraidWord cyclic_rotate(const BraidWord& w, long long r);

/// All letter signs flipped; the closure is the mirror image.
BraidWord mirror(const BraidWord& w);

BraidWord apply_move(const BraidWord& w, const MarkovMove& move);

/// Applies `n_moves` random closure-preserving moves. An inapplicable draw is
/// re-drawn up to 16 times and then skipped.
BraidWord scramble(const BraidWord& w, int n_moves, Rng& rng);

/// Greedy length reduction; preserves the closure class. Not a normal form.
BraidWord simplify(const BraidWord& w);

/// perm[p] is the final position of the strand that starts at position p.
std::vector<int> closure_permutation(const BraidWord& w);
int component_count(const BraidWord& w);
int writhe(const BraidWord& w) noexcept;

/// Stabilizes with alternating signs (+, -, +, ...) until size() == target.
BraidWord pad_to_length(const BraidWord& w, std::size_t target);

}  // namespace braidforge
