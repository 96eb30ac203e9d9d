#pragma once

// Corpora of knot equivalence classes, each holding several braid-word
// representatives of the same knot.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "braidforge/braid.hpp"

namespace braidforge {

struct GenParams {
  int n_letters = 30;
  int n_strands = 5;
  int n_scrambles = 10;
  int n_classes = 25;
  int reps_per_class = 20;
  std::uint64_t seed = 0;
  int M = 1;  ///< scrambles applied while creating each seed
  int max_attempts = 1000;
  /// Appends one extra class whose seed is an unknot of n_letters letters.
  bool include_unknot = false;

  /// Throws InvalidParams.
  void validate() const;
  bool operator==(const GenParams&) const = default;
};

struct KnotClass {
  int class_id = 0;
  std::vector<BraidWord> reps;
  /// Index of each entry of `reps` in the class's full representative list.
  std::vector<int> rep_indices;
  /// Index (into the full list) of a representative of minimal pre-padding length.
  int canonical_index = 0;
  BraidWord canonical;
  bool is_unknot = false;
};

struct KnotClassDataset {
  GenParams params;
  std::vector<KnotClass> classes;

  std::size_t rep_count() const noexcept;
  /// Letter count shared by every representative; 0 for an empty dataset.
  std::size_t word_length() const noexcept;
  /// Largest strand count over all representatives.
  int max_strands() const noexcept;
  /// Class id of the unknot class, if present.
  std::optional<int> unknot_class() const noexcept;
  const KnotClass* find_class(int class_id) const noexcept;
};

/// Per-class random stream derived from (seed, stream_id); identical whether
/// generation runs serially or in parallel.
Rng stream_rng(std::uint64_t seed, std::uint64_t stream_id);

BraidWord random_braid(int n_letters, int n_strands, Rng& rng);

/// Appends letters +-i joining distinct closure cycles until the closure is a
/// knot. The input letters survive as a prefix.
BraidWord knotify(const BraidWord& w, Rng& rng);

/// random_braid -> knotify -> scramble(M) -> simplify, repeated until the
/// result has exactly n_letters letters. Throws GenerationExhausted.
BraidWord random_knot(const GenParams& params, Rng& rng);

/// Conjugate of sigma_1 ... sigma_{s-1} with exactly n_letters letters on
/// n_strands or n_strands - 1 strands (whichever has the right parity).
BraidWord random_unknot(int n_letters, int n_strands, Rng& rng);

std::vector<BraidWord> generate_class(const BraidWord& seed_word, int reps, int n_scrambles, Rng& rng);

/// `workers` == 0 uses the available hardware concurrency. The result does
/// not depend on the worker count.
KnotClassDataset generate_dataset(const GenParams& params, unsigned workers = 0);

struct DatasetSplits {
  KnotClassDataset train;
  KnotClassDataset in_dist;
  KnotClassDataset out_dist;
};

/// Holds out whole classes (a fraction of them) and `reps_held_out`
/// representatives of every remaining class. The unknot class, when present,
/// always stays in training. Throws InvalidSplit.
DatasetSplits split_dataset(const KnotClassDataset& ds, int reps_held_out, double classes_held_out_fraction,
                            Rng& rng);

void write_dataset(std::ostream& out, const KnotClassDataset& ds);
void write_dataset(const std::string& path, const KnotClassDataset& ds);
/// Throws FormatError.
KnotClassDataset read_dataset(std::istream& in);
KnotClassDataset read_dataset(const std::string& path);

}  // namespace braidforge
