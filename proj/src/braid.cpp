#include "braidforge/braid.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "braidforge/error.hpp"

namespace braidforge {

namespace {

constexpr int kMaxRedraws = 16;

bool letter_in_range(int k, int strands) noexcept {
  return k != 0 && std::abs(k) <= strands - 1;
}

int count_index(const std::vector<int>& letters, int index) noexcept {
  return static_cast<int>(std::count_if(letters.begin(), letters.end(),
                                        [index](int k) { return std::abs(k) == index; }));
}

// Rotates so that the unique letter with |k| == index ends up last, then drops it.
std::vector<int> remove_unique_after_rotation(const std::vector<int>& letters, int index) {
  const auto it = std::find_if(letters.begin(), letters.end(),
                               [index](int k) { return std::abs(k) == index; });
  std::vector<int> out;
  out.reserve(letters.size() - 1);
  out.insert(out.end(), it + 1, letters.end());
  out.insert(out.end(), letters.begin(), it);
  return out;
}

// Cancels x ... -x when every letter in between commutes with x.
std::vector<int> commute_cancel(std::vector<int> letters) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t p = 0; p < letters.size() && !changed; ++p) {
      const int x = letters[p];
      for (std::size_t q = p + 1; q < letters.size(); ++q) {
        if (letters[q] == -x) {
          letters.erase(letters.begin() + static_cast<std::ptrdiff_t>(q));
          letters.erase(letters.begin() + static_cast<std::ptrdiff_t>(p));
          changed = true;
          break;
        }
        if (std::abs(std::abs(letters[q]) - std::abs(x)) <= 1) break;
      }
    }
  }
  return letters;
}

// Sign patterns (on a, b, a) of the braid relation and its derived forms;
// each rewrites to the paired pattern on (b, a, b). The table is an involution.
struct RelationRule {
  int lhs[3];
  int rhs[3];
};

constexpr RelationRule kRelationRules[] = {
    {{+1, +1, +1}, {+1, +1, +1}},
    {{-1, -1, -1}, {-1, -1, -1}},
    {{+1, +1, -1}, {-1, +1, +1}},
    {{-1, +1, +1}, {+1, +1, -1}},
    {{+1, -1, -1}, {-1, -1, +1}},
    {{-1, -1, +1}, {+1, -1, -1}},
};

const RelationRule* match_relation(const std::vector<int>& letters, std::size_t pos) noexcept {
  if (pos + 2 >= letters.size()) return nullptr;
  const int x = letters[pos], y = letters[pos + 1], z = letters[pos + 2];
  if (std::abs(x) != std::abs(z) || std::abs(std::abs(x) - std::abs(y)) != 1) return nullptr;
  const int signs[3] = {x > 0 ? 1 : -1, y > 0 ? 1 : -1, z > 0 ? 1 : -1};
  for (const auto& rule : kRelationRules) {
    if (std::equal(std::begin(signs), std::end(signs), std::begin(rule.lhs))) return &rule;
  }
  return nullptr;
}

}  // namespace

BraidWord::BraidWord(int strands) : strands_(strands) {
  if (strands < 2) throw Error(Errc::LetterOutOfRange, "a braid needs at least 2 strands");
}

BraidWord::BraidWord(std::vector<int> letters, int strands)
    : letters_(std::move(letters)), strands_(strands) {
  if (strands < 2) throw Error(Errc::LetterOutOfRange, "a braid needs at least 2 strands");
  for (int k : letters_) {
    if (!letter_in_range(k, strands_)) {
      throw Error(Errc::LetterOutOfRange,
                  "letter " + std::to_string(k) + " invalid on " + std::to_string(strands_) +
                      " strands");
    }
  }
}

std::string BraidWord::to_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < letters_.size(); ++i) os << (i ? "," : "") << letters_[i];
  os << "]/" << strands_;
  return os.str();
}

BraidWord free_reduce(const BraidWord& w) {
  std::vector<int> out;
  out.reserve(w.size());
  for (int k : w.letters()) {
    if (!out.empty() && out.back() == -k) {
      out.pop_back();
    } else {
      out.push_back(k);
    }
  }
  return BraidWord(std::move(out), w.strands());
}

BraidWord cyclic_reduce(const BraidWord& w) {
  const auto& l = w.letters();
  std::size_t lo = 0, hi = l.size();
  while (hi - lo >= 2 && l[lo] == -l[hi - 1]) {
    ++lo;
    --hi;
  }
  return BraidWord(std::vector<int>(l.begin() + static_cast<std::ptrdiff_t>(lo),
                                    l.begin() + static_cast<std::ptrdiff_t>(hi)),
                   w.strands());
}

bool can_commute(const BraidWord& w, std::size_t pos) noexcept {
  if (pos + 1 >= w.size()) return false;
  return std::abs(std::abs(w[pos]) - std::abs(w[pos + 1])) > 1;
}

BraidWord apply_commutation(const BraidWord& w, std::size_t pos) {
  if (!can_commute(w, pos)) {
    throw Error(Errc::PositionInvalid, "no commuting pair at " + std::to_string(pos));
  }
  auto letters = w.letters();
  std::swap(letters[pos], letters[pos + 1]);
  return BraidWord(std::move(letters), w.strands());
}

bool can_apply_braid_relation(const BraidWord& w, std::size_t pos) noexcept {
  return match_relation(w.letters(), pos) != nullptr;
}

BraidWord apply_braid_relation(const BraidWord& w, std::size_t pos) {
  const RelationRule* rule = match_relation(w.letters(), pos);
  if (rule == nullptr) {
    throw Error(Errc::PositionInvalid, "no braid relation matches at " + std::to_string(pos));
  }
  auto letters = w.letters();
  const int a = std::abs(letters[pos]);
  const int b = std::abs(letters[pos + 1]);
  letters[pos] = rule->rhs[0] * b;
  letters[pos + 1] = rule->rhs[1] * a;
  letters[pos + 2] = rule->rhs[2] * b;
  return BraidWord(std::move(letters), w.strands());
}

BraidWord conjugate(const BraidWord& w, int g) {
  if (!letter_in_range(g, w.strands())) {
    throw Error(Errc::LetterOutOfRange, "conjugator " + std::to_string(g));
  }
  std::vector<int> letters;
  letters.reserve(w.size() + 2);
  letters.push_back(g);
  letters.insert(letters.end(), w.letters().begin(), w.letters().end());
  letters.push_back(-g);
  return BraidWord(std::move(letters), w.strands());
}

BraidWord stabilize(const BraidWord& w, int sign) {
  auto letters = w.letters();
  letters.push_back(sign >= 0 ? w.strands() : -w.strands());
  return BraidWord(std::move(letters), w.strands() + 1);
}

bool can_destabilize(const BraidWord& w) noexcept {
  return w.strands() >= 3 && count_index(w.letters(), w.strands() - 1) == 1;
}

BraidWord destabilize(const BraidWord& w) {
  if (!can_destabilize(w)) {
    throw Error(Errc::NotDestabilizable, w.to_string());
  }
  return BraidWord(remove_unique_after_rotation(w.letters(), w.strands() - 1), w.strands() - 1);
}

BraidWord cyclic_rotate(const BraidWord& w, long long r) {
  if (w.empty()) return w;
  const auto n = static_cast<long long>(w.size());
  const long long shift = ((r % n) + n) % n;
  auto letters = w.letters();
  std::rotate(letters.begin(), letters.begin() + shift, letters.end());
  return BraidWord(std::move(letters), w.strands());
}

BraidWord mirror(const BraidWord& w) {
  auto letters = w.letters();
  for (int& k : letters) k = -k;
  return BraidWord(std::move(letters), w.strands());
}

BraidWord apply_move(const BraidWord& w, const MarkovMove& move) {
  switch (move.kind) {
    case MoveKind::Conjugate: return conjugate(w, move.argument);
    case MoveKind::Stabilize: return stabilize(w, move.argument);
    case MoveKind::Destabilize: return destabilize(w);
    case MoveKind::BraidRelation:
      return apply_braid_relation(w, static_cast<std::size_t>(move.argument));
    case MoveKind::Commutation:
      return apply_commutation(w, static_cast<std::size_t>(move.argument));
    case MoveKind::FreeReduce: return free_reduce(w);
  }
  return w;
}

BraidWord scramble(const BraidWord& w, int n_moves, Rng& rng) {
  BraidWord cur = w;
  std::uniform_int_distribution<int> kind_dist(0, 3);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int move = 0; move < n_moves; ++move) {
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
      const int kind = kind_dist(rng);
      if (kind == 0) {
        std::uniform_int_distribution<int> gen(1, cur.strands() - 1);
        const int g = gen(rng) * (coin(rng) ? 1 : -1);
        cur = free_reduce(conjugate(cur, g));
        break;
      }
      if (kind == 1) {
        cur = stabilize(cur, coin(rng) ? 1 : -1);
        break;
      }
      if (kind == 2) {
        if (!can_destabilize(cur)) continue;
        cur = destabilize(cur);
        break;
      }
      std::vector<std::pair<std::size_t, bool>> sites;  // (position, is_relation)
      for (std::size_t p = 0; p < cur.size(); ++p) {
        if (can_apply_braid_relation(cur, p)) sites.emplace_back(p, true);
        if (can_commute(cur, p)) sites.emplace_back(p, false);
      }
      if (sites.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, sites.size() - 1);
      const auto [pos, relation] = sites[pick(rng)];
      cur = relation ? apply_braid_relation(cur, pos) : apply_commutation(cur, pos);
      break;
    }
  }
  return cur;
}

BraidWord simplify(const BraidWord& w) {
  BraidWord cur = w;
  while (true) {
    BraidWord next = cyclic_reduce(free_reduce(cur));
    next = BraidWord(commute_cancel(next.letters()), next.strands());
    next = cyclic_reduce(next);
    if (can_destabilize(next)) {
      next = destabilize(next);
    } else if (next.strands() >= 3 && count_index(next.letters(), 1) == 1) {
      // Conjugation by the half twist maps sigma_1 to sigma_{n-1}, so the
      // bottom generator can be removed the same way; remaining indices shift down.
      auto letters = remove_unique_after_rotation(next.letters(), 1);
      for (int& k : letters) k += (k > 0 ? -1 : 1);
      next = BraidWord(std::move(letters), next.strands() - 1);
    }
    if (next == cur) return cur;
    cur = std::move(next);
  }
}

std::vector<int> closure_permutation(const BraidWord& w) {
  const int n = w.strands();
  // at[p] = strand currently at position p
  std::vector<int> at(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) at[static_cast<std::size_t>(p)] = p;
  for (int k : w.letters()) {
    const auto i = static_cast<std::size_t>(std::abs(k) - 1);
    std::swap(at[i], at[i + 1]);
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) perm[static_cast<std::size_t>(at[static_cast<std::size_t>(p)])] = p;
  return perm;
}

int component_count(const BraidWord& w) {
  const auto perm = closure_permutation(w);
  std::vector<bool> seen(perm.size(), false);
  int cycles = 0;
  for (std::size_t s = 0; s < perm.size(); ++s) {
    if (seen[s]) continue;
    ++cycles;
    for (auto p = s; !seen[p]; p = static_cast<std::size_t>(perm[p])) seen[p] = true;
  }
  return cycles;
}

int writhe(const BraidWord& w) noexcept {
  int sum = 0;
  for (int k : w.letters()) sum += k > 0 ? 1 : -1;
  return sum;
}

BraidWord pad_to_length(const BraidWord& w, std::size_t target) {
  if (target < w.size()) {
    throw Error(Errc::TargetTooShort,
                std::to_string(w.size()) + " letters exceed target " + std::to_string(target));
  }
  BraidWord cur = w;
  int sign = 1;
  while (cur.size() < target) {
    cur = stabilize(cur, sign);
    sign = -sign;
  }
  return cur;
}

}  // namespace braidforge
