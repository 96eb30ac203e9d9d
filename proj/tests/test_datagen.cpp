#include <cmath>
#include <set>
#include <sstream>

#include "braidforge/datagen.hpp"
#include "braidforge/error.hpp"
#include "braidforge/invariants.hpp"
#include "doctest.h"

using namespace braidforge;

TEST_CASE("datagen: random_braid alphabet and length") {
  Rng rng(1);
  const BraidWord w = random_braid(5, 2, rng);
  CHECK(w.size() == 5);
  for (int k : w.letters()) CHECK(std::abs(k) == 1);
  CHECK(random_braid(0, 5, rng).empty());
}

TEST_CASE("datagen: random_braid letters are uniform (chi-square)") {
  Rng rng(2);
  const int n_strands = 5;
  std::vector<int> counts(8, 0);
  const int words = 100000 / 30 + 1;
  int total = 0;
  for (int i = 0; i < words; ++i) {
    const BraidWord w = random_braid(30, n_strands, rng);
    for (int k : w.letters()) {
      counts[static_cast<std::size_t>(k > 0 ? 2 * (k - 1) : 2 * (-k - 1) + 1)]++;
      ++total;
    }
  }
  const double expected = total / 8.0;
  double chi2 = 0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 7 degrees of freedom; 99.9% quantile is about 24.3.
  CHECK(chi2 < 24.3);
}

TEST_CASE("datagen: knotify") {
  Rng rng(3);
  CHECK(knotify(BraidWord({1}, 2), rng) == BraidWord({1}, 2));
  const BraidWord e = knotify(BraidWord({}, 2), rng);
  CHECK(e.size() == 1);
  CHECK(component_count(e) == 1);
  const BraidWord h = knotify(BraidWord({1, 1}, 2), rng);
  CHECK(h.size() % 2 == 1);
  CHECK(component_count(h) == 1);
  for (int trial = 0; trial < 200; ++trial) {
    const BraidWord w = random_braid(12, 6, rng);
    const BraidWord k = knotify(w, rng);
    CHECK(component_count(k) == 1);
    CHECK(std::equal(w.letters().begin(), w.letters().end(), k.letters().begin()));
  }
}

TEST_CASE("datagen: random_knot has the requested length and one component") {
  GenParams p;
  p.n_letters = 20;
  p.n_strands = 5;
  Rng a(7), b(7);
  const BraidWord w = random_knot(p, a);
  CHECK(w.size() == 20);
  CHECK(component_count(w) == 1);
  CHECK(random_knot(p, b) == w);
}

TEST_CASE("datagen: random_knot exhausts on unreachable lengths") {
  GenParams p;
  p.n_letters = 2;
  p.n_strands = 2;
  p.max_attempts = 50;
  Rng rng(1);
  try {
    random_knot(p, rng);
    FAIL("expected GenerationExhausted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::GenerationExhausted);
  }
}

TEST_CASE("datagen: random_unknot") {
  Rng rng(4);
  for (int len : {15, 16, 20}) {
    const BraidWord u = random_unknot(len, 4, rng);
    CHECK(u.size() == static_cast<std::size_t>(len));
    CHECK(jones_polynomial(u).is_one());
    CHECK(knot_determinant(u) == 1);
  }
}

TEST_CASE("datagen: generate_class") {
  Rng rng(5);
  const BraidWord trefoil({1, 1, 1}, 2);
  const auto same = generate_class(trefoil, 3, 0, rng);
  CHECK(same == std::vector<BraidWord>(3, trefoil));
  const auto reps = generate_class(trefoil, 20, 10, rng);
  CHECK(reps.size() == 20);
  for (const auto& w : reps) CHECK(jones_polynomial(w, 16) == jones_polynomial(trefoil));
  CHECK(generate_class(trefoil, 1, 5, rng).size() == 1);
}

namespace {

GenParams small_params() {
  GenParams p;
  p.n_letters = 10;
  p.n_strands = 4;
  p.n_scrambles = 4;
  p.n_classes = 6;
  p.reps_per_class = 5;
  p.seed = 11;
  return p;
}

}  // namespace

TEST_CASE("datagen: generate_dataset invariants") {
  GenParams p = small_params();
  p.include_unknot = true;
  const KnotClassDataset ds = generate_dataset(p, 1);
  CHECK(ds.classes.size() == 7);
  CHECK(ds.unknot_class() == 6);
  const std::size_t len = ds.word_length();
  for (const auto& c : ds.classes) {
    CHECK(c.reps.size() == 5);
    CHECK(c.canonical == c.reps[static_cast<std::size_t>(c.canonical_index)]);
    const auto j = jones_polynomial(simplify(c.reps[0]), 16);
    for (const auto& w : c.reps) {
      CHECK(w.size() == len);
      CHECK(component_count(w) == 1);
      CHECK(jones_polynomial(simplify(w), 16) == j);
    }
    if (c.is_unknot) CHECK(j.is_one());
  }
}

TEST_CASE("datagen: generate_dataset is independent of worker count") {
  const GenParams p = small_params();
  std::ostringstream a, b;
  write_dataset(a, generate_dataset(p, 1));
  write_dataset(b, generate_dataset(p, 3));
  CHECK(a.str() == b.str());
}

TEST_CASE("datagen: minimal dataset equals its seed") {
  GenParams p;
  p.n_letters = 8;
  p.n_strands = 3;
  p.n_scrambles = 0;
  p.n_classes = 1;
  p.reps_per_class = 1;
  const KnotClassDataset ds = generate_dataset(p, 1);
  REQUIRE(ds.classes.size() == 1);
  Rng rng = stream_rng(p.seed, 0);
  CHECK(ds.classes[0].reps[0] == random_knot(p, rng));
}

TEST_CASE("datagen: invalid params") {
  GenParams p;
  p.n_letters = 3;
  p.n_strands = 5;
  CHECK_THROWS_AS(generate_dataset(p), Error);
}

TEST_CASE("datagen: split_dataset partitions") {
  GenParams p = small_params();
  p.n_classes = 10;
  p.reps_per_class = 6;
  const KnotClassDataset ds = generate_dataset(p, 1);
  Rng rng(3);
  const DatasetSplits s = split_dataset(ds, 2, 0.5, rng);
  CHECK(s.out_dist.classes.size() == 5);
  CHECK(s.train.classes.size() == 5);
  std::set<std::pair<int, int>> seen;
  auto collect = [&](const KnotClassDataset& part) {
    for (const auto& c : part.classes)
      for (int r : c.rep_indices) CHECK(seen.emplace(c.class_id, r).second);
  };
  collect(s.train);
  collect(s.in_dist);
  collect(s.out_dist);
  CHECK(seen.size() == ds.rep_count());
  for (const auto& c : s.train.classes) {
    CHECK(c.reps.size() == 4);
    CHECK(s.out_dist.find_class(c.class_id) == nullptr);
  }

  Rng rng2(3);
  const DatasetSplits none = split_dataset(ds, 0, 0.0, rng2);
  CHECK(none.in_dist.classes.empty());
  CHECK(none.out_dist.classes.empty());
  CHECK_THROWS_AS(split_dataset(ds, 6, 0.0, rng2), Error);
  CHECK_THROWS_AS(split_dataset(ds, 1, 1.0, rng2), Error);
}

TEST_CASE("datagen: dataset file round trip") {
  GenParams p = small_params();
  p.include_unknot = true;
  const KnotClassDataset ds = generate_dataset(p, 1);
  std::stringstream ss;
  write_dataset(ss, ds);
  const std::string text = ss.str();
  CHECK(text.rfind("{\"format\":\"bf-ds-1\"", 0) == 0);
  const KnotClassDataset back = read_dataset(ss);
  CHECK(back.params == ds.params);
  REQUIRE(back.classes.size() == ds.classes.size());
  for (std::size_t i = 0; i < ds.classes.size(); ++i) {
    CHECK(back.classes[i].reps == ds.classes[i].reps);
    CHECK(back.classes[i].canonical == ds.classes[i].canonical);
    CHECK(back.classes[i].is_unknot == ds.classes[i].is_unknot);
  }
  std::istringstream bad("{\"format\":\"other\"}\n");
  CHECK_THROWS_AS(read_dataset(bad), Error);
}
