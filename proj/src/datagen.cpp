#include "braidforge/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "braidforge/error.hpp"
#include "json.hpp"

namespace braidforge {

using nlohmann::json;

namespace {

constexpr const char* kDatasetFormat = "bf-ds-1";

// Returns the class representing cycle membership for each strand position.
std::vector<int> cycle_labels(const BraidWord& w) {
  const auto perm = closure_permutation(w);
  std::vector<int> label(perm.size(), -1);
  int next = 0;
  for (std::size_t s = 0; s < perm.size(); ++s) {
    if (label[s] >= 0) continue;
    for (auto p = s; label[p] < 0; p = static_cast<std::size_t>(perm[p])) label[p] = next;
    ++next;
  }
  return label;
}

}  // namespace

void GenParams::validate() const {
  auto bad = [](const std::string& what) { throw Error(Errc::InvalidParams, what); };
  if (n_strands < 2) bad("n_strands must be at least 2");
  if (n_letters < n_strands) bad("n_letters must be at least n_strands");
  if (n_scrambles < 0) bad("n_scrambles must be nonnegative");
  if (n_classes < 1) bad("n_classes must be positive");
  if (reps_per_class < 1) bad("reps_per_class must be positive");
  if (M < 0) bad("M must be nonnegative");
  if (max_attempts < 1) bad("max_attempts must be positive");
}

std::size_t KnotClassDataset::rep_count() const noexcept {
  std::size_t n = 0;
  for (const auto& c : classes) n += c.reps.size();
  return n;
}

std::size_t KnotClassDataset::word_length() const noexcept {
  for (const auto& c : classes)
    if (!c.reps.empty()) return c.reps.front().size();
  return 0;
}

int KnotClassDataset::max_strands() const noexcept {
  int n = 2;
  for (const auto& c : classes)
    for (const auto& w : c.reps) n = std::max(n, w.strands());
  return n;
}

std::optional<int> KnotClassDataset::unknot_class() const noexcept {
  for (const auto& c : classes)
    if (c.is_unknot) return c.class_id;
  return std::nullopt;
}

const KnotClass* KnotClassDataset::find_class(int class_id) const noexcept {
  for (const auto& c : classes)
    if (c.class_id == class_id) return &c;
  return nullptr;
}

Rng stream_rng(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
  return Rng(seq);
}

BraidWord random_braid(int n_letters, int n_strands, Rng& rng) {
  if (n_strands < 2) throw Error(Errc::InvalidParams, "n_strands must be at least 2");
  std::uniform_int_distribution<int> pick(0, 2 * (n_strands - 1) - 1);
  std::vector<int> letters(static_cast<std::size_t>(std::max(n_letters, 0)));
  for (auto& k : letters) {
    const int v = pick(rng);
    k = v % 2 == 0 ? v / 2 + 1 : -(v / 2 + 1);
  }
  return BraidWord(std::move(letters), n_strands);
}

BraidWord knotify(const BraidWord& w, Rng& rng) {
  std::vector<int> letters = w.letters();
  BraidWord cur = w;
  std::uniform_int_distribution<int> coin(0, 1);
  while (component_count(cur) > 1) {
    const auto label = cycle_labels(cur);
    std::vector<int> joins;
    for (std::size_t i = 0; i + 1 < label.size(); ++i)
      if (label[i] != label[i + 1]) joins.push_back(static_cast<int>(i) + 1);
    std::uniform_int_distribution<std::size_t> pick(0, joins.size() - 1);
    const int g = joins[pick(rng)];
    letters.push_back(coin(rng) ? g : -g);
    cur = BraidWord(letters, w.strands());
  }
  return cur;
}

BraidWord random_knot(const GenParams& params, Rng& rng) {
  for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
    BraidWord w = knotify(random_braid(params.n_letters, params.n_strands, rng), rng);
    w = simplify(scramble(w, params.M, rng));
    if (w.size() == static_cast<std::size_t>(params.n_letters)) return w;
  }
  throw Error(Errc::GenerationExhausted, "no knot of length " + std::to_string(params.n_letters) + " after " +
                                             std::to_string(params.max_attempts) + " attempts");
}

BraidWord random_unknot(int n_letters, int n_strands, Rng& rng) {
  // Length is 2k + s - 1, so s - 1 must have the parity of n_letters.
  const int s = (n_strands - 1) % 2 == n_letters % 2 ? n_strands : n_strands - 1;
  if (s < 2 || n_letters < s - 1) throw Error(Errc::InvalidParams, "cannot build unknot seed");
  const int k = (n_letters - (s - 1)) / 2;
  std::uniform_int_distribution<int> pick(0, 2 * (s - 1) - 1);
  std::vector<int> u;
  while (static_cast<int>(u.size()) < k) {
    const int v = pick(rng);
    const int letter = v % 2 == 0 ? v / 2 + 1 : -(v / 2 + 1);
    if (!u.empty() && u.back() == -letter) continue;
    u.push_back(letter);
  }
  std::vector<int> letters = u;
  for (int g = 1; g < s; ++g) letters.push_back(g);
  for (auto it = u.rbegin(); it != u.rend(); ++it) letters.push_back(-*it);
  return BraidWord(std::move(letters), s);
}

std::vector<BraidWord> generate_class(const BraidWord& seed_word, int reps, int n_scrambles, Rng& rng) {
  if (reps < 1) throw Error(Errc::InvalidParams, "reps must be positive");
  std::vector<BraidWord> out;
  out.reserve(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) out.push_back(scramble(seed_word, n_scrambles, rng));
  return out;
}

KnotClassDataset generate_dataset(const GenParams& params, unsigned workers) {
  params.validate();
  const int total = params.n_classes + (params.include_unknot ? 1 : 0);
  KnotClassDataset ds;
  ds.params = params;
  ds.classes.resize(static_cast<std::size_t>(total));

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const int id = next.fetch_add(1);
      if (id >= total) return;
      try {
        Rng rng = stream_rng(params.seed, static_cast<std::uint64_t>(id));
        KnotClass c;
        c.class_id = id;
        c.is_unknot = params.include_unknot && id == params.n_classes;
        const BraidWord seed_word =
            c.is_unknot ? random_unknot(params.n_letters, params.n_strands, rng) : random_knot(params, rng);
        c.reps = generate_class(seed_word, params.reps_per_class, params.n_scrambles, rng);
        c.rep_indices.resize(c.reps.size());
        std::iota(c.rep_indices.begin(), c.rep_indices.end(), 0);
        std::size_t best = 0;
        for (std::size_t r = 1; r < c.reps.size(); ++r)
          if (c.reps[r].size() < c.reps[best].size()) best = r;
        c.canonical_index = static_cast<int>(best);
        ds.classes[static_cast<std::size_t>(id)] = std::move(c);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = total;
      }
    }
  };
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(total));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::size_t longest = 0;
  for (const auto& c : ds.classes)
    for (const auto& w : c.reps) longest = std::max(longest, w.size());
  for (auto& c : ds.classes) {
    for (auto& w : c.reps) w = pad_to_length(w, longest);
    c.canonical = c.reps[static_cast<std::size_t>(c.canonical_index)];
  }
  return ds;
}

DatasetSplits split_dataset(const KnotClassDataset& ds, int reps_held_out, double classes_held_out_fraction,
                            Rng& rng) {
  if (reps_held_out < 0 || !(classes_held_out_fraction >= 0.0 && classes_held_out_fraction < 1.0)) {
    throw Error(Errc::InvalidSplit, "invalid split parameters");
  }
  for (const auto& c : ds.classes) {
    if (reps_held_out >= static_cast<int>(c.reps.size())) {
      throw Error(Errc::InvalidSplit, "reps_held_out must be below the representatives per class");
    }
  }
  DatasetSplits s;
  s.train.params = s.in_dist.params = s.out_dist.params = ds.params;

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < ds.classes.size(); ++i)
    if (!ds.classes[i].is_unknot) candidates.push_back(i);
  const auto n_out = static_cast<std::size_t>(classes_held_out_fraction * static_cast<double>(ds.classes.size()));
  std::shuffle(candidates.begin(), candidates.end(), rng);
  std::vector<bool> held_out(ds.classes.size(), false);
  for (std::size_t i = 0; i < std::min(n_out, candidates.size()); ++i) held_out[candidates[i]] = true;

  for (std::size_t i = 0; i < ds.classes.size(); ++i) {
    const KnotClass& c = ds.classes[i];
    if (held_out[i]) {
      s.out_dist.classes.push_back(c);
      continue;
    }
    std::vector<std::size_t> order(c.reps.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> test(c.reps.size(), false);
    for (int r = 0; r < reps_held_out; ++r) test[order[static_cast<std::size_t>(r)]] = true;
    KnotClass train = c, in = c;
    train.reps.clear();
    train.rep_indices.clear();
    in.reps.clear();
    in.rep_indices.clear();
    for (std::size_t r = 0; r < c.reps.size(); ++r) {
      KnotClass& dst = test[r] ? in : train;
      dst.reps.push_back(c.reps[r]);
      dst.rep_indices.push_back(c.rep_indices[r]);
    }
    s.train.classes.push_back(std::move(train));
    if (!in.reps.empty()) s.in_dist.classes.push_back(std::move(in));
  }
  return s;
}

namespace {

json params_to_json(const GenParams& p) {
  return json{{"n_letters", p.n_letters},       {"n_strands", p.n_strands},   {"n_scrambles", p.n_scrambles},
              {"n_classes", p.n_classes},       {"reps_per_class", p.reps_per_class},
              {"seed", p.seed},                 {"M", p.M},                   {"max_attempts", p.max_attempts},
              {"include_unknot", p.include_unknot}};
}

GenParams params_from_json(const json& j) {
  GenParams p;
  p.n_letters = j.at("n_letters").get<int>();
  p.n_strands = j.at("n_strands").get<int>();
  p.n_scrambles = j.at("n_scrambles").get<int>();
  p.n_classes = j.at("n_classes").get<int>();
  p.reps_per_class = j.at("reps_per_class").get<int>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.M = j.at("M").get<int>();
  p.max_attempts = j.value("max_attempts", 1000);
  p.include_unknot = j.value("include_unknot", false);
  return p;
}

}  // namespace

void write_dataset(std::ostream& out, const KnotClassDataset& ds) {
  json header{{"format", kDatasetFormat}, {"params", params_to_json(ds.params)}};
  if (auto u = ds.unknot_class()) header["unknot_class_id"] = *u;
  out << header.dump() << '\n';
  for (const auto& c : ds.classes) {
    for (std::size_t r = 0; r < c.reps.size(); ++r) {
      const json rec{{"class_id", c.class_id},
                     {"rep_index", c.rep_indices[r]},
                     {"strands", c.reps[r].strands()},
                     {"letters", c.reps[r].letters()},
                     {"is_canonical", c.rep_indices[r] == c.canonical_index}};
      out << rec.dump() << '\n';
    }
  }
}

void write_dataset(const std::string& path, const KnotClassDataset& ds) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::FormatError, "cannot open " + path + " for writing");
  write_dataset(f, ds);
  if (!f) throw Error(Errc::FormatError, "write failed for " + path);
}

KnotClassDataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::FormatError, "empty dataset file");
  KnotClassDataset ds;
  std::optional<int> unknot;
  try {
    const json header = json::parse(line);
    if (header.value("format", "") != kDatasetFormat) throw Error(Errc::FormatError, "not a bf-ds-1 dataset");
    ds.params = params_from_json(header.at("params"));
    if (header.contains("unknot_class_id")) unknot = header["unknot_class_id"].get<int>();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json rec = json::parse(line);
      const int id = rec.at("class_id").get<int>();
      if (ds.classes.empty() || ds.classes.back().class_id != id) {
        if (ds.find_class(id)) throw Error(Errc::FormatError, "class records not contiguous at line " + std::to_string(line_no));
        KnotClass c;
        c.class_id = id;
        c.is_unknot = unknot && *unknot == id;
        ds.classes.push_back(std::move(c));
      }
      KnotClass& c = ds.classes.back();
      BraidWord w(rec.at("letters").get<std::vector<int>>(), rec.at("strands").get<int>());
      const int rep = rec.at("rep_index").get<int>();
      if (rec.at("is_canonical").get<bool>()) {
        c.canonical_index = rep;
        c.canonical = w;
      }
      c.reps.push_back(std::move(w));
      c.rep_indices.push_back(rep);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::FormatError, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::FormatError) throw;
    throw Error(Errc::FormatError, e.what());
  }
  return ds;
}

KnotClassDataset read_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::FormatError, "cannot open " + path);
  return read_dataset(f);
}

}  // namespace braidforge
