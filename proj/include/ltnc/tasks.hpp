#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ltnc/curriculum.hpp"
#include "ltnc/kb.hpp"
#include "ltnc/rng.hpp"

namespace ltnc {

struct TaskBundle {
  KnowledgeBase kb;
  QuerySet queries;
  std::map<std::string, Curriculum> curricula;  // baseline, ts, kc (random is per-seed)
};

// ---------------------------------------------------------------------------
// Penguin Exception Task: normal birds, cows and penguins as separable
// Gaussian clusters, three unary predicates, eight open-world rules.

struct PetConfig {
  int n_norm_birds = 100;
  int n_cows = 100;
  int n_penguins = 50;
  int feature_dim = 4;
  double cluster_std = 0.3;
  std::uint64_t seed = 1234;

  void validate() const {
    if (n_norm_birds < 1 || n_cows < 1 || n_penguins < 1)
      throw std::invalid_argument("group counts must be >= 1");
    if (feature_dim < 1) throw std::invalid_argument("feature_dim must be >= 1");
    if (!(cluster_std > 0.0)) throw std::invalid_argument("cluster_std must be positive");
  }
};

inline const char* pet_kb_text() {
  return
      "# Penguin Exception Task rule base (open-world: negative facts are explicit).\n"
      "norm_birds_are_birds : forall Norm_Birds: is_bird(Norm_Birds)\n"
      "cows_are_not_birds : forall Cows: not is_bird(Cows)\n"
      "birds_can_fly : forall Animals: is_bird(Animals) => can_fly(Animals)\n"
      "non_birds_cannot_fly : forall Animals: not is_bird(Animals) => not can_fly(Animals)\n"
      "penguins_are_penguins : forall Penguins: is_penguin(Penguins)\n"
      "non_penguins_are_not_penguins : forall Non_Penguins: not is_penguin(Non_Penguins)\n"
      "penguins_are_birds : forall Animals: is_penguin(Animals) => is_bird(Animals)\n"
      "penguins_cannot_fly : forall Animals: is_penguin(Animals) => not can_fly(Animals)\n";
}

namespace detail {

inline void set_rule_labels(KnowledgeBase& kb,
                            const std::map<std::string, std::string>& labels) {
  for (auto& r : kb.rules) {
    auto it = labels.find(r.id);
    if (it != labels.end()) r.label = it->second;
  }
}

}  // namespace detail

inline std::map<std::string, Curriculum> pet_curricula() {
  std::map<std::string, Curriculum> out;
  Curriculum baseline;
  baseline.name = "baseline";
  baseline.stages.push_back(
      {{"norm_birds_are_birds", "cows_are_not_birds", "birds_can_fly", "non_birds_cannot_fly",
        "penguins_are_penguins", "non_penguins_are_not_penguins", "penguins_are_birds",
        "penguins_cannot_fly"},
       3,
       {}});
  out["baseline"] = std::move(baseline);

  Curriculum kc;
  kc.name = "kc";
  kc.stages.push_back({{"norm_birds_are_birds", "cows_are_not_birds", "penguins_are_penguins",
                        "non_penguins_are_not_penguins"},
                       1,
                       {}});
  kc.stages.push_back({{"birds_can_fly", "non_birds_cannot_fly", "penguins_are_birds"}, 1, {}});
  kc.stages.push_back({{"penguins_cannot_fly"}, 1, {}});
  out["kc"] = std::move(kc);

  Curriculum ts;
  ts.name = "ts";
  ts.stages.push_back({{"norm_birds_are_birds", "cows_are_not_birds", "penguins_are_penguins",
                        "non_penguins_are_not_penguins", "penguins_are_birds"},
                       1,
                       {}});
  ts.stages.push_back({{"birds_can_fly", "non_birds_cannot_fly"}, 1, {}});
  ts.stages.push_back({{"penguins_cannot_fly"}, 1, {}});
  out["ts"] = std::move(ts);
  return out;
}

inline TaskBundle build_pet(const PetConfig& cfg = {}) {
  cfg.validate();
  TaskBundle bundle;
  bundle.kb = parse_kb(pet_kb_text());
  detail::set_rule_labels(bundle.kb,
                          {{"norm_birds_are_birds", "normal birds are birds"},
                           {"cows_are_not_birds", "cows are not birds"},
                           {"birds_can_fly", "birds can fly"},
                           {"non_birds_cannot_fly", "non-birds cannot fly"},
                           {"penguins_are_penguins", "penguins are penguins"},
                           {"non_penguins_are_not_penguins", "non-penguins are not penguins"},
                           {"penguins_are_birds", "penguins are birds"},
                           {"penguins_cannot_fly", "penguins do not fly"}});

  // Feature clusters: isotropic Gaussians with axis-aligned means, separation
  // comfortably above 4 * std so the fact rules are learnable to sat ~ 1.
  const double sep = 1.5;
  const int total = cfg.n_norm_birds + cfg.n_cows + cfg.n_penguins;
  Matrix features(total, cfg.feature_dim);
  Rng rng(cfg.seed);
  auto fill_group = [&](int first_row, int count, int group) {
    for (int r = 0; r < count; ++r)
      for (int d = 0; d < cfg.feature_dim; ++d) {
        double mean = 0.0;
        if (cfg.feature_dim >= 3) {
          if (d == group) mean = sep;
        } else if (d == 0) {
          mean = sep * (group - 1);
        }
        features.at(first_row + r, d) = mean + cfg.cluster_std * normal01(rng);
      }
  };
  fill_group(0, cfg.n_norm_birds, 0);
  fill_group(cfg.n_norm_birds, cfg.n_cows, 1);
  fill_group(cfg.n_norm_birds + cfg.n_cows, cfg.n_penguins, 2);

  GroundingTable& gt = bundle.kb.groundings;
  int src = gt.add_source(std::move(features), false);
  auto range_tuples = [](int first, int count) {
    std::vector<std::vector<std::int32_t>> tuples;
    tuples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) tuples.push_back({first + i});
    return tuples;
  };
  gt.add_index_partition("Norm_Birds", src, range_tuples(0, cfg.n_norm_birds));
  gt.add_index_partition("Cows", src, range_tuples(cfg.n_norm_birds, cfg.n_cows));
  gt.add_index_partition("Penguins", src,
                         range_tuples(cfg.n_norm_birds + cfg.n_cows, cfg.n_penguins));
  gt.add_index_partition("Non_Penguins", src, range_tuples(0, cfg.n_norm_birds + cfg.n_cows));
  gt.add_index_partition("Animals", src, range_tuples(0, total));

  const std::vector<int> dims{cfg.feature_dim, 16, 16, 1};
  gt.predicates.emplace("is_bird", DenseNetwork::make(dims, rng));
  gt.predicates.emplace("can_fly", DenseNetwork::make(dims, rng));
  gt.predicates.emplace("is_penguin", DenseNetwork::make(dims, rng));

  bundle.queries = {
      {"is_bird_norm_birds", parse_formula("forall Norm_Birds: is_bird(Norm_Birds)")},
      {"is_bird_penguins", parse_formula("forall Penguins: is_bird(Penguins)")},
      {"can_fly_norm_birds", parse_formula("forall Norm_Birds: can_fly(Norm_Birds)")},
      {"not_can_fly_penguins", parse_formula("forall Penguins: not can_fly(Penguins)")},
  };
  bundle.curricula = pet_curricula();
  require_valid(bundle.kb);
  return bundle;
}

// ---------------------------------------------------------------------------
// Smokers & Friends: 14 persons (a..n) as trainable embeddings, predicates
// friends/smokes/cancer, nine rules. The fact configuration follows the
// canonical example setup used with LTN; it is a reconstruction (the exact
// facts are not stated alongside the rules) and can be replaced via a facts
// file.

struct SfConfig {
  int n_persons = 14;  // named a..n; the two friendship groups are {a..h}, {i..n}
  int embedding_dim = 8;
  std::uint64_t seed = 1234;

  void validate() const {
    if (n_persons != 14)
      throw std::invalid_argument("the smokers-and-friends task is defined over 14 persons a..n");
    if (embedding_dim < 1) throw std::invalid_argument("embedding_dim must be >= 1");
  }
};

struct SfFacts {
  std::vector<std::pair<char, char>> friends;  // unordered canonical pairs (x < y)
  std::vector<char> smokes;                    // known smokers; the rest are known non-smokers
  std::vector<char> cancer;                    // known positives
  std::vector<char> not_cancer;                // known negatives
};

inline SfFacts default_sf_facts() {
  SfFacts f;
  f.friends = {{'a', 'b'}, {'a', 'e'}, {'a', 'f'}, {'a', 'g'}, {'b', 'c'}, {'c', 'd'},
               {'e', 'f'}, {'g', 'h'}, {'i', 'j'}, {'j', 'm'}, {'k', 'l'}, {'m', 'n'}};
  f.smokes = {'a', 'e', 'f', 'g', 'j', 'n'};
  f.cancer = {'a', 'e'};
  // Cancer status is only known (and negative) within the first group.
  f.not_cancer = {'b', 'c', 'd', 'f', 'g', 'h'};
  return f;
}

/// Facts file: `friend a b` / `smokes a` / `cancer a` / `not-cancer b` lines,
/// '#' comments and blank lines ignored.
inline SfFacts parse_sf_facts(const std::string& text) {
  SfFacts f;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto person = [&](const std::string& tok) {
    if (tok.size() != 1 || tok[0] < 'a' || tok[0] > 'n')
      throw ParseError("expected a person letter a..n, got '" + tok + "'", line_no, 1);
    return tok[0];
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string::size_type hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    std::string x, y;
    if (kind == "friend") {
      if (!(ls >> x >> y)) throw ParseError("friend needs two persons", line_no, 1);
      char a = person(x), b = person(y);
      if (a == b) throw ParseError("friendship facts must not be reflexive", line_no, 1);
      if (a > b) std::swap(a, b);
      f.friends.emplace_back(a, b);
    } else if (kind == "smokes") {
      if (!(ls >> x)) throw ParseError("smokes needs one person", line_no, 1);
      f.smokes.push_back(person(x));
    } else if (kind == "cancer") {
      if (!(ls >> x)) throw ParseError("cancer needs one person", line_no, 1);
      f.cancer.push_back(person(x));
    } else if (kind == "not-cancer") {
      if (!(ls >> x)) throw ParseError("not-cancer needs one person", line_no, 1);
      f.not_cancer.push_back(person(x));
    } else {
      throw ParseError("unknown fact kind '" + kind + "'", line_no, 1);
    }
  }
  return f;
}

inline const char* sf_kb_text() {
  return
      "# Smokers & Friends rule base. Fact rules pair a positive and a negated\n"
      "# universal over the corresponding fact partitions.\n"
      "friend_facts : (forall F_pos: friends(F_pos)) and (forall F_neg: not friends(F_neg))\n"
      "smoker_facts : (forall S_pos: smokes(S_pos)) and (forall S_neg: not smokes(S_neg))\n"
      "cancer_facts : (forall C_pos: cancer(C_pos)) and (forall C_neg: not cancer(C_neg))\n"
      "friendship_antireflexive : forall Px: not friends(Px, Px)\n"
      "friendship_symmetric : forall Px: forall Py: friends(Px, Py) => friends(Py, Px)\n"
      "everyone_has_friend : forall Px: exists Py: friends(Px, Py)\n"
      "friends_of_smokers_smoke : forall Px: forall Py: friends(Px, Py) and smokes(Px) => "
      "smokes(Py)\n"
      "smokers_have_cancer : forall Px: smokes(Px) => cancer(Px)\n"
      "non_smokers_no_cancer : forall Px: not smokes(Px) => not cancer(Px)\n";
}

inline std::map<std::string, Curriculum> sf_curricula() {
  std::map<std::string, Curriculum> out;
  Curriculum baseline;
  baseline.name = "baseline";
  baseline.stages.push_back({{"friend_facts", "smoker_facts", "cancer_facts",
                              "friendship_antireflexive", "friendship_symmetric",
                              "everyone_has_friend", "friends_of_smokers_smoke",
                              "smokers_have_cancer", "non_smokers_no_cancer"},
                             3,
                             {}});
  out["baseline"] = std::move(baseline);

  Curriculum kc;
  kc.name = "kc";
  kc.stages.push_back({{"friend_facts", "smoker_facts", "cancer_facts"}, 1, {}});
  kc.stages.push_back({{"friendship_antireflexive", "friendship_symmetric",
                        "everyone_has_friend", "friends_of_smokers_smoke"},
                       1,
                       {}});
  kc.stages.push_back({{"smokers_have_cancer", "non_smokers_no_cancer"}, 1, {}});
  out["kc"] = std::move(kc);

  Curriculum ts;
  ts.name = "ts";
  ts.stages.push_back({{"friend_facts", "friendship_antireflexive", "friendship_symmetric",
                        "everyone_has_friend"},
                       1,
                       {}});
  ts.stages.push_back({{"smoker_facts", "friends_of_smokers_smoke"}, 1, {}});
  ts.stages.push_back({{"cancer_facts", "smokers_have_cancer", "non_smokers_no_cancer"}, 1, {}});
  out["ts"] = std::move(ts);
  return out;
}

inline TaskBundle build_sf(const SfConfig& cfg, const SfFacts& facts) {
  cfg.validate();
  TaskBundle bundle;
  bundle.kb = parse_kb(sf_kb_text());
  detail::set_rule_labels(bundle.kb,
                          {{"friend_facts", "identify known friendships"},
                           {"smoker_facts", "identify known smokers"},
                           {"cancer_facts", "identify known cancer"},
                           {"friendship_antireflexive", "friendship is antireflexive"},
                           {"friendship_symmetric", "friendship is symmetric"},
                           {"everyone_has_friend", "everyone has a friend"},
                           {"friends_of_smokers_smoke", "friends of smokers smoke"},
                           {"smokers_have_cancer", "smokers have cancer"},
                           {"non_smokers_no_cancer", "non-smokers don't have cancer"}});

  const int n = cfg.n_persons;
  Matrix embeddings(n, cfg.embedding_dim);
  Rng rng(cfg.seed);
  for (double& x : embeddings.data) x = normal01(rng);

  GroundingTable& gt = bundle.kb.groundings;
  int src = gt.add_source(std::move(embeddings), true);

  auto idx = [](char c) { return static_cast<std::int32_t>(c - 'a'); };
  std::vector<std::vector<std::int32_t>> persons;
  for (int i = 0; i < n; ++i) persons.push_back({i});
  gt.add_index_partition("Px", src, persons);
  gt.add_index_partition("Py", src, persons);

  std::set<std::pair<std::int32_t, std::int32_t>> pos;
  std::vector<std::vector<std::int32_t>> f_pos;
  for (auto [a, b] : facts.friends) {
    auto p = std::minmax(idx(a), idx(b));
    if (pos.insert({p.first, p.second}).second) f_pos.push_back({idx(a), idx(b)});
  }
  // Known negatives: unlisted same-group canonical pairs (x < y). The reverse
  // of a listed friendship is deliberately not a negative; symmetry is left
  // to the symmetry rule.
  std::vector<std::vector<std::int32_t>> f_neg;
  auto add_group_negatives = [&](int lo, int hi) {
    for (std::int32_t i = lo; i < hi; ++i)
      for (std::int32_t j = i + 1; j < hi; ++j)
        if (!pos.count({i, j})) f_neg.push_back({i, j});
  };
  add_group_negatives(0, 8);
  add_group_negatives(8, 14);
  gt.add_index_partition("F_pos", src, f_pos);
  gt.add_index_partition("F_neg", src, f_neg);

  auto singleton_partition = [&](const std::vector<char>& who) {
    std::vector<std::vector<std::int32_t>> t;
    for (char c : who) t.push_back({idx(c)});
    return t;
  };
  std::set<char> smoker_set(facts.smokes.begin(), facts.smokes.end());
  std::vector<char> non_smokers;
  for (char c = 'a'; c < 'a' + n; ++c)
    if (!smoker_set.count(c)) non_smokers.push_back(c);
  gt.add_index_partition("S_pos", src, singleton_partition(facts.smokes));
  gt.add_index_partition("S_neg", src, singleton_partition(non_smokers));
  gt.add_index_partition("C_pos", src, singleton_partition(facts.cancer));
  gt.add_index_partition("C_neg", src, singleton_partition(facts.not_cancer));

  const int d = cfg.embedding_dim;
  gt.predicates.emplace("friends", DenseNetwork::make({2 * d, 16, 16, 1}, rng));
  gt.predicates.emplace("smokes", DenseNetwork::make({d, 16, 16, 1}, rng));
  gt.predicates.emplace("cancer", DenseNetwork::make({d, 16, 16, 1}, rng));

  bundle.queries.clear();
  for (const auto& r : bundle.kb.rules) bundle.queries.push_back({r.id, r.formula});
  bundle.curricula = sf_curricula();
  require_valid(bundle.kb);
  return bundle;
}

inline TaskBundle build_sf(const SfConfig& cfg = {}) { return build_sf(cfg, default_sf_facts()); }

}  // namespace ltnc
