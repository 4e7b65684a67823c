// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <functional>

#include "pfp/common/error.hpp"
#include "pfp/common/rng.hpp"
#include "pfp/metrics/confusion.hpp"
#include "pfp/metrics/consistency.hpp"
#include "pfp/metrics/diversity.hpp"
#include "pfp/metrics/openworld.hpp"

using namespace pfp;
using namespace pfp::metrics;

namespace {

std::string err_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

std::vector<std::string> labels_k(size_t k) {
  std::vector<std::string> out;
  for (size_t i = 0; i < k; ++i) out.push_back("c" + std::to_string(i));
  return out;
}

// Independent recomputation of accuracy and macro-F1 straight from the
// definitions, one class at a time.
struct BruteForce {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

BruteForce brute_force_metrics(const ConfusionMatrix& cm) {
  BruteForce out;
  uint64_t total = 0, diag = 0;
  for (size_t t = 0; t < cm.k(); ++t)
    for (size_t p = 0; p < cm.k(); ++p) {
      total += cm.count(t, p);
      if (t == p) diag += cm.count(t, p);
    }
  out.accuracy = 100.0 * static_cast<double>(diag) / static_cast<double>(total);
  double f1_sum = 0.0;
  for (size_t c = 0; c < cm.k(); ++c) {
    uint64_t tp = cm.count(c, c), fp = 0, fn = 0;
    for (size_t o = 0; o < cm.k(); ++o)
      if (o != c) {
        fp += cm.count(o, c);
        fn += cm.count(c, o);
      }
    double prec = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    double rec = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    f1_sum += (prec + rec) > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
  }
  out.macro_f1 = 100.0 * f1_sum / static_cast<double>(cm.k());
  return out;
}

}  // namespace

TEST_CASE("confusion: hand tally and error paths") {
  std::vector<int32_t> preds{0, 1, 0};
  std::vector<int32_t> truths{0, 1, 1};
  ConfusionMatrix cm = ConfusionMatrix::from_pairs(labels_k(2), preds, truths);
  CHECK(cm.count(0, 0) == 1);
  CHECK(cm.count(0, 1) == 0);
  CHECK(cm.count(1, 0) == 1);
  CHECK(cm.count(1, 1) == 1);
  CHECK(cm.total() == 3);

  std::vector<int32_t> short_truths{0};
  CHECK(err_code([&] { ConfusionMatrix::from_pairs(labels_k(2), preds, short_truths); }) ==
        "metrics.length_mismatch");
  ConfusionMatrix empty(labels_k(2));
  CHECK(err_code([&] { accuracy_pct(empty); }) == "metrics.empty");
}

TEST_CASE("confusion: merge is plain integer addition") {
  ConfusionMatrix a(labels_k(2)), b(labels_k(2));
  a.add(0, 1, 3);
  b.add(0, 1, 2);
  b.add(1, 1, 5);
  a.merge(b);
  CHECK(a.count(0, 1) == 5);
  CHECK(a.count(1, 1) == 5);
  CHECK(a.total() == 10);
}

TEST_CASE("accuracy and macro-F1: hand-computed two-class case") {
  ConfusionMatrix cm(labels_k(2));
  cm.add(0, 0, 2);
  cm.add(1, 0, 1);
  cm.add(1, 1, 1);
  // class0: P=2/3 R=1 F1=0.8; class1: P=1 R=0.5 F1=2/3.
  CHECK(accuracy_pct(cm) == doctest::Approx(75.0));
  CHECK(macro_f1_pct(cm) == doctest::Approx(100.0 * (0.8 + 2.0 / 3.0) / 2.0).epsilon(1e-9));

  ConfusionMatrix diag(labels_k(3));
  for (size_t i = 0; i < 3; ++i) diag.add(i, i, 4);
  CHECK(accuracy_pct(diag) == doctest::Approx(100.0));
  CHECK(macro_f1_pct(diag) == doctest::Approx(100.0));
}

TEST_CASE("macro-F1 zero rule: absent class contributes F1 = 0") {
  ConfusionMatrix cm(labels_k(3));
  cm.add(0, 0, 5);
  cm.add(1, 1, 5);
  // class 2 never true, never predicted.
  CHECK(macro_f1_pct(cm) == doctest::Approx(100.0 * 2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("metric identities on 1000 random confusion matrices") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t k = static_cast<size_t>(rng.uniform_int(2, 17));
    ConfusionMatrix cm(labels_k(k));
    bool ow_row_nonempty = false;
    for (size_t t = 0; t < k; ++t)
      for (size_t p = 0; p < k; ++p) {
        uint64_t n = static_cast<uint64_t>(rng.uniform_int(0, 30));
        if (n > 0) cm.add(t, p, n);
        if (t == k - 1 && n > 0) ow_row_nonempty = true;
      }
    if (cm.total() == 0) cm.add(0, 0, 1);

    BruteForce oracle = brute_force_metrics(cm);
    CHECK(std::abs(accuracy_pct(cm) - oracle.accuracy) < 1e-9);
    CHECK(std::abs(macro_f1_pct(cm) - oracle.macro_f1) < 1e-9);

    if (ow_row_nonempty) {
      OwReport ow = ow_report(cm);
      // Bit-exact identity, not approximate.
      CHECK(ow.misattr_at_ow == 100.0 - ow.ow_recall);
      CHECK(ow.top3_share >= 0.0);
      CHECK(ow.top3_share <= 100.0);
    }
  }
}

TEST_CASE("ow_report: all-correct OW row and the no-misattribution rule") {
  ConfusionMatrix cm(labels_k(4));
  cm.add(3, 3, 50);
  cm.add(0, 0, 10);
  OwReport ow = ow_report(cm);
  CHECK(ow.misattr_at_ow == doctest::Approx(0.0));
  CHECK(ow.top3_share == doctest::Approx(0.0));
  CHECK(ow.ow_recall == doctest::Approx(100.0));
  CHECK(ow.top3_personas.empty());
}

TEST_CASE("ow_report: top3 share over four canonical classes") {
  ConfusionMatrix cm(labels_k(5));  // 4 canonical + OW
  cm.add(4, 0, 10);
  cm.add(4, 1, 5);
  cm.add(4, 2, 3);
  cm.add(4, 3, 2);
  cm.add(4, 4, 0);
  cm.add(4, 4, 1);  // small correct mass so the row is valid
  OwReport ow = ow_report(cm);
  // misattributed = 20, top3 = 10+5+3 = 18.
  CHECK(ow.top3_share == doctest::Approx(90.0));
  CHECK(ow.top3_personas == std::vector<std::string>{"c0", "c1", "c2"});
}

TEST_CASE("ow_report: empty OW row is an error") {
  ConfusionMatrix cm(labels_k(3));
  cm.add(0, 0, 5);
  CHECK(err_code([&] { ow_report(cm); }) == "metrics.ow_row_empty");
}

TEST_CASE("ow_report: moving error mass into a top-3 cell never lowers top3_share") {
  Rng rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t k = static_cast<size_t>(rng.uniform_int(5, 12));
    std::vector<uint64_t> row(k, 0);
    for (size_t c = 0; c + 1 < k; ++c) row[c] = static_cast<uint64_t>(rng.uniform_int(0, 20));
    row[k - 1] = static_cast<uint64_t>(rng.uniform_int(1, 10));
    auto build = [&](const std::vector<uint64_t>& r) {
      ConfusionMatrix cm(labels_k(k));
      for (size_t c = 0; c < k; ++c)
        if (r[c] > 0) cm.add(k - 1, c, r[c]);
      return ow_report(cm).top3_share;
    };
    uint64_t misattr = 0;
    for (size_t c = 0; c + 1 < k; ++c) misattr += row[c];
    if (misattr == 0) continue;

    // Identify a top-3 cell and a non-top-3 donor with mass.
    std::vector<size_t> order(k - 1);
    for (size_t c = 0; c + 1 < k; ++c) order[c] = c;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return row[a] > row[b]; });
    if (order.size() <= 3) continue;
    size_t donor = k;
    for (size_t i = 3; i < order.size(); ++i)
      if (row[order[i]] > 0) donor = order[i];
    if (donor == k) continue;

    double before = build(row);
    std::vector<uint64_t> moved = row;
    moved[donor] -= 1;
    moved[order[0]] += 1;
    double after = build(moved);
    CHECK(after >= before - 1e-12);
  }
}

TEST_CASE("action_entropy: uniform, degenerate, and hand case") {
  std::vector<uint64_t> uniform{5, 5, 5, 5};
  CHECK(action_entropy(uniform) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  std::vector<uint64_t> single{0, 9, 0};
  CHECK(action_entropy(single) == doctest::Approx(0.0));
  std::vector<uint64_t> mixed{2, 1, 1};
  CHECK(action_entropy(mixed) ==
        doctest::Approx(-(0.5 * std::log(0.5) + 2 * 0.25 * std::log(0.25))).epsilon(1e-9));
  std::vector<uint64_t> zeros{0, 0};
  CHECK(err_code([&] { action_entropy(zeros); }) == "metrics.empty_actions");
}

TEST_CASE("entropy bounds hold for random count vectors with exact equality cases") {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    size_t k = static_cast<size_t>(rng.uniform_int(2, 9));
    std::vector<uint64_t> counts(k);
    for (uint64_t& c : counts) c = static_cast<uint64_t>(rng.uniform_int(0, 50));
    uint64_t total = 0;
    for (uint64_t c : counts) total += c;
    if (total == 0) counts[0] = 1;
    double h = action_entropy(counts);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(k)) + 1e-12);
  }
}

TEST_CASE("coverage: ratios and the subset precondition") {
  std::set<std::string> all{"a", "b", "c", "d", "e"};
  CHECK(coverage(all, all) == doctest::Approx(1.0));
  CHECK(coverage({}, all) == doctest::Approx(0.0));
  CHECK(coverage({"a", "b", "c"}, all) == doctest::Approx(0.6));
  CHECK(err_code([&] { coverage({"z"}, all); }) == "metrics.coverage_subset");
}

TEST_CASE("d_act: endpoint and plug-in cases") {
  CHECK(d_act(std::log(4.0), 4, 0.3, 1.0) == doctest::Approx(1.0));
  CHECK(d_act(0.2, 4, 0.3, 0.0) == doctest::Approx(0.3));
  CHECK(d_act(std::log(4.0), 4, 0.5, 0.5) == doctest::Approx(0.75));
  CHECK(err_code([&] { d_act(0.5, 1, 0.5, 0.5); }) == "metrics.bad_action_count");
}

TEST_CASE("d_pkt: identical vectors, 1-D pair, and the pairwise oracle") {
  std::vector<double> same{2, 3, 2, 3, 2, 3};
  CHECK(d_pkt(same, 2) == doctest::Approx(0.0));

  std::vector<double> pair{1.0, -1.0};
  CHECK(d_pkt(pair, 1) == doctest::Approx(1.0));

  Rng rng(42);
  const size_t n = 5, d = 3;
  std::vector<double> flat(n * d);
  for (double& v : flat) v = rng.uniform(-2, 2);
  // Pairwise identity: mean squared distance to the centroid equals
  // sum_ij ||x_i - x_j||^2 / (2 n^2).
  double pairwise = 0.0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      double sq = 0.0;
      for (size_t k = 0; k < d; ++k) {
        double diff = flat[i * d + k] - flat[j * d + k];
        sq += diff * diff;
      }
      pairwise += sq;
    }
  pairwise /= 2.0 * static_cast<double>(n * n);
  CHECK(d_pkt(flat, d) == doctest::Approx(pairwise).epsilon(1e-9));

  CHECK(err_code([&] { d_pkt(std::vector<double>{1, 2, 3}, 2); }) == "metrics.dim_mismatch");
}

TEST_CASE("d_pkt is zero only for identical embeddings") {
  std::vector<double> nearly{1.0, 1.0, 1.0 + 1e-6};
  CHECK(d_pkt(nearly, 1) > 1e-13);
}

TEST_CASE("consistency_score: identical, disjoint, and hand-computed cases") {
  CHECK(consistency_score("fast search reader", "fast search reader") == doctest::Approx(1.0));
  CHECK(consistency_score("alpha beta", "gamma delta") == doctest::Approx(0.0));
  CHECK(consistency_score("fast search reader", "fast reader") ==
        doctest::Approx(2.0 / std::sqrt(6.0)).epsilon(1e-9));
  CHECK(err_code([] { consistency_score("...", "words"); }) == "metrics.empty_tokens");
  // Case and punctuation insensitive.
  CHECK(consistency_score("Fast, Search! Reader?", "fast search reader") == doctest::Approx(1.0));
}

TEST_CASE("consistency_report: means, flags, and the zero-segment error") {
  std::map<std::string, std::string> texts{{"P1", "alpha beta"}, {"P2", "gamma"}};
  std::map<std::string, std::vector<std::string>> segments{
      {"P1", {"alpha beta", "alpha zeta"}},
      {"P2", {"gamma", "gamma", "delta"}},
  };
  ConsistencyReport rep = consistency_report(texts, segments, 0.3);
  REQUIRE(rep.personas.size() == 2);
  const PersonaConsistency& p1 = rep.personas[0];
  CHECK(p1.persona == "P1");
  double s2 = 1.0 / 2.0;  // "alpha zeta" shares 1 of 2 tokens on both sides
  CHECK(p1.mean_score == doctest::Approx((1.0 + s2) / 2.0).epsilon(1e-9));

  const PersonaConsistency& p2 = rep.personas[1];
  CHECK(p2.segments[0].flagged == false);
  CHECK(p2.segments[2].flagged == true);  // disjoint scores 0 < 0.3
  CHECK(p2.mean_score == doctest::Approx(2.0 / 3.0).epsilon(1e-9));

  std::map<std::string, std::vector<std::string>> missing{{"P1", {"alpha"}}};
  CHECK(err_code([&] { consistency_report(texts, missing, 0.3); }) == "metrics.no_segments");
}

TEST_CASE("fixed-mean consistency cases") {
  std::map<std::string, std::string> texts{{"P", "x"}};
  std::map<std::string, std::vector<std::string>> segs{{"P", {"x y z w", "x"}}};
  // scores: 1/sqrt(4) = 0.5? no: tokens {x,y,z,w} vs {x}: dot 1, norms 2 and 1 -> 0.5; then 1.0.
  ConsistencyReport rep = consistency_report(texts, segs, 0.0);
  CHECK(rep.personas[0].mean_score == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("round1 rounds half away from zero") {
  CHECK(round1(26.55) == doctest::Approx(26.6));
  CHECK(round1(73.44) == doctest::Approx(73.4));
  CHECK(round1(-0.05) == doctest::Approx(-0.1));
}
