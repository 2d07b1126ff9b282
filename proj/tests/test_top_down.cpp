#include <gtest/gtest.h>

#include "groupemo/top_down.hpp"
#include "synthetic.hpp"

using namespace groupemo;
using namespace groupemo::top_down;
using preprocess::ImageRecord;

namespace {

void expect_probs_near(const ClassProbs& a, const ClassProbs& b, double tol) {
  for (std::size_t k = 0; k < kNumClasses; ++k) EXPECT_NEAR(a[k], b[k], tol) << "class " << k;
}

// One descriptor "w" counted per class.
DescriptorCounts single_word(ClassCounts n_true, ClassCounts class_counts) {
  DescriptorCounts c;
  c.vocabulary = {"w"};
  c.n_true = {n_true};
  ClassCounts n_false{};
  for (std::size_t y = 0; y < 3; ++y) n_false[y] = class_counts[y] - n_true[y];
  c.n_false = {n_false};
  c.class_counts = class_counts;
  return c;
}

ScenePosteriorModel one_word_model(ClassProbs prior, ClassProbs p_true) {
  ScenePosteriorModel m;
  m.prior = prior;
  m.vocabulary = {"party"};
  m.p_true = {p_true};
  return m;
}

std::vector<ImageRecord> fixture_records() {
  // Hand tally, per class (positive, neutral, negative):
  //   fun:     2 0 0      party:  1 1 0      rain: 0 1 1      wedding: 1 0 0
  //   classes: 2 2 2
  return {
      {"1", 0, {}, {"fun", "party", "fun"}},
      {"2", 0, {}, {"fun", "wedding"}},
      {"3", 1, {}, {"party"}},
      {"4", 1, {}, {"rain"}},
      {"5", 2, {}, {"rain"}},
      {"6", 2, {}, {}},
  };
}

}  // namespace

TEST(Fit, ThreeOfFourAtAlphaZero) {
  const auto m = fit(single_word({3, 1, 1}, {4, 2, 2}), 0.0);
  EXPECT_EQ(m.p_true[0][0], 0.75);
}

TEST(Fit, NeverSeenWithLaplaceSmoothing) {
  for (std::size_t n : {1u, 5u, 40u}) {
    const auto m = fit(single_word({0, 1, 1}, {n, 3, 3}), 1.0);
    EXPECT_DOUBLE_EQ(m.p_true[0][0], 1.0 / static_cast<double>(n + 2));
  }
}

TEST(Fit, RowsAreComplementsAndPriorNormalized) {
  const auto m = fit(single_word({2, 0, 5}, {3, 4, 9}), 0.5);
  for (std::size_t y = 0; y < 3; ++y) EXPECT_EQ(m.p_true[0][y] + m.p_false(0, y), 1.0);
  expect_probs_near(m.prior, {3.0 / 16, 4.0 / 16, 9.0 / 16}, 1e-15);
  EXPECT_EQ(m.alpha, 0.5);
}

TEST(Fit, EmptyClassIsRejected) { EXPECT_THROW(fit(single_word({0, 0, 0}, {2, 0, 2}), 1.0), InputError); }

TEST(Counts, FullPresenceAndPerImageSemantics) {
  const std::vector<ImageRecord> recs{{"a", 0, {}, {"fun", "fun"}}, {"b", 0, {}, {"fun"}}, {"c", 1, {}, {}},
                                      {"d", 2, {}, {}}};
  const auto c = count_from_manifest(recs);
  ASSERT_EQ(c.vocabulary, (std::vector<std::string>{"fun"}));
  EXPECT_EQ(c.n_true[0][0], 2u);
  EXPECT_EQ(c.n_false[0][0], 0u);
}

TEST(Counts, HandTalliedFixture) {
  const auto recs = fixture_records();
  const auto c = count_from_manifest(recs);
  EXPECT_EQ(c.vocabulary, (std::vector<std::string>{"fun", "party", "rain", "wedding"}));
  EXPECT_EQ(c.class_counts, (ClassCounts{2, 2, 2}));
  EXPECT_EQ(c.n_true[0], (ClassCounts{2, 0, 0}));
  EXPECT_EQ(c.n_true[1], (ClassCounts{1, 1, 0}));
  EXPECT_EQ(c.n_true[2], (ClassCounts{0, 1, 1}));
  EXPECT_EQ(c.n_true[3], (ClassCounts{1, 0, 0}));
  c.validate();

  // Raw MLE ratios at alpha 0.
  const auto m = fit(c, 0.0);
  EXPECT_EQ(m.p_true[0], (ClassProbs{1.0, 0.0, 0.0}));
  EXPECT_EQ(m.p_true[1], (ClassProbs{0.5, 0.5, 0.0}));
  EXPECT_EQ(m.p_true[2], (ClassProbs{0.0, 0.5, 0.5}));
  EXPECT_EQ(m.p_true[3], (ClassProbs{0.5, 0.0, 0.0}));
  expect_probs_near(m.prior, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 1e-15);
}

TEST(Counts, UnlabeledRecordIsRejected) {
  const std::vector<ImageRecord> recs{{"a", std::nullopt, {}, {"x"}}};
  EXPECT_THROW(count_from_manifest(recs), InputError);
}

TEST(Evidence, Partitioning) {
  const auto m = one_word_model({1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.9, 0.1, 0.1});
  EXPECT_TRUE(set_evidence(m, {}).observed.empty());
  const std::vector<std::string> words{"party", "unknownword"};
  const auto e = set_evidence(m, words);
  EXPECT_EQ(e.observed, (std::vector<std::size_t>{0}));
  EXPECT_EQ(e.unknown, (std::vector<std::string>{"unknownword"}));
  const std::vector<std::string> twice{"party", "party", "zz", "zz"};
  const auto d = set_evidence(m, twice);
  EXPECT_EQ(d.observed.size(), 1u);
  EXPECT_EQ(d.unknown, (std::vector<std::string>{"zz"}));
  EXPECT_FALSE(d.cnn_class.has_value());
}

TEST(Posterior, NoEvidenceIsThePrior) {
  const auto m = one_word_model({0.5, 0.3, 0.2}, {0.9, 0.1, 0.1});
  expect_probs_near(infer_posterior(m, {}), m.prior, 1e-15);
  expect_probs_near(brute_force_joint(m, {}), m.prior, 1e-15);
}

TEST(Posterior, TwoNodeExample) {
  const auto m = one_word_model({1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.9, 0.1, 0.1});
  const std::vector<std::string> words{"party"};
  const ClassProbs p = infer_posterior(m, set_evidence(m, words));
  expect_probs_near(p, {0.9 / 1.1, 0.1 / 1.1, 0.1 / 1.1}, 1e-15);
  EXPECT_NEAR(p[0], 0.8182, 5e-5);
  EXPECT_NEAR(p[1], 0.0909, 5e-5);
}

TEST(Posterior, DeterministicClass) {
  const auto m = one_word_model({0.2, 0.5, 0.3}, {0.0, 1.0, 0.0});
  const std::vector<std::string> words{"party"};
  const auto e = set_evidence(m, words);
  EXPECT_EQ(infer_posterior(m, e), (ClassProbs{0, 1, 0}));
  EXPECT_EQ(brute_force_joint(m, e), (ClassProbs{0, 1, 0}));
}

TEST(Posterior, ZeroLikelihoodIsDiagnosed) {
  ScenePosteriorModel m;
  m.prior = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  m.alpha = 0.0;
  m.vocabulary = {"a", "b"};
  m.p_true = {{1, 0, 0}, {0, 1, 0}};
  const std::vector<std::string> words{"a", "b"};
  try {
    infer_posterior(m, set_evidence(m, words));
    FAIL() << "expected ZeroLikelihoodError";
  } catch (const ZeroLikelihoodError& e) {
    EXPECT_NE(std::string(e.what()).find("zero-likelihood"), std::string::npos);
  }
}

TEST(Posterior, LongEvidenceDoesNotUnderflow) {
  ScenePosteriorModel m;
  m.prior = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::vector<std::string> words;
  for (int i = 0; i < 900; ++i) {
    m.vocabulary.push_back("w" + std::to_string(1000 + i));
    m.p_true.push_back({0.02, 0.01, 0.01});
  }
  words = m.vocabulary;
  const ClassProbs p = infer_posterior(m, set_evidence(m, words));
  EXPECT_NEAR(p[0], 1.0, 1e-12);
  EXPECT_NEAR(sum(p), 1.0, 1e-12);
}

TEST(BruteForce, VocabularyLimit) {
  Rng rng(1);
  const auto m = fixtures::random_bn(kBruteForceLimit + 1, rng);
  EXPECT_THROW(brute_force_joint(m, {}), InputError);
}

TEST(BruteForce, AgreesWithEliminationOnRandomModels) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    const auto m = fixtures::random_bn(n, rng);
    const auto words = fixtures::random_descriptors(m, rng);
    const auto e = set_evidence(m, words);
    const ClassProbs fast = infer_posterior(m, e);
    const ClassProbs slow = brute_force_joint(m, e);
    expect_probs_near(fast, slow, 1e-12);
    EXPECT_NEAR(sum(fast), 1.0, 1e-9);
    for (double v : fast) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Posterior, OrderInvariance) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = fixtures::random_bn(8, rng);
    auto words = fixtures::random_descriptors(m, rng);
    const ClassProbs a = infer_posterior(m, set_evidence(m, words));
    rng.shuffle(std::span(words));
    EXPECT_EQ(infer_posterior(m, set_evidence(m, words)), a);
  }
}

TEST(Posterior, AddingAFavouringDescriptorNeverLowersItsClass) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto m = fixtures::random_bn(6, rng, 0.01);
    const std::size_t target = rng.below(3);
    // Make descriptor d05 favour `target` strictly.
    ClassProbs& row = m.p_true[5];
    const double top = std::max({row[0], row[1], row[2]});
    row[target] = std::min(0.999, top + 0.01);
    for (std::size_t y = 0; y < 3; ++y)
      if (y != target && row[y] >= row[target]) row[y] = row[target] * 0.5;
    std::vector<std::string> words;
    for (std::size_t i = 0; i < 5; ++i)
      if (rng.bernoulli(0.5)) words.push_back(m.vocabulary[i]);
    const double before = infer_posterior(m, set_evidence(m, words))[target];
    words.push_back(m.vocabulary[5]);
    const double after = infer_posterior(m, set_evidence(m, words))[target];
    EXPECT_GE(after, before);
  }
}
