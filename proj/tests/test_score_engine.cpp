#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "autograde/score_engine.hpp"

using namespace autograde;

namespace {

// Pairwise-difference form of the sample correlation:
//   r = sum_{i<j} dx dy / sqrt(sum_{i<j} dx^2 * sum_{i<j} dy^2)
// It shares no intermediate quantity (means, centring) with the engine.
std::optional<long double> pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const long double dx = static_cast<long double>(x[i]) - x[j];
      const long double dy = static_cast<long double>(y[i]) - y[j];
      sxy += dx * dy;
      sxx += dx * dx;
      syy += dy * dy;
    }
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

StudentAnswer answer(const std::string& sid, Points pts) {
  return {sid, "q1", "text", pts};
}

const Question kQuestion{"q1", "Q?", Points(10), "en"};

std::optional<CategoryRating> rating(const std::string& category, const RatingScale& scale) {
  return CategoryRating{category, scale.index_of(category), scale.kind(), "", true, 0};
}

}  // namespace

TEST(CategoryFraction, QualityGridExact) {
  const auto& q = RatingScale::quality();
  const std::vector<Points> expected{Points(1),    Points(5, 6), Points(2, 3), Points(1, 2),
                                     Points(1, 3), Points(1, 6), Points(0)};
  ASSERT_EQ(q.size(), expected.size());
  for (std::size_t i = 0; i < q.size(); ++i) EXPECT_EQ(category_fraction(q.at(i), q), expected[i]) << q.at(i);
}

TEST(CategoryFraction, SimilarityGridExact) {
  const auto& s = RatingScale::similarity();
  const std::vector<Points> expected{Points(1), Points(4, 5), Points(3, 5), Points(2, 5), Points(1, 5), Points(0)};
  ASSERT_EQ(s.size(), expected.size());
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(category_fraction(s.at(i), s), expected[i]) << s.at(i);
}

TEST(CategoryFraction, EndpointsAreMaximalAndNoPoints) {
  EXPECT_EQ(category_fraction("Extremely good.", RatingScale::quality()), Points(1));
  EXPECT_EQ(category_fraction("Extremely bad.", RatingScale::quality()), Points(0));
  EXPECT_EQ(category_fraction("Very close.", RatingScale::similarity()), Points(1));
  EXPECT_EQ(category_fraction("Very distant.", RatingScale::similarity()), Points(0));
}

TEST(CategoryFraction, MonotoneInIndex) {
  for (const auto* scale : {&RatingScale::quality(), &RatingScale::similarity()}) {
    for (std::size_t i = 1; i < scale->size(); ++i) {
      EXPECT_GT(category_fraction(scale->at(i - 1), *scale), category_fraction(scale->at(i), *scale));
    }
  }
}

TEST(CategoryFraction, RejectsForeignCategory) {
  EXPECT_THROW(category_fraction("Close.", RatingScale::quality()), std::invalid_argument);
  EXPECT_THROW(category_fraction("Good", RatingScale::quality()), std::invalid_argument);
}

TEST(CategoryToScore, TagsSource) {
  const auto s = category_to_score("Ok.", RatingScale::quality());
  EXPECT_DOUBLE_EQ(s.value, 0.5);
  EXPECT_EQ(s.source, ScoreSource::llm);
  const auto h = human_score(Points(7), Points(10));
  EXPECT_DOUBLE_EQ(h.value, 0.7);
  EXPECT_EQ(h.source, ScoreSource::human);
}

TEST(Gap, AbsoluteDifference) {
  EXPECT_NEAR(gap({1.0, ScoreSource::human}, {0.1, ScoreSource::llm}), 0.9, 1e-15);
  EXPECT_NEAR(gap({0.2, ScoreSource::human}, {0.8, ScoreSource::llm}), 0.6, 1e-15);
  EXPECT_EQ(gap({0.5, ScoreSource::human}, {0.5, ScoreSource::llm}), 0.0);
}

TEST(ScoreComparison, ParsedAndUnparsed) {
  const auto& s = RatingScale::similarity();
  const auto c = score_comparison(answer("s1", Points(9)), kQuestion, rating("Very distant.", s), "Very distant.");
  EXPECT_DOUBLE_EQ(c.p_human.value, 0.9);
  ASSERT_TRUE(c.p_llm);
  EXPECT_EQ(c.p_llm->value, 0.0);
  ASSERT_TRUE(c.gap);
  EXPECT_DOUBLE_EQ(*c.gap, 0.9);

  const auto u = score_comparison(answer("s2", Points(3)), kQuestion, std::nullopt, "No idea.");
  EXPECT_FALSE(u.parsed());
  EXPECT_FALSE(u.p_llm);
  EXPECT_FALSE(u.gap);
  EXPECT_EQ(u.reply_text, "No idea.");
}

TEST(ScoreComparison, EqualExactGapsCompareEqual) {
  // 1 - 4/5 and 4/5 - 3/5 differ as doubles when computed naively.
  const auto& s = RatingScale::similarity();
  const Question q5{"q1", "Q?", Points(5), "en"};
  const auto a = score_comparison(answer("s1", Points(5)), q5, rating("Close.", s), "");
  const auto b = score_comparison(answer("s2", Points(4)), q5, rating("Somewhat close.", s), "");
  ASSERT_TRUE(a.gap && b.gap);
  EXPECT_EQ(*a.gap, *b.gap);
}

TEST(ScoreComparison, GapEqualsScoreDifferenceOverGrid) {
  for (const auto* scale : {&RatingScale::quality(), &RatingScale::similarity()}) {
    for (int pts = 0; pts <= 10; ++pts) {
      for (const auto& cat : scale->categories()) {
        const auto c = score_comparison(answer("s", Points(pts)), kQuestion, rating(cat, *scale), "");
        EXPECT_NEAR(*c.gap, std::abs(c.p_human.value - c.p_llm->value), 1e-15);
        EXPECT_GE(*c.gap, 0.0);
        EXPECT_LE(*c.gap, 1.0);
      }
    }
  }
}

TEST(Pearson, MatchesPairwiseOracleOnRandomVectors) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> len(2, 50);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = len(rng);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = unit(rng);
      // Mix of independent and correlated pairs.
      y[i] = trial % 3 == 0 ? 0.7 * x[i] + 0.3 * unit(rng) : unit(rng);
    }
    const auto oracle = pearson_oracle(x, y);
    const auto r = pearson(x, y);
    ASSERT_EQ(oracle.has_value(), r.has_value());
    if (!r) continue;
    EXPECT_NEAR(*r, static_cast<double>(*oracle), 1e-12) << "n=" << n;
    ++checked;
  }
  EXPECT_GE(checked, 100);
}

TEST(Pearson, TrivialCases) {
  const std::vector<double> x{0.1, 0.4, 0.9, 1.0};
  std::vector<double> up, down;
  for (double v : x) {
    up.push_back(2 * v + 1);
    down.push_back(-3 * v);
  }
  EXPECT_NEAR(*pearson(x, up), 1.0, 1e-12);
  EXPECT_NEAR(*pearson(x, down), -1.0, 1e-12);
  EXPECT_NEAR(*pearson(std::vector<double>{1, 0, 1, 0}, std::vector<double>{0.8, 0.2, 0.6, 0.4}), 0.894427191,
              1e-9);
  EXPECT_NEAR(*pearson(std::vector<double>{0, 1}, std::vector<double>{0, 1}), 1.0, 1e-12);
}

TEST(Pearson, ZeroVarianceIsUndefined) {
  EXPECT_FALSE(pearson(std::vector<double>{0.5, 0.5, 0.5}, std::vector<double>{0.1, 0.2, 0.3}));
  EXPECT_FALSE(pearson(std::vector<double>{0.1, 0.2, 0.3}, std::vector<double>{2.0 / 3, 2.0 / 3, 2.0 / 3}));
}

TEST(Pearson, RejectsBadInput) {
  EXPECT_THROW(pearson(std::vector<double>{1, 2}, std::vector<double>{1}), std::invalid_argument);
  EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{1}), std::invalid_argument);
  EXPECT_THROW(pearson(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST(Pearson, StaysWithinUnitInterval) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(3), y(3);
    for (int i = 0; i < 3; ++i) y[i] = x[i] = unit(rng);
    const auto r = pearson(x, y);
    ASSERT_TRUE(r);
    EXPECT_LE(*r, 1.0);
    EXPECT_GE(*r, -1.0);
  }
}

TEST(CategoryHistogram, CountsInScaleOrder) {
  const auto& q = RatingScale::quality();
  std::vector<std::optional<CategoryRating>> ratings{rating("Good.", q), rating("Good.", q), rating("Good.", q),
                                                     rating("Ok.", q)};
  const auto h = category_histogram(ratings, q);
  EXPECT_EQ(h.counts, (std::vector<std::size_t>{0, 0, 3, 1, 0, 0, 0}));
  EXPECT_EQ(h.unparsed, 0u);
  EXPECT_EQ(h.total(), 4u);
}

TEST(CategoryHistogram, UnparsedAndForeignRatings) {
  const auto& q = RatingScale::quality();
  std::vector<std::optional<CategoryRating>> ratings{std::nullopt, rating("Close.", RatingScale::similarity()),
                                                     rating("Extremely bad.", q)};
  const auto h = category_histogram(ratings, q);
  EXPECT_EQ(h.counts, (std::vector<std::size_t>{0, 0, 0, 0, 0, 0, 1}));
  EXPECT_EQ(h.unparsed, 2u);
  EXPECT_EQ(h.total(), ratings.size());
}

TEST(SelectBestReference, MaxLlmScoreThenEarliest) {
  const auto& s = RatingScale::similarity();
  const auto a = answer("s1", Points(4));
  std::vector<ScoredComparison> cs{
      score_comparison(a, kQuestion, rating("Somewhat close.", s), "", "primary", 0),
      score_comparison(a, kQuestion, rating("Close.", s), "", "alt", 1),
      score_comparison(a, kQuestion, rating("Close.", s), "", "alt2", 2),
  };
  EXPECT_EQ(select_best_reference(cs).reference_index, 1u);

  std::vector<ScoredComparison> tie{
      score_comparison(a, kQuestion, rating("Very distant.", s), "", "primary", 0),
      score_comparison(a, kQuestion, rating("Very distant.", s), "", "alt", 1),
  };
  EXPECT_EQ(select_best_reference(tie).reference_index, 0u);
}

TEST(SelectBestReference, PrefersParsedOverUnparsed) {
  const auto& s = RatingScale::similarity();
  const auto a = answer("s1", Points(4));
  std::vector<ScoredComparison> cs{
      score_comparison(a, kQuestion, std::nullopt, "??", "primary", 0),
      score_comparison(a, kQuestion, rating("Very distant.", s), "", "alt", 1),
  };
  EXPECT_EQ(select_best_reference(cs).reference_index, 1u);
  std::vector<ScoredComparison> none{score_comparison(a, kQuestion, std::nullopt, "??", "primary", 0)};
  EXPECT_FALSE(select_best_reference(none).parsed());
}

TEST(SelectBestReference, RejectsEmptyOrMixedInput) {
  EXPECT_THROW(select_best_reference({}), std::invalid_argument);
  const auto& s = RatingScale::similarity();
  std::vector<ScoredComparison> mixed{score_comparison(answer("s1", Points(1)), kQuestion, rating("Close.", s), ""),
                                      score_comparison(answer("s2", Points(1)), kQuestion, rating("Close.", s), "")};
  EXPECT_THROW(select_best_reference(mixed), std::invalid_argument);
}
