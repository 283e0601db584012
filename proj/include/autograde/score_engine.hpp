#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autograde/exam_model.hpp"
#include "autograde/rating_parser.hpp"

namespace autograde {

enum class ScoreSource { human, llm };

struct NormalizedScore {
  double value = 0.0;  // in [0, 1]
  ScoreSource source = ScoreSource::human;

  bool operator==(const NormalizedScore&) const = default;
};

/// One assessed (student answer, reference) pair. `rating`, `p_llm` and `gap`
/// are empty when the LLM reply could not be parsed.
struct ScoredComparison {
  std::string student_id;
  std::string question_id;
  NormalizedScore p_human;
  std::optional<NormalizedScore> p_llm;
  std::optional<double> gap;
  std::optional<CategoryRating> rating;
  std::optional<std::string> reference_label;
  std::size_t reference_index = 0;  // position among the question's references
  std::string reply_text;

  bool parsed() const { return rating.has_value(); }
};

/// Exact interpolated fraction: 1 - index / (n - 1).
Points category_fraction(std::string_view category, const RatingScale& scale);

NormalizedScore category_to_score(std::string_view category, const RatingScale& scale);

NormalizedScore human_score(const Points& points, const Points& max_points);

/// |p_h - p_L|
double gap(const NormalizedScore& human, const NormalizedScore& llm);

/// Builds a comparison record; p_L and gap are filled only when `rating` is set.
ScoredComparison score_comparison(const StudentAnswer& answer, const Question& question,
                                  std::optional<CategoryRating> rating, std::string reply_text,
                                  std::optional<std::string> reference_label = std::nullopt,
                                  std::size_t reference_index = 0);

/// Sample Pearson correlation. nullopt when either input has zero variance.
/// Throws std::invalid_argument for mismatched lengths or fewer than 2 points.
std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys);

struct CategoryHistogram {
  ScaleKind scale = ScaleKind::quality;
  std::vector<std::size_t> counts;  // scale order, best first
  std::size_t unparsed = 0;

  std::size_t total() const;
  bool operator==(const CategoryHistogram&) const = default;
};

/// Ratings whose scale differs from `scale` are counted as unparsed.
CategoryHistogram category_histogram(std::span<const std::optional<CategoryRating>> ratings,
                                     const RatingScale& scale);

/// The comparison with maximal p_L; ties go to the earliest reference in the
/// bundle. Unparsed entries are never selected unless nothing parsed.
/// Throws std::invalid_argument on empty input or mixed answers.
const ScoredComparison& select_best_reference(std::span<const ScoredComparison> comparisons);

}  // namespace autograde
