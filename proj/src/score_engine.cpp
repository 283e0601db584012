#include "autograde/score_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace autograde {

Points category_fraction(std::string_view category, const RatingScale& scale) {
  const auto idx = scale.index_of(category);
  if (idx >= scale.size()) {
    throw std::invalid_argument("'" + std::string(category) + "' is not a " + std::string(to_string(scale.kind())) +
                                " category");
  }
  const auto last = static_cast<std::int64_t>(scale.size() - 1);
  return Points(1) - Points(static_cast<std::int64_t>(idx), last);
}

NormalizedScore category_to_score(std::string_view category, const RatingScale& scale) {
  return {to_double(category_fraction(category, scale)), ScoreSource::llm};
}

NormalizedScore human_score(const Points& points, const Points& max_points) {
  return {to_double(normalize_human_score(points, max_points)), ScoreSource::human};
}

double gap(const NormalizedScore& human, const NormalizedScore& llm) {
  return std::abs(human.value - llm.value);
}

ScoredComparison score_comparison(const StudentAnswer& answer, const Question& question,
                                  std::optional<CategoryRating> rating, std::string reply_text,
                                  std::optional<std::string> reference_label, std::size_t reference_index) {
  ScoredComparison c;
  c.student_id = answer.student_id;
  c.question_id = answer.question_id;
  const Points p_h = normalize_human_score(answer.human_points, question.max_points);
  c.p_human = {to_double(p_h), ScoreSource::human};
  if (rating) {
    const auto& scale = rating->scale == ScaleKind::quality ? RatingScale::quality() : RatingScale::similarity();
    const Points p_l = category_fraction(rating->category, scale);
    c.p_llm = NormalizedScore{to_double(p_l), ScoreSource::llm};
    // Exact difference, so equal gaps compare equal and tie-breaks are stable.
    c.gap = to_double(p_h > p_l ? p_h - p_l : p_l - p_h);
  }
  c.rating = std::move(rating);
  c.reference_label = std::move(reference_label);
  c.reference_index = reference_index;
  c.reply_text = std::move(reply_text);
  return c;
}

std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
  if (xs.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

std::size_t CategoryHistogram::total() const {
  std::size_t t = unparsed;
  for (auto c : counts) t += c;
  return t;
}

CategoryHistogram category_histogram(std::span<const std::optional<CategoryRating>> ratings,
                                     const RatingScale& scale) {
  CategoryHistogram h{scale.kind(), std::vector<std::size_t>(scale.size(), 0), 0};
  for (const auto& r : ratings) {
    const auto idx = r && r->scale == scale.kind() ? scale.index_of(r->category) : scale.size();
    if (idx < scale.size()) {
      ++h.counts[idx];
    } else {
      ++h.unparsed;
    }
  }
  return h;
}

const ScoredComparison& select_best_reference(std::span<const ScoredComparison> comparisons) {
  if (comparisons.empty()) throw std::invalid_argument("select_best_reference: no comparisons");
  const ScoredComparison* best = &comparisons.front();
  for (const auto& c : comparisons) {
    if (c.student_id != best->student_id || c.question_id != best->question_id) {
      throw std::invalid_argument("select_best_reference: comparisons belong to different answers");
    }
  }
  auto better = [](const ScoredComparison& a, const ScoredComparison& b) {
    if (a.parsed() != b.parsed()) return a.parsed();
    if (a.parsed() && a.p_llm->value != b.p_llm->value) return a.p_llm->value > b.p_llm->value;
    return a.reference_index < b.reference_index;
  };
  for (const auto& c : comparisons) {
    if (better(c, *best)) best = &c;
  }
  return *best;
}

}  // namespace autograde
