#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autograde/exam_model.hpp"
#include "autograde/score_engine.hpp"

namespace autograde {

/// A scored comparison joined with the texts a reviewer needs to read.
struct DiscrepancyItem {
  std::string exam_id;
  std::string question_id;
  std::string student_id;
  std::string language_tag;
  ScaleKind scale = ScaleKind::similarity;
  Points human_points{0};
  Points max_points{1};
  double p_h = 0.0;
  std::optional<double> p_L;
  std::optional<double> gap;
  std::optional<CategoryRating> rating;
  std::optional<std::string> reference_label;
  std::size_t reference_index = 0;
  std::string question_text;
  std::string student_answer_text;
  std::string educator_answer_text;
  std::string llm_reply_text;

  bool parsed() const { return rating.has_value(); }
  std::string item_id() const { return question_id + "/" + student_id; }
  /// Label of the reference used, or its position when unlabeled.
  std::string reference_used() const;

  bool operator==(const DiscrepancyItem&) const = default;
};

class ReportError : public std::runtime_error {
 public:
  explicit ReportError(const std::string& what) : std::runtime_error(what) {}
};

/// Parsed items by descending gap, ties by (question_id, student_id); then
/// unparsed items by (question_id, student_id). Throws ReportError when a
/// comparison does not resolve in the bundle.
std::vector<DiscrepancyItem> build_discrepancy_list(std::span<const ScoredComparison> comparisons,
                                                    const ExamBundle& bundle,
                                                    ScaleKind scale = ScaleKind::similarity);

enum class ReportFormat { text, markdown, json, csv };

ReportFormat parse_report_format(std::string_view text);

std::string render_report(std::span<const DiscrepancyItem> items, ReportFormat format);

nlohmann::json item_to_json(const DiscrepancyItem& item);
DiscrepancyItem item_from_json(const nlohmann::json& j);
std::vector<DiscrepancyItem> items_from_json(const nlohmann::json& j);

enum class CorrelationStatus { defined, zero_variance, insufficient_points };

struct Correlation {
  std::optional<double> value;
  CorrelationStatus status = CorrelationStatus::insufficient_points;
  std::size_t n = 0;

  bool operator==(const Correlation&) const = default;
};

Correlation correlate(std::span<const double> xs, std::span<const double> ys);

struct LanguageBreakdown {
  std::size_t items = 0;
  std::size_t scored = 0;
  std::size_t unparsed = 0;
  Correlation pearson;
  std::optional<double> mean_gap;

  bool operator==(const LanguageBreakdown&) const = default;
};

struct Summary {
  std::size_t total = 0;  // scored + unparsed + failed
  std::size_t scored = 0;
  std::size_t unparsed = 0;
  std::size_t failed = 0;
  std::optional<double> mean_gap;
  Correlation pearson_pooled;
  std::map<std::string, Correlation> pearson_per_question;
  std::vector<CategoryHistogram> histograms;
  std::map<std::string, LanguageBreakdown> per_language;
};

/// Unparsed items count in histograms only, never in correlations or gaps.
Summary summarize(std::span<const DiscrepancyItem> items, std::size_t failed = 0);

nlohmann::json summary_to_json(const Summary& summary);

}  // namespace autograde
