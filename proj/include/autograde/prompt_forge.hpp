#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autograde/exam_model.hpp"

namespace autograde {

enum class ScaleKind { quality, similarity };

/// Ordered category strings, best first, each with its trailing period.
class RatingScale {
 public:
  static const RatingScale& quality();
  static const RatingScale& similarity();

  ScaleKind kind() const { return kind_; }
  std::span<const std::string> categories() const { return categories_; }
  std::size_t size() const { return categories_.size(); }
  const std::string& at(std::size_t index) const { return categories_.at(index); }

  /// Index of an exact category string, or npos.
  std::size_t index_of(std::string_view category) const;

 private:
  RatingScale(ScaleKind kind, std::vector<std::string> categories)
      : kind_(kind), categories_(std::move(categories)) {}

  ScaleKind kind_;
  std::vector<std::string> categories_;
};

std::string_view to_string(ScaleKind kind);

enum class PromptFamily { educator_assessment, student_assessment, comparison };

std::string_view to_string(PromptFamily family);

struct AssessmentPrompt {
  std::string text;
  const RatingScale* scale = nullptr;
  PromptFamily family = PromptFamily::student_assessment;
  // Audit trail: "question:<id>", "student:<id>", "reference:<qid>#<index>".
  std::vector<std::string> subject_refs;
};

/// Template strings with "{Q}", "{A}" and "{E}" slots. The defaults reproduce
/// the evaluated English templates; an exam may override them.
struct PromptTemplates {
  std::string educator_assessment;
  std::string student_assessment;
  std::string comparison;

  static const PromptTemplates& english();
};

/// Substitutes every "{X}" slot verbatim. Unknown slots are left untouched.
std::string render_template(std::string_view tmpl, std::string_view question, std::string_view answer,
                            std::string_view reference);

AssessmentPrompt build_educator_prompt(const Question& question, const EducatorAnswer& answer,
                                       const PromptTemplates& templates = PromptTemplates::english());

AssessmentPrompt build_student_prompt(const Question& question, const StudentAnswer& answer,
                                      const PromptTemplates& templates = PromptTemplates::english());

/// The question text is deliberately not part of a comparison prompt.
AssessmentPrompt build_comparison_prompt(const StudentAnswer& student, const EducatorAnswer& reference,
                                         const PromptTemplates& templates = PromptTemplates::english());

/// One comparison prompt per reference, in order; duplicates are kept.
/// Throws std::invalid_argument on an empty reference list.
std::vector<AssessmentPrompt> build_multi_comparison(const StudentAnswer& student,
                                                     std::span<const EducatorAnswer> references,
                                                     const PromptTemplates& templates = PromptTemplates::english());

}  // namespace autograde
