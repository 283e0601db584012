#include "autograde/prompt_forge.hpp"

#include <stdexcept>

namespace autograde {

const RatingScale& RatingScale::quality() {
  static const RatingScale scale(ScaleKind::quality, {"Extremely good.", "Very good.", "Good.", "Ok.", "Bad.",
                                                      "Very bad.", "Extremely bad."});
  return scale;
}

const RatingScale& RatingScale::similarity() {
  static const RatingScale scale(ScaleKind::similarity, {"Very close.", "Close.", "Somewhat close.",
                                                         "Somewhat distant.", "Distant.", "Very distant."});
  return scale;
}

std::size_t RatingScale::index_of(std::string_view category) const {
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (categories_[i] == category) return i;
  }
  return static_cast<std::size_t>(-1);
}

std::string_view to_string(ScaleKind kind) {
  return kind == ScaleKind::quality ? "quality" : "similarity";
}

std::string_view to_string(PromptFamily family) {
  switch (family) {
    case PromptFamily::educator_assessment:
      return "educator_assessment";
    case PromptFamily::student_assessment:
      return "student_assessment";
    case PromptFamily::comparison:
      return "comparison";
  }
  return "unknown";
}

namespace {

// The " . " after the question slot and the doubled period after
// "Very distant." are part of the evaluated templates; keep them.
constexpr std::string_view kQualityInstruction =
    "Start the reply with one of the following: Extremely good., Very good., Good., Ok., Bad., Very bad., "
    "Extremely bad. Explain the choice.";

constexpr std::string_view kSimilarityInstruction =
    "Start the reply with one of the following: Very close., Close., Somewhat close., Somewhat distant., "
    "Distant., Very distant.. Explain the choice.";

std::string join(std::initializer_list<std::string_view> parts) {
  std::string out;
  for (auto p : parts) out += p;
  return out;
}

std::string reference_ref(const EducatorAnswer& e) {
  return "reference:" + e.question_id + (e.label ? "#" + *e.label : std::string());
}

}  // namespace

const PromptTemplates& PromptTemplates::english() {
  static const PromptTemplates t{
      join({"Here is a question: {Q} . Here is an answer: {A}. How good is the answer to the question? ",
            kQualityInstruction, " Explain also what is missing."}),
      join({"Here is a question: {Q} . Here is an answer: {A}. How good is the answer to the question? ",
            kQualityInstruction}),
      join({"Here is an answer: {A} . Here is the optimal answer: {E}. How close is the answer to the optimal "
            "answer? ",
            kSimilarityInstruction}),
  };
  return t;
}

std::string render_template(std::string_view tmpl, std::string_view question, std::string_view answer,
                            std::string_view reference) {
  std::string out;
  out.reserve(tmpl.size() + question.size() + answer.size() + reference.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{' && i + 2 < tmpl.size() && tmpl[i + 2] == '}') {
      const char slot = tmpl[i + 1];
      if (slot == 'Q' || slot == 'A' || slot == 'E') {
        out += slot == 'Q' ? question : slot == 'A' ? answer : reference;
        i += 3;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

AssessmentPrompt build_educator_prompt(const Question& question, const EducatorAnswer& answer,
                                       const PromptTemplates& templates) {
  return {render_template(templates.educator_assessment, question.text, answer.text, {}),
          &RatingScale::quality(),
          PromptFamily::educator_assessment,
          {"question:" + question.id, reference_ref(answer)}};
}

AssessmentPrompt build_student_prompt(const Question& question, const StudentAnswer& answer,
                                      const PromptTemplates& templates) {
  return {render_template(templates.student_assessment, question.text, answer.text, {}),
          &RatingScale::quality(),
          PromptFamily::student_assessment,
          {"question:" + question.id, "student:" + answer.student_id}};
}

AssessmentPrompt build_comparison_prompt(const StudentAnswer& student, const EducatorAnswer& reference,
                                         const PromptTemplates& templates) {
  return {render_template(templates.comparison, {}, student.text, reference.text),
          &RatingScale::similarity(),
          PromptFamily::comparison,
          {"question:" + student.question_id, "student:" + student.student_id, reference_ref(reference)}};
}

std::vector<AssessmentPrompt> build_multi_comparison(const StudentAnswer& student,
                                                     std::span<const EducatorAnswer> references,
                                                     const PromptTemplates& templates) {
  if (references.empty()) throw std::invalid_argument("multi-comparison needs at least one reference");
  std::vector<AssessmentPrompt> out;
  out.reserve(references.size());
  for (std::size_t i = 0; i < references.size(); ++i) {
    auto p = build_comparison_prompt(student, references[i], templates);
    p.subject_refs.push_back("reference_position:" + std::to_string(i));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace autograde
