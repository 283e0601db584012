#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autograde/exam_model.hpp"
#include "autograde/llm_gateway.hpp"
#include "autograde/rating_parser.hpp"

namespace autograde {

enum class PerturbationKind { append_false_arithmetic, append_irrelevant_sentence, append_both, antonym_swap };

std::string_view to_string(PerturbationKind kind);

struct Perturbation {
  PerturbationKind kind = PerturbationKind::append_false_arithmetic;
  std::string payload;                              // appended text (append kinds)
  std::pair<std::string, std::string> swap_words;  // antonym_swap only

  static Perturbation false_arithmetic(std::string payload = "3*5=7");
  static Perturbation irrelevant_sentence(std::string payload = "the cat sits on the mattress");
  static Perturbation both(std::string arithmetic = "3*5=7", std::string sentence = "the cat sits on the mattress");
  static Perturbation antonyms(std::string first, std::string second);

  /// The three appended payloads used for the default probe.
  static std::vector<Perturbation> standard_appends();
};

class PerturbationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Append kinds: text + ", " + payload. antonym_swap: every whole-word
/// occurrence of either word becomes the other, keeping lower, Capitalized or
/// UPPER case. Throws PerturbationError when neither word occurs.
std::string perturb_answer(std::string_view text, const Perturbation& p);

struct ProbeAssessment {
  std::optional<CategoryRating> rating;
  std::string reply;
  std::string error;  // gateway failure or perturbation error
  FailureKind failure = FailureKind::none;
};

struct ProbeVariant {
  Perturbation perturbation;
  std::string answer_text;
  ProbeAssessment assessment;
  std::optional<long> delta;  // variant index - base index; worse verdicts are positive
};

struct StabilityReport {
  std::string question_id;
  std::string student_id;
  ProbeAssessment base;
  std::vector<ProbeVariant> variants;
};

/// Assesses the base answer and every perturbed variant with the student
/// prompt family, in one batch.
StabilityReport run_probe(const Question& question, const StudentAnswer& answer,
                          const std::vector<Perturbation>& perturbations, Gateway& gateway,
                          std::size_t max_in_flight = 1);

nlohmann::json stability_to_json(const StabilityReport& report);

}  // namespace autograde
