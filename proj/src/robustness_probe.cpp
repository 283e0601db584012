#include "autograde/robustness_probe.hpp"

#include <cctype>

#include "autograde/prompt_forge.hpp"

namespace autograde {

using nlohmann::json;

std::string_view to_string(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::append_false_arithmetic:
      return "append_false_arithmetic";
    case PerturbationKind::append_irrelevant_sentence:
      return "append_irrelevant_sentence";
    case PerturbationKind::append_both:
      return "append_both";
    case PerturbationKind::antonym_swap:
      return "antonym_swap";
  }
  return "unknown";
}

Perturbation Perturbation::false_arithmetic(std::string payload) {
  return {PerturbationKind::append_false_arithmetic, std::move(payload), {}};
}

Perturbation Perturbation::irrelevant_sentence(std::string payload) {
  return {PerturbationKind::append_irrelevant_sentence, std::move(payload), {}};
}

Perturbation Perturbation::both(std::string arithmetic, std::string sentence) {
  return {PerturbationKind::append_both, arithmetic + ", " + sentence, {}};
}

Perturbation Perturbation::antonyms(std::string first, std::string second) {
  return {PerturbationKind::antonym_swap, {}, {std::move(first), std::move(second)}};
}

std::vector<Perturbation> Perturbation::standard_appends() {
  return {false_arithmetic(), irrelevant_sentence(), both()};
}

namespace {

std::string lowered(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) || c == '_';
}

// Copies the case pattern of `like` onto `word`: UPPER, Capitalized or lower.
std::string match_case(std::string_view like, std::string_view word) {
  std::string out = lowered(word);
  bool has_alpha = false, all_upper = true;
  for (char c : like) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalpha(u)) {
      has_alpha = true;
      if (!std::isupper(u)) all_upper = false;
    }
  }
  if (has_alpha && all_upper && like.size() > 1) {
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  } else if (!like.empty() && std::isupper(static_cast<unsigned char>(like.front())) && !out.empty()) {
    out.front() = static_cast<char>(std::toupper(static_cast<unsigned char>(out.front())));
  }
  return out;
}

}  // namespace

std::string perturb_answer(std::string_view text, const Perturbation& p) {
  if (p.kind != PerturbationKind::antonym_swap) return std::string(text) + ", " + p.payload;

  const std::string a = lowered(p.swap_words.first);
  const std::string b = lowered(p.swap_words.second);
  if (a.empty() || b.empty() || a == b) throw PerturbationError("antonym_swap needs two distinct words");

  std::string out;
  bool swapped = false;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!word_char(text[i])) {
      out += text[i++];
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && word_char(text[j])) ++j;
    const std::string_view word = text.substr(i, j - i);
    const std::string low = lowered(word);
    if (low == a) {
      out += match_case(word, p.swap_words.second);
      swapped = true;
    } else if (low == b) {
      out += match_case(word, p.swap_words.first);
      swapped = true;
    } else {
      out += word;
    }
    i = j;
  }
  if (!swapped) {
    throw PerturbationError("antonym_swap: neither '" + p.swap_words.first + "' nor '" + p.swap_words.second +
                            "' occurs in the answer");
  }
  return out;
}

StabilityReport run_probe(const Question& question, const StudentAnswer& answer,
                          const std::vector<Perturbation>& perturbations, Gateway& gateway,
                          std::size_t max_in_flight) {
  StabilityReport report;
  report.question_id = question.id;
  report.student_id = answer.student_id;

  std::vector<AssessmentPrompt> prompts{build_student_prompt(question, answer)};
  std::vector<std::optional<std::size_t>> prompt_of(perturbations.size());
  for (std::size_t i = 0; i < perturbations.size(); ++i) {
    ProbeVariant v{perturbations[i], {}, {}, std::nullopt};
    try {
      StudentAnswer changed = answer;
      changed.text = perturb_answer(answer.text, perturbations[i]);
      v.answer_text = changed.text;
      prompt_of[i] = prompts.size();
      prompts.push_back(build_student_prompt(question, changed));
    } catch (const PerturbationError& e) {
      v.assessment.error = e.what();
    }
    report.variants.push_back(std::move(v));
  }

  const auto replies = gateway.complete_batch(prompts, max_in_flight);
  auto assess = [](const LlmReply& reply) {
    ProbeAssessment a;
    if (!reply.ok()) {
      a.error = reply.error;
      a.failure = reply.failure;
      return a;
    }
    a.reply = reply.text;
    a.rating = parse_category(reply.text, RatingScale::quality());
    return a;
  };

  report.base = assess(replies[0]);
  for (std::size_t i = 0; i < perturbations.size(); ++i) {
    if (!prompt_of[i]) continue;
    auto& v = report.variants[i];
    v.assessment = assess(replies[*prompt_of[i]]);
    if (report.base.rating && v.assessment.rating) {
      v.delta = static_cast<long>(v.assessment.rating->category_index) -
                static_cast<long>(report.base.rating->category_index);
    }
  }
  return report;
}

namespace {

json assessment_json(const ProbeAssessment& a) {
  json j = {{"category", a.rating ? json(a.rating->category) : json(nullptr)}, {"reply", a.reply}};
  if (!a.error.empty()) j["error"] = a.error;
  return j;
}

}  // namespace

json stability_to_json(const StabilityReport& report) {
  json variants = json::array();
  for (const auto& v : report.variants) {
    json j = assessment_json(v.assessment);
    j["kind"] = to_string(v.perturbation.kind);
    j["answer"] = v.answer_text;
    j["delta"] = v.delta ? json(*v.delta) : json(nullptr);
    variants.push_back(std::move(j));
  }
  return {{"question_id", report.question_id},
          {"student_id", report.student_id},
          {"base", assessment_json(report.base)},
          {"variants", std::move(variants)}};
}

}  // namespace autograde
