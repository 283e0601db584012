#include "autograde/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "autograde/discrepancy_report.hpp"
#include "autograde/prompt_forge.hpp"
#include "autograde/rating_parser.hpp"
#include "autograde/score_engine.hpp"

namespace autograde {

using nlohmann::json;

RunMode parse_run_mode(std::string_view text) {
  std::string s(text);
  for (auto& c : s) c = c == '-' ? '_' : c;
  if (s == "assess_educator") return RunMode::assess_educator;
  if (s == "assess_students") return RunMode::assess_students;
  if (s == "compare") return RunMode::compare;
  if (s == "probe") return RunMode::probe;
  throw std::invalid_argument("unknown mode '" + std::string(text) + "'");
}

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::assess_educator:
      return "assess_educator";
    case RunMode::assess_students:
      return "assess_students";
    case RunMode::compare:
      return "compare";
    case RunMode::probe:
      return "probe";
  }
  return "unknown";
}

double RunConfig::failure_threshold() const {
  if (max_failures) return *max_failures;
  return cassette_mode == CassetteMode::replay ? 0.0 : 0.05;
}

namespace {

class Run {
 public:
  Run(const RunConfig& config, RunResult& result) : config_(config), result_(result) {}

  void write(const std::string& name, const std::string& content) {
    const auto path = config_.out_dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    result_.artifacts.push_back(path);
  }

  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  // Counts a failed item; returns its JSON record.
  json failure(const std::string& question_id, const std::string& subject_key, const std::string& subject,
               const std::vector<const LlmReply*>& replies) {
    json errors = json::array();
    bool miss = false;
    for (const auto* r : replies) {
      errors.push_back(r->error);
      miss = miss || r->failure == FailureKind::replay_miss;
    }
    ++result_.failed;
    if (miss) ++result_.replay_misses;
    return {{"question_id", question_id}, {subject_key, subject}, {"errors", std::move(errors)}, {"replay_miss", miss}};
  }

  const RunConfig& config_;
  RunResult& result_;
};

json rating_json(const std::optional<CategoryRating>& r) {
  if (!r) return {{"category", nullptr}, {"compliant", nullptr}, {"explanation", nullptr}};
  return {{"category", r->category}, {"compliant", r->compliant}, {"explanation", r->explanation}};
}

void write_reports(Run& run, const std::vector<DiscrepancyItem>& items, std::size_t failed) {
  run.write("report.txt", render_report(items, ReportFormat::text));
  run.write("report.md", render_report(items, ReportFormat::markdown));
  run.write("report.json", render_report(items, ReportFormat::json) + "\n");
  run.write("comparisons.csv", render_report(items, ReportFormat::csv));
  run.write_json("summary.json", summary_to_json(summarize(items, failed)));
}

void run_compare(const ExamBundle& bundle, Gateway& gateway, Run& run) {
  struct Slot {
    const StudentAnswer* answer;
    const Question* question;
    std::size_t first_prompt;
    std::size_t prompt_count;
  };
  std::vector<AssessmentPrompt> prompts;
  std::vector<Slot> slots;
  for (const auto& s : bundle.submissions) {
    const auto* q = bundle.find_question(s.question_id);
    std::vector<EducatorAnswer> refs;
    for (const auto* r : bundle.references_for(s.question_id)) refs.push_back(*r);
    auto ps = build_multi_comparison(s, refs);
    slots.push_back({&s, q, prompts.size(), ps.size()});
    for (auto& p : ps) prompts.push_back(std::move(p));
  }

  const auto replies = gateway.complete_batch(prompts, run.config_.max_in_flight);
  std::vector<ScoredComparison> selected;
  json failures = json::array();
  for (const auto& slot : slots) {
    const auto refs = bundle.references_for(slot.question->id);
    std::vector<ScoredComparison> candidates;
    std::vector<const LlmReply*> failed;
    for (std::size_t k = 0; k < slot.prompt_count; ++k) {
      const auto& reply = replies[slot.first_prompt + k];
      if (!reply.ok()) {
        failed.push_back(&reply);
        continue;
      }
      candidates.push_back(score_comparison(*slot.answer, *slot.question,
                                            parse_category(reply.text, RatingScale::similarity()), reply.text,
                                            refs[k]->label, k));
    }
    if (candidates.empty()) {
      failures.push_back(run.failure(slot.question->id, "student_id", slot.answer->student_id, failed));
      continue;
    }
    selected.push_back(select_best_reference(candidates));
    ++(selected.back().parsed() ? run.result_.scored : run.result_.unparsed);
  }

  const auto items = build_discrepancy_list(selected, bundle, ScaleKind::similarity);
  write_reports(run, items, run.result_.failed);
  run.write_json("failures.json", failures);
}

void run_assess_students(const ExamBundle& bundle, Gateway& gateway, Run& run) {
  std::vector<AssessmentPrompt> prompts;
  for (const auto& s : bundle.submissions) prompts.push_back(build_student_prompt(*bundle.find_question(s.question_id), s));
  const auto replies = gateway.complete_batch(prompts, run.config_.max_in_flight);

  std::vector<ScoredComparison> scored;
  json ratings = json::array();
  json failures = json::array();
  for (std::size_t i = 0; i < bundle.submissions.size(); ++i) {
    const auto& s = bundle.submissions[i];
    const auto& q = *bundle.find_question(s.question_id);
    if (!replies[i].ok()) {
      failures.push_back(run.failure(q.id, "student_id", s.student_id, {&replies[i]}));
      continue;
    }
    auto rating = parse_category(replies[i].text, RatingScale::quality());
    json r = {{"question_id", q.id}, {"student_id", s.student_id}};
    r.update(rating_json(rating));
    r["reply"] = replies[i].text;
    ratings.push_back(std::move(r));
    ++(rating ? run.result_.scored : run.result_.unparsed);
    scored.push_back(score_comparison(s, q, std::move(rating), replies[i].text, bundle.references_for(q.id)[0]->label, 0));
  }

  const auto items = build_discrepancy_list(scored, bundle, ScaleKind::quality);
  write_reports(run, items, run.result_.failed);
  run.write_json("ratings.json", ratings);
  run.write_json("failures.json", failures);
}

void run_assess_educator(const ExamBundle& bundle, Gateway& gateway, Run& run) {
  struct Ref {
    const Question* question;
    const EducatorAnswer* answer;
    std::size_t index;
  };
  std::vector<Ref> refs;
  std::vector<AssessmentPrompt> prompts;
  for (const auto& q : bundle.questions) {
    const auto answers = bundle.references_for(q.id);
    for (std::size_t k = 0; k < answers.size(); ++k) {
      refs.push_back({&q, answers[k], k});
      prompts.push_back(build_educator_prompt(q, *answers[k]));
    }
  }
  const auto replies = gateway.complete_batch(prompts, run.config_.max_in_flight);

  json ratings = json::array();
  json failures = json::array();
  std::vector<std::optional<CategoryRating>> parsed;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& ref = refs[i];
    const std::string subject = ref.answer->label ? *ref.answer->label : std::to_string(ref.index);
    if (!replies[i].ok()) {
      failures.push_back(run.failure(ref.question->id, "reference", subject, {&replies[i]}));
      continue;
    }
    auto rating = parse_category(replies[i].text, RatingScale::quality());
    json r = {{"question_id", ref.question->id}, {"reference", subject}, {"reference_index", ref.index}};
    r.update(rating_json(rating));
    r["reply"] = replies[i].text;
    ratings.push_back(std::move(r));
    ++(rating ? run.result_.scored : run.result_.unparsed);
    parsed.push_back(std::move(rating));
  }

  const auto h = category_histogram(parsed, RatingScale::quality());
  json counts = json::array();
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    counts.push_back({{"category", RatingScale::quality().at(i)}, {"count", h.counts[i]}});
  }
  run.write_json("ratings.json", ratings);
  run.write_json("failures.json", failures);
  run.write_json("summary.json", {{"total", refs.size()},
                                  {"rated", run.result_.scored},
                                  {"unparsed", run.result_.unparsed},
                                  {"failed", run.result_.failed},
                                  {"histogram", {{"scale", "quality"}, {"counts", counts}, {"unparsed", h.unparsed}}}});
}

void run_probes(const ExamBundle& bundle, Gateway& gateway, Run& run) {
  const auto& cfg = run.config_;
  json reports = json::array();
  std::size_t probed = 0;
  for (const auto& s : bundle.submissions) {
    if (cfg.probe_student && s.student_id != *cfg.probe_student) continue;
    if (cfg.probe_question && s.question_id != *cfg.probe_question) continue;
    ++probed;
    const auto report = run_probe(*bundle.find_question(s.question_id), s, cfg.perturbations, gateway, cfg.max_in_flight);
    auto count = [&](const ProbeAssessment& a, bool attempted) {
      if (!attempted) return;
      if (a.failure != FailureKind::none) {
        ++run.result_.failed;
        if (a.failure == FailureKind::replay_miss) ++run.result_.replay_misses;
      } else {
        ++(a.rating ? run.result_.scored : run.result_.unparsed);
      }
    };
    count(report.base, true);
    for (const auto& v : report.variants) count(v.assessment, !v.answer_text.empty() || v.assessment.failure != FailureKind::none);
    reports.push_back(stability_to_json(report));
  }
  if (probed == 0) throw BundleError("probe selection matched no submission");
  run.write_json("stability.json", reports);
}

}  // namespace

RunResult run_pipeline(const RunConfig& config, std::shared_ptr<ChatTransport> transport) {
  RunResult result;
  ExamBundle bundle;
  try {
    if (config.max_in_flight == 0) throw std::invalid_argument("--max-in-flight must be at least 1");
    const double threshold = config.failure_threshold();
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("--max-failures must lie in [0, 1]");
    config.model.validate();
    bundle = load_exam_bundle(config.bundle);
    std::filesystem::create_directories(config.out_dir);
  } catch (const std::exception& e) {
    result.exit_code = exit_code::validation;
    result.message = e.what();
    return result;
  }

  std::unique_ptr<Cassette> cassette;
  try {
    cassette = config.cassette_mode == CassetteMode::live || config.cassette.empty()
                   ? std::make_unique<Cassette>(config.cassette_mode)
                   : std::make_unique<Cassette>(config.cassette, config.cassette_mode);
  } catch (const std::exception& e) {
    result.exit_code = exit_code::validation;
    result.message = e.what();
    return result;
  }
  if (config.cassette_mode == CassetteMode::replay && config.cassette.empty()) {
    result.exit_code = exit_code::validation;
    result.message = "replay mode requires --cassette";
    return result;
  }

  Gateway gateway(config.model, *cassette, std::move(transport));
  Run run(config, result);
  try {
    switch (config.mode) {
      case RunMode::compare:
        run_compare(bundle, gateway, run);
        break;
      case RunMode::assess_students:
        run_assess_students(bundle, gateway, run);
        break;
      case RunMode::assess_educator:
        run_assess_educator(bundle, gateway, run);
        break;
      case RunMode::probe:
        run_probes(bundle, gateway, run);
        break;
    }
  } catch (const BundleError& e) {
    result.exit_code = exit_code::validation;
    result.message = e.what();
    return result;
  }

  result.total = result.scored + result.unparsed + result.failed;
  const double failed_fraction = result.total ? static_cast<double>(result.failed) / static_cast<double>(result.total) : 0.0;
  if (result.replay_misses) {
    result.exit_code = exit_code::replay_miss;
    result.message = std::to_string(result.replay_misses) + " replay miss(es): the cassette is stale";
  } else if (failed_fraction > config.failure_threshold()) {
    result.exit_code = exit_code::gateway;
    result.message = std::to_string(result.failed) + " of " + std::to_string(result.total) +
                     " items failed at the gateway, above the --max-failures threshold";
  } else {
    result.message = "ok";
  }

  run.write_json("run.json", {{"mode", to_string(config.mode)},
                              {"exam_id", bundle.exam_id},
                              {"model", config.model.model_name},
                              {"temperature", config.model.temperature},
                              {"cassette_mode", to_string(config.cassette_mode)},
                              {"total", result.total},
                              {"scored", result.scored},
                              {"unparsed", result.unparsed},
                              {"failed", result.failed},
                              {"replay_misses", result.replay_misses},
                              {"exit_code", result.exit_code}});
  return result;
}

ExamArtifacts load_review_artifacts(const std::filesystem::path& bundle, const std::filesystem::path& out_dir) {
  const auto report = out_dir / "report.json";
  std::vector<std::string> missing;
  if (!std::filesystem::exists(bundle)) missing.push_back(bundle.string());
  if (!std::filesystem::exists(report)) missing.push_back(report.string());
  if (!missing.empty()) {
    std::string msg = "missing compare-run artifacts:";
    for (const auto& m : missing) msg += " " + m;
    throw std::runtime_error(msg + " (run --mode compare first)");
  }
  auto exam = load_exam_bundle(bundle);
  std::ifstream in(report, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  auto items = items_from_json(json::parse(ss.str()));
  for (const auto& it : items) {
    if (it.exam_id != exam.exam_id) {
      throw std::runtime_error(report.string() + " belongs to exam '" + it.exam_id + "', not '" + exam.exam_id + "'");
    }
  }
  return make_exam_artifacts(exam, std::move(items));
}

}  // namespace autograde
