// autograde: run an exam through the assessment pipeline, or serve the
// adjudication API over the results of a compare run.
//
//   autograde --bundle exam.json --mode compare --cassette exam.cassette.jsonl \
//             --cassette-mode replay --out run/
//   autograde serve --bundle exam.json --out run/ --listen 127.0.0.1:8080
//
// The API credential is read from the environment variable named by
// --credential-env (default AUTOGRADE_API_KEY).

#include <pthread.h>
#include <signal.h>

#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "autograde/pipeline.hpp"
#include "autograde/review_service.hpp"

namespace {

int serve(const std::filesystem::path& bundle, const std::filesystem::path& out_dir, const std::string& listen,
          std::filesystem::path log_path, autograde::PolicyMode policy) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) {
    std::cerr << "error: --listen expects HOST:PORT\n";
    return autograde::exit_code::validation;
  }
  const std::string host = listen.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(listen.substr(colon + 1));
  } catch (const std::exception&) {
    std::cerr << "error: bad port in --listen " << listen << "\n";
    return autograde::exit_code::validation;
  }

  autograde::ExamArtifacts exam;
  try {
    exam = autograde::load_review_artifacts(bundle, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return autograde::exit_code::validation;
  }
  if (log_path.empty()) log_path = out_dir / "decisions.log";

  // SIGTERM/SIGINT are handled by a watcher thread so the server stops
  // between requests and every log record is written whole.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGINT);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  autograde::ReviewStore store(log_path);
  autograde::ReviewServer server(store, {std::move(exam)}, policy);
  std::thread([&server, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  }).detach();

  std::cerr << "serving review API on " << host << ":" << port << " (log " << log_path.string() << ")\n";
  if (!server.listen(host, port)) {
    std::cerr << "error: cannot listen on " << listen << " (address in use?)\n";
    return autograde::exit_code::validation;
  }
  std::cerr << "review service stopped\n";
  return autograde::exit_code::success;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Second-opinion autograding for short textual answers"};
  app.require_subcommand(0, 1);

  autograde::RunConfig cfg;
  std::string mode = "compare";
  std::string cassette_mode = "replay";
  std::string policy = "unrestricted";
  double max_failures = -1;
  std::string perturb = "standard";
  std::vector<std::string> swaps;
  std::string probe_student, probe_question;
  long timeout_ms = cfg.model.timeout.count();

  app.add_option("--bundle", cfg.bundle, "Exam bundle (.json file or directory with questions.csv/submissions.csv)");
  app.add_option("--mode", mode, "assess-educator | assess-students | compare | probe")->capture_default_str();
  app.add_option("--cassette", cfg.cassette, "Cassette file (line-delimited JSON)");
  app.add_option("--cassette-mode", cassette_mode, "record | replay | live")->capture_default_str();
  app.add_option("--endpoint", cfg.model.endpoint_url, "Chat-completion base URL")->capture_default_str();
  app.add_option("--model", cfg.model.model_name, "Model name")->capture_default_str();
  app.add_option("--temperature", cfg.model.temperature, "Sampling temperature")->capture_default_str();
  app.add_option("--max-tokens", cfg.model.max_reply_tokens, "Reply token limit")->capture_default_str();
  app.add_option("--timeout-ms", timeout_ms, "Per-request timeout")->capture_default_str();
  app.add_option("--credential-env", cfg.model.credential_env, "Environment variable holding the API key")
      ->capture_default_str();
  app.add_option("--system-prompt", cfg.model.system_prompt, "Optional system message");
  app.add_option("--out", cfg.out_dir, "Output directory");
  app.add_option("--max-in-flight", cfg.max_in_flight, "Concurrent requests")->capture_default_str();
  app.add_option("--policy", policy, "unrestricted | upgrade-only")->capture_default_str();
  app.add_option("--max-failures", max_failures, "Tolerated failed fraction (default 0 replay, 0.05 live)");
  app.add_option("--perturb", perturb, "probe: standard | arithmetic | irrelevant | both | none")->capture_default_str();
  app.add_option("--swap", swaps, "probe: antonym pair WORD1:WORD2 (repeatable)");
  app.add_option("--probe-student", probe_student, "probe: only this student");
  app.add_option("--probe-question", probe_question, "probe: only this question");

  auto* serve_cmd = app.add_subcommand("serve", "Serve the adjudication API for a completed compare run");
  std::string listen = "127.0.0.1:8080";
  std::filesystem::path log_path;
  serve_cmd->add_option("--listen", listen, "HOST:PORT")->capture_default_str();
  serve_cmd->add_option("--log", log_path, "Decision log (default OUT/decisions.log)");
  serve_cmd->add_option("--bundle", cfg.bundle, "Exam bundle")->required();
  serve_cmd->add_option("--out", cfg.out_dir, "Directory of the compare run")->required();
  serve_cmd->add_option("--policy", policy, "Default session policy")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.policy = autograde::parse_policy(policy);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return autograde::exit_code::validation;
  }
  if (*serve_cmd) return serve(cfg.bundle, cfg.out_dir, listen, log_path, cfg.policy);

  try {
    if (cfg.bundle.empty() || cfg.out_dir.empty()) throw std::invalid_argument("--bundle and --out are required");
    cfg.mode = autograde::parse_run_mode(mode);
    cfg.cassette_mode = autograde::parse_cassette_mode(cassette_mode);
    cfg.model.timeout = std::chrono::milliseconds(timeout_ms);
    if (max_failures >= 0) cfg.max_failures = max_failures;
    if (!probe_student.empty()) cfg.probe_student = probe_student;
    if (!probe_question.empty()) cfg.probe_question = probe_question;

    using autograde::Perturbation;
    if (perturb == "standard") {
      cfg.perturbations = Perturbation::standard_appends();
    } else if (perturb == "arithmetic") {
      cfg.perturbations = {Perturbation::false_arithmetic()};
    } else if (perturb == "irrelevant") {
      cfg.perturbations = {Perturbation::irrelevant_sentence()};
    } else if (perturb == "both") {
      cfg.perturbations = {Perturbation::both()};
    } else if (perturb == "none") {
      cfg.perturbations.clear();
    } else {
      throw std::invalid_argument("unknown --perturb value '" + perturb + "'");
    }
    for (const auto& s : swaps) {
      const auto colon = s.find(':');
      if (colon == std::string::npos) throw std::invalid_argument("--swap expects WORD1:WORD2");
      cfg.perturbations.push_back(Perturbation::antonyms(s.substr(0, colon), s.substr(colon + 1)));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return autograde::exit_code::validation;
  }

  const auto result = autograde::run_pipeline(cfg);
  std::cerr << autograde::to_string(cfg.mode) << ": " << result.scored << " scored, " << result.unparsed
            << " unparsed, " << result.failed << " failed of " << result.total << " -> " << result.message << "\n";
  return result.exit_code;
}
