#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "autograde/exam_model.hpp"
#include "autograde/llm_gateway.hpp"
#include "autograde/review_service.hpp"
#include "autograde/robustness_probe.hpp"

namespace autograde {

enum class RunMode { assess_educator, assess_students, compare, probe };

RunMode parse_run_mode(std::string_view text);  // accepts '-' or '_' separators
std::string_view to_string(RunMode mode);

struct RunConfig {
  std::filesystem::path bundle;
  RunMode mode = RunMode::compare;
  ModelConfig model;
  std::filesystem::path cassette;
  CassetteMode cassette_mode = CassetteMode::replay;
  std::filesystem::path out_dir;
  PolicyMode policy = PolicyMode::unrestricted;
  std::size_t max_in_flight = 4;
  // Fraction of items allowed to fail at the gateway. Unset: 0 in replay,
  // 0.05 otherwise.
  std::optional<double> max_failures;
  std::vector<Perturbation> perturbations = Perturbation::standard_appends();
  std::optional<std::string> probe_student;
  std::optional<std::string> probe_question;

  double failure_threshold() const;
};

namespace exit_code {
inline constexpr int success = 0;
inline constexpr int validation = 1;
inline constexpr int gateway = 2;
inline constexpr int replay_miss = 3;
}  // namespace exit_code

struct RunResult {
  int exit_code = exit_code::success;
  std::string message;
  std::size_t total = 0;
  std::size_t scored = 0;
  std::size_t unparsed = 0;
  std::size_t failed = 0;
  std::size_t replay_misses = 0;
  std::vector<std::filesystem::path> artifacts;
};

/// Runs one mode end to end and writes its artifacts into `config.out_dir`.
/// Artifact names are fixed and contents carry no timestamps or paths, so
/// replay runs are byte-reproducible.
RunResult run_pipeline(const RunConfig& config, std::shared_ptr<ChatTransport> transport = nullptr);

/// Loads what `serve` needs: the bundle and `<out_dir>/report.json` from a
/// compare run. Throws std::runtime_error naming any missing file.
ExamArtifacts load_review_artifacts(const std::filesystem::path& bundle, const std::filesystem::path& out_dir);

}  // namespace autograde
