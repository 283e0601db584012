#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autograde/discrepancy_report.hpp"
#include "autograde/exam_model.hpp"

namespace httplib {
class Server;
}

namespace autograde {

enum class PolicyMode { unrestricted, upgrade_only };

PolicyMode parse_policy(std::string_view text);  // accepts upgrade_only and upgrade-only
std::string_view to_string(PolicyMode mode);

enum class DecisionKind { confirm, adjust };

struct Adjudication {
  std::string item_id;
  DecisionKind decision = DecisionKind::confirm;
  std::optional<Points> new_points;  // required iff adjust
  std::string rationale;
  std::string timestamp;  // set when stored

  bool operator==(const Adjudication&) const = default;
};

struct PolicyVerdict {
  bool accepted = true;
  std::string reason;
};

/// `current_points` is the human grade the decision would replace.
PolicyVerdict apply_policy(const Points& current_points, const Adjudication& adjudication, PolicyMode policy);

/// Grade of one (student, question) pair before review.
struct GradeBaseline {
  std::string student_id;
  std::string question_id;
  Points human_points{0};
  Points max_points{1};

  bool operator==(const GradeBaseline&) const = default;
};

/// What the service needs to open sessions for one exam.
struct ExamArtifacts {
  std::string exam_id;
  std::vector<DiscrepancyItem> items;  // frozen queue order
  std::vector<GradeBaseline> grades;   // every submission in the bundle
};

ExamArtifacts make_exam_artifacts(const ExamBundle& bundle, std::vector<DiscrepancyItem> items);

class ReviewError : public std::runtime_error {
 public:
  enum class Kind { not_found, conflict, malformed, policy_rejection };
  ReviewError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }
  int http_status() const;

 private:
  Kind kind_;
};

struct QueueEntry {
  DiscrepancyItem item;
  std::optional<Adjudication> decision;
};

struct QueuePage {
  std::vector<QueueEntry> entries;
  std::optional<std::string> next_cursor;
};

struct ExportRow {
  GradeBaseline baseline;
  Points final_points{0};
  std::string provenance;  // "original", "confirm" or "adjust"
  std::optional<Adjudication> decision;
  bool in_queue = false;
};

struct SessionState {
  std::string session_id;
  std::string exam_id;
  PolicyMode policy = PolicyMode::unrestricted;
  std::string started_at;
  std::vector<DiscrepancyItem> items;
  std::vector<GradeBaseline> grades;
  std::map<std::string, Adjudication> decisions;  // latest per item
  std::size_t decision_events = 0;

  bool operator==(const SessionState&) const = default;
};

/// Review state as a fold over an append-only JSON-lines log. Every accepted
/// mutation is appended (and fsynced) before it becomes visible. All methods
/// are serialized through one mutex; the store is the log's only writer.
class ReviewStore {
 public:
  using Clock = std::function<std::string()>;

  /// Replays `log_path` when it exists. A torn final line (no newline) is
  /// dropped and truncated away; any other unreadable line throws.
  explicit ReviewStore(std::filesystem::path log_path, Clock clock = nullptr);
  ~ReviewStore();

  ReviewStore(const ReviewStore&) = delete;
  ReviewStore& operator=(const ReviewStore&) = delete;

  std::string start_session(const ExamArtifacts& exam, PolicyMode policy, bool override_existing = false);

  /// `cursor` is empty for the first page. `min_gap` filters the frozen
  /// queue; unparsed items are kept by any filter.
  QueuePage next_items(const std::string& session_id, const std::string& cursor, std::size_t page_size,
                       std::optional<double> min_gap = std::nullopt) const;

  Adjudication submit_adjudication(const std::string& session_id, Adjudication adjudication);

  std::vector<ExportRow> export_grades(const std::string& session_id) const;
  std::string export_document(const std::string& session_id, std::string_view format) const;

  Summary session_summary(const std::string& session_id) const;

  SessionState session(const std::string& session_id) const;
  std::vector<std::string> session_ids() const;
  const std::filesystem::path& log_path() const { return log_path_; }

 private:
  void append(const nlohmann::json& record);
  void apply(const nlohmann::json& record);
  const SessionState& find(const std::string& session_id) const;

  std::filesystem::path log_path_;
  Clock clock_;
  int fd_ = -1;
  mutable std::mutex mu_;
  std::map<std::string, SessionState> sessions_;
  std::map<std::string, std::string> active_by_exam_;
  std::map<std::string, std::size_t> starts_by_exam_;
};

nlohmann::json adjudication_to_json(const Adjudication& a);

/// HTTP+JSON front end over a ReviewStore.
class ReviewServer {
 public:
  ReviewServer(ReviewStore& store, std::vector<ExamArtifacts> exams,
               PolicyMode default_policy = PolicyMode::unrestricted);
  ~ReviewServer();

  /// Binds and serves until stop(). Returns false if the address is unusable.
  bool listen(const std::string& host, int port);
  /// Binds to a free port and returns it, or -1.
  int bind_any(const std::string& host);
  bool listen_after_bind();
  void stop();
  bool running() const;

 private:
  void routes();

  ReviewStore& store_;
  std::map<std::string, ExamArtifacts> exams_;
  PolicyMode default_policy_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace autograde
