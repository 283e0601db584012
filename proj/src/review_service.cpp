#include "autograde/review_service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>

#include "autograde/csv.hpp"

namespace autograde {

using nlohmann::json;

PolicyMode parse_policy(std::string_view text) {
  if (text == "unrestricted") return PolicyMode::unrestricted;
  if (text == "upgrade_only" || text == "upgrade-only") return PolicyMode::upgrade_only;
  throw std::invalid_argument("unknown policy '" + std::string(text) + "'");
}

std::string_view to_string(PolicyMode mode) {
  return mode == PolicyMode::upgrade_only ? "upgrade_only" : "unrestricted";
}

PolicyVerdict apply_policy(const Points& current_points, const Adjudication& adjudication, PolicyMode policy) {
  if (policy == PolicyMode::unrestricted || adjudication.decision == DecisionKind::confirm) return {};
  if (adjudication.new_points && *adjudication.new_points < current_points) {
    return {false, "upgrade_only policy: an adjudication may not lower a grade (" + format_points(current_points) +
                       " -> " + format_points(*adjudication.new_points) + ")"};
  }
  return {};
}

ExamArtifacts make_exam_artifacts(const ExamBundle& bundle, std::vector<DiscrepancyItem> items) {
  ExamArtifacts a{bundle.exam_id, std::move(items), {}};
  for (const auto& s : bundle.submissions) {
    const auto* q = bundle.find_question(s.question_id);
    a.grades.push_back({s.student_id, s.question_id, s.human_points, q ? q->max_points : Points(1)});
  }
  return a;
}

int ReviewError::http_status() const {
  switch (kind_) {
    case Kind::not_found:
      return 404;
    case Kind::conflict:
    case Kind::policy_rejection:
      return 409;
    case Kind::malformed:
      return 422;
  }
  return 500;
}

json adjudication_to_json(const Adjudication& a) {
  return {{"item_id", a.item_id},
          {"decision", a.decision == DecisionKind::adjust ? "adjust" : "confirm"},
          {"new_points", a.new_points ? points_to_json(*a.new_points) : json(nullptr)},
          {"rationale", a.rationale},
          {"timestamp", a.timestamp}};
}

namespace {

using Kind = ReviewError::Kind;

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

json grade_to_json(const GradeBaseline& g) {
  return {{"student_id", g.student_id},
          {"question_id", g.question_id},
          {"human_points", points_to_json(g.human_points)},
          {"max_points", points_to_json(g.max_points)}};
}

GradeBaseline grade_from_json(const json& j) {
  return {j.at("student_id").get<std::string>(), j.at("question_id").get<std::string>(),
          points_from_json(j.at("human_points")), points_from_json(j.at("max_points"))};
}

Adjudication adjudication_from_json(const json& j) {
  Adjudication a;
  a.item_id = j.at("item_id").get<std::string>();
  const auto d = j.at("decision").get<std::string>();
  if (d == "confirm") {
    a.decision = DecisionKind::confirm;
  } else if (d == "adjust") {
    a.decision = DecisionKind::adjust;
  } else {
    throw std::invalid_argument("decision must be 'confirm' or 'adjust'");
  }
  if (j.contains("new_points") && !j["new_points"].is_null()) a.new_points = points_from_json(j["new_points"]);
  if (j.contains("rationale") && !j["rationale"].is_null()) a.rationale = j["rationale"].get<std::string>();
  a.timestamp = j.value("timestamp", std::string());
  return a;
}

}  // namespace

ReviewStore::ReviewStore(std::filesystem::path log_path, Clock clock)
    : log_path_(std::move(log_path)), clock_(clock ? std::move(clock) : Clock(utc_now)) {
  std::string content;
  if (std::ifstream in{log_path_, std::ios::binary}) {
    std::ostringstream ss;
    ss << in.rdbuf();
    content = ss.str();
  }

  std::size_t pos = 0;
  std::size_t lineno = 0;
  std::size_t keep = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    ++lineno;
    if (nl == std::string::npos) break;  // torn tail
    const std::string line = content.substr(pos, nl - pos);
    pos = nl + 1;
    keep = pos;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      apply(json::parse(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(log_path_.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }

  fd_ = ::open(log_path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw std::runtime_error("cannot open decision log " + log_path_.string() + ": " + std::strerror(errno));
  if (keep < content.size() && ::ftruncate(fd_, static_cast<off_t>(keep)) != 0) {
    throw std::runtime_error("cannot truncate torn record in " + log_path_.string());
  }
}

ReviewStore::~ReviewStore() {
  if (fd_ >= 0) ::close(fd_);
}

void ReviewStore::append(const json& record) {
  const std::string line = record.dump() + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const auto n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error("decision log write failed: " + std::string(std::strerror(errno)));
    }
    written += static_cast<std::size_t>(n);
  }
  ::fsync(fd_);
}

void ReviewStore::apply(const json& record) {
  const auto event = record.at("event").get<std::string>();
  const auto session_id = record.at("session").get<std::string>();
  if (event == "session_start") {
    SessionState s;
    s.session_id = session_id;
    s.exam_id = record.at("exam_id").get<std::string>();
    s.policy = parse_policy(record.at("policy").get<std::string>());
    s.started_at = record.at("ts").get<std::string>();
    s.items = items_from_json(record.at("items"));
    for (const auto& g : record.at("grades")) s.grades.push_back(grade_from_json(g));
    active_by_exam_[s.exam_id] = session_id;
    ++starts_by_exam_[s.exam_id];
    sessions_[session_id] = std::move(s);
  } else if (event == "decision") {
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw std::runtime_error("decision for unknown session " + session_id);
    auto a = adjudication_from_json(record.at("adjudication"));
    a.timestamp = record.at("ts").get<std::string>();
    it->second.decisions[a.item_id] = std::move(a);
    ++it->second.decision_events;
  } else {
    throw std::runtime_error("unknown event '" + event + "'");
  }
}

const SessionState& ReviewStore::find(const std::string& session_id) const {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw ReviewError(Kind::not_found, "unknown session '" + session_id + "'");
  return it->second;
}

std::string ReviewStore::start_session(const ExamArtifacts& exam, PolicyMode policy, bool override_existing) {
  std::lock_guard lock(mu_);
  if (active_by_exam_.count(exam.exam_id) && !override_existing) {
    throw ReviewError(Kind::conflict, "a review session for exam '" + exam.exam_id + "' already exists (" +
                                          active_by_exam_[exam.exam_id] + "); pass override to start another");
  }
  const std::string id = exam.exam_id + "-" + std::to_string(starts_by_exam_[exam.exam_id] + 1);
  json items = json::array();
  for (const auto& it : exam.items) items.push_back(item_to_json(it));
  json grades = json::array();
  for (const auto& g : exam.grades) grades.push_back(grade_to_json(g));
  const json record = {{"ts", clock_()},
                       {"session", id},
                       {"event", "session_start"},
                       {"exam_id", exam.exam_id},
                       {"policy", to_string(policy)},
                       {"items", std::move(items)},
                       {"grades", std::move(grades)}};
  append(record);
  apply(record);
  return id;
}

QueuePage ReviewStore::next_items(const std::string& session_id, const std::string& cursor, std::size_t page_size,
                                  std::optional<double> min_gap) const {
  std::lock_guard lock(mu_);
  const auto& s = find(session_id);
  if (page_size == 0) throw ReviewError(Kind::malformed, "page_size must be positive");
  std::size_t offset = 0;
  if (!cursor.empty()) {
    auto [ptr, ec] = std::from_chars(cursor.data(), cursor.data() + cursor.size(), offset);
    if (ec != std::errc{} || ptr != cursor.data() + cursor.size()) {
      throw ReviewError(Kind::malformed, "invalid cursor '" + cursor + "'");
    }
  }

  std::vector<const DiscrepancyItem*> queue;
  for (const auto& it : s.items) {
    if (!min_gap || !it.parsed() || *it.gap >= *min_gap) queue.push_back(&it);
  }

  QueuePage page;
  for (std::size_t i = offset; i < queue.size() && page.entries.size() < page_size; ++i) {
    QueueEntry e{*queue[i], std::nullopt};
    if (auto d = s.decisions.find(queue[i]->item_id()); d != s.decisions.end()) e.decision = d->second;
    page.entries.push_back(std::move(e));
  }
  if (offset + page.entries.size() < queue.size()) page.next_cursor = std::to_string(offset + page.entries.size());
  return page;
}

Adjudication ReviewStore::submit_adjudication(const std::string& session_id, Adjudication adjudication) {
  std::lock_guard lock(mu_);
  const auto& s = find(session_id);
  const auto item = std::find_if(s.items.begin(), s.items.end(),
                                 [&](const DiscrepancyItem& it) { return it.item_id() == adjudication.item_id; });
  if (item == s.items.end()) {
    throw ReviewError(Kind::not_found, "item '" + adjudication.item_id + "' is not in session " + session_id);
  }
  if (adjudication.decision == DecisionKind::adjust) {
    if (!adjudication.new_points) throw ReviewError(Kind::malformed, "adjust requires new_points");
    if (*adjudication.new_points < 0 || *adjudication.new_points > item->max_points) {
      throw ReviewError(Kind::malformed, "new_points must lie in [0, " + format_points(item->max_points) + "]");
    }
    if (adjudication.rationale.empty()) throw ReviewError(Kind::malformed, "adjust requires a rationale");
  } else if (adjudication.new_points) {
    throw ReviewError(Kind::malformed, "confirm does not take new_points");
  }

  const auto verdict = apply_policy(item->human_points, adjudication, s.policy);
  if (!verdict.accepted) throw ReviewError(Kind::policy_rejection, verdict.reason);

  adjudication.timestamp = clock_();
  json body = adjudication_to_json(adjudication);
  body.erase("timestamp");
  const json record = {{"ts", adjudication.timestamp},
                       {"session", session_id},
                       {"event", "decision"},
                       {"adjudication", std::move(body)}};
  append(record);
  apply(record);
  return adjudication;
}

std::vector<ExportRow> ReviewStore::export_grades(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  const auto& s = find(session_id);
  std::set<std::string> queued;
  for (const auto& it : s.items) queued.insert(it.item_id());

  std::vector<ExportRow> rows;
  for (const auto& g : s.grades) {
    ExportRow r{g, g.human_points, "original", std::nullopt, false};
    const std::string id = g.question_id + "/" + g.student_id;
    r.in_queue = queued.count(id) > 0;
    if (auto d = s.decisions.find(id); d != s.decisions.end()) {
      r.decision = d->second;
      if (d->second.decision == DecisionKind::adjust) {
        r.final_points = *d->second.new_points;
        r.provenance = "adjust";
      } else {
        r.provenance = "confirm";
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string ReviewStore::export_document(const std::string& session_id, std::string_view format) const {
  const auto rows = export_grades(session_id);
  const std::string exam_id = session(session_id).exam_id;
  if (format == "csv") {
    std::string out = csv::write_row({"exam_id", "student_id", "question_id", "human_points", "max_points",
                                      "final_points", "provenance", "decided_at", "rationale"});
    for (const auto& r : rows) {
      out += csv::write_row({exam_id, r.baseline.student_id, r.baseline.question_id,
                             format_points(r.baseline.human_points), format_points(r.baseline.max_points),
                             format_points(r.final_points), r.provenance, r.decision ? r.decision->timestamp : "",
                             r.decision ? r.decision->rationale : ""});
    }
    return out;
  }
  if (format == "json") {
    json arr = json::array();
    for (const auto& r : rows) {
      arr.push_back({{"exam_id", exam_id},
                     {"student_id", r.baseline.student_id},
                     {"question_id", r.baseline.question_id},
                     {"human_points", points_to_json(r.baseline.human_points)},
                     {"max_points", points_to_json(r.baseline.max_points)},
                     {"final_points", points_to_json(r.final_points)},
                     {"provenance", r.provenance},
                     {"decided_at", r.decision ? json(r.decision->timestamp) : json(nullptr)},
                     {"rationale", r.decision ? json(r.decision->rationale) : json(nullptr)},
                     {"in_queue", r.in_queue}});
    }
    return arr.dump(2);
  }
  throw ReviewError(Kind::malformed, "export format must be csv or json");
}

Summary ReviewStore::session_summary(const std::string& session_id) const {
  const auto s = session(session_id);
  std::set<std::string> queued;
  for (const auto& it : s.items) queued.insert(it.item_id());
  std::size_t failed = 0;
  for (const auto& g : s.grades) failed += queued.count(g.question_id + "/" + g.student_id) ? 0 : 1;
  return summarize(s.items, failed);
}

SessionState ReviewStore::session(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  return find(session_id);
}

std::vector<std::string> ReviewStore::session_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, s] : sessions_) ids.push_back(id);
  return ids;
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const ReviewError& e) {
  static const char* names[] = {"not_found", "conflict", "malformed", "policy_rejection"};
  send_json(res, e.http_status(), {{"error", names[static_cast<int>(e.kind())]}, {"reason", e.what()}});
}

json parse_body(const httplib::Request& req) {
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw ReviewError(Kind::malformed, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ReviewError(Kind::malformed, std::string("malformed JSON: ") + e.what());
  }
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ReviewError& e) {
      send_error(res, e);
    } catch (const json::exception& e) {
      send_error(res, ReviewError(Kind::malformed, e.what()));
    } catch (const std::invalid_argument& e) {
      send_error(res, ReviewError(Kind::malformed, e.what()));
    }
  };
}

}  // namespace

ReviewServer::ReviewServer(ReviewStore& store, std::vector<ExamArtifacts> exams, PolicyMode default_policy)
    : store_(store), default_policy_(default_policy), server_(std::make_unique<httplib::Server>()) {
  for (auto& e : exams) exams_.emplace(e.exam_id, std::move(e));
  routes();
}

ReviewServer::~ReviewServer() {
  stop();
}

void ReviewServer::routes() {
  server_->Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  server_->Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto exam_id = body.at("exam_id").get<std::string>();
    const auto policy =
        body.contains("policy") ? parse_policy(body.at("policy").get<std::string>()) : default_policy_;
    const bool override_existing = body.value("override", false);
    auto it = exams_.find(exam_id);
    if (it == exams_.end()) throw ReviewError(Kind::not_found, "unknown exam '" + exam_id + "'");
    const auto id = store_.start_session(it->second, policy, override_existing);
    send_json(res, 201, {{"session_id", id},
                         {"exam_id", exam_id},
                         {"policy", to_string(policy)},
                         {"items", it->second.items.size()}});
  }));

  server_->Get(R"(/sessions/([^/]+)/items)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    std::size_t page_size = 20;
    if (req.has_param("page_size")) {
      const auto v = req.get_param_value("page_size");
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), page_size);
      if (ec != std::errc{} || ptr != v.data() + v.size() || page_size == 0 || page_size > 1000) {
        throw ReviewError(Kind::malformed, "page_size must be an integer in [1, 1000]");
      }
    }
    std::optional<double> min_gap;
    if (req.has_param("min_gap")) {
      try {
        min_gap = std::stod(req.get_param_value("min_gap"));
      } catch (const std::exception&) {
        throw ReviewError(Kind::malformed, "min_gap must be a number");
      }
    }
    const auto page = store_.next_items(id, req.get_param_value("cursor"), page_size, min_gap);
    json items = json::array();
    for (const auto& e : page.entries) {
      json j = item_to_json(e.item);
      j["decision"] = e.decision ? adjudication_to_json(*e.decision) : json(nullptr);
      items.push_back(std::move(j));
    }
    send_json(res, 200, {{"session_id", id},
                         {"items", std::move(items)},
                         {"next_cursor", page.next_cursor ? json(*page.next_cursor) : json(nullptr)}});
  }));

  server_->Post(R"(/sessions/([^/]+)/decisions)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const std::string id = req.matches[1];
                  store_.session(id);  // 404 before body validation
                  const auto body = parse_body(req);
                  Adjudication a;
                  try {
                    a = adjudication_from_json(body);
                  } catch (const std::exception& e) {
                    throw ReviewError(Kind::malformed, e.what());
                  }
                  a.timestamp.clear();
                  const auto stored = store_.submit_adjudication(id, std::move(a));
                  send_json(res, 201, adjudication_to_json(stored));
                }));

  server_->Get(R"(/sessions/([^/]+)/export)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto format = req.has_param("format") ? req.get_param_value("format") : std::string("json");
    const auto doc = store_.export_document(id, format);
    res.status = 200;
    res.set_content(doc, format == "csv" ? "text/csv" : "application/json");
  }));

  server_->Get(R"(/sessions/([^/]+)/summary)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    send_json(res, 200, summary_to_json(store_.session_summary(id)));
  }));
}

bool ReviewServer::listen(const std::string& host, int port) {
  return server_->listen(host, port);
}

int ReviewServer::bind_any(const std::string& host) {
  return server_->bind_to_any_port(host);
}

bool ReviewServer::listen_after_bind() {
  return server_->listen_after_bind();
}

void ReviewServer::stop() {
  if (server_) server_->stop();
}

bool ReviewServer::running() const {
  return server_->is_running();
}

}  // namespace autograde
