#include "autograde/exam_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "autograde/csv.hpp"

namespace autograde {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::int64_t pow10(int n) {
  std::int64_t r = 1;
  while (n-- > 0) r *= 10;
  return r;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BundleError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string submission_record(const StudentAnswer& s) {
  return "submission[" + s.student_id + "/" + s.question_id + "]";
}

}  // namespace

Points parse_points(std::string_view text) {
  const std::string s = trim(text);
  if (s.empty()) throw std::invalid_argument("empty number");
  std::size_t i = 0;
  bool negative = false;
  if (s[i] == '+' || s[i] == '-') negative = s[i++] == '-';
  std::int64_t digits = 0;
  int scale = 0;
  int ndigits = 0;
  bool seen_point = false;
  for (; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '.' && !seen_point) {
      seen_point = true;
    } else if (c >= '0' && c <= '9') {
      if (ndigits >= 17) throw std::invalid_argument("too many digits: " + s);
      digits = digits * 10 + (c - '0');
      if (digits != 0) ++ndigits;
      if (seen_point) ++scale;
    } else {
      break;
    }
  }
  int exponent = 0;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    const auto* begin = s.data() + i + 1;
    const auto* end = s.data() + s.size();
    if (begin != end && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, exponent);
    if (ec != std::errc{} || ptr != end) throw std::invalid_argument("bad exponent: " + s);
    i = s.size();
  }
  if (i != s.size()) throw std::invalid_argument("not a decimal number: " + s);
  const int net = exponent - scale;
  if (net > 17 || net < -17) throw std::invalid_argument("exponent out of range: " + s);
  Points p = net >= 0 ? Points(digits * pow10(net)) : Points(digits, pow10(-net));
  return negative ? -p : p;
}

std::string format_points(const Points& p) {
  if (p.denominator() == 1) return std::to_string(p.numerator());
  std::int64_t den = p.denominator();
  int twos = 0, fives = 0;
  while (den % 2 == 0) den /= 2, ++twos;
  while (den % 5 == 0) den /= 5, ++fives;
  const int places = std::max(twos, fives);
  if (den == 1 && places <= 17) {
    const std::int64_t scale = pow10(places);
    const std::int64_t scaled = p.numerator() * (scale / p.denominator());
    const std::int64_t mag = scaled < 0 ? -scaled : scaled;
    std::string frac = std::to_string(mag % scale);
    frac.insert(0, places - frac.size(), '0');
    return std::string(scaled < 0 ? "-" : "") + std::to_string(mag / scale) + "." + frac;
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, to_double(p), std::chars_format::general, 17);
  return std::string(buf, ptr);
}

double to_double(const Points& p) {
  return static_cast<double>(p.numerator()) / static_cast<double>(p.denominator());
}

Points points_from_json(const json& j) {
  if (j.is_number_integer()) return Points(j.get<std::int64_t>());
  if (j.is_number_float()) {
    const double d = j.get<double>();
    if (!std::isfinite(d)) throw std::invalid_argument("non-finite number");
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, d);
    return parse_points(std::string_view(buf, ptr - buf));
  }
  if (j.is_string()) return parse_points(j.get<std::string>());
  throw std::invalid_argument("expected a number, got " + std::string(j.type_name()));
}

json points_to_json(const Points& p) {
  if (p.denominator() == 1) return p.numerator();
  return std::stod(format_points(p));
}

const Question* ExamBundle::find_question(std::string_view id) const {
  for (const auto& q : questions) {
    if (q.id == id) return &q;
  }
  return nullptr;
}

std::vector<const EducatorAnswer*> ExamBundle::references_for(std::string_view question_id) const {
  std::vector<const EducatorAnswer*> out;
  for (const auto& e : educator_answers) {
    if (e.question_id == question_id) out.push_back(&e);
  }
  return out;
}

std::size_t ExamBundle::reference_index(const EducatorAnswer& answer) const {
  std::size_t idx = 0;
  for (const auto& e : educator_answers) {
    if (e.question_id != answer.question_id) continue;
    if (&e == &answer || e == answer) return idx;
    ++idx;
  }
  return static_cast<std::size_t>(-1);
}

std::vector<Violation> validate_bundle(const ExamBundle& bundle) {
  std::vector<Violation> out;
  std::set<std::string> question_ids;
  for (const auto& q : bundle.questions) {
    const std::string rec = "question[" + q.id + "]";
    if (!question_ids.insert(q.id).second) out.push_back({rec, "duplicate question id"});
    if (trim(q.text).empty()) out.push_back({rec, "question text is empty"});
    if (q.max_points <= 0) out.push_back({rec, "max_points must be positive, got " + format_points(q.max_points)});
  }

  std::map<std::string, int> reference_counts;
  for (std::size_t i = 0; i < bundle.educator_answers.size(); ++i) {
    const auto& e = bundle.educator_answers[i];
    const std::string rec = "educator_answer[" + e.question_id + "#" + std::to_string(i) + "]";
    if (!question_ids.count(e.question_id)) {
      out.push_back({rec, "references unknown question '" + e.question_id + "'"});
      continue;
    }
    if (e.text.empty()) out.push_back({rec, "educator answer text is empty"});
    ++reference_counts[e.question_id];
  }
  for (const auto& q : bundle.questions) {
    if (!reference_counts.count(q.id)) {
      out.push_back({"question[" + q.id + "]", "question has no educator answer"});
    }
  }

  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  for (std::size_t i = 0; i < bundle.submissions.size(); ++i) {
    const auto& s = bundle.submissions[i];
    const std::string rec = submission_record(s);
    const auto* q = bundle.find_question(s.question_id);
    if (!q) {
      out.push_back({rec, "references unknown question '" + s.question_id + "'"});
    } else if (s.human_points < 0 || s.human_points > q->max_points) {
      out.push_back({rec, "human_points " + format_points(s.human_points) + " outside [0, " +
                              format_points(q->max_points) + "]"});
    }
    auto [it, inserted] = seen.emplace(std::make_pair(s.student_id, s.question_id), i);
    if (!inserted) {
      out.push_back({rec, "duplicate (student_id, question_id): records #" + std::to_string(it->second) +
                              " and #" + std::to_string(i)});
    }
  }
  return out;
}

namespace {

void throw_if_invalid(const ExamBundle& bundle) {
  const auto violations = validate_bundle(bundle);
  if (violations.empty()) return;
  std::string msg = "invalid exam bundle '" + bundle.exam_id + "':";
  for (const auto& v : violations) msg += "\n  " + v.record + ": " + v.message;
  throw BundleError(msg);
}

template <typename T>
T required(const json& obj, const char* key, const std::string& record) {
  if (!obj.is_object() || !obj.contains(key)) throw BundleError(record + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw BundleError(record + ": field '" + key + "' has the wrong type");
  }
}

Points required_points(const json& obj, const char* key, const std::string& record) {
  if (!obj.contains(key)) throw BundleError(record + ": missing field '" + key + "'");
  try {
    return points_from_json(obj.at(key));
  } catch (const std::invalid_argument& e) {
    throw BundleError(record + ": field '" + key + "': " + e.what());
  }
}

}  // namespace

ExamBundle load_exam_bundle_json(std::string_view source) {
  if (!is_valid_utf8(source)) throw BundleError("exam bundle is not valid UTF-8");
  json doc;
  try {
    doc = json::parse(source);
  } catch (const json::parse_error& e) {
    throw BundleError(std::string("malformed exam bundle JSON: ") + e.what());
  }
  if (!doc.is_object()) throw BundleError("malformed exam bundle: top level must be an object");

  ExamBundle b;
  b.exam_id = required<std::string>(doc, "exam_id", "exam");
  const auto& questions = doc.contains("questions") ? doc["questions"] : json();
  if (!questions.is_array()) throw BundleError("exam: 'questions' must be an array");
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const auto& jq = questions[i];
    const std::string rec = "questions[" + std::to_string(i) + "]";
    Question q;
    q.id = required<std::string>(jq, "id", rec);
    const std::string qrec = "question[" + q.id + "]";
    q.text = required<std::string>(jq, "text", qrec);
    q.max_points = required_points(jq, "max_points", qrec);
    q.language_tag = required<std::string>(jq, "language_tag", qrec);
    if (!jq.contains("educator_answers") || !jq["educator_answers"].is_array()) {
      throw BundleError(qrec + ": 'educator_answers' must be an array");
    }
    for (const auto& je : jq["educator_answers"]) {
      EducatorAnswer e;
      e.question_id = q.id;
      e.text = required<std::string>(je, "text", qrec + ".educator_answers");
      if (je.contains("label") && !je["label"].is_null()) {
        e.label = required<std::string>(je, "label", qrec + ".educator_answers");
      }
      b.educator_answers.push_back(std::move(e));
    }
    b.questions.push_back(std::move(q));
  }

  const auto& subs = doc.contains("submissions") ? doc["submissions"] : json();
  if (!subs.is_array()) throw BundleError("exam: 'submissions' must be an array");
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const auto& js = subs[i];
    const std::string sid = required<std::string>(js, "student_id", "submissions[" + std::to_string(i) + "]");
    if (!js.contains("answers") || !js["answers"].is_array()) {
      throw BundleError("submission[" + sid + "]: 'answers' must be an array");
    }
    for (const auto& ja : js["answers"]) {
      StudentAnswer s;
      s.student_id = sid;
      s.question_id = required<std::string>(ja, "question_id", "submission[" + sid + "]");
      const std::string rec = submission_record(s);
      s.text = required<std::string>(ja, "text", rec);
      s.human_points = required_points(ja, "human_points", rec);
      b.submissions.push_back(std::move(s));
    }
  }
  throw_if_invalid(b);
  return b;
}

namespace {

std::vector<csv::Row> parse_csv_table(std::string_view text, const std::vector<std::string>& header,
                                      const std::string& name) {
  if (!is_valid_utf8(text)) throw BundleError(name + " is not valid UTF-8");
  std::vector<csv::Row> rows;
  try {
    rows = csv::parse(text);
  } catch (const csv::CsvError& e) {
    throw BundleError("malformed " + name + ": " + e.what());
  }
  if (rows.empty()) throw BundleError(name + ": missing header row");
  auto head = rows.front();
  if (!head.empty() && head[0].rfind("\xEF\xBB\xBF", 0) == 0) head[0].erase(0, 3);
  if (head != header) {
    std::string expected;
    for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
    throw BundleError(name + ": header must be " + expected);
  }
  std::vector<csv::Row> body;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() == 1 && rows[i][0].empty()) continue;
    if (rows[i].size() != header.size()) {
      throw BundleError(name + " row " + std::to_string(i + 1) + ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(rows[i].size()));
    }
    body.push_back(std::move(rows[i]));
  }
  return body;
}

Points csv_points(const std::string& text, const std::string& record, const char* field) {
  try {
    return parse_points(text);
  } catch (const std::invalid_argument& e) {
    throw BundleError(record + ": field '" + field + "': " + e.what());
  }
}

}  // namespace

ExamBundle load_exam_bundle_csv(std::string_view questions_csv, std::string_view submissions_csv,
                                std::string exam_id) {
  ExamBundle b;
  b.exam_id = std::move(exam_id);

  // A question id repeated on several rows contributes one educator answer per row.
  const auto qrows =
      parse_csv_table(questions_csv, {"id", "text", "max_points", "language_tag", "educator_answer"}, "questions.csv");
  for (const auto& r : qrows) {
    const std::string rec = "question[" + r[0] + "]";
    Question q{r[0], r[1], csv_points(r[2], rec, "max_points"), r[3]};
    if (const auto* existing = b.find_question(q.id)) {
      if (!(*existing == q)) throw BundleError(rec + ": repeated rows disagree on text, max_points or language_tag");
    } else {
      b.questions.push_back(q);
    }
    b.educator_answers.push_back({q.id, r[4], std::nullopt});
  }

  const auto srows =
      parse_csv_table(submissions_csv, {"student_id", "question_id", "text", "human_points"}, "submissions.csv");
  for (const auto& r : srows) {
    StudentAnswer s{r[0], r[1], r[2], {}};
    s.human_points = csv_points(r[3], submission_record(s), "human_points");
    b.submissions.push_back(std::move(s));
  }

  // Match the nesting of the JSON form: references grouped by question,
  // answers grouped by student in first-appearance order.
  std::map<std::string, std::size_t> question_pos, student_pos;
  for (const auto& q : b.questions) question_pos.emplace(q.id, question_pos.size());
  for (const auto& s : b.submissions) student_pos.emplace(s.student_id, student_pos.size());
  std::stable_sort(b.educator_answers.begin(), b.educator_answers.end(),
                   [&](const auto& l, const auto& r) { return question_pos[l.question_id] < question_pos[r.question_id]; });
  std::stable_sort(b.submissions.begin(), b.submissions.end(),
                   [&](const auto& l, const auto& r) { return student_pos[l.student_id] < student_pos[r.student_id]; });

  throw_if_invalid(b);
  return b;
}

ExamBundle load_exam_bundle(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) {
    return load_exam_bundle_csv(read_file(path / "questions.csv"), read_file(path / "submissions.csv"),
                                path.filename().string());
  }
  return load_exam_bundle_json(read_file(path));
}

json bundle_to_json(const ExamBundle& bundle) {
  json questions = json::array();
  for (const auto& q : bundle.questions) {
    json answers = json::array();
    for (const auto* e : bundle.references_for(q.id)) {
      json je = {{"text", e->text}};
      if (e->label) je["label"] = *e->label;
      answers.push_back(std::move(je));
    }
    questions.push_back({{"id", q.id},
                         {"text", q.text},
                         {"max_points", points_to_json(q.max_points)},
                         {"language_tag", q.language_tag},
                         {"educator_answers", std::move(answers)}});
  }
  // Group by student in first-appearance order.
  json submissions = json::array();
  std::map<std::string, std::size_t> slot;
  for (const auto& s : bundle.submissions) {
    auto [it, inserted] = slot.emplace(s.student_id, submissions.size());
    if (inserted) submissions.push_back({{"student_id", s.student_id}, {"answers", json::array()}});
    submissions[it->second]["answers"].push_back(
        {{"question_id", s.question_id}, {"text", s.text}, {"human_points", points_to_json(s.human_points)}});
  }
  return {{"exam_id", bundle.exam_id}, {"questions", std::move(questions)}, {"submissions", std::move(submissions)}};
}

Points normalize_human_score(const Points& points, const Points& max_points) {
  if (max_points <= 0) throw std::invalid_argument("max_points must be positive");
  if (points < 0 || points > max_points) {
    throw std::invalid_argument("points " + format_points(points) + " outside [0, " + format_points(max_points) + "]");
  }
  return points / max_points;
}

bool is_valid_utf8(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2, cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3, cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4, cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > text.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

}  // namespace autograde
