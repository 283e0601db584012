#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/rational.hpp>
#include <nlohmann/json.hpp>

namespace autograde {

/// Exact point value. Points stay rational from ingestion to export; only
/// the score engine converts them to floating point.
using Points = boost::rational<std::int64_t>;

/// Parses a decimal literal ("7", "-2.5", "1e1", "0.125") into an exact rational.
Points parse_points(std::string_view text);

/// Renders points as the shortest decimal that parses back to the same value.
/// Non-terminating rationals (never produced from decimal input) fall back to
/// 17 significant digits.
std::string format_points(const Points& p);

double to_double(const Points& p);

Points points_from_json(const nlohmann::json& j);
nlohmann::json points_to_json(const Points& p);

struct Question {
  std::string id;
  std::string text;
  Points max_points{1};
  std::string language_tag{"en"};

  bool operator==(const Question&) const = default;
};

struct EducatorAnswer {
  std::string question_id;
  std::string text;
  std::optional<std::string> label;

  bool operator==(const EducatorAnswer&) const = default;
};

struct StudentAnswer {
  std::string student_id;
  std::string question_id;
  std::string text;  // may be empty
  Points human_points{0};

  bool operator==(const StudentAnswer&) const = default;
};

struct ExamBundle {
  std::string exam_id;
  std::vector<Question> questions;
  std::vector<EducatorAnswer> educator_answers;
  std::vector<StudentAnswer> submissions;

  const Question* find_question(std::string_view id) const;

  /// Educator answers for a question in bundle order; the first is the primary.
  std::vector<const EducatorAnswer*> references_for(std::string_view question_id) const;

  /// Position of `answer` among the references of its question, or npos.
  std::size_t reference_index(const EducatorAnswer& answer) const;

  bool operator==(const ExamBundle&) const = default;
};

struct Violation {
  std::string record;  // e.g. "submission[s1/q2]"
  std::string message;

  bool operator==(const Violation&) const = default;
};

class BundleError : public std::runtime_error {
 public:
  explicit BundleError(const std::string& what) : std::runtime_error(what) {}
};

enum class BundleFormat { json, csv_pair };

/// Returns every invariant violation; empty means the bundle is consistent.
std::vector<Violation> validate_bundle(const ExamBundle& bundle);

ExamBundle load_exam_bundle_json(std::string_view source);
ExamBundle load_exam_bundle_csv(std::string_view questions_csv,
                                std::string_view submissions_csv,
                                std::string exam_id);

/// Loads a `.json` file, or a directory holding questions.csv and
/// submissions.csv (the directory name becomes the exam id).
ExamBundle load_exam_bundle(const std::filesystem::path& path);

nlohmann::json bundle_to_json(const ExamBundle& bundle);

/// points / max_points, exact. Throws std::invalid_argument when out of range.
Points normalize_human_score(const Points& points, const Points& max_points);

bool is_valid_utf8(std::string_view text);

}  // namespace autograde
