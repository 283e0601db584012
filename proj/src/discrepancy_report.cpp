#include "autograde/discrepancy_report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <tuple>

#include "autograde/csv.hpp"

namespace autograde {

using nlohmann::json;

std::string DiscrepancyItem::reference_used() const {
  return reference_label ? *reference_label : std::to_string(reference_index);
}

namespace {

const RatingScale& scale_of(ScaleKind kind) {
  return kind == ScaleKind::quality ? RatingScale::quality() : RatingScale::similarity();
}

bool id_less(const DiscrepancyItem& a, const DiscrepancyItem& b) {
  return std::tie(a.question_id, a.student_id) < std::tie(b.question_id, b.student_id);
}

std::string two_decimals(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string opt_two(const std::optional<double>& v) {
  return v ? two_decimals(*v) : "n/a";
}

std::string render_text(std::span<const DiscrepancyItem> items) {
  std::string out;
  auto block = [&](const DiscrepancyItem& it) {
    out += "Gap: " + opt_two(it.gap) + "\n";
    out += "LLM Pts p_L : " + opt_two(it.p_L) + "\n";
    out += "Human Pts p_h : " + two_decimals(it.p_h) + "\n";
    out += "Answer Human: " + it.student_answer_text + "\n";
    out += "Answer LLM: " + it.llm_reply_text + "\n";
    out += "Item: question=" + it.question_id + " student=" + it.student_id +
           " reference=" + it.reference_used() + " category=" + (it.rating ? it.rating->category : "unparsed") + "\n";
    out += "\n";
  };
  bool review_header = false;
  for (const auto& it : items) {
    if (!it.parsed() && !review_header) {
      out += "== Needs manual review: LLM reply had no recognizable category ==\n\n";
      review_header = true;
    }
    block(it);
  }
  return out;
}

std::string md_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out += "<br>";
    else if (c != '\r') out += c;
  }
  return out;
}

std::string render_markdown(std::span<const DiscrepancyItem> items) {
  std::string out = "# Grading discrepancies\n\n";
  std::size_t rank = 0;
  bool review_header = false;
  for (const auto& it : items) {
    if (!it.parsed() && !review_header) {
      out += "## Needs manual review\n\n";
      review_header = true;
    }
    out += "### " + std::to_string(++rank) + ". Question " + md_escape(it.question_id) + ", student " +
           md_escape(it.student_id) + "\n\n";
    out += "| Gap | LLM Pts p_L | Human Pts p_h | Category |\n|---|---|---|---|\n";
    out += "| " + opt_two(it.gap) + " | " + opt_two(it.p_L) + " | " + two_decimals(it.p_h) + " | " +
           md_escape(it.rating ? it.rating->category : "unparsed") + " |\n\n";
    out += "**Answer Human:** " + md_escape(it.student_answer_text) + "\n\n";
    out += "**Answer LLM:** " + md_escape(it.llm_reply_text) + "\n\n";
  }
  return out;
}

std::string render_csv(std::span<const DiscrepancyItem> items) {
  std::string out = csv::write_row({"exam_id", "question_id", "student_id", "gap", "p_h", "p_L", "category",
                                    "compliant", "reference_used", "human_points", "max_points"});
  for (const auto& it : items) {
    out += csv::write_row({it.exam_id, it.question_id, it.student_id, it.gap ? shortest(*it.gap) : "",
                           shortest(it.p_h), it.p_L ? shortest(*it.p_L) : "",
                           it.rating ? it.rating->category : "", it.rating ? (it.rating->compliant ? "true" : "false") : "",
                           it.reference_used(), format_points(it.human_points), format_points(it.max_points)});
  }
  return out;
}

json opt_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<double> opt_double(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::vector<DiscrepancyItem> build_discrepancy_list(std::span<const ScoredComparison> comparisons,
                                                    const ExamBundle& bundle, ScaleKind scale) {
  std::vector<DiscrepancyItem> items;
  items.reserve(comparisons.size());
  for (const auto& c : comparisons) {
    const std::string rec = c.question_id + "/" + c.student_id;
    const auto* q = bundle.find_question(c.question_id);
    if (!q) throw ReportError("comparison " + rec + ": unknown question");
    const auto sub = std::find_if(bundle.submissions.begin(), bundle.submissions.end(), [&](const auto& s) {
      return s.student_id == c.student_id && s.question_id == c.question_id;
    });
    if (sub == bundle.submissions.end()) throw ReportError("comparison " + rec + ": unknown submission");
    const auto refs = bundle.references_for(c.question_id);
    if (c.reference_index >= refs.size()) throw ReportError("comparison " + rec + ": unknown reference");
    if (c.rating && c.rating->scale != scale) throw ReportError("comparison " + rec + ": rating on the wrong scale");
    const double expected_p_h = human_score(sub->human_points, q->max_points).value;
    if (c.p_human.value != expected_p_h) throw ReportError("comparison " + rec + ": p_h disagrees with the bundle");

    DiscrepancyItem it;
    it.exam_id = bundle.exam_id;
    it.question_id = c.question_id;
    it.student_id = c.student_id;
    it.language_tag = q->language_tag;
    it.scale = scale;
    it.human_points = sub->human_points;
    it.max_points = q->max_points;
    it.p_h = c.p_human.value;
    if (c.p_llm) it.p_L = c.p_llm->value;
    it.gap = c.gap;
    it.rating = c.rating;
    it.reference_label = refs[c.reference_index]->label;
    it.reference_index = c.reference_index;
    it.question_text = q->text;
    it.student_answer_text = sub->text;
    it.educator_answer_text = refs[c.reference_index]->text;
    it.llm_reply_text = c.reply_text;
    items.push_back(std::move(it));
  }

  std::stable_sort(items.begin(), items.end(), [](const DiscrepancyItem& a, const DiscrepancyItem& b) {
    if (a.parsed() != b.parsed()) return a.parsed();
    if (a.parsed() && *a.gap != *b.gap) return *a.gap > *b.gap;
    return id_less(a, b);
  });
  return items;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "text" || text == "txt") return ReportFormat::text;
  if (text == "markdown" || text == "md") return ReportFormat::markdown;
  if (text == "json") return ReportFormat::json;
  if (text == "csv") return ReportFormat::csv;
  throw std::invalid_argument("unknown report format '" + std::string(text) + "'");
}

std::string render_report(std::span<const DiscrepancyItem> items, ReportFormat format) {
  switch (format) {
    case ReportFormat::text:
      return render_text(items);
    case ReportFormat::markdown:
      return render_markdown(items);
    case ReportFormat::csv:
      return render_csv(items);
    case ReportFormat::json: {
      json arr = json::array();
      for (const auto& it : items) arr.push_back(item_to_json(it));
      return arr.dump(2);
    }
  }
  return {};
}

json item_to_json(const DiscrepancyItem& it) {
  json rating = nullptr;
  if (it.rating) {
    rating = {{"category", it.rating->category},
              {"category_index", it.rating->category_index},
              {"explanation", it.rating->explanation},
              {"compliant", it.rating->compliant},
              {"match_offset", it.rating->match_offset}};
  }
  return {{"item_id", it.item_id()},
          {"exam_id", it.exam_id},
          {"question_id", it.question_id},
          {"student_id", it.student_id},
          {"language_tag", it.language_tag},
          {"scale", to_string(it.scale)},
          {"gap", opt_json(it.gap)},
          {"p_h", it.p_h},
          {"p_L", opt_json(it.p_L)},
          {"category", it.rating ? json(it.rating->category) : json(nullptr)},
          {"compliant", it.rating ? json(it.rating->compliant) : json(nullptr)},
          {"rating", std::move(rating)},
          {"reference_used", it.reference_used()},
          {"reference_label", it.reference_label ? json(*it.reference_label) : json(nullptr)},
          {"reference_index", it.reference_index},
          {"human_points", points_to_json(it.human_points)},
          {"max_points", points_to_json(it.max_points)},
          {"question_text", it.question_text},
          {"student_answer_text", it.student_answer_text},
          {"educator_answer_text", it.educator_answer_text},
          {"llm_reply_text", it.llm_reply_text}};
}

DiscrepancyItem item_from_json(const json& j) {
  DiscrepancyItem it;
  it.exam_id = j.at("exam_id").get<std::string>();
  it.question_id = j.at("question_id").get<std::string>();
  it.student_id = j.at("student_id").get<std::string>();
  it.language_tag = j.at("language_tag").get<std::string>();
  it.scale = j.at("scale").get<std::string>() == "quality" ? ScaleKind::quality : ScaleKind::similarity;
  it.gap = opt_double(j.at("gap"));
  it.p_h = j.at("p_h").get<double>();
  it.p_L = opt_double(j.at("p_L"));
  if (const auto& r = j.at("rating"); !r.is_null()) {
    CategoryRating cr;
    cr.category = r.at("category").get<std::string>();
    cr.category_index = r.at("category_index").get<std::size_t>();
    cr.scale = it.scale;
    cr.explanation = r.at("explanation").get<std::string>();
    cr.compliant = r.at("compliant").get<bool>();
    cr.match_offset = r.at("match_offset").get<std::size_t>();
    if (scale_of(it.scale).index_of(cr.category) != cr.category_index) {
      throw ReportError("item " + it.item_id() + ": category does not match its index");
    }
    it.rating = std::move(cr);
  }
  if (const auto& l = j.at("reference_label"); !l.is_null()) it.reference_label = l.get<std::string>();
  it.reference_index = j.at("reference_index").get<std::size_t>();
  it.human_points = points_from_json(j.at("human_points"));
  it.max_points = points_from_json(j.at("max_points"));
  it.question_text = j.at("question_text").get<std::string>();
  it.student_answer_text = j.at("student_answer_text").get<std::string>();
  it.educator_answer_text = j.at("educator_answer_text").get<std::string>();
  it.llm_reply_text = j.at("llm_reply_text").get<std::string>();
  return it;
}

std::vector<DiscrepancyItem> items_from_json(const json& j) {
  if (!j.is_array()) throw ReportError("discrepancy items must be a JSON array");
  std::vector<DiscrepancyItem> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(item_from_json(e));
  return out;
}

Correlation correlate(std::span<const double> xs, std::span<const double> ys) {
  Correlation c;
  c.n = xs.size();
  if (xs.size() != ys.size() || xs.size() < 2) return c;
  c.value = pearson(xs, ys);
  c.status = c.value ? CorrelationStatus::defined : CorrelationStatus::zero_variance;
  return c;
}

Summary summarize(std::span<const DiscrepancyItem> items, std::size_t failed) {
  Summary s;
  s.failed = failed;
  std::vector<double> hs, ls;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_question, by_language;
  std::map<ScaleKind, std::vector<std::optional<CategoryRating>>> ratings;
  double gap_sum = 0;
  std::map<std::string, double> language_gap_sum;

  for (const auto& it : items) {
    ratings[it.scale].push_back(it.rating);
    auto& lang = s.per_language[it.language_tag];
    ++lang.items;
    by_question[it.question_id];
    if (!it.parsed()) {
      ++s.unparsed;
      ++lang.unparsed;
      continue;
    }
    ++s.scored;
    ++lang.scored;
    hs.push_back(it.p_h);
    ls.push_back(*it.p_L);
    by_question[it.question_id].first.push_back(it.p_h);
    by_question[it.question_id].second.push_back(*it.p_L);
    by_language[it.language_tag].first.push_back(it.p_h);
    by_language[it.language_tag].second.push_back(*it.p_L);
    gap_sum += *it.gap;
    language_gap_sum[it.language_tag] += *it.gap;
  }
  s.total = s.scored + s.unparsed + s.failed;
  if (s.scored) s.mean_gap = gap_sum / static_cast<double>(s.scored);
  s.pearson_pooled = correlate(hs, ls);
  for (const auto& [qid, xy] : by_question) s.pearson_per_question[qid] = correlate(xy.first, xy.second);
  for (auto& [tag, lang] : s.per_language) {
    const auto& xy = by_language[tag];
    lang.pearson = correlate(xy.first, xy.second);
    if (lang.scored) lang.mean_gap = language_gap_sum[tag] / static_cast<double>(lang.scored);
  }
  for (const auto& [kind, rs] : ratings) s.histograms.push_back(category_histogram(rs, scale_of(kind)));
  return s;
}

namespace {

json correlation_json(const Correlation& c) {
  static const char* names[] = {"defined", "undefined_zero_variance", "undefined_insufficient_points"};
  return {{"value", opt_json(c.value)}, {"status", names[static_cast<int>(c.status)]}, {"n", c.n}};
}

}  // namespace

json summary_to_json(const Summary& s) {
  json per_question = json::object();
  for (const auto& [qid, c] : s.pearson_per_question) per_question[qid] = correlation_json(c);
  json histograms = json::array();
  for (const auto& h : s.histograms) {
    const auto& scale = scale_of(h.scale);
    json counts = json::array();
    for (std::size_t i = 0; i < h.counts.size(); ++i) counts.push_back({{"category", scale.at(i)}, {"count", h.counts[i]}});
    histograms.push_back({{"scale", to_string(h.scale)}, {"counts", std::move(counts)}, {"unparsed", h.unparsed}});
  }
  json languages = json::object();
  for (const auto& [tag, l] : s.per_language) {
    languages[tag] = {{"items", l.items},
                      {"scored", l.scored},
                      {"unparsed", l.unparsed},
                      {"pearson", correlation_json(l.pearson)},
                      {"mean_gap", opt_json(l.mean_gap)}};
  }
  return {{"total", s.total},
          {"scored", s.scored},
          {"unparsed", s.unparsed},
          {"failed", s.failed},
          {"mean_gap", opt_json(s.mean_gap)},
          {"pearson_pooled", correlation_json(s.pearson_pooled)},
          {"pearson_per_question", std::move(per_question)},
          {"histograms", std::move(histograms)},
          {"per_language", std::move(languages)}};
}

}  // namespace autograde
