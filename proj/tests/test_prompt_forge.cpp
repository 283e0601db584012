#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>

#include "autograde/prompt_forge.hpp"
#include "golden_texts.hpp"

using namespace autograde;

namespace {

const Question kLinkageQuestion{
    "Q1", "What is the difference between single linkage and average linkage (hierarchical) clustering?", Points(10),
    "en"};

const EducatorAnswer kLinkageEducator{
    "Q1",
    "The two differ in distance metric used to cluster. Single linkage: Merge two clusters based on minimum distance "
    "between any two points; Tendency to form long chains; Average linkage: merge two clusters based on average "
    "distance between any two points; tendency to \xE2\x80\x9C" "ball\xE2\x80\x9D like clusters;",
    std::nullopt};

const StudentAnswer kLinkageStudent{
    "s1", "Q1",
    "In single linkage, we compare the two closest data points (the ones with minimal distance) from two separate "
    "clusters. In average linkage, we compare all the data points from a cluster with all the datapoints from "
    "another cluster and get an average distance.",
    Points(8)};

std::string strip_spaces(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  }
  return out;
}

}  // namespace

TEST(RatingScale, CategoriesInOrder) {
  const std::vector<std::string> quality{"Extremely good.", "Very good.", "Good.",         "Ok.",
                                         "Bad.",            "Very bad.",  "Extremely bad."};
  const std::vector<std::string> similarity{"Very close.",       "Close.",   "Somewhat close.",
                                            "Somewhat distant.", "Distant.", "Very distant."};
  const auto q = RatingScale::quality().categories();
  const auto s = RatingScale::similarity().categories();
  EXPECT_EQ(std::vector<std::string>(q.begin(), q.end()), quality);
  EXPECT_EQ(std::vector<std::string>(s.begin(), s.end()), similarity);
  EXPECT_EQ(RatingScale::quality().index_of("Ok."), 3u);
  EXPECT_EQ(RatingScale::similarity().index_of("Ok."), std::string::npos);
}

TEST(PromptForge, EducatorPromptMatchesPrintedExampleByteForByte) {
  const auto p = build_educator_prompt(kLinkageQuestion, kLinkageEducator);
  EXPECT_EQ(p.text, golden::kEducatorPrompt);
  EXPECT_EQ(p.family, PromptFamily::educator_assessment);
  EXPECT_EQ(p.scale, &RatingScale::quality());
}

TEST(PromptForge, StudentPromptIsExactTemplate) {
  const auto p = build_student_prompt(kLinkageQuestion, kLinkageStudent);
  EXPECT_EQ(p.text, "Here is a question: " + kLinkageQuestion.text + " . Here is an answer: " + kLinkageStudent.text +
                        ". How good is the answer to the question? Start the reply with one of the following: "
                        "Extremely good., Very good., Good., Ok., Bad., Very bad., Extremely bad. Explain the choice.");
  EXPECT_EQ(p.family, PromptFamily::student_assessment);
  EXPECT_EQ(p.scale, &RatingScale::quality());
}

TEST(PromptForge, StudentPromptMatchesPrintedExampleModuloWhitespace) {
  // The printed example wraps ". ." differently around the answer's own
  // period; the characters are otherwise identical.
  const auto p = build_student_prompt(kLinkageQuestion, kLinkageStudent);
  EXPECT_EQ(strip_spaces(p.text), strip_spaces(golden::kStudentPrompt));
}

TEST(PromptForge, ComparisonPromptMatchesPrintedFragments) {
  StudentAnswer student = kLinkageStudent;
  student.text =
      "In single linkage, we compare the two closest datapoints (the ones with minimal distance) from two separate "
      "clusters. In average linkage, we compare all the datapoints from a cluster with all the datapoints from "
      "another cluster and get an average distance.";
  EducatorAnswer reference = kLinkageEducator;
  reference.text =
      "The two differ in distance metric used to cluster. Single linkage: Merge two clusters based on minimum distance "
      "between any two points; Tendency to form long chains; Average linkage: merge two clusters based on average "
      "distance between any two points; tendency to \"ball\" like clusters;";
  const auto p = build_comparison_prompt(student, reference);
  const std::string expected = std::string(golden::kComparisonAnswerLine) + " " +
                               std::string(golden::kComparisonOptimalLine) + ". " +
                               std::string(golden::kComparisonTailLine);
  EXPECT_EQ(p.text, expected);
  EXPECT_EQ(p.family, PromptFamily::comparison);
  EXPECT_EQ(p.scale, &RatingScale::similarity());
}

TEST(PromptForge, ComparisonPromptOmitsQuestionText) {
  const auto p = build_comparison_prompt(kLinkageStudent, kLinkageEducator);
  EXPECT_EQ(p.text.find(kLinkageQuestion.text), std::string::npos);
  EXPECT_EQ(p.text.find("Here is a question"), std::string::npos);
  EXPECT_EQ(p.text, "Here is an answer: " + kLinkageStudent.text + " . Here is the optimal answer: " +
                        kLinkageEducator.text +
                        ". How close is the answer to the optimal answer? Start the reply with one of the following: "
                        "Very close., Close., Somewhat close., Somewhat distant., Distant., Very distant.. Explain "
                        "the choice.");
}

TEST(PromptForge, SubstitutesVerbatimWithoutEscaping) {
  StudentAnswer s = kLinkageStudent;
  s.text = "Uses {Q} and {A}\n\"quotes\" & <tags> \xC3\xA4\xC3\xB6\xC3\xBC";
  const auto p = build_student_prompt(kLinkageQuestion, s);
  EXPECT_NE(p.text.find("Here is an answer: " + s.text + ". How good"), std::string::npos);
}

TEST(PromptForge, EmptyStudentAnswerStillRenders) {
  StudentAnswer s = kLinkageStudent;
  s.text.clear();
  const auto p = build_comparison_prompt(s, kLinkageEducator);
  EXPECT_EQ(p.text.rfind("Here is an answer:  . Here is the optimal answer: ", 0), 0u);
}

TEST(PromptForge, SubjectRefsAuditTrail) {
  const auto p = build_comparison_prompt(kLinkageStudent, kLinkageEducator);
  EXPECT_NE(std::find(p.subject_refs.begin(), p.subject_refs.end(), "student:s1"), p.subject_refs.end());
  EXPECT_NE(std::find(p.subject_refs.begin(), p.subject_refs.end(), "question:Q1"), p.subject_refs.end());
}

TEST(PromptForge, RenderTemplateLeavesUnknownSlots) {
  EXPECT_EQ(render_template("{Q}|{A}|{E}|{X}", "q", "a", "e"), "q|a|e|{X}");
  EXPECT_EQ(render_template("{A}{A}", "", "x", ""), "xx");
}

TEST(PromptForge, MultiComparisonOnePromptPerReferenceInOrder) {
  const std::vector<EducatorAnswer> refs{
      {"Q1", "first", std::string("a")}, {"Q1", "second", std::nullopt}, {"Q1", "first", std::string("a")}};
  const auto prompts = build_multi_comparison(kLinkageStudent, refs);
  ASSERT_EQ(prompts.size(), 3u);
  EXPECT_NE(prompts[0].text.find("optimal answer: first."), std::string::npos);
  EXPECT_NE(prompts[1].text.find("optimal answer: second."), std::string::npos);
  EXPECT_EQ(prompts[0].text, prompts[2].text);
  EXPECT_THROW(build_multi_comparison(kLinkageStudent, std::span<const EducatorAnswer>{}), std::invalid_argument);
}

TEST(PromptForge, CustomTemplatesOverrideDefaults) {
  PromptTemplates t = PromptTemplates::english();
  t.student_assessment = "Frage: {Q} Antwort: {A}";
  const auto p = build_student_prompt(kLinkageQuestion, kLinkageStudent, t);
  EXPECT_EQ(p.text, "Frage: " + kLinkageQuestion.text + " Antwort: " + kLinkageStudent.text);
}
