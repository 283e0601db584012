#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "autograde/prompt_forge.hpp"

namespace autograde {

struct CategoryRating {
  std::string category;  // canonical scale string, e.g. "Very good."
  std::size_t category_index = 0;
  ScaleKind scale = ScaleKind::quality;
  std::string explanation;
  bool compliant = false;  // the reply starts with the category
  std::size_t match_offset = 0;

  bool operator==(const CategoryRating&) const = default;
};

/// Finds the verdict in a free-text reply.
///
/// Matching is ASCII case-insensitive, whole-word, with the category's
/// trailing period optional. Leading whitespace is ignored, so offsets are
/// relative to the first non-space byte. The earliest match wins; at equal
/// offsets the longest category wins, so "Very good" never reads as "Good".
/// The explanation is the reply with the matched span cut out, trimmed.
///
/// Returns nullopt when no category occurs (the reply is "unparsed").
std::optional<CategoryRating> parse_category(std::string_view reply, const RatingScale& scale);

/// True for bytes that can belong to a word: ASCII alphanumerics, '_' and
/// any non-ASCII byte.
bool is_word_byte(char c);

}  // namespace autograde
