#include "autograde/rating_parser.hpp"

#include <cctype>

namespace autograde {

bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) || c == '_';
}

namespace {

char lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

bool matches_at(std::string_view text, std::size_t pos, std::string_view core) {
  if (pos + core.size() > text.size()) return false;
  for (std::size_t k = 0; k < core.size(); ++k) {
    if (lower(text[pos + k]) != lower(core[k])) return false;
  }
  if (pos > 0 && is_word_byte(text[pos - 1])) return false;
  const std::size_t end = pos + core.size();
  return end == text.size() || !is_word_byte(text[end]);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::optional<CategoryRating> parse_category(std::string_view reply, const RatingScale& scale) {
  const auto lead = reply.find_first_not_of(" \t\r\n");
  if (lead == std::string_view::npos) return std::nullopt;
  const std::string_view text = reply.substr(lead);

  for (std::size_t pos = 0; pos < text.size(); ++pos) {
    std::size_t best = scale.size();
    std::size_t best_len = 0;
    for (std::size_t i = 0; i < scale.size(); ++i) {
      std::string_view core = scale.at(i);
      if (!core.empty() && core.back() == '.') core.remove_suffix(1);
      if (core.size() > best_len && matches_at(text, pos, core)) {
        best = i;
        best_len = core.size();
      }
    }
    if (best == scale.size()) continue;

    std::size_t span = best_len;
    if (pos + span < text.size() && text[pos + span] == '.') ++span;
    std::string rest(text.substr(0, pos));
    rest += text.substr(pos + span);
    return CategoryRating{scale.at(best), best, scale.kind(), std::string(trim(rest)), pos == 0, pos};
  }
  return std::nullopt;
}

}  // namespace autograde
