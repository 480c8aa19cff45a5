#include "cloze/text.hpp"

#include <cctype>

#include "cloze/corpus.hpp"

namespace cloze {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)); }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)); }

}  // namespace

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (std::string_view raw : split_whitespace(text)) {
    std::string word;
    word.reserve(raw.size());
    for (char c : raw) {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (word.find(kPlaceholder) != std::string::npos) {
      out.emplace_back(kPlaceholder);
      continue;
    }
    std::size_t b = 0;
    std::size_t e = word.size();
    while (b < e && is_punct(word[b])) ++b;
    while (e > b && is_punct(word[e - 1])) --e;
    if (e > b) out.push_back(word.substr(b, e - b));
  }
  return out;
}

}  // namespace cloze
