#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cloze {

// Word-level normalization shared by the vocabulary, the encoders and the
// sentence ranker: lowercase, split on whitespace, strip leading/trailing
// punctuation. Any token containing "@placeholder" becomes exactly that
// token; tokens that are pure punctuation vanish.
std::vector<std::string> tokenize(std::string_view text);

// Plain whitespace split, no normalization.
std::vector<std::string_view> split_whitespace(std::string_view text);

}  // namespace cloze
