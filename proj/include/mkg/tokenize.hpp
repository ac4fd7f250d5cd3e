#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mkg {

// Splits text into tokens: every non-ASCII code point (CJK characters in
// practice) is its own token, ASCII letter/digit runs form lowercased words,
// whitespace and punctuation (ASCII and CJK/full-width) separate tokens and
// are dropped. Invalid UTF-8 bytes are treated as single-byte tokens.
std::vector<std::string> tokenize(std::string_view text);

// Decodes one UTF-8 code point starting at text[pos]; advances pos.
char32_t next_code_point(std::string_view text, std::size_t& pos);

}  // namespace mkg
