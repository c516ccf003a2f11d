#pragma once

#include <string>
#include <string_view>

namespace lgap::utf8 {

/// Decodes UTF-8 into code points. Throws DataError on malformed input.
std::u32string decode(std::string_view text);

std::string encode(std::u32string_view cps);

std::string encode(char32_t cp);

/// Single code point from a UTF-8 string that must hold exactly one.
char32_t single(std::string_view text);

}  // namespace lgap::utf8
