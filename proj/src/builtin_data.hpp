#pragma once

#include <string_view>

namespace lgap::builtin_data {

std::string_view homoglyphs();
std::string_view charset();
std::string_view templates();
std::string_view fragments();

}  // namespace lgap::builtin_data
