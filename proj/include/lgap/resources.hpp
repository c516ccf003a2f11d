#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lgap {

/// Source character -> confusable replacements. Every replacement is unique
/// across the table so the inverse mapping is a function.
struct HomoglyphTable {
  std::string id;
  std::string version;
  std::map<char32_t, std::vector<char32_t>> map;

  static HomoglyphTable from_json(std::string_view json);
  static const HomoglyphTable& builtin();

  std::map<char32_t, char32_t> inverse() const;
  void validate() const;
};

struct NoiseCharset {
  std::string id;
  std::string version;
  std::vector<char32_t> zero_width;
  std::vector<char32_t> emoji;
  std::vector<char32_t> punct;

  static NoiseCharset from_json(std::string_view json);
  static const NoiseCharset& builtin();

  bool is_zero_width(char32_t cp) const noexcept;
  /// Emoji followed by punctuation; the draw pool of the noise operator.
  std::vector<char32_t> noise_pool() const;
  void validate() const;
};

/// Sentence templates with `{slot}` placeholders and the lexicon that fills them.
struct TemplateBank {
  std::string id;
  std::string version;
  std::vector<std::string> templates;
  std::map<std::string, std::vector<std::string>> lexicon;

  static TemplateBank from_json(std::string_view json);
  static const TemplateBank& builtin();
  void validate() const;
};

/// Instruction-style injection strings. Each holds at least two
/// space-separated tokens so a strict fragment always exists.
struct FragmentBank {
  std::string id;
  std::string version;
  std::vector<std::string> fragments;

  static FragmentBank from_json(std::string_view json);
  static const FragmentBank& builtin();
  void validate() const;
};

/// Everything the corpus generator and trace replay need.
struct Resources {
  HomoglyphTable homoglyphs;
  NoiseCharset charset;
  TemplateBank templates;
  FragmentBank fragments;

  static const Resources& builtin();
};

/// "default" selects the builtin bank; anything else is a path to a JSON file.
HomoglyphTable load_homoglyph_table(const std::string& source);
NoiseCharset load_noise_charset(const std::string& source);
TemplateBank load_template_bank(const std::string& source);
FragmentBank load_fragment_bank(const std::string& source);

bool is_default_ignorable(char32_t cp) noexcept;

std::string read_text_file(const std::string& path);

}  // namespace lgap
