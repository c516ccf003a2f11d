#include "lgap/resources.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "builtin_data.hpp"
#include "lgap/error.hpp"
#include "lgap/utf8.hpp"

namespace lgap {

using nlohmann::json;

namespace {

json parse_resource(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

template <class T>
T field(const json& j, const char* key, std::string_view what) {
  if (!j.contains(key)) throw ConfigError(std::string(what) + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": bad \"" + key + "\": " + e.what());
  }
}

std::vector<char32_t> code_points(const json& arr, std::string_view what) {
  std::vector<char32_t> out;
  for (const auto& s : arr) out.push_back(utf8::single(s.get<std::string>()));
  if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
  return out;
}

std::vector<std::string> template_slots(const std::string& tmpl) {
  std::vector<std::string> slots;
  std::size_t pos = 0;
  while ((pos = tmpl.find('{', pos)) != std::string::npos) {
    const auto end = tmpl.find('}', pos);
    if (end == std::string::npos) throw ConfigError("unterminated slot in template \"" + tmpl + "\"");
    slots.push_back(tmpl.substr(pos + 1, end - pos - 1));
    pos = end + 1;
  }
  return slots;
}

std::size_t token_count(const std::string& s) {
  std::istringstream in(s);
  std::size_t n = 0;
  for (std::string tok; in >> tok;) ++n;
  return n;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_default_ignorable(char32_t cp) noexcept {
  struct Range {
    char32_t lo, hi;
  };
  static constexpr Range kRanges[] = {
      {0x00AD, 0x00AD},   {0x034F, 0x034F},   {0x061C, 0x061C},   {0x115F, 0x1160},
      {0x17B4, 0x17B5},   {0x180B, 0x180F},   {0x200B, 0x200F},   {0x202A, 0x202E},
      {0x2060, 0x206F},   {0x3164, 0x3164},   {0xFE00, 0xFE0F},   {0xFEFF, 0xFEFF},
      {0xFFA0, 0xFFA0},   {0xFFF0, 0xFFF8},   {0x1BCA0, 0x1BCA3}, {0x1D173, 0x1D17A},
      {0xE0000, 0xE0FFF},
  };
  for (const auto& r : kRanges)
    if (cp >= r.lo && cp <= r.hi) return true;
  return false;
}

// ---------------------------------------------------------------- homoglyphs

HomoglyphTable HomoglyphTable::from_json(std::string_view text) {
  const auto j = parse_resource(text, "homoglyph table");
  HomoglyphTable t;
  t.version = field<std::string>(j, "version", "homoglyph table");
  t.id = j.value("id", "homoglyphs-v" + t.version);
  const auto& map = j.at("map");
  if (!map.is_object()) throw ConfigError("homoglyph table: \"map\" must be an object");
  for (const auto& [src, reps] : map.items()) t.map[utf8::single(src)] = code_points(reps, "homoglyph table entry");
  t.validate();
  return t;
}

const HomoglyphTable& HomoglyphTable::builtin() {
  static const HomoglyphTable t = from_json(builtin_data::homoglyphs());
  return t;
}

void HomoglyphTable::validate() const {
  if (map.empty()) throw ConfigError("homoglyph table is empty");
  std::set<char32_t> seen;
  for (const auto& [src, reps] : map) {
    if (reps.empty()) throw ConfigError("homoglyph table: no replacements for U+" + std::to_string(src));
    for (char32_t r : reps) {
      if (r == src) throw ConfigError("homoglyph table: replacement equals its source");
      if (!seen.insert(r).second) throw ConfigError("homoglyph table: replacement used for two sources");
      if (map.contains(r)) throw ConfigError("homoglyph table: replacement is itself a source");
    }
  }
}

std::map<char32_t, char32_t> HomoglyphTable::inverse() const {
  std::map<char32_t, char32_t> inv;
  for (const auto& [src, reps] : map)
    for (char32_t r : reps) inv[r] = src;
  return inv;
}

// ------------------------------------------------------------------- charset

NoiseCharset NoiseCharset::from_json(std::string_view text) {
  const auto j = parse_resource(text, "noise charset");
  NoiseCharset c;
  c.version = field<std::string>(j, "version", "noise charset");
  c.id = j.value("id", "charset-v" + c.version);
  c.zero_width = code_points(j.at("zero_width"), "zero_width");
  // emoji/punct may be empty individually; the noise pool may not.
  for (const auto& s : j.value("emoji", json::array())) c.emoji.push_back(utf8::single(s.get<std::string>()));
  for (const auto& s : j.value("punct", json::array())) c.punct.push_back(utf8::single(s.get<std::string>()));
  c.validate();
  return c;
}

const NoiseCharset& NoiseCharset::builtin() {
  static const NoiseCharset c = from_json(builtin_data::charset());
  return c;
}

bool NoiseCharset::is_zero_width(char32_t cp) const noexcept {
  for (char32_t z : zero_width)
    if (z == cp) return true;
  return false;
}

std::vector<char32_t> NoiseCharset::noise_pool() const {
  std::vector<char32_t> pool = emoji;
  pool.insert(pool.end(), punct.begin(), punct.end());
  return pool;
}

void NoiseCharset::validate() const {
  if (zero_width.empty()) throw ConfigError("noise charset: zero-width set is empty");
  for (char32_t z : zero_width)
    if (!is_default_ignorable(z)) throw ConfigError("noise charset: zero-width entry is not default-ignorable");
  if (emoji.empty() && punct.empty()) throw ConfigError("noise charset: emoji and punctuation sets are both empty");
  std::set<char32_t> all;
  std::size_t total = 0;
  for (const auto* set : {&zero_width, &emoji, &punct}) {
    all.insert(set->begin(), set->end());
    total += set->size();
  }
  if (all.size() != total) throw ConfigError("noise charset: sets must be disjoint and duplicate-free");
}

// ----------------------------------------------------------------- templates

TemplateBank TemplateBank::from_json(std::string_view text) {
  const auto j = parse_resource(text, "template bank");
  TemplateBank b;
  b.version = field<std::string>(j, "version", "template bank");
  b.id = j.value("id", "templates-v" + b.version);
  b.templates = field<std::vector<std::string>>(j, "templates", "template bank");
  b.lexicon = field<std::map<std::string, std::vector<std::string>>>(j, "lexicon", "template bank");
  b.validate();
  return b;
}

const TemplateBank& TemplateBank::builtin() {
  static const TemplateBank b = from_json(builtin_data::templates());
  return b;
}

void TemplateBank::validate() const {
  if (templates.empty()) throw ConfigError("template bank: no templates");
  for (const auto& t : templates) {
    for (const auto& slot : template_slots(t)) {
      auto it = lexicon.find(slot);
      if (it == lexicon.end() || it->second.empty())
        throw ConfigError("template bank: slot {" + slot + "} has no lexicon entries");
    }
  }
}

// ----------------------------------------------------------------- fragments

FragmentBank FragmentBank::from_json(std::string_view text) {
  const auto j = parse_resource(text, "fragment bank");
  FragmentBank b;
  b.version = field<std::string>(j, "version", "fragment bank");
  b.id = j.value("id", "fragments-v" + b.version);
  b.fragments = field<std::vector<std::string>>(j, "fragments", "fragment bank");
  b.validate();
  return b;
}

const FragmentBank& FragmentBank::builtin() {
  static const FragmentBank b = from_json(builtin_data::fragments());
  return b;
}

void FragmentBank::validate() const {
  if (fragments.empty()) throw ConfigError("fragment bank: no fragments");
  for (const auto& f : fragments)
    if (token_count(f) < 2) throw ConfigError("fragment bank: \"" + f + "\" needs at least two tokens");
}

const Resources& Resources::builtin() {
  static const Resources r{HomoglyphTable::builtin(), NoiseCharset::builtin(), TemplateBank::builtin(),
                           FragmentBank::builtin()};
  return r;
}

HomoglyphTable load_homoglyph_table(const std::string& source) {
  return source == "default" ? HomoglyphTable::builtin() : HomoglyphTable::from_json(read_text_file(source));
}

NoiseCharset load_noise_charset(const std::string& source) {
  return source == "default" ? NoiseCharset::builtin() : NoiseCharset::from_json(read_text_file(source));
}

TemplateBank load_template_bank(const std::string& source) {
  return source == "default" ? TemplateBank::builtin() : TemplateBank::from_json(read_text_file(source));
}

FragmentBank load_fragment_bank(const std::string& source) {
  return source == "default" ? FragmentBank::builtin() : FragmentBank::from_json(read_text_file(source));
}

}  // namespace lgap
