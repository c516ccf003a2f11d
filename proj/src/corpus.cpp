#include "lgap/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lgap/error.hpp"
#include "lgap/obfuscation_ops.hpp"
#include "lgap/parallel.hpp"
#include "lgap/rng.hpp"
#include "lgap/utf8.hpp"

namespace lgap {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view label_name(Label label) noexcept {
  switch (label) {
    case Label::Clean: return "clean";
    case Label::Prefix: return "prefix";
    case Label::Suffix: return "suffix";
    case Label::Obfuscated: return "obfuscated";
  }
  return "?";
}

std::string_view operator_name(OperatorKind kind) noexcept {
  switch (kind) {
    case OperatorKind::FragmentEmbed: return "FragmentEmbed";
    case OperatorKind::Homoglyph: return "Homoglyph";
    case OperatorKind::ZeroWidth: return "ZeroWidth";
    case OperatorKind::Noise: return "Noise";
  }
  return "?";
}

OperatorKind operator_from_name(std::string_view name) {
  for (auto k : {OperatorKind::FragmentEmbed, OperatorKind::Homoglyph, OperatorKind::ZeroWidth, OperatorKind::Noise})
    if (operator_name(k) == name) return k;
  throw DataError("unknown operator kind \"" + std::string(name) + "\"");
}

double OperatorProbabilities::of(OperatorKind kind) const noexcept {
  switch (kind) {
    case OperatorKind::FragmentEmbed: return fragment_embed;
    case OperatorKind::Homoglyph: return homoglyph;
    case OperatorKind::ZeroWidth: return zero_width;
    case OperatorKind::Noise: return noise;
  }
  return 0.0;
}

// -------------------------------------------------------------------- config

std::vector<std::string> CorpusConfig::errors() const {
  std::vector<std::string> errs;
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (per_class == 0) errs.emplace_back("corpus.per_class must be > 0");
  const std::pair<const char*, double> probs[] = {{"fragment_embed", p_op.fragment_embed},
                                                  {"homoglyph", p_op.homoglyph},
                                                  {"zero_width", p_op.zero_width},
                                                  {"noise", p_op.noise}};
  for (const auto& [name, p] : probs)
    if (!in_unit(p)) errs.push_back(std::string("corpus.p_op.") + name + " must be in [0,1]");
  if (!in_unit(homoglyph_rate)) errs.emplace_back("corpus.homoglyph_rate must be in [0,1]");
  if (!in_unit(zero_width_rate)) errs.emplace_back("corpus.zero_width_rate must be in [0,1]");
  if (!in_unit(fragmented_rate)) errs.emplace_back("corpus.fragmented_rate must be in [0,1]");
  if (noise_count.first > noise_count.second) errs.emplace_back("corpus.noise_count min exceeds max");
  bool ratios_ok = true;
  for (double r : split) ratios_ok = ratios_ok && in_unit(r);
  if (!ratios_ok) errs.emplace_back("split ratios must be in [0,1]");
  else if (std::abs(split[0] + split[1] + split[2] - 1.0) > 1e-9) errs.emplace_back("ratios must sum to 1");
  return errs;
}

void CorpusConfig::validate() const {
  const auto errs = errors();
  if (errs.empty()) return;
  std::string msg = errs.front();
  for (std::size_t i = 1; i < errs.size(); ++i) msg += "; " + errs[i];
  throw ConfigError(msg);
}

std::vector<Prompt> Dataset::all() const {
  std::vector<Prompt> out;
  for (const auto& s : splits) out.insert(out.end(), s.begin(), s.end());
  std::sort(out.begin(), out.end(), [](const Prompt& a, const Prompt& b) { return a.id < b.id; });
  return out;
}

// ------------------------------------------------------------------ fragments

namespace {

std::vector<std::string> tokens(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

std::string join(const std::vector<std::string>& toks, std::size_t start, std::size_t count) {
  std::string out;
  for (std::size_t i = start; i < start + count; ++i) {
    if (i > start) out += ' ';
    out += toks[i];
  }
  return out;
}

std::string_view mode_name(InjectionMode m) { return m == InjectionMode::Prefix ? "prefix" : "suffix"; }
std::string_view fragmentation_name(Fragmentation f) { return f == Fragmentation::Full ? "full" : "fragmented"; }

template <class T>
T param(const ordered_json& params, const char* key) {
  if (!params.contains(key)) throw DataError(std::string("operator record missing param \"") + key + "\"");
  return params.at(key).get<T>();
}

void require_id(const ordered_json& params, const char* key, const std::string& expected) {
  const auto got = param<std::string>(params, key);
  if (got != expected) throw DataError("trace refers to " + std::string(key) + " \"" + got + "\", loaded \"" + expected + "\"");
}

}  // namespace

std::pair<std::string, OperatorRecord> embed_fragment(std::string_view text, InjectionMode mode,
                                                      Fragmentation fragmentation, const FragmentBank& bank,
                                                      std::uint64_t seed) {
  if (bank.fragments.empty()) throw ConfigError("fragment bank is empty");
  Rng rng(seed);
  const auto index = rng.below(bank.fragments.size());
  const auto toks = tokens(bank.fragments[index]);
  std::size_t start = 0;
  std::size_t count = toks.size();
  if (fragmentation == Fragmentation::Fragmented) {
    if (toks.size() < 2) throw ConfigError("fragmented injection needs a fragment of at least two tokens");
    count = 1 + rng.below(toks.size() - 1);
    start = rng.below(toks.size() - count + 1);
  }
  const std::string span = join(toks, start, count);
  const std::string sep = fragmentation == Fragmentation::Full ? ". " : " ";

  OperatorRecord rec;
  rec.kind = OperatorKind::FragmentEmbed;
  rec.seed = seed;
  rec.params["bank"] = bank.id;
  rec.params["fragment"] = index;
  rec.params["mode"] = mode_name(mode);
  rec.params["fragmentation"] = fragmentation_name(fragmentation);
  rec.params["token_start"] = start;
  rec.params["token_count"] = count;
  const auto input_len = static_cast<std::uint32_t>(utf8::decode(text).size());
  rec.positions = {mode == InjectionMode::Prefix ? 0u : input_len};

  std::string out = mode == InjectionMode::Prefix ? span + sep + std::string(text) : std::string(text) + sep + span;
  return {std::move(out), std::move(rec)};
}

// ------------------------------------------------------------------ generator

CorpusGenerator::CorpusGenerator(CorpusConfig config)
    : CorpusGenerator(config, Resources{load_homoglyph_table(config.homoglyphs), load_noise_charset(config.charset),
                                        load_template_bank(config.templates), load_fragment_bank(config.fragments)}) {}

CorpusGenerator::CorpusGenerator(CorpusConfig config, Resources resources)
    : config_(std::move(config)), resources_(std::move(resources)) {
  config_.validate();
  resources_.homoglyphs.validate();
  resources_.charset.validate();
  resources_.templates.validate();
  resources_.fragments.validate();
}

std::vector<Prompt> CorpusGenerator::generate_clean(std::size_t n, std::uint64_t seed, std::uint64_t first_id) const {
  const auto& bank = resources_.templates;
  Rng rng(seed);
  std::vector<Prompt> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& tmpl = bank.templates[rng.below(bank.templates.size())];
    std::string text;
    std::size_t pos = 0;
    for (;;) {
      const auto open = tmpl.find('{', pos);
      if (open == std::string::npos) {
        text.append(tmpl, pos);
        break;
      }
      const auto close = tmpl.find('}', open);
      text.append(tmpl, pos, open - pos);
      const auto& words = bank.lexicon.at(tmpl.substr(open + 1, close - open - 1));
      text += words[rng.below(words.size())];
      pos = close + 1;
    }
    out.push_back(Prompt{first_id + i, std::move(text), Label::Clean, std::nullopt, {}});
  }
  return out;
}

Prompt CorpusGenerator::apply_injection(const Prompt& base, InjectionMode mode, Fragmentation fragmentation,
                                        std::uint64_t seed, std::uint64_t id) const {
  if (base.label != Label::Clean) throw PreconditionError("apply_injection: base prompt must be Clean");
  auto [text, rec] = embed_fragment(base.text, mode, fragmentation, resources_.fragments, seed);
  Prompt p;
  p.id = id;
  p.text = std::move(text);
  p.label = mode == InjectionMode::Prefix ? Label::Prefix : Label::Suffix;
  p.base_id = base.id;
  p.trace.push_back(std::move(rec));
  return p;
}

Prompt CorpusGenerator::obfuscate(const Prompt& base, std::uint64_t seed, std::uint64_t id) const {
  if (base.label != Label::Clean) throw PreconditionError("obfuscate: base prompt must be Clean");
  constexpr std::array kOrder{OperatorKind::FragmentEmbed, OperatorKind::Homoglyph, OperatorKind::ZeroWidth,
                              OperatorKind::Noise};
  Rng rng(seed);
  std::array<bool, 4> apply{};
  std::array<std::uint64_t, 4> op_seed{};
  for (std::size_t k = 0; k < kOrder.size(); ++k) {
    apply[k] = rng.bernoulli(config_.p_op.of(kOrder[k]));
    op_seed[k] = rng.next();
  }
  const auto mode = rng.below(2) == 0 ? InjectionMode::Prefix : InjectionMode::Suffix;
  const auto fragmentation = rng.bernoulli(config_.fragmented_rate) ? Fragmentation::Fragmented : Fragmentation::Full;
  bool forced = false;

  const auto& res = resources_;
  Prompt p;
  p.id = id;
  p.label = Label::Obfuscated;
  p.base_id = base.id;
  std::string text = base.text;
  for (std::size_t k = 0; k < kOrder.size(); ++k) {
    if (kOrder[k] == OperatorKind::Noise && text == base.text) {
      forced = true;
      apply[k] = true;
    }
    if (!apply[k]) continue;
    OperatorRecord rec;
    rec.kind = kOrder[k];
    rec.seed = op_seed[k];
    switch (kOrder[k]) {
      case OperatorKind::FragmentEmbed: {
        auto [t, r] = embed_fragment(text, mode, fragmentation, res.fragments, op_seed[k]);
        text = std::move(t);
        rec = std::move(r);
        break;
      }
      case OperatorKind::Homoglyph: {
        auto r = homoglyph_substitute(text, config_.homoglyph_rate, res.homoglyphs, op_seed[k]);
        rec.params["table"] = res.homoglyphs.id;
        rec.params["rate"] = config_.homoglyph_rate;
        rec.positions = std::move(r.positions);
        text = std::move(r.text);
        break;
      }
      case OperatorKind::ZeroWidth: {
        auto r = insert_zero_width(text, config_.zero_width_rate, res.charset, op_seed[k]);
        rec.params["charset"] = res.charset.id;
        rec.params["rate"] = config_.zero_width_rate;
        rec.positions = std::move(r.positions);
        text = std::move(r.text);
        break;
      }
      case OperatorKind::Noise: {
        auto range = config_.noise_count;
        if (forced) range = {std::max(range.first, 1u), std::max(range.second, 1u)};
        auto r = add_noise(text, range, res.charset, op_seed[k]);
        rec.params["charset"] = res.charset.id;
        rec.params["min"] = range.first;
        rec.params["max"] = range.second;
        rec.params["forced"] = forced;
        rec.positions = std::move(r.positions);
        text = std::move(r.text);
        break;
      }
    }
    p.trace.push_back(std::move(rec));
  }
  p.text = std::move(text);
  return p;
}

std::string CorpusGenerator::replay(std::string_view base_text, const std::vector<OperatorRecord>& trace) const {
  const auto& res = resources_;
  std::string text(base_text);
  for (const auto& rec : trace) {
    const auto& prm = rec.params;
    std::vector<std::uint32_t> positions;
    switch (rec.kind) {
      case OperatorKind::FragmentEmbed: {
        require_id(prm, "bank", res.fragments.id);
        const auto mode = param<std::string>(prm, "mode") == "prefix" ? InjectionMode::Prefix : InjectionMode::Suffix;
        const auto frag =
            param<std::string>(prm, "fragmentation") == "full" ? Fragmentation::Full : Fragmentation::Fragmented;
        auto [t, r] = embed_fragment(text, mode, frag, res.fragments, rec.seed);
        if (r.params != prm) throw DataError("replay: fragment choice differs from recorded params");
        text = std::move(t);
        positions = std::move(r.positions);
        break;
      }
      case OperatorKind::Homoglyph: {
        require_id(prm, "table", res.homoglyphs.id);
        auto r = homoglyph_substitute(text, param<double>(prm, "rate"), res.homoglyphs, rec.seed);
        text = std::move(r.text);
        positions = std::move(r.positions);
        break;
      }
      case OperatorKind::ZeroWidth: {
        require_id(prm, "charset", res.charset.id);
        auto r = insert_zero_width(text, param<double>(prm, "rate"), res.charset, rec.seed);
        text = std::move(r.text);
        positions = std::move(r.positions);
        break;
      }
      case OperatorKind::Noise: {
        require_id(prm, "charset", res.charset.id);
        auto r = add_noise(text, {param<std::uint32_t>(prm, "min"), param<std::uint32_t>(prm, "max")}, res.charset,
                           rec.seed);
        text = std::move(r.text);
        positions = std::move(r.positions);
        break;
      }
    }
    if (positions != rec.positions)
      throw DataError("replay: " + std::string(operator_name(rec.kind)) + " positions differ from the trace");
  }
  return text;
}

Dataset CorpusGenerator::build_dataset() const {
  const std::uint64_t n = config_.per_class;
  const std::uint64_t s = config_.seed;
  std::array<std::vector<Prompt>, kNumClasses> by_class;

  // Ids: clean i -> i, prefix i -> n + i, suffix i -> 2n + i, obfuscated i -> 3n + i.
  // Derived sample i always uses clean sample i as its base.
  by_class[0] = generate_clean(n, stage_seed(s, "clean"), 0);
  const auto& clean = by_class[0];
  for (std::size_t c = 1; c < kNumClasses; ++c) by_class[c].resize(n);

  const std::uint64_t prefix_seed = stage_seed(s, "prefix");
  const std::uint64_t suffix_seed = stage_seed(s, "suffix");
  const std::uint64_t shape_seed = stage_seed(s, "fragmentation");
  const std::uint64_t obf_seed = stage_seed(s, "obfuscated");
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t c = 1; c <= 2; ++c) {
      Rng shape(derive_seed(shape_seed, i * 2 + (c - 1)));
      const auto frag = shape.bernoulli(config_.fragmented_rate) ? Fragmentation::Fragmented : Fragmentation::Full;
      const auto mode = c == 1 ? InjectionMode::Prefix : InjectionMode::Suffix;
      by_class[c][i] = apply_injection(clean[i], mode, frag, derive_seed(c == 1 ? prefix_seed : suffix_seed, i), c * n + i);
    }
    by_class[3][i] = obfuscate(clean[i], derive_seed(obf_seed, i), 3 * n + i);
  });

  // Stratified split: per-class Fisher-Yates permutation, then contiguous cuts.
  const auto n_train = std::min<std::uint64_t>(n, std::llround(static_cast<double>(n) * config_.split[0]));
  const auto n_val = std::min<std::uint64_t>(n - n_train, std::llround(static_cast<double>(n) * config_.split[1]));
  const std::uint64_t split_seed = stage_seed(s, "split");
  Dataset ds;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<std::uint64_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(split_seed, c));
    for (std::uint64_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    for (std::uint64_t k = 0; k < n; ++k) {
      const std::size_t split = k < n_train ? 0 : (k < n_train + n_val ? 1 : 2);
      ds.splits[split].push_back(by_class[c][perm[k]]);
    }
  }
  for (auto& sp : ds.splits)
    std::sort(sp.begin(), sp.end(), [](const Prompt& a, const Prompt& b) { return a.id < b.id; });
  return ds;
}

// ---------------------------------------------------------------------- JSONL

ordered_json to_json(const Prompt& p) {
  ordered_json j;
  j["id"] = p.id;
  j["text"] = p.text;
  j["label"] = static_cast<int>(p.label);
  j["base_id"] = p.base_id ? ordered_json(*p.base_id) : ordered_json(nullptr);
  auto trace = ordered_json::array();
  for (const auto& r : p.trace) {
    ordered_json rj;
    rj["kind"] = operator_name(r.kind);
    rj["params"] = r.params;
    rj["seed"] = r.seed;
    rj["positions"] = r.positions;
    trace.push_back(std::move(rj));
  }
  j["trace"] = std::move(trace);
  return j;
}

Prompt prompt_from_json(const ordered_json& j) {
  auto need = [&](const char* key) -> const ordered_json& {
    if (!j.contains(key)) throw FormatError(key, "missing");
    return j.at(key);
  };
  Prompt p;
  const auto& id = need("id");
  if (!id.is_number_unsigned()) throw FormatError("id", "must be an unsigned integer");
  p.id = id.get<std::uint64_t>();
  const auto& text = need("text");
  if (!text.is_string()) throw FormatError("text", "must be a string");
  p.text = text.get<std::string>();
  const auto& label = need("label");
  if (!label.is_number_integer() || label.get<std::int64_t>() < 0 || label.get<std::int64_t>() > 3)
    throw FormatError("label", "must be 0, 1, 2 or 3");
  p.label = static_cast<Label>(label.get<int>());
  const auto& base = need("base_id");
  if (!base.is_null()) {
    if (!base.is_number_unsigned()) throw FormatError("base_id", "must be an unsigned integer or null");
    p.base_id = base.get<std::uint64_t>();
  }
  const auto& trace = need("trace");
  if (!trace.is_array()) throw FormatError("trace", "must be an array");
  for (const auto& rj : trace) {
    OperatorRecord r;
    r.kind = operator_from_name(rj.at("kind").get<std::string>());
    r.params = rj.at("params");
    r.seed = rj.at("seed").get<std::uint64_t>();
    r.positions = rj.at("positions").get<std::vector<std::uint32_t>>();
    if (!std::is_sorted(r.positions.begin(), r.positions.end()) ||
        std::adjacent_find(r.positions.begin(), r.positions.end()) != r.positions.end())
      throw DataError("trace positions must be strictly increasing");
    p.trace.push_back(std::move(r));
  }
  if ((p.label == Label::Clean) != !p.base_id.has_value())
    throw DataError("base_id must be null exactly for Clean prompts");
  return p;
}

std::string to_jsonl(const std::vector<Prompt>& prompts) {
  std::string out;
  for (const auto& p : prompts) {
    out += to_json(p).dump(-1, ' ', false);
    out += '\n';
  }
  return out;
}

std::vector<Prompt> parse_jsonl(std::string_view text) {
  std::vector<Prompt> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      // ordered_json keeps params in file order so replay comparisons hold.
      out.push_back(prompt_from_json(ordered_json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError("line " + std::to_string(line_no), e.what());
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(line_no) + " " + e.field(), e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Prompt> read_jsonl(const std::filesystem::path& path) { return parse_jsonl(read_text_file(path.string())); }

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  auto partial = path;
  partial += ".partial";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + partial.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + partial.string());
  }
  std::error_code ec;
  std::filesystem::rename(partial, path, ec);
  if (ec) throw IoError("cannot rename " + partial.string() + ": " + ec.message());
}

void write_jsonl(const std::vector<Prompt>& prompts, const std::filesystem::path& path) {
  write_file_atomic(path, to_jsonl(prompts));
}

std::array<std::filesystem::path, 3> write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::array<std::filesystem::path, 3> paths;
  for (std::size_t s = 0; s < 3; ++s) {
    paths[s] = dir / (std::string(kSplitNames[s]) + ".jsonl");
    write_jsonl(dataset.splits[s], paths[s]);
  }
  return paths;
}

}  // namespace lgap
