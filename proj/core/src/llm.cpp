#include "chapterkit/llm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "json.hpp"

#include "chapterkit/errors.hpp"
#include "chapterkit/eval.hpp"
#include "chapterkit/io.hpp"
#include "chapterkit/rng.hpp"
#include "chapterkit/text.hpp"
#include "http_util.hpp"

namespace chapterkit {

std::string_view to_string(PromptMode m) {
    switch (m) {
        case PromptMode::kZeroShot: return "zero_shot";
        case PromptMode::kFewShot: return "few_shot";
        case PromptMode::kInstruction: return "instruction";
    }
    return "?";
}

PromptMode prompt_mode_from_string(std::string_view s) {
    if (s == "zero_shot") return PromptMode::kZeroShot;
    if (s == "few_shot") return PromptMode::kFewShot;
    if (s == "instruction") return PromptMode::kInstruction;
    throw ParseError("unknown prompt mode \"" + std::string(s) + "\"");
}

// --- templates ---------------------------------------------------------------

std::string default_template(PromptMode mode) {
    switch (mode) {
        case PromptMode::kZeroShot:
            return "You are classifying a chapter from a scholarly document.\n"
                   "Choose the single best subject category for the text below.\n"
                   "\n"
                   "Categories:\n"
                   "{{labels}}\n"
                   "\n"
                   "{{directive}}\n"
                   "\n"
                   "Text:\n"
                   "{{text}}\n";
        case PromptMode::kFewShot:
            return "You are classifying a chapter from a scholarly document.\n"
                   "Choose the single best subject category for the text below.\n"
                   "\n"
                   "Categories:\n"
                   "{{labels}}\n"
                   "\n"
                   "{{directive}}\n"
                   "\n"
                   "Examples:\n"
                   "{{examples}}"
                   "Text:\n"
                   "{{text}}\n";
        case PromptMode::kInstruction:
            return "### Instruction:\n"
                   "Classify the text into exactly one of the categories listed below.\n"
                   "Categories:\n"
                   "{{labels}}\n"
                   "{{directive}}\n"
                   "\n"
                   "{{examples}}"
                   "### Input:\n"
                   "{{text}}\n"
                   "\n"
                   "### Response:\n";
    }
    throw ValidationError("unknown prompt mode");
}

std::string default_template_id(PromptMode mode) {
    return std::string(to_string(mode)) + ".v1";
}

std::string load_template(const std::filesystem::path& path) {
    std::string body = read_file(path);
    if (body.find("{{text}}") == std::string::npos) {
        throw ValidationError("template " + path.string() + " lacks a {{text}} placeholder");
    }
    return body;
}

namespace {

void replace_all(std::string& s, std::string_view needle, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = s.find(needle, pos)) != std::string::npos) {
        s.replace(pos, needle.size(), value);
        pos += value.size();
    }
}

std::size_t count_occurrences(std::string_view s, std::string_view needle) {
    std::size_t count = 0;
    std::size_t pos = 0;
    while ((pos = s.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

std::string render_with(const std::string& tmpl, const PromptSpec& spec,
                        const std::string& text) {
    std::string labels_block;
    for (std::size_t i = 0; i < spec.label_inventory.size(); ++i) {
        if (i > 0) labels_block.push_back('\n');
        labels_block += spec.label_inventory.at(i);
    }
    std::string examples_block;
    if (spec.mode != PromptMode::kZeroShot) {
        for (const PromptExample& ex : spec.examples) {
            examples_block += "Text: " + ex.text + "\nLabel: " + ex.label + "\n\n";
        }
    }
    std::string out = tmpl;
    replace_all(out, "{{labels}}", labels_block);
    replace_all(out, "{{directive}}", spec.response_format_directive);
    replace_all(out, "{{examples}}", examples_block);
    replace_all(out, "{{text}}", text);
    return out;
}

}  // namespace

std::string render_prompt(const PromptSpec& spec, const std::string& chapter_text) {
    if (chapter_text.empty()) throw ValidationError("render_prompt: empty chapter text");
    if (spec.mode == PromptMode::kFewShot && spec.examples.empty()) {
        throw ValidationError("few-shot prompt requires at least one example");
    }
    if (spec.max_context_tokens < 1) {
        throw ValidationError("render_prompt: max_context_tokens must be >= 1");
    }

    const std::string tmpl = spec.template_body.empty() ? default_template(spec.mode)
                                                        : spec.template_body;
    std::size_t slots = count_occurrences(tmpl, "{{text}}");
    if (slots == 0) throw ValidationError("prompt template lacks a {{text}} placeholder");

    std::size_t budget = spec.max_context_tokens * kCharsPerToken;
    std::string fixed = render_with(tmpl, spec, "");
    if (fixed.size() > budget) {
        throw ValidationError("prompt inventory/examples alone need " +
                              std::to_string(fixed.size()) + " chars, budget is " +
                              std::to_string(budget));
    }
    std::size_t room = (budget - fixed.size()) / slots;
    std::string text = chapter_text.size() > room ? chapter_text.substr(0, room) : chapter_text;
    return render_with(tmpl, spec, text);
}

std::string prompt_id(const PromptSpec& spec) {
    return spec.template_id.empty() ? default_template_id(spec.mode) : spec.template_id;
}

// --- generation ----------------------------------------------------------------

void GenerationConfig::validate() const {
    if (!(temperature > 0.0)) {
        throw ValidationError("temperature must be strictly positive (zero is rejected)");
    }
    if (max_new_tokens < 1) throw ValidationError("max_new_tokens must be >= 1");
    if (repeats < 1) throw ValidationError("repeats must be >= 1");
}

std::string HttpGenerationBackend::generate(const std::string& prompt,
                                            const GenerationConfig& cfg) {
    nlohmann::json body = {{"prompt", prompt},
                           {"temperature", cfg.temperature},
                           {"max_new_tokens", cfg.max_new_tokens}};
    nlohmann::json res = detail::post_json(endpoint_, body);
    if (!res.contains("text") || !res["text"].is_string()) {
        throw ContractError("generation response lacks a \"text\" string");
    }
    return res["text"].get<std::string>();
}

std::vector<std::string> generate(GenerationBackend& backend, const std::string& prompt,
                                  const GenerationConfig& cfg, GenerationLog* log) {
    cfg.validate();
    std::vector<std::string> responses;
    responses.reserve(static_cast<std::size_t>(cfg.repeats));
    for (int r = 0; r < cfg.repeats; ++r) {
        std::string response = backend.generate(prompt, cfg);
        if (trim(response).empty()) {
            throw ContractError("empty completion on repeat " + std::to_string(r + 1));
        }
        if (log) {
            log->push_back({iso8601_utc_now(), r + 1, prompt.size(), response.size()});
        }
        responses.push_back(std::move(response));  // verbatim, no trimming
    }
    return responses;
}

// --- response parsing -------------------------------------------------------------

namespace {

const char* kMarkerPrefixes[] = {"category:", "label:", "answer:", "classification:"};

// Surrounding quotes/punctuation stripped from parsed values.
bool is_strip_leading(char c) {
    return c == '"' || c == '\'' || c == '`' || c == '(' || c == '[' || c == '-' || c == '*';
}
bool is_strip_trailing(char c) {
    return c == '"' || c == '\'' || c == '`' || c == ')' || c == ']' || c == '.' || c == ',' ||
           c == ';' || c == ':' || c == '!' || c == '?';
}

std::string strip_unicode_quotes(std::string s) {
    // U+201C/U+201D double quotes in UTF-8.
    replace_all(s, "\xE2\x80\x9C", "\"");
    replace_all(s, "\xE2\x80\x9D", "\"");
    replace_all(s, "\xE2\x80\x98", "'");
    replace_all(s, "\xE2\x80\x99", "'");
    return s;
}

std::string strip_value(std::string_view in) {
    std::string s = strip_unicode_quotes(trim(in));
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (is_strip_leading(s[b]) || std::isspace(static_cast<unsigned char>(s[b])))) {
        ++b;
    }
    while (e > b && (is_strip_trailing(s[e - 1]) ||
                     std::isspace(static_cast<unsigned char>(s[e - 1])))) {
        --e;
    }
    return s.substr(b, e - b);
}

std::string strip_marker_prefix(std::string_view line) {
    std::string t = trim(line);
    for (const char* marker : kMarkerPrefixes) {
        if (starts_with_icase(t, marker)) return trim(t.substr(std::strlen(marker)));
    }
    return t;
}

// All case-insensitive occurrences of `needle`, skipping positions where it
// is the tail of `not_preceded_by` + needle.
std::vector<std::size_t> find_all_icase(const std::string& haystack, std::string_view needle,
                                        std::string_view not_preceded_by = {}) {
    std::vector<std::size_t> out;
    std::string lower = to_lower_ascii(haystack);
    std::string n = to_lower_ascii(needle);
    std::string pre = to_lower_ascii(not_preceded_by);
    std::size_t pos = 0;
    while ((pos = lower.find(n, pos)) != std::string::npos) {
        bool shadowed = !pre.empty() && pos >= pre.size() &&
                        lower.compare(pos - pre.size(), pre.size(), pre) == 0;
        if (!shadowed) out.push_back(pos);
        ++pos;
    }
    return out;
}

std::size_t line_end_after(const std::string& s, std::size_t pos) {
    std::size_t e = s.find_first_of("\r\n", pos);
    return e == std::string::npos ? s.size() : e;
}

std::optional<std::string> first_quoted_phrase(const std::string& raw) {
    std::string s = strip_unicode_quotes(raw);

    // LaTeX-style ``...'' pairs first, then plain double quotes.
    std::size_t open = s.find("``");
    if (open != std::string::npos) {
        std::size_t close = s.find("''", open + 2);
        if (close != std::string::npos && close > open + 2) {
            return s.substr(open + 2, close - open - 2);
        }
    }
    open = s.find('"');
    if (open != std::string::npos) {
        std::size_t close = s.find('"', open + 1);
        if (close != std::string::npos && close > open + 1) {
            return s.substr(open + 1, close - open - 1);
        }
    }
    return std::nullopt;
}

}  // namespace

ParsedLabel parse_single_label(const std::string& raw, const LabelSet& label_set) {
    if (trim(raw).empty()) throw ParseError("empty response text");

    std::vector<std::string> lines = split_lines(raw);

    // Pass 1: an exact canonical match on any line wins.
    for (const std::string& line : lines) {
        if (auto idx = label_set.index_of_canonical(trim(line))) {
            return {true, label_set.at(*idx)};
        }
        std::string stripped = strip_value(strip_marker_prefix(line));
        if (auto idx = label_set.index_of_canonical(stripped)) {
            return {true, label_set.at(*idx)};
        }
    }

    // Pass 2: first non-boilerplate line becomes free text for
    // normalization.
    for (const std::string& line : lines) {
        std::string stripped = strip_value(strip_marker_prefix(line));
        if (!stripped.empty()) return {false, stripped};
    }
    throw ParseError("response has no content lines");
}

TwoLevelLabel parse_two_level(const std::string& raw) {
    auto cat_positions = find_all_icase(raw, "category:", "sub");
    auto subcat_positions = find_all_icase(raw, "subcategory:");

    // A value runs from its marker to the end of the line, bounded by the
    // next marker on the same line. The first marker occurrence that carries
    // a nonempty value wins; responses often mention "category and
    // subcategory:" in their preamble, which must not swallow the real one.
    std::vector<std::size_t> all_markers = cat_positions;
    all_markers.insert(all_markers.end(), subcat_positions.begin(), subcat_positions.end());
    std::sort(all_markers.begin(), all_markers.end());

    auto value_at = [&](std::size_t marker_pos, std::size_t marker_len) {
        std::size_t begin = marker_pos + marker_len;
        std::size_t end = line_end_after(raw, begin);
        for (std::size_t other : all_markers) {
            if (other > marker_pos && other >= begin && other < end) {
                end = other;
                break;
            }
        }
        return strip_value(raw.substr(begin, end - begin));
    };
    auto first_nonempty = [&](const std::vector<std::size_t>& positions, std::size_t len) {
        for (std::size_t pos : positions) {
            std::string value = value_at(pos, len);
            if (!value.empty()) return value;
        }
        return std::string();
    };

    TwoLevelLabel out;
    out.category = first_nonempty(cat_positions, std::strlen("category:"));
    out.subcategory = first_nonempty(subcat_positions, std::strlen("subcategory:"));

    if (out.category.empty()) {
        if (auto quoted = first_quoted_phrase(raw)) {
            out.category = strip_value(*quoted);
            out.subcategory.clear();
        }
    }
    if (out.category.empty()) {
        std::string snippet = raw.size() > 200 ? raw.substr(0, 200) + "..." : raw;
        throw ParseError("no category marker or quoted category phrase in response: \"" +
                         snippet + "\"");
    }
    return out;
}

// --- embeddings ---------------------------------------------------------------------

EmbeddingVector TrigramEmbedder::embed(const std::string& text) {
    std::string padded = " " + canonical_key(text) + " ";
    EmbeddingVector v;
    v.provider_id = id();
    v.values.assign(kDimension, 0.0);
    if (padded.size() >= 3) {
        for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
            std::size_t idx = static_cast<std::size_t>(fnv1a64(padded.data() + i, 3)) % kDimension;
            v.values[idx] += 1.0;
        }
    }
    double norm_sq = 0.0;
    for (double x : v.values) norm_sq += x * x;
    if (norm_sq > 0.0) {
        double inv = 1.0 / std::sqrt(norm_sq);
        for (double& x : v.values) x *= inv;
    }
    return v;
}

EmbeddingVector HttpEmbeddingProvider::embed(const std::string& text) {
    nlohmann::json body = {{"texts", nlohmann::json::array({text})}};
    nlohmann::json res = detail::post_json(endpoint_, body);
    EmbeddingVector v;
    v.provider_id = id();
    try {
        auto vectors = res.at("vectors").get<std::vector<std::vector<double>>>();
        if (vectors.size() != 1) {
            throw ContractError("embedding backend returned " + std::to_string(vectors.size()) +
                                " vectors for 1 text");
        }
        v.values = std::move(vectors[0]);
    } catch (const nlohmann::json::exception& e) {
        throw ContractError("embedding response missing fields: " + std::string(e.what()));
    }
    if (v.values.empty()) throw ContractError("embedding backend returned an empty vector");
    for (double x : v.values) {
        if (!std::isfinite(x)) throw ContractError("embedding backend returned non-finite value");
    }
    return v;
}

std::string HttpEmbeddingProvider::id() const { return "http:" + endpoint_.url; }

NormalizationResult normalize_label(const std::string& free_text, const LabelSet& label_set,
                                    EmbeddingProvider& provider, double accept_threshold) {
    if (label_set.empty()) throw ValidationError("normalize_label: empty label set");
    if (trim(free_text).empty()) throw ValidationError("normalize_label: empty free text");

    EmbeddingVector query = provider.embed(free_text);
    NormalizationResult best;
    best.score = -2.0;
    for (std::size_t i = 0; i < label_set.size(); ++i) {
        EmbeddingVector cand = provider.embed(label_set.at(i));
        double sim = cosine(query, cand);
        if (sim > best.score) {
            best.score = sim;
            best.label = label_set.at(i);
        }
    }
    best.mapped = best.score >= accept_threshold;
    return best;
}

// --- instruction tuning file ------------------------------------------------------------

InstructionRecord make_instruction_record(const PromptSpec& spec, const std::string& text,
                                          const std::string& label) {
    if (label.empty()) throw ValidationError("instruction record requires a label");
    PromptSpec inst = spec;
    inst.mode = PromptMode::kInstruction;
    if (!spec.template_body.empty() && spec.mode != PromptMode::kInstruction) {
        inst.template_body.clear();  // custom template was for another mode
        inst.template_id.clear();
    }
    return {render_prompt(inst, text), label};
}

std::string serialize_instruction_records(const std::vector<InstructionRecord>& records) {
    std::string out;
    for (const InstructionRecord& r : records) {
        nlohmann::ordered_json j = {{"prompt", r.prompt}, {"response", r.response}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace chapterkit
