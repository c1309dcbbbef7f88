#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chapterkit/classifier.hpp"
#include "chapterkit/corpus.hpp"

namespace chapterkit {

enum class PromptMode { kZeroShot, kFewShot, kInstruction };

std::string_view to_string(PromptMode m);
PromptMode prompt_mode_from_string(std::string_view s);

struct PromptExample {
    std::string text;
    std::string label;
};

// Token budget is estimated at 4 characters per token; no tokenizer is in
// scope.
inline constexpr std::size_t kCharsPerToken = 4;

struct PromptSpec {
    PromptMode mode = PromptMode::kZeroShot;
    LabelSet label_inventory;
    std::vector<PromptExample> examples;  // required nonempty for few-shot
    std::size_t max_context_tokens = 4096;
    std::string response_format_directive = "Respond with exactly one label from the list.";
    std::string template_id;    // empty -> default id for mode
    std::string template_body;  // empty -> built-in template for mode
};

// Built-in template bodies and their ids ("zero_shot.v1", ...). Templates
// use {{labels}}, {{examples}}, {{text}} and {{directive}} placeholders.
std::string default_template(PromptMode mode);
std::string default_template_id(PromptMode mode);
std::string load_template(const std::filesystem::path& path);

// Deterministic render: inventory one label per line, the format directive,
// examples (few-shot/instruction), then the chapter text truncated from the
// end until the whole prompt fits max_context_tokens * 4 characters. Throws
// ValidationError when the fixed parts alone exceed the budget.
std::string render_prompt(const PromptSpec& spec, const std::string& chapter_text);

// Template id actually used by render_prompt for this spec.
std::string prompt_id(const PromptSpec& spec);

struct GenerationConfig {
    double temperature = 0.001;  // strictly positive; zero is rejected
    int max_new_tokens = 256;
    int repeats = 1;  // runs per prompt, for variance estimation

    void validate() const;
};

class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    virtual std::string generate(const std::string& prompt, const GenerationConfig& cfg) = 0;
};

// HTTP POST {"prompt","temperature","max_new_tokens"} -> {"text"}.
class HttpGenerationBackend : public GenerationBackend {
public:
    explicit HttpGenerationBackend(EndpointConfig endpoint) : endpoint_(std::move(endpoint)) {}
    std::string generate(const std::string& prompt, const GenerationConfig& cfg) override;

private:
    EndpointConfig endpoint_;
};

// Test-double backend driven by a callback.
class CallbackGenerationBackend : public GenerationBackend {
public:
    using Fn = std::function<std::string(const std::string&, const GenerationConfig&)>;
    explicit CallbackGenerationBackend(Fn fn) : fn_(std::move(fn)) {}
    std::string generate(const std::string& prompt, const GenerationConfig& cfg) override {
        return fn_(prompt, cfg);
    }

private:
    Fn fn_;
};

struct GenerationLogEntry {
    std::string timestamp;  // ISO-8601 UTC
    int repeat = 0;
    std::size_t prompt_chars = 0;
    std::size_t response_chars = 0;
};

using GenerationLog = std::vector<GenerationLogEntry>;

// cfg.repeats raw responses, recorded verbatim. Transport failures are
// retried inside the backend; an empty completion is a ContractError.
std::vector<std::string> generate(GenerationBackend& backend, const std::string& prompt,
                                  const GenerationConfig& cfg, GenerationLog* log = nullptr);

struct ParsedLabel {
    bool canonical = false;
    std::string value;  // canonical label, or free text for normalization
};

// Exact canonical match (case/whitespace-insensitive) on any line wins;
// otherwise the first non-boilerplate line, stripped of marker prefixes,
// quotes and trailing punctuation, is returned as free text. Never guesses
// silently.
ParsedLabel parse_single_label(const std::string& raw, const LabelSet& label_set);

struct TwoLevelLabel {
    std::string category;
    std::string subcategory;
    std::optional<CategoryPath> canonical_category;
    std::optional<double> match_score;  // in [-1,1], present iff mapping attempted
};

// Scans for the first "Category:" and "Subcategory:" markers
// (case-insensitive); a value runs to the end of its line or the next
// marker, trimmed of surrounding quotes and punctuation. Without markers,
// falls back to the first quoted phrase as the category. Missing
// subcategory yields "".
TwoLevelLabel parse_two_level(const std::string& raw);

struct EmbeddingVector {
    std::vector<double> values;
    std::string provider_id;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual EmbeddingVector embed(const std::string& text) = 0;
    virtual std::string id() const = 0;
};

// Deterministic local provider: L2-normalized counts of FNV-1a-hashed
// character trigrams over the canonical-key form of the text, dimension
// 1024. Lets the whole pipeline run with no network.
class TrigramEmbedder : public EmbeddingProvider {
public:
    static constexpr std::size_t kDimension = 1024;
    EmbeddingVector embed(const std::string& text) override;
    std::string id() const override { return "trigram-fnv1a/1024"; }
};

// HTTP POST {"texts":[...]} -> {"vectors":[[...]]}.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(EndpointConfig endpoint) : endpoint_(std::move(endpoint)) {}
    EmbeddingVector embed(const std::string& text) override;
    std::string id() const override;

private:
    EndpointConfig endpoint_;
};

struct NormalizationResult {
    bool mapped = false;
    std::string label;   // argmax-cosine candidate, mapped or not
    double score = 0.0;  // its cosine
};

// Maps free text onto the canonical inventory by maximum embedding cosine;
// below accept_threshold the result is unmapped with the best candidate
// attached for human review.
NormalizationResult normalize_label(const std::string& free_text, const LabelSet& label_set,
                                    EmbeddingProvider& provider, double accept_threshold = 0.6);

// Instruction-format tuning records: the rendered instruction prompt paired
// with the expected label, one JSON object per line. Emitted only; training
// is out of scope.
struct InstructionRecord {
    std::string prompt;
    std::string response;
};

InstructionRecord make_instruction_record(const PromptSpec& spec, const std::string& text,
                                          const std::string& label);
std::string serialize_instruction_records(const std::vector<InstructionRecord>& records);

}  // namespace chapterkit
