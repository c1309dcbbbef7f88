#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chapterkit/classifier.hpp"
#include "chapterkit/layout.hpp"
#include "chapterkit/llm.hpp"

namespace chapterkit {

// Minimal TOML-style reader: [section] headers, key = value with string,
// integer, float, boolean and string-array values, '#' comments. Keys are
// addressed as "section.key".
class ConfigFile {
public:
    static ConfigFile parse(std::string_view content, const std::string& origin);
    static ConfigFile load(const std::filesystem::path& path);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_string_array(const std::string& key,
                                              std::vector<std::string> fallback) const;

private:
    std::map<std::string, std::string> scalars_;
    std::map<std::string, std::vector<std::string>> arrays_;
    std::string origin_;
};

struct PipelinePaths {
    std::filesystem::path corpus_manifest;
    std::filesystem::path taxonomy;
    std::filesystem::path alias_file;
    std::filesystem::path ocr_dir;
    std::filesystem::path layout_dir;
    std::filesystem::path manifest_dir;
    std::filesystem::path output_dir;
};

struct PromptConfig {
    PromptMode mode = PromptMode::kZeroShot;
    std::string template_id;
    std::filesystem::path template_dir;  // empty -> built-in templates
    std::size_t max_context_tokens = 4096;
    // Few-shot/instruction example selection: per class, the first
    // examples_per_class training documents in doc-id order contribute the
    // head of their first chapter.
    int examples_per_class = 1;
    std::size_t example_excerpt_chars = 400;
    GenerationConfig generation;
};

struct BackendConfig {
    std::string generation_endpoint;
    std::string embedding_endpoint;  // empty -> local trigram provider
    std::string scorer_endpoint;
    std::string generation_model_id = "generation-backend";
    int timeout_ms = 30000;
    int max_retries = 3;
};

struct ClassifierConfig {
    TrainConfig train;
    std::size_t min_df = 1;
    std::size_t max_features = 50000;
    std::size_t top_k = 3;
    double train_fraction = 0.8;
};

struct PipelineConfig {
    PipelinePaths paths;
    FilterPolicy filter;
    ClassifierConfig classifier;
    PromptConfig prompt;
    BackendConfig backends;
    double normalize_threshold = 0.6;
    std::uint64_t seed = 42;
    int jobs = 1;

    // Endpoint overrides come from CHAPTERKIT_GENERATION_ENDPOINT,
    // CHAPTERKIT_EMBEDDING_ENDPOINT and CHAPTERKIT_SCORER_ENDPOINT; the
    // bearer token only ever comes from CHAPTERKIT_API_TOKEN.
    static PipelineConfig load(const std::filesystem::path& path);

    // Fails with ConfigError when a required input path is missing.
    void require_paths(const std::vector<std::string>& names) const;
};

}  // namespace chapterkit
