#include "chapterkit/config.hpp"

#include <charconv>
#include <cstdlib>

#include "chapterkit/errors.hpp"
#include "chapterkit/io.hpp"
#include "chapterkit/text.hpp"

namespace chapterkit {

namespace {

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == quote) {
                in_string = false;
            }
        } else if (c == '"' || c == '\'') {
            in_string = true;
            quote = c;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

std::string unescape_string(const std::string& s, const std::string& origin, std::size_t lineno) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\') {
            out.push_back(s[i]);
            continue;
        }
        if (++i == s.size()) throw ParseError(origin, lineno, "dangling escape");
        switch (s[i]) {
            case 'n': out.push_back('\n'); break;
            case 't': out.push_back('\t'); break;
            case 'r': out.push_back('\r'); break;
            case '"': out.push_back('"'); break;
            case '\\': out.push_back('\\'); break;
            default:
                throw ParseError(origin, lineno, std::string("unknown escape \\") + s[i]);
        }
    }
    return out;
}

std::string parse_scalar(const std::string& value, const std::string& origin,
                         std::size_t lineno) {
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
        return unescape_string(value.substr(1, value.size() - 2), origin, lineno);
    }
    if (value.size() >= 2 && value.front() == '\'' && value.back() == '\'') {
        return value.substr(1, value.size() - 2);
    }
    return value;  // bare number / bool token
}

}  // namespace

ConfigFile ConfigFile::parse(std::string_view content, const std::string& origin) {
    ConfigFile cfg;
    cfg.origin_ = origin;
    std::string section;
    std::size_t lineno = 0;
    for (const std::string& raw : split_lines(content)) {
        ++lineno;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(origin, lineno, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ParseError(origin, lineno, "empty section name");
            continue;
        }

        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(origin, lineno, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError(origin, lineno, "empty key");
        std::string full = section.empty() ? key : section + "." + key;

        if (!value.empty() && value.front() == '[') {
            if (value.back() != ']') throw ParseError(origin, lineno, "unterminated array");
            std::string inner = trim(value.substr(1, value.size() - 2));
            std::vector<std::string> items;
            if (!inner.empty()) {
                std::size_t start = 0;
                bool in_string = false;
                char quote = 0;
                for (std::size_t i = 0; i <= inner.size(); ++i) {
                    if (i < inner.size() && in_string) {
                        if (inner[i] == '\\') ++i;
                        else if (inner[i] == quote) in_string = false;
                        continue;
                    }
                    if (i < inner.size() && (inner[i] == '"' || inner[i] == '\'')) {
                        in_string = true;
                        quote = inner[i];
                        continue;
                    }
                    if (i == inner.size() || inner[i] == ',') {
                        std::string item = trim(inner.substr(start, i - start));
                        if (item.empty()) throw ParseError(origin, lineno, "empty array element");
                        items.push_back(parse_scalar(item, origin, lineno));
                        start = i + 1;
                    }
                }
                if (in_string) throw ParseError(origin, lineno, "unterminated string in array");
            }
            cfg.arrays_[full] = std::move(items);
        } else {
            if (value.empty()) throw ParseError(origin, lineno, "empty value");
            cfg.scalars_[full] = parse_scalar(value, origin, lineno);
        }
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    return parse(read_file(path), path.string());
}

bool ConfigFile::has(const std::string& key) const {
    return scalars_.count(key) > 0 || arrays_.count(key) > 0;
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
    auto it = scalars_.find(key);
    return it == scalars_.end() ? fallback : it->second;
}

std::int64_t ConfigFile::get_int(const std::string& key, std::int64_t fallback) const {
    auto it = scalars_.find(key);
    if (it == scalars_.end()) return fallback;
    std::int64_t v = 0;
    const std::string& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError(origin_ + ": key \"" + key + "\" is not an integer: \"" + s + "\"");
    }
    return v;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
    auto it = scalars_.find(key);
    if (it == scalars_.end()) return fallback;
    try {
        std::size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ": key \"" + key + "\" is not a number: \"" + it->second +
                          "\"");
    }
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
    auto it = scalars_.find(key);
    if (it == scalars_.end()) return fallback;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw ConfigError(origin_ + ": key \"" + key + "\" is not a boolean: \"" + it->second + "\"");
}

std::vector<std::string> ConfigFile::get_string_array(const std::string& key,
                                                      std::vector<std::string> fallback) const {
    auto it = arrays_.find(key);
    return it == arrays_.end() ? fallback : it->second;
}

// --- PipelineConfig ------------------------------------------------------------

namespace {

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : fallback;
}

}  // namespace

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    ConfigFile f = ConfigFile::load(path);
    PipelineConfig cfg;
    std::filesystem::path base = path.has_parent_path() ? path.parent_path()
                                                        : std::filesystem::path(".");
    auto resolve = [&](const std::string& key) -> std::filesystem::path {
        std::string v = f.get_string(key, "");
        if (v.empty()) return {};
        std::filesystem::path p(v);
        return p.is_absolute() ? p : base / p;
    };

    cfg.paths.corpus_manifest = resolve("paths.corpus_manifest");
    cfg.paths.taxonomy = resolve("paths.taxonomy");
    cfg.paths.alias_file = resolve("paths.alias_file");
    cfg.paths.ocr_dir = resolve("paths.ocr_dir");
    cfg.paths.layout_dir = resolve("paths.layout_dir");
    cfg.paths.manifest_dir = resolve("paths.manifest_dir");
    cfg.paths.output_dir = resolve("paths.output_dir");

    cfg.filter.containment_threshold = f.get_double("filter.containment_threshold", 0.5);
    if (f.has("filter.drop_labels")) {
        cfg.filter.drop_labels.clear();
        for (const std::string& name : f.get_string_array("filter.drop_labels", {})) {
            try {
                cfg.filter.drop_labels.insert(region_label_from_string(name));
            } catch (const ParseError& e) {
                throw ConfigError(std::string("filter.drop_labels: ") + e.what());
            }
        }
    }
    cfg.filter.validate();

    cfg.classifier.train.epochs = static_cast<int>(f.get_int("classifier.epochs", 10));
    cfg.classifier.train.learning_rate = f.get_double("classifier.learning_rate", 0.1);
    cfg.classifier.train.lambda = f.get_double("classifier.lambda", 1e-4);
    cfg.classifier.min_df = static_cast<std::size_t>(f.get_int("classifier.min_df", 1));
    cfg.classifier.max_features =
        static_cast<std::size_t>(f.get_int("classifier.max_features", 50000));
    cfg.classifier.top_k = static_cast<std::size_t>(f.get_int("classifier.top_k", 3));
    cfg.classifier.train_fraction = f.get_double("classifier.train_fraction", 0.8);

    try {
        cfg.prompt.mode = prompt_mode_from_string(f.get_string("prompt.mode", "zero_shot"));
    } catch (const ParseError& e) {
        throw ConfigError(std::string("prompt.mode: ") + e.what());
    }
    cfg.prompt.template_id = f.get_string("prompt.template_id", "");
    std::string tdir = f.get_string("prompt.template_dir", "");
    if (!tdir.empty()) {
        std::filesystem::path p(tdir);
        cfg.prompt.template_dir = p.is_absolute() ? p : base / p;
    }
    cfg.prompt.max_context_tokens =
        static_cast<std::size_t>(f.get_int("prompt.max_context_tokens", 4096));
    cfg.prompt.examples_per_class = static_cast<int>(f.get_int("prompt.examples_per_class", 1));
    cfg.prompt.example_excerpt_chars =
        static_cast<std::size_t>(f.get_int("prompt.example_excerpt_chars", 400));
    cfg.prompt.generation.temperature = f.get_double("prompt.temperature", 0.001);
    cfg.prompt.generation.max_new_tokens =
        static_cast<int>(f.get_int("prompt.max_new_tokens", 256));
    cfg.prompt.generation.repeats = static_cast<int>(f.get_int("prompt.repeats", 1));
    cfg.prompt.generation.validate();

    cfg.backends.generation_endpoint = env_or(
        "CHAPTERKIT_GENERATION_ENDPOINT", f.get_string("backends.generation_endpoint", ""));
    cfg.backends.embedding_endpoint = env_or(
        "CHAPTERKIT_EMBEDDING_ENDPOINT", f.get_string("backends.embedding_endpoint", ""));
    cfg.backends.scorer_endpoint =
        env_or("CHAPTERKIT_SCORER_ENDPOINT", f.get_string("backends.scorer_endpoint", ""));
    cfg.backends.generation_model_id =
        f.get_string("backends.generation_model_id", "generation-backend");
    cfg.backends.timeout_ms = static_cast<int>(f.get_int("backends.timeout_ms", 30000));
    cfg.backends.max_retries = static_cast<int>(f.get_int("backends.max_retries", 3));

    cfg.normalize_threshold = f.get_double("evaluate.normalize_threshold", 0.6);
    cfg.seed = static_cast<std::uint64_t>(f.get_int("run.seed", 42));
    cfg.jobs = static_cast<int>(f.get_int("run.jobs", 1));
    if (cfg.jobs < 1) throw ConfigError("run.jobs must be >= 1");
    return cfg;
}

void PipelineConfig::require_paths(const std::vector<std::string>& names) const {
    auto check = [](const std::filesystem::path& p, const std::string& name) {
        if (p.empty()) {
            throw ConfigError("config key paths." + name + " is required for this command");
        }
        if (!std::filesystem::exists(p)) {
            throw ConfigError("paths." + name + " does not exist: " + p.string());
        }
    };
    for (const std::string& name : names) {
        if (name == "corpus_manifest") check(paths.corpus_manifest, name);
        else if (name == "taxonomy") check(paths.taxonomy, name);
        else if (name == "alias_file") check(paths.alias_file, name);
        else if (name == "ocr_dir") check(paths.ocr_dir, name);
        else if (name == "layout_dir") check(paths.layout_dir, name);
        else if (name == "manifest_dir") check(paths.manifest_dir, name);
        else if (name == "output_dir") {
            if (paths.output_dir.empty()) {
                throw ConfigError("config key paths.output_dir is required");
            }
        } else {
            throw ConfigError("unknown required path \"" + name + "\"");
        }
    }
}

}  // namespace chapterkit
