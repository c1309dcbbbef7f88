// chapterkit command-line pipeline: segment, extract, train, classify,
// prompt, evaluate, report. See README.md for the file formats and a
// worked example.
//
// Exit codes: 0 success, 1 validation/data failure, 2 configuration error,
// 3 backend or transport failure.

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "chapterkit/classifier.hpp"
#include "chapterkit/config.hpp"
#include "chapterkit/corpus.hpp"
#include "chapterkit/errors.hpp"
#include "chapterkit/eval.hpp"
#include "chapterkit/io.hpp"
#include "chapterkit/layout.hpp"
#include "chapterkit/llm.hpp"
#include "chapterkit/segmenter.hpp"
#include "chapterkit/text.hpp"

namespace fs = std::filesystem;
using namespace chapterkit;
using nlohmann::ordered_json;

namespace {

// --- shared plumbing ---------------------------------------------------------

struct RunLog {
    explicit RunLog(const fs::path& output_dir) {
        fs::create_directories(output_dir);
        stream.open(output_dir / "run.log", std::ios::app);
    }
    void line(const std::string& msg) {
        std::lock_guard<std::mutex> lock(mu);
        stream << iso8601_utc_now() << " " << msg << "\n";
        stream.flush();
    }
    std::ofstream stream;
    std::mutex mu;
};

template <typename T, typename Fn>
void parallel_for(const std::vector<T>& items, int jobs, Fn fn) {
    if (jobs <= 1 || items.size() <= 1) {
        for (std::size_t i = 0; i < items.size(); ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= items.size()) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    int n = std::min<int>(jobs, static_cast<int>(items.size()));
    threads.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::vector<DocumentRecord> load_docs(const PipelineConfig& cfg) {
    // <doc_id>.dims files sit next to the manifest.
    return load_corpus_manifest(cfg.paths.corpus_manifest,
                                cfg.paths.corpus_manifest.parent_path());
}

struct TruthContext {
    Taxonomy taxonomy;
    AliasTable aliases;

    std::string label_of(const DocumentRecord& doc) const {
        auto it = doc.metadata.find("department");
        if (it == doc.metadata.end()) {
            throw ValidationError("document " + doc.doc_id + " has no department metadata");
        }
        return map_department(it->second, taxonomy, aliases).level3;
    }
};

TruthContext load_truth(const PipelineConfig& cfg) {
    cfg.require_paths({"taxonomy", "alias_file"});
    Taxonomy taxonomy = Taxonomy::load(cfg.paths.taxonomy);
    AliasTable aliases = AliasTable::load(cfg.paths.alias_file, taxonomy);
    return {std::move(taxonomy), std::move(aliases)};
}

SegmentManifest load_doc_manifest(const PipelineConfig& cfg, const DocumentRecord& doc) {
    fs::path path = cfg.paths.manifest_dir / (doc.doc_id + ".csv");
    auto manifests = load_segment_manifests(path);
    for (SegmentManifest& m : manifests) {
        if (m.doc_id == doc.doc_id) return std::move(m);
    }
    throw ValidationError("manifest file " + path.string() + " has no rows for " + doc.doc_id);
}

fs::path text_dir(const PipelineConfig& cfg) { return cfg.paths.output_dir / "text"; }

struct ChapterText {
    std::string doc_id;
    std::string segment;  // "chapter3", "front", ...
    std::string text;
};

// Sort key for segment labels: front, chapter1..chapterN, references,
// appendix.
int segment_rank(const SegmentLabel& label) {
    switch (label.kind) {
        case SegmentKind::kFront: return 0;
        case SegmentKind::kChapter: return label.chapter_index;
        case SegmentKind::kReferences: return 1 << 20;
        case SegmentKind::kAppendix: return (1 << 20) + 1;
    }
    return 0;
}

// Extracted segment files for one document, in segment order. chapters_only
// keeps the subject-bearing chapter segments.
std::vector<ChapterText> segments_of(const PipelineConfig& cfg, const std::string& doc_id,
                                     bool chapters_only) {
    fs::path dir = text_dir(cfg);
    if (!fs::exists(dir)) {
        throw ValidationError("text directory " + dir.string() + " missing; run extract first");
    }
    std::vector<std::pair<int, std::pair<std::string, fs::path>>> found;
    std::string prefix = doc_id + ".";
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::string name = entry.path().filename().string();
        if (name.rfind(prefix, 0) != 0 || entry.path().extension() != ".txt") continue;
        std::string label_text = name.substr(prefix.size(), name.size() - prefix.size() - 4);
        SegmentLabel label = SegmentLabel::parse(label_text);
        if (chapters_only && label.kind != SegmentKind::kChapter) continue;
        found.push_back({segment_rank(label), {label.to_string(), entry.path()}});
    }
    std::sort(found.begin(), found.end());
    std::vector<ChapterText> out;
    for (const auto& [rank, named] : found) {
        out.push_back({doc_id, named.first, read_file(named.second)});
    }
    return out;
}

std::vector<ChapterText> chapters_of(const PipelineConfig& cfg, const std::string& doc_id) {
    return segments_of(cfg, doc_id, true);
}

std::string sanitize_filename(const std::string& s) {
    std::string out;
    for (char c : s) {
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    }
    return out;
}

EndpointConfig make_endpoint(const PipelineConfig& cfg, const std::string& url) {
    EndpointConfig e;
    e.url = url;
    e.timeout_ms = cfg.backends.timeout_ms;
    e.max_retries = cfg.backends.max_retries;
    if (const char* token = std::getenv("CHAPTERKIT_API_TOKEN")) e.bearer_token = token;
    return e;
}

LabelSet classification_labels(const PipelineConfig& cfg, const TruthContext& truth) {
    fs::path model_path = cfg.paths.output_dir / "model.json";
    if (fs::exists(model_path)) return load_model(model_path).model.label_set;
    std::vector<std::string> names;
    for (const auto& leaf : truth.taxonomy.leaves()) names.push_back(leaf.level3);
    std::sort(names.begin(), names.end());
    return LabelSet(names);
}

std::set<std::string> read_split_docs(const PipelineConfig& cfg, const std::string& which) {
    fs::path path = cfg.paths.output_dir / ("split_" + which + ".csv");
    if (!fs::exists(path)) {
        throw ConfigError("split file " + path.string() + " missing; run train first");
    }
    std::set<std::string> ids;
    auto rows = parse_csv(read_file(path), path.string());
    for (std::size_t i = 1; i < rows.size(); ++i) ids.insert(rows[i][0]);
    return ids;
}

PromptSpec prompt_spec_for(const PipelineConfig& cfg, const LabelSet& labels) {
    PromptSpec spec;
    spec.mode = cfg.prompt.mode;
    spec.label_inventory = labels;
    spec.max_context_tokens = cfg.prompt.max_context_tokens;
    if (!cfg.prompt.template_dir.empty()) {
        std::string id = cfg.prompt.template_id.empty() ? default_template_id(cfg.prompt.mode)
                                                        : cfg.prompt.template_id;
        spec.template_body = load_template(cfg.prompt.template_dir / (id + ".tmpl"));
        spec.template_id = id;
    } else if (!cfg.prompt.template_id.empty()) {
        spec.template_id = cfg.prompt.template_id;
    }
    return spec;
}

// Few-shot/instruction examples: per class in label order, the first
// examples_per_class training documents in doc-id order contribute the head
// of their first chapter. Deterministic by construction.
void populate_examples(const PipelineConfig& cfg, const TruthContext& truth,
                       const std::vector<DocumentRecord>& docs, PromptSpec& spec) {
    if (spec.mode == PromptMode::kZeroShot || cfg.prompt.examples_per_class < 1) return;

    std::set<std::string> train_ids;
    fs::path split_path = cfg.paths.output_dir / "split_train.csv";
    if (fs::exists(split_path)) train_ids = read_split_docs(cfg, "train");

    std::map<std::string, std::vector<std::string>> docs_by_label;
    for (const DocumentRecord& doc : docs) {
        if (!train_ids.empty() && !train_ids.count(doc.doc_id)) continue;
        docs_by_label[truth.label_of(doc)].push_back(doc.doc_id);
    }
    for (auto& [label, ids] : docs_by_label) {
        std::sort(ids.begin(), ids.end());
        int taken = 0;
        for (const std::string& id : ids) {
            if (taken == cfg.prompt.examples_per_class) break;
            auto chapters = chapters_of(cfg, id);
            if (chapters.empty()) continue;
            std::string excerpt = chapters.front().text.substr(
                0, std::min(cfg.prompt.example_excerpt_chars, chapters.front().text.size()));
            spec.examples.push_back({collapse_whitespace(excerpt), label});
            ++taken;
        }
    }
}

// --- segment ----------------------------------------------------------------

int cmd_segment(const PipelineConfig& cfg) {
    cfg.require_paths({"corpus_manifest", "ocr_dir", "output_dir"});
    auto docs = load_docs(cfg);
    RunLog log(cfg.paths.output_dir);

    struct DocResult {
        std::string doc_id;
        std::vector<int> detected_starts;
        bool manifest_present = false;
        bool manifest_valid = false;
        std::string error;
    };
    std::vector<DocResult> results(docs.size());

    parallel_for(docs, cfg.jobs, [&](std::size_t i) {
        const DocumentRecord& doc = docs[i];
        DocResult& r = results[i];
        r.doc_id = doc.doc_id;

        auto blocks = parse_ocr_dump(cfg.paths.ocr_dir / (doc.doc_id + ".json"));
        auto pages = assemble_pages(blocks, doc.page_count);
        r.detected_starts = detect_chapter_starts(pages);
        SegmentManifest detected = resolve_manifest(doc, pages, std::nullopt);
        write_file_atomic(cfg.paths.output_dir / "detected" / (doc.doc_id + ".csv"),
                          serialize_segment_manifests({detected}));

        if (!cfg.paths.manifest_dir.empty()) {
            fs::path manifest_path = cfg.paths.manifest_dir / (doc.doc_id + ".csv");
            if (fs::exists(manifest_path)) {
                r.manifest_present = true;
                try {
                    SegmentManifest manual = load_doc_manifest(cfg, doc);
                    manual.validate(doc.page_count);
                    r.manifest_valid = true;
                } catch (const Error& e) {
                    r.error = e.what();
                }
            }
        }
        log.line("segment " + doc.doc_id + " starts=" + std::to_string(r.detected_starts.size()));
    });

    ordered_json report;
    report["documents"] = ordered_json::array();
    std::size_t n_valid = 0, n_invalid = 0;
    for (const DocResult& r : results) {
        ordered_json d;
        d["doc_id"] = r.doc_id;
        d["detected_chapter_starts"] = r.detected_starts;
        d["manifest_present"] = r.manifest_present;
        d["manifest_valid"] = r.manifest_valid;
        d["error"] = r.error;
        report["documents"].push_back(d);
        if (r.manifest_present) ++(r.manifest_valid ? n_valid : n_invalid);
    }
    report["n_documents"] = results.size();
    report["n_manifests_valid"] = n_valid;
    report["n_manifests_invalid"] = n_invalid;
    report["seed"] = cfg.seed;
    write_file_atomic(cfg.paths.output_dir / "segment_report.json", report.dump(2) + "\n");

    for (const DocResult& r : results) {
        std::cout << r.doc_id << ": detected " << r.detected_starts.size() << " chapter start(s)";
        if (r.manifest_present) {
            std::cout << ", manifest " << (r.manifest_valid ? "valid" : "INVALID");
            if (!r.error.empty()) std::cout << " (" << r.error << ")";
        }
        std::cout << "\n";
    }
    std::cout << "segment: " << results.size() << " document(s), " << n_invalid
              << " invalid manifest(s)\n";
    return n_invalid == 0 ? 0 : 1;
}

// --- extract ----------------------------------------------------------------

int cmd_extract(const PipelineConfig& cfg) {
    cfg.require_paths({"corpus_manifest", "ocr_dir", "layout_dir", "manifest_dir", "output_dir"});
    auto docs = load_docs(cfg);
    RunLog log(cfg.paths.output_dir);

    struct DocStats {
        std::string doc_id;
        FilterStats filter;
        std::size_t segments = 0;
    };
    std::vector<DocStats> stats(docs.size());

    parallel_for(docs, cfg.jobs, [&](std::size_t i) {
        const DocumentRecord& doc = docs[i];
        auto blocks = parse_ocr_dump(cfg.paths.ocr_dir / (doc.doc_id + ".json"));
        auto regions = parse_layout_file(cfg.paths.layout_dir / (doc.doc_id + ".layout"));
        SegmentManifest manifest = load_doc_manifest(cfg, doc);

        auto kept = filter_blocks(blocks, regions, doc.page_dims, cfg.filter, &stats[i].filter);
        auto pages = assemble_pages(kept, doc.page_count);
        auto segments = apply_manifest(doc, manifest, pages);
        for (const Segment& s : segments) {
            fs::path out = text_dir(cfg) / (doc.doc_id + "." + s.label.to_string() + ".txt");
            write_file_atomic(out, s.text + "\n");
        }
        stats[i].doc_id = doc.doc_id;
        stats[i].segments = segments.size();
        log.line("extract " + doc.doc_id + " segments=" + std::to_string(segments.size()));
    });

    ordered_json report;
    report["documents"] = ordered_json::array();
    std::map<std::string, std::size_t> total_dropped;
    for (const DocStats& s : stats) {
        ordered_json d;
        d["doc_id"] = s.doc_id;
        d["segments"] = s.segments;
        ordered_json dropped;
        for (const auto& [label, count] : s.filter.dropped_lines_by_label) {
            dropped[std::string(to_string(label))] = count;
            total_dropped[std::string(to_string(label))] += count;
        }
        d["dropped_lines_by_label"] = dropped;
        d["clamped_regions"] = s.filter.clamped_regions;
        report["documents"].push_back(d);
    }
    ordered_json totals;
    for (const auto& [label, count] : total_dropped) totals[label] = count;
    report["total_dropped_lines_by_label"] = totals;
    report["seed"] = cfg.seed;
    write_file_atomic(cfg.paths.output_dir / "extract_log.json", report.dump(2) + "\n");

    std::cout << "extract: " << docs.size() << " document(s) into " << text_dir(cfg).string()
              << "\n";
    return 0;
}

// --- train -------------------------------------------------------------------

int cmd_train(const PipelineConfig& cfg, bool use_all) {
    cfg.require_paths({"corpus_manifest", "taxonomy", "alias_file", "output_dir"});
    auto docs = load_docs(cfg);
    TruthContext truth = load_truth(cfg);
    RunLog log(cfg.paths.output_dir);

    std::vector<LabeledDoc> records;
    for (const DocumentRecord& doc : docs) records.emplace_back(doc.doc_id, truth.label_of(doc));

    std::vector<LabeledDoc> train_docs, test_docs;
    if (use_all || cfg.classifier.train_fraction >= 1.0) {
        train_docs = records;
    } else {
        SplitResult split = stratified_split(records, cfg.classifier.train_fraction, cfg.seed);
        train_docs = std::move(split.train);
        test_docs = std::move(split.test);
    }
    auto serialize_split = [](const std::vector<LabeledDoc>& rows) {
        std::string out = "doc_id,label\n";
        for (const auto& [id, label] : rows) {
            out += csv_escape(id) + "," + csv_escape(label) + "\n";
        }
        return out;
    };
    write_file_atomic(cfg.paths.output_dir / "split_train.csv", serialize_split(train_docs));
    write_file_atomic(cfg.paths.output_dir / "split_test.csv", serialize_split(test_docs));

    std::vector<std::string> texts;
    std::vector<std::string> labels;
    for (const auto& [doc_id, label] : train_docs) {
        for (const ChapterText& ch : chapters_of(cfg, doc_id)) {
            texts.push_back(ch.text);
            labels.push_back(label);
        }
    }
    if (texts.empty()) throw ValidationError("no chapter texts found for training");

    std::set<std::string> observed(labels.begin(), labels.end());
    LabelSet label_set(std::vector<std::string>(observed.begin(), observed.end()));

    Vocabulary vocab = Vocabulary::build(texts, cfg.classifier.min_df, cfg.classifier.max_features);
    std::vector<SparseVector> features;
    features.reserve(texts.size());
    for (const std::string& t : texts) features.push_back(featurize(t, vocab));

    TrainConfig tc = cfg.classifier.train;
    tc.seed = cfg.seed;
    ModelBundle bundle;
    bundle.model = train_linear_ovr(features, labels, label_set, tc);
    bundle.vocab = std::move(vocab);
    save_model(cfg.paths.output_dir / "model.json", bundle);
    log.line("train chapters=" + std::to_string(texts.size()) +
             " classes=" + std::to_string(label_set.size()));

    std::cout << "train: " << texts.size() << " chapter(s), " << label_set.size()
              << " class(es), vocabulary " << bundle.vocab.size() << ", model written to "
              << (cfg.paths.output_dir / "model.json").string() << "\n";
    return 0;
}

// --- classify ----------------------------------------------------------------

ordered_json prediction_record(const std::string& doc_id, const std::string& segment,
                               const Prediction& pred, const std::string& prompt_id,
                               const std::string& model_id) {
    ordered_json labels = ordered_json::array();
    if (pred.kind == PredictionKind::kSingle) {
        labels.push_back({{"label", pred.label}, {"score", pred.score}});
    } else if (pred.kind == PredictionKind::kTopK) {
        for (const ScoredLabel& sl : pred.topk) {
            labels.push_back({{"label", sl.label}, {"score", sl.score}});
        }
    }
    ordered_json record;
    record["doc_id"] = doc_id;
    record["segment"] = segment;
    record["kind"] = pred.kind == PredictionKind::kSingle  ? "single"
                     : pred.kind == PredictionKind::kTopK ? "topk"
                                                          : "two_level";
    record["labels"] = labels;
    record["category"] = pred.category;
    record["subcategory"] = pred.subcategory;
    record["prompt_id"] = prompt_id;
    record["model_id"] = model_id;
    return record;
}

int cmd_classify(const PipelineConfig& cfg, const std::string& kind, const std::string& backend,
                 const std::string& split, bool with_scores, bool all_segments) {
    cfg.require_paths({"corpus_manifest", "taxonomy", "alias_file", "output_dir"});
    auto docs = load_docs(cfg);
    TruthContext truth = load_truth(cfg);
    RunLog log(cfg.paths.output_dir);

    std::optional<std::set<std::string>> wanted;
    if (split != "all") wanted = read_split_docs(cfg, split);

    std::vector<ChapterText> chapters;
    for (const DocumentRecord& doc : docs) {
        if (wanted && !wanted->count(doc.doc_id)) continue;
        for (ChapterText& ch : segments_of(cfg, doc.doc_id, !all_segments)) {
            chapters.push_back(std::move(ch));
        }
    }
    if (chapters.empty()) throw ValidationError("no chapter texts to classify");

    std::vector<ordered_json> records(chapters.size());
    std::string model_id;
    std::string used_prompt_id;
    LabelSet label_set;

    if (kind == "two_level") {
        if (cfg.backends.generation_endpoint.empty()) {
            throw ConfigError("backends.generation_endpoint required for two_level");
        }
        label_set = classification_labels(cfg, truth);
        PromptSpec spec = prompt_spec_for(cfg, label_set);
        populate_examples(cfg, truth, docs, spec);
        used_prompt_id = prompt_id(spec);
        model_id = cfg.backends.generation_model_id;
        HttpGenerationBackend gen(make_endpoint(cfg, cfg.backends.generation_endpoint));

        std::string raw_log;
        for (std::size_t i = 0; i < chapters.size(); ++i) {
            std::string prompt = render_prompt(spec, chapters[i].text);
            GenerationLog gen_log;
            auto responses = generate(gen, prompt, cfg.prompt.generation, &gen_log);
            for (const GenerationLogEntry& e : gen_log) {
                log.line("generate " + chapters[i].doc_id + "." + chapters[i].segment +
                         " repeat=" + std::to_string(e.repeat) +
                         " chars=" + std::to_string(e.response_chars));
            }
            for (std::size_t r = 0; r < responses.size(); ++r) {
                ordered_json raw = {{"doc_id", chapters[i].doc_id},
                                    {"segment", chapters[i].segment},
                                    {"repeat", r + 1},
                                    {"response", responses[r]}};
                raw_log += raw.dump() + "\n";
            }
            TwoLevelLabel two = parse_two_level(responses.front());
            Prediction pred = Prediction::two_level(two.category, two.subcategory);
            records[i] = prediction_record(chapters[i].doc_id, chapters[i].segment, pred,
                                           used_prompt_id, model_id);
        }
        write_file_atomic(cfg.paths.output_dir / "raw_responses.jsonl", raw_log);
    } else if (backend == "remote") {
        if (cfg.backends.scorer_endpoint.empty()) {
            throw ConfigError("backends.scorer_endpoint required for --backend remote");
        }
        label_set = classification_labels(cfg, truth);
        model_id = "remote:" + cfg.backends.scorer_endpoint;
        HttpScorerBackend scorer(make_endpoint(cfg, cfg.backends.scorer_endpoint));
        for (std::size_t i = 0; i < chapters.size(); ++i) {
            ScoreVector sv = remote_scores(scorer, chapters[i].text, label_set);
            if (sv.calibration == Calibration::kRawMargin) {
                sv = calibrate(sv, Calibration::kSigmoid);
            }
            Prediction pred = kind == "single" ? to_single(sv) : to_topk(sv, cfg.classifier.top_k);
            records[i] = prediction_record(chapters[i].doc_id, chapters[i].segment, pred, "",
                                           model_id);
            if (with_scores) {
                ordered_json scores;
                for (std::size_t c = 0; c < label_set.size(); ++c) {
                    scores[label_set.at(c)] = sv.scores[c];
                }
                records[i]["scores"] = scores;
            }
        }
    } else {
        fs::path model_path = cfg.paths.output_dir / "model.json";
        if (!fs::exists(model_path)) {
            throw ConfigError("model file " + model_path.string() + " missing; run train first");
        }
        ModelBundle bundle = load_model(model_path);
        label_set = bundle.model.label_set;
        model_id = bundle.model_id + ":seed=" + std::to_string(bundle.model.config.seed);

        parallel_for(chapters, cfg.jobs, [&](std::size_t i) {
            SparseVector x = featurize(chapters[i].text, bundle.vocab);
            ScoreVector sv = calibrate(predict_scores(bundle.model, x), Calibration::kSigmoid);
            Prediction pred = kind == "single" ? to_single(sv) : to_topk(sv, cfg.classifier.top_k);
            records[i] = prediction_record(chapters[i].doc_id, chapters[i].segment, pred, "",
                                           model_id);
            if (with_scores) {
                ordered_json scores;
                for (std::size_t c = 0; c < label_set.size(); ++c) {
                    scores[label_set.at(c)] = sv.scores[c];
                }
                records[i]["scores"] = scores;
            }
        });
    }

    std::string jsonl;
    for (const ordered_json& r : records) jsonl += r.dump() + "\n";
    fs::path out = cfg.paths.output_dir / ("predictions_" + kind + ".jsonl");
    write_file_atomic(out, jsonl);

    ordered_json meta;
    meta["kind"] = kind;
    meta["model_id"] = model_id;
    meta["prompt_id"] = used_prompt_id;
    meta["seed"] = cfg.seed;
    meta["split"] = split;
    meta["label_set"] = label_set.labels();
    write_file_atomic(cfg.paths.output_dir / ("predictions_" + kind + ".meta.json"),
                      meta.dump(2) + "\n");

    log.line("classify kind=" + kind + " records=" + std::to_string(records.size()));
    std::cout << "classify: " << records.size() << " prediction(s) written to " << out.string()
              << "\n";
    return 0;
}

// --- prompt -------------------------------------------------------------------

int cmd_prompt(const PipelineConfig& cfg, bool emit_tuning, const std::string& split) {
    cfg.require_paths({"corpus_manifest", "taxonomy", "alias_file", "output_dir"});
    auto docs = load_docs(cfg);
    TruthContext truth = load_truth(cfg);

    std::optional<std::set<std::string>> wanted;
    if (split != "all") wanted = read_split_docs(cfg, split);

    LabelSet labels = classification_labels(cfg, truth);
    PromptSpec spec = prompt_spec_for(cfg, labels);
    populate_examples(cfg, truth, docs, spec);

    std::size_t rendered = 0;
    std::vector<InstructionRecord> tuning;
    for (const DocumentRecord& doc : docs) {
        if (wanted && !wanted->count(doc.doc_id)) continue;
        std::string doc_label = truth.label_of(doc);
        for (const ChapterText& ch : chapters_of(cfg, doc.doc_id)) {
            std::string prompt = render_prompt(spec, ch.text);
            write_file_atomic(cfg.paths.output_dir / "prompts" /
                                  (ch.doc_id + "." + ch.segment + ".txt"),
                              prompt);
            ++rendered;
            if (emit_tuning) tuning.push_back(make_instruction_record(spec, ch.text, doc_label));
        }
    }
    if (emit_tuning) {
        write_file_atomic(cfg.paths.output_dir / "tuning.jsonl",
                          serialize_instruction_records(tuning));
    }
    std::cout << "prompt: rendered " << rendered << " prompt(s) with template "
              << prompt_id(spec) << (emit_tuning ? ", tuning.jsonl written" : "") << "\n";
    return 0;
}

// --- evaluate -----------------------------------------------------------------

struct PredictionRow {
    std::string doc_id;
    std::string segment;
    Prediction pred;
    std::map<std::string, double> scores;  // optional full score map
};

std::vector<PredictionRow> load_predictions(const fs::path& path, const std::string& kind) {
    std::string content = read_file(path);
    std::vector<PredictionRow> rows;
    std::size_t lineno = 0;
    for (const std::string& line : split_lines(content)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(path.string(), lineno, e.what());
        }
        try {
            if (j.at("kind").get<std::string>() != kind) {
                throw ParseError(path.string(), lineno,
                                 "record kind mismatch, expected " + kind);
            }
            PredictionRow row;
            row.doc_id = j.at("doc_id").get<std::string>();
            row.segment = j.at("segment").get<std::string>();
            if (kind == "single") {
                const auto& l = j.at("labels").at(0);
                row.pred = Prediction::single(l.at("label").get<std::string>(),
                                              l.value("score", 0.0));
            } else if (kind == "topk") {
                std::vector<ScoredLabel> items;
                for (const auto& l : j.at("labels")) {
                    items.push_back({l.at("label").get<std::string>(), l.value("score", 0.0)});
                }
                row.pred = Prediction::top_k(std::move(items));
            } else {
                row.pred = Prediction::two_level(j.at("category").get<std::string>(),
                                                 j.value("subcategory", std::string()));
            }
            if (j.contains("scores")) {
                for (const auto& [label, value] : j.at("scores").items()) {
                    row.scores[label] = value.get<double>();
                }
            }
            rows.push_back(std::move(row));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string(), lineno, e.what());
        }
    }
    if (rows.empty()) throw ValidationError("no prediction records in " + path.string());
    return rows;
}

int cmd_evaluate(const PipelineConfig& cfg, const std::string& kind, std::string predictions) {
    cfg.require_paths({"corpus_manifest", "taxonomy", "alias_file", "output_dir"});
    auto docs = load_docs(cfg);
    TruthContext truth = load_truth(cfg);
    RunLog log(cfg.paths.output_dir);

    fs::path pred_path = predictions.empty()
                             ? cfg.paths.output_dir / ("predictions_" + kind + ".jsonl")
                             : fs::path(predictions);
    auto rows = load_predictions(pred_path, kind);

    std::map<std::string, std::string> doc_truth;
    for (const DocumentRecord& doc : docs) doc_truth[doc.doc_id] = truth.label_of(doc);
    std::vector<std::string> truths;
    truths.reserve(rows.size());
    for (const PredictionRow& r : rows) {
        auto it = doc_truth.find(r.doc_id);
        if (it == doc_truth.end()) {
            throw ValidationError("prediction for unknown document " + r.doc_id);
        }
        truths.push_back(it->second);
    }

    if (kind == "single") {
        // Label space: the classify-time label set when available, else the
        // union of predictions and truth.
        std::set<std::string> names;
        fs::path meta_path = cfg.paths.output_dir / "predictions_single.meta.json";
        if (fs::exists(meta_path)) {
            auto meta = nlohmann::json::parse(read_file(meta_path));
            for (const auto& l : meta.at("label_set")) names.insert(l.get<std::string>());
        }
        for (const PredictionRow& r : rows) names.insert(r.pred.label);
        for (const std::string& t : truths) names.insert(t);
        LabelSet label_set(std::vector<std::string>(names.begin(), names.end()));

        std::vector<Prediction> preds;
        for (const PredictionRow& r : rows) preds.push_back(r.pred);
        MetricsReport report = precision_recall_f1(confusion(preds, truths, label_set));
        report.meta.seed = cfg.seed;
        report.meta.model_id = "predictions:" + pred_path.filename().string();
        write_file_atomic(cfg.paths.output_dir / "metrics_single.json", metrics_to_json(report));
        write_file_atomic(cfg.paths.output_dir / "metrics_single.csv", metrics_to_csv(report));
        std::cout << "evaluate single: n=" << report.n_instances << " accuracy="
                  << report.accuracy << " macro_f1=" << report.macro_f1 << "\n";

        // One-vs-rest ROC per class when full score vectors are present.
        if (!rows.front().scores.empty()) {
            std::string auc_csv = "class,auc\n";
            std::size_t curves = 0;
            for (std::size_t c = 0; c < label_set.size(); ++c) {
                const std::string& cls = label_set.at(c);
                std::vector<double> scores;
                std::vector<int> binary;
                bool have_all = true;
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    auto it = rows[i].scores.find(cls);
                    if (it == rows[i].scores.end()) {
                        have_all = false;
                        break;
                    }
                    scores.push_back(it->second);
                    binary.push_back(truths[i] == cls ? 1 : 0);
                }
                if (!have_all) continue;
                std::size_t pos = 0;
                for (int b : binary) pos += static_cast<std::size_t>(b);
                if (pos == 0 || pos == binary.size()) continue;  // degenerate class
                RocCurve curve = roc_curve(scores, binary);
                curve.label = cls;
                write_file_atomic(cfg.paths.output_dir / "roc" /
                                      (sanitize_filename(cls) + ".csv"),
                                  roc_to_csv(curve));
                auc_csv += csv_escape(cls) + "," + std::to_string(auc(curve)) + "\n";
                ++curves;
            }
            write_file_atomic(cfg.paths.output_dir / "roc" / "auc.csv", auc_csv);
            std::cout << "evaluate single: wrote " << curves << " ROC curve(s)\n";
        }
    } else if (kind == "topk") {
        std::vector<Prediction> preds;
        for (const PredictionRow& r : rows) preds.push_back(r.pred);
        double acc = topk_accuracy(preds, truths);

        // Top-1 projection for the dominance comparison.
        std::vector<Prediction> top1;
        for (const PredictionRow& r : rows) {
            top1.push_back(Prediction::single(r.pred.topk.front().label,
                                              r.pred.topk.front().score));
        }
        std::size_t correct1 = 0;
        for (std::size_t i = 0; i < top1.size(); ++i) {
            if (top1[i].label == truths[i]) ++correct1;
        }
        double acc1 = static_cast<double>(correct1) / static_cast<double>(top1.size());

        ordered_json summary;
        summary["n_instances"] = rows.size();
        summary["k"] = rows.front().pred.topk.size();
        summary["topk_accuracy"] = acc;
        summary["top1_accuracy"] = acc1;
        summary["seed"] = cfg.seed;
        write_file_atomic(cfg.paths.output_dir / "metrics_topk.json", summary.dump(2) + "\n");
        std::cout << "evaluate topk: n=" << rows.size() << " top-" << rows.front().pred.topk.size()
                  << " accuracy=" << acc << " top-1 accuracy=" << acc1 << "\n";
    } else if (kind == "two_level") {
        TrigramEmbedder local;
        HttpEmbeddingProvider* remote = nullptr;
        std::unique_ptr<HttpEmbeddingProvider> remote_holder;
        if (!cfg.backends.embedding_endpoint.empty()) {
            remote_holder = std::make_unique<HttpEmbeddingProvider>(
                make_endpoint(cfg, cfg.backends.embedding_endpoint));
            remote = remote_holder.get();
        }
        EmbeddingProvider& provider = remote ? static_cast<EmbeddingProvider&>(*remote)
                                             : static_cast<EmbeddingProvider&>(local);

        LabelSet label_set = classification_labels(cfg, truth);
        std::vector<double> sims;
        std::string unmapped_csv = "free_text,best_candidate,cosine\n";
        std::size_t n_mapped = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const Prediction& p = rows[i].pred;
            std::string target = p.subcategory.empty() ? p.category : p.subcategory;
            double sim = cosine(provider.embed(target), provider.embed(truths[i]));
            sims.push_back(std::clamp(sim, 0.0, 1.0));

            NormalizationResult norm =
                normalize_label(target, label_set, provider, cfg.normalize_threshold);
            if (norm.mapped) {
                ++n_mapped;
            } else {
                unmapped_csv += csv_escape(target) + "," + csv_escape(norm.label) + "," +
                                std::to_string(norm.score) + "\n";
            }
        }
        SimilarityHistogram hist = similarity_histogram(sims);
        write_file_atomic(cfg.paths.output_dir / "histogram.csv", histogram_to_csv(hist));
        write_file_atomic(cfg.paths.output_dir / "unmapped.csv", unmapped_csv);

        ordered_json summary;
        summary["n_instances"] = rows.size();
        summary["count_at_or_above_0.6"] = hist.count_at_or_above_06;
        summary["fraction_at_or_above_0.6"] = hist.fraction_at_or_above_06;
        summary["n_mapped"] = n_mapped;
        summary["n_unmapped"] = rows.size() - n_mapped;
        summary["normalize_threshold"] = cfg.normalize_threshold;
        summary["embedding_provider"] = provider.id();
        summary["seed"] = cfg.seed;
        write_file_atomic(cfg.paths.output_dir / "metrics_two_level.json",
                          summary.dump(2) + "\n");
        std::cout << "evaluate two_level: n=" << rows.size() << " at-or-above-0.6="
                  << hist.count_at_or_above_06 << " mapped=" << n_mapped << "\n";
    } else {
        throw ConfigError("unknown kind \"" + kind + "\"");
    }

    log.line("evaluate kind=" + kind + " records=" + std::to_string(rows.size()));
    return 0;
}

// --- report -------------------------------------------------------------------

int cmd_report(const PipelineConfig& cfg, const std::vector<std::string>& runs) {
    cfg.require_paths({"output_dir"});
    std::string md = "# Run report\n";
    bool any = false;

    // Cross-run variance over repeated metrics files (population stddev).
    if (runs.size() >= 2) {
        any = true;
        std::vector<double> f1s, precisions, recalls, accuracies;
        for (const std::string& p : runs) {
            MetricsReport rep = metrics_from_json(read_file(p), p);
            f1s.push_back(rep.macro_f1);
            precisions.push_back(rep.macro_precision);
            recalls.push_back(rep.macro_recall);
            accuracies.push_back(rep.accuracy);
        }
        md += "\n## Cross-run standard deviation (" + std::to_string(runs.size()) + " runs)\n\n";
        md += "- macro precision: " + std::to_string(run_stddev(precisions)) + "\n";
        md += "- macro recall: " + std::to_string(run_stddev(recalls)) + "\n";
        md += "- macro F1: " + std::to_string(run_stddev(f1s)) + "\n";
        md += "- accuracy: " + std::to_string(run_stddev(accuracies)) + "\n";
        std::cout << "cross-run stddev over " << runs.size() << " runs: macro-F1 "
                  << run_stddev(f1s) << ", accuracy " << run_stddev(accuracies) << "\n";
    }

    fs::path single = cfg.paths.output_dir / "metrics_single.json";
    if (fs::exists(single)) {
        any = true;
        MetricsReport rep = metrics_from_json(read_file(single), single.string());
        md += "\n## Single-label classification\n\n";
        md += "- instances: " + std::to_string(rep.n_instances) + "\n";
        md += "- accuracy: " + std::to_string(rep.accuracy) + "\n";
        md += "- macro P/R/F1: " + std::to_string(rep.macro_precision) + " / " +
              std::to_string(rep.macro_recall) + " / " + std::to_string(rep.macro_f1) + "\n";
        md += "\n| class | precision | recall | f1 |\n|---|---|---|---|\n";
        for (const ClassMetrics& m : rep.per_class) {
            md += "| " + m.label + " | " + std::to_string(m.precision) + " | " +
                  std::to_string(m.recall) + " | " + std::to_string(m.f1) + " |\n";
        }
        std::cout << "single: accuracy " << rep.accuracy << ", macro-F1 " << rep.macro_f1
                  << " over " << rep.n_instances << " instance(s)\n";
    }
    fs::path topk = cfg.paths.output_dir / "metrics_topk.json";
    if (fs::exists(topk)) {
        any = true;
        auto j = nlohmann::json::parse(read_file(topk));
        md += "\n## Top-k classification\n\n";
        md += "- instances: " + std::to_string(j.value("n_instances", 0)) + "\n";
        md += "- k: " + std::to_string(j.value("k", 0)) + "\n";
        md += "- top-k accuracy: " + std::to_string(j.value("topk_accuracy", 0.0)) + "\n";
        md += "- top-1 accuracy: " + std::to_string(j.value("top1_accuracy", 0.0)) + "\n";
        std::cout << "topk: accuracy " << j.value("topk_accuracy", 0.0) << " (top-1 "
                  << j.value("top1_accuracy", 0.0) << ")\n";
    }
    fs::path two = cfg.paths.output_dir / "metrics_two_level.json";
    if (fs::exists(two)) {
        any = true;
        auto j = nlohmann::json::parse(read_file(two));
        md += "\n## Two-level labels\n\n";
        md += "- instances: " + std::to_string(j.value("n_instances", 0)) + "\n";
        md += "- similarity >= 0.6: " + std::to_string(j.value("count_at_or_above_0.6", 0)) +
              "\n";
        md += "- mapped onto the inventory: " + std::to_string(j.value("n_mapped", 0)) + "\n";
        std::cout << "two_level: " << j.value("count_at_or_above_0.6", 0)
                  << " instance(s) at or above 0.6\n";
    }
    if (!any) throw ValidationError("no metrics files in " + cfg.paths.output_dir.string());
    write_file_atomic(cfg.paths.output_dir / "report.md", md);
    std::cout << "report written to " << (cfg.paths.output_dir / "report.md").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chapterkit: segment, extract, classify and evaluate long scholarly documents"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "pipeline config file (TOML)")->required();
    int jobs_override = 0;
    app.add_option("--jobs", jobs_override, "max parallel documents");
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    app.add_option("--seed", seed_override, "override run.seed")->each([&](const std::string&) {
        seed_set = true;
    });

    auto* seg = app.add_subcommand("segment", "detect chapter starts, validate manifests");
    auto* ext = app.add_subcommand("extract", "fuse OCR and layout into per-segment text");
    auto* trn = app.add_subcommand("train", "train the native linear classifier");
    bool train_all = false;
    trn->add_flag("--all", train_all, "train on every document, skip the held-out split");
    auto* cls = app.add_subcommand("classify", "emit prediction records");
    std::string kind = "single";
    cls->add_option("--kind", kind, "single | topk | two_level")
        ->check(CLI::IsMember({"single", "topk", "two_level"}));
    std::string backend = "native";
    cls->add_option("--backend", backend, "native | remote")
        ->check(CLI::IsMember({"native", "remote"}));
    std::string cls_split = "all";
    cls->add_option("--split", cls_split, "all | train | test")
        ->check(CLI::IsMember({"all", "train", "test"}));
    bool with_scores = false;
    cls->add_flag("--with-scores", with_scores, "include full per-class scores in records");
    bool all_segments = false;
    cls->add_flag("--all-segments", all_segments,
                  "classify every extracted segment, not only chapters");
    auto* prm = app.add_subcommand("prompt", "render prompts; optionally emit a tuning file");
    bool emit_tuning = false;
    prm->add_flag("--emit-tuning", emit_tuning, "write instruction-format tuning.jsonl");
    std::string prm_split = "all";
    prm->add_option("--split", prm_split, "all | train | test")
        ->check(CLI::IsMember({"all", "train", "test"}));
    auto* evl = app.add_subcommand("evaluate", "score predictions against ground truth");
    std::string eval_kind = "single";
    evl->add_option("--kind", eval_kind, "single | topk | two_level")
        ->check(CLI::IsMember({"single", "topk", "two_level"}));
    std::string predictions_path;
    evl->add_option("--predictions", predictions_path, "prediction JSONL (default per kind)");
    auto* rep = app.add_subcommand("report", "summarize metrics files");
    std::vector<std::string> report_runs;
    rep->add_option("--runs", report_runs,
                    "metrics JSON files from repeated runs for stddev reporting");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        PipelineConfig cfg = PipelineConfig::load(config_path);
        if (jobs_override > 0) cfg.jobs = jobs_override;
        if (seed_set) cfg.seed = seed_override;

        if (seg->parsed()) return cmd_segment(cfg);
        if (ext->parsed()) return cmd_extract(cfg);
        if (trn->parsed()) return cmd_train(cfg, train_all);
        if (cls->parsed()) {
            return cmd_classify(cfg, kind, backend, cls_split, with_scores, all_segments);
        }
        if (prm->parsed()) return cmd_prompt(cfg, emit_tuning, prm_split);
        if (evl->parsed()) return cmd_evaluate(cfg, eval_kind, predictions_path);
        if (rep->parsed()) return cmd_report(cfg, report_runs);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return 3;
    } catch (const ContractError& e) {
        std::cerr << "backend contract error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
