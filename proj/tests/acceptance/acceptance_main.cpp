// Acceptance suite: runs every acceptance criterion and prints one
// PASS/FAIL line per criterion. Exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chapterkit/classifier.hpp"
#include "chapterkit/corpus.hpp"
#include "chapterkit/errors.hpp"
#include "chapterkit/eval.hpp"
#include "chapterkit/layout.hpp"
#include "chapterkit/llm.hpp"
#include "chapterkit/rng.hpp"
#include "chapterkit/segmenter.hpp"
#include "chapterkit/text.hpp"

using namespace chapterkit;

namespace {

const std::string kFixtures = CHAPTERKIT_FIXTURE_DIR;

struct CriterionFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& detail) {
    if (!ok) throw CriterionFailure(detail);
}

template <typename T>
std::string str(const T& v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

LabelSet fixture_label_set() {
    auto taxonomy = Taxonomy::load(kFixtures + "/taxonomy47.tsv");
    std::vector<std::string> names;
    for (const auto& leaf : taxonomy.leaves()) names.push_back(leaf.level3);
    return LabelSet(names);
}

// --- criterion 1: metrics match an independent brute-force recomputation ----

void criterion_metrics_oracle() {
    SplitMix64 rng(100);
    std::vector<std::string> names = {"c0", "c1", "c2", "c3", "c4", "c5"};
    LabelSet label_set(names);

    for (int fixture = 0; fixture < 200; ++fixture) {
        std::size_t n = 20 + rng.bounded(180);
        std::vector<Prediction> preds;
        std::vector<std::string> truth;
        for (std::size_t i = 0; i < n; ++i) {
            preds.push_back(Prediction::single(names[rng.bounded(6)], 1.0));
            truth.push_back(names[rng.bounded(6)]);
        }
        MetricsReport rep = precision_recall_f1(confusion(preds, truth, label_set));

        // Brute-force recomputation straight from the (pred, truth) pairs.
        double macro_p = 0, macro_r = 0, macro_f = 0;
        std::size_t correct = 0;
        for (std::size_t c = 0; c < 6; ++c) {
            std::size_t tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                bool predicted = preds[i].label == names[c];
                bool actual = truth[i] == names[c];
                if (predicted && actual) ++tp;
                if (predicted && !actual) ++fp;
                if (!predicted && actual) ++fn;
            }
            double p = (tp + fp) ? double(tp) / double(tp + fp) : 0.0;
            double r = (tp + fn) ? double(tp) / double(tp + fn) : 0.0;
            double f = (p + r) ? 2 * p * r / (p + r) : 0.0;
            require(std::abs(rep.per_class[c].precision - p) < 1e-9,
                    "per-class precision differs at fixture " + str(fixture));
            require(std::abs(rep.per_class[c].recall - r) < 1e-9,
                    "per-class recall differs at fixture " + str(fixture));
            require(std::abs(rep.per_class[c].f1 - f) < 1e-9,
                    "per-class F1 differs at fixture " + str(fixture));
            macro_p += p;
            macro_r += r;
            macro_f += f;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (preds[i].label == truth[i]) ++correct;
        }
        require(std::abs(rep.macro_precision - macro_p / 6) < 1e-9, "macro precision differs");
        require(std::abs(rep.macro_recall - macro_r / 6) < 1e-9, "macro recall differs");
        require(std::abs(rep.macro_f1 - macro_f / 6) < 1e-9, "macro F1 differs");
        require(std::abs(rep.accuracy - double(correct) / double(n)) < 1e-9,
                "accuracy differs");
    }
}

// --- criterion 2: ROC/AUC anchors ---------------------------------------------

void criterion_roc_auc() {
    auto diagonal = roc_curve({0.7, 0.7, 0.7, 0.7}, {1, 0, 1, 0});
    require(auc(diagonal) == 0.5, "diagonal AUC is " + str(auc(diagonal)) + ", want exactly 0.5");

    std::vector<double> sep_scores;
    std::vector<int> sep_truth;
    for (int i = 0; i < 50; ++i) {
        sep_scores.push_back(0.9 + i * 1e-4);
        sep_truth.push_back(1);
        sep_scores.push_back(0.1 + i * 1e-4);
        sep_truth.push_back(0);
    }
    double perfect = auc(roc_curve(sep_scores, sep_truth));
    require(perfect == 1.0, "perfect separation AUC is " + str(perfect) + ", want 1.0");

    SplitMix64 rng(200);
    std::vector<double> scores(10000);
    std::vector<int> truth(10000);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = rng.next_double();
        truth[i] = static_cast<int>(rng.bounded(2));  // independent of the score
    }
    double random_auc = auc(roc_curve(scores, truth));
    require(random_auc >= 0.45 && random_auc <= 0.55,
            "label-independent AUC is " + str(random_auc) + ", want within [0.45, 0.55]");
}

// --- criterion 3: top-3 dominance and the brute-force 3-largest oracle --------

void criterion_topk_dominance() {
    SplitMix64 rng(300);
    std::vector<std::string> names;
    for (int i = 0; i < 47; ++i) names.push_back("class" + str(i));
    LabelSet label_set(names);

    std::size_t top1_hits = 0, top3_hits = 0;
    for (int i = 0; i < 1000; ++i) {
        ScoreVector raw;
        raw.labels = label_set;
        raw.calibration = Calibration::kRawMargin;
        raw.scores.resize(47);
        for (double& s : raw.scores) s = rng.next_double() * 8 - 4;
        ScoreVector sv = calibrate(raw, Calibration::kSigmoid);

        Prediction top3 = to_topk(sv, 3);
        Prediction top1 = to_single(sv);

        // Brute-force 3-largest with the same lower-index tie rule.
        std::vector<std::size_t> idx(47);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return sv.scores[a] > sv.scores[b];
        });
        for (int k = 0; k < 3; ++k) {
            require(top3.topk[static_cast<std::size_t>(k)].label == names[idx[static_cast<std::size_t>(k)]],
                    "top-3 set differs from the brute-force oracle at vector " + str(i));
        }
        require(top3.topk[0].label == top1.label, "top-1 missing from top-3 at vector " + str(i));

        std::string truth = names[rng.bounded(47)];
        if (top1.label == truth) ++top1_hits;
        for (const ScoredLabel& sl : top3.topk) {
            if (sl.label == truth) {
                ++top3_hits;
                break;
            }
        }
    }
    require(top3_hits >= top1_hits, "top-3 rate " + str(top3_hits) + "/1000 below top-1 rate " +
                                        str(top1_hits) + "/1000");
}

// --- criterion 4: histogram reproduces the reported bin counts ----------------

void criterion_histogram() {
    const std::size_t want[5] = {334, 352, 199, 96, 141};
    std::vector<double> values;
    for (int b = 0; b < 5; ++b) {
        double low = 0.2 * b;
        for (std::size_t i = 0; i < want[b]; ++i) {
            values.push_back(low + 0.05 + 0.1 * (double(i) / double(want[b])));
        }
    }
    SimilarityHistogram hist = similarity_histogram(values);
    for (int b = 0; b < 5; ++b) {
        require(hist.counts[static_cast<std::size_t>(b)] == want[b],
                "bin " + str(b) + " count " + str(hist.counts[static_cast<std::size_t>(b)]) +
                    ", want " + str(want[b]));
    }
    require(hist.count_at_or_above_06 == 237,
            "at-or-above-0.6 count " + str(hist.count_at_or_above_06) + ", want 237");
}

// --- criterion 5: fusion removes exactly the drop-region text -----------------

void criterion_fusion_soundness() {
    auto blocks = parse_ocr_dump(kFixtures + "/corpus_mini/ocr/ETD-0001.json");
    auto regions = parse_layout_file(kFixtures + "/corpus_mini/layout/ETD-0001.layout");
    std::vector<PageDims> dims = {{612, 792}, {612, 792}, {612, 792}};

    auto kept = filter_blocks(blocks, regions, dims, FilterPolicy{});
    std::set<std::string> kept_ids;
    for (const OcrBlock& b : kept) kept_ids.insert(b.id);

    std::set<std::string> extracted_tokens;
    for (std::string& t : tokenize(assemble_text(kept))) extracted_tokens.insert(std::move(t));

    std::set<std::string> dropped_tokens;
    std::size_t dropped_lines = 0;
    for (const OcrBlock& b : blocks) {
        if (b.type != OcrBlockType::kLine || kept_ids.count(b.id)) continue;
        ++dropped_lines;
        for (std::string& t : tokenize(b.text)) dropped_tokens.insert(std::move(t));
    }
    require(dropped_lines > 0, "fixture produced no dropped lines");
    for (const std::string& t : dropped_tokens) {
        require(!extracted_tokens.count(t),
                "token \"" + t + "\" from a drop region leaked into the extracted text");
    }

    FilterPolicy keep_all;
    keep_all.drop_labels.clear();
    std::set<std::string> unfiltered_tokens;
    for (std::string& t : tokenize(assemble_text(filter_blocks(blocks, regions, dims, keep_all)))) {
        unfiltered_tokens.insert(std::move(t));
    }
    for (const std::string& t : dropped_tokens) {
        require(unfiltered_tokens.count(t) == 1,
                "disabling filtering did not reintroduce token \"" + t + "\"");
    }
}

// --- criterion 6: manifest validator vs a brute-force partition checker -------

void criterion_segmentation_validity() {
    SplitMix64 rng(600);
    std::size_t accepted = 0, rejected = 0;
    for (int trial = 0; trial < 500; ++trial) {
        int page_count = 2 + static_cast<int>(rng.bounded(30));
        std::size_t n_entries = 1 + rng.bounded(6);

        std::vector<ManifestEntry> entries;
        int cursor = 1;
        for (std::size_t i = 0; i < n_entries; ++i) {
            int jitter = static_cast<int>(rng.bounded(3)) - 1;  // -1, 0, +1
            int start = std::max(1, cursor + jitter);
            int end = start + static_cast<int>(rng.bounded(6));
            SegmentLabel label =
                i == 0 ? SegmentLabel::front() : SegmentLabel::chapter(static_cast<int>(i));
            entries.push_back({label, start, end});
            cursor = end + 1;
        }
        SegmentManifest manifest{"doc", entries};

        // Brute force: every page of 1..page_count covered exactly once, in
        // listed order.
        std::vector<int> cover(static_cast<std::size_t>(page_count) + 1, 0);
        bool is_partition = true;
        int prev_end = 0;
        for (const ManifestEntry& e : entries) {
            if (e.page_start < 1 || e.page_end > page_count || e.page_end < e.page_start ||
                e.page_start <= prev_end) {
                is_partition = false;
                break;
            }
            for (int p = e.page_start; p <= e.page_end; ++p) {
                if (cover[static_cast<std::size_t>(p)]++) is_partition = false;
            }
            prev_end = e.page_end;
            if (!is_partition) break;
        }
        if (is_partition) {
            for (int p = 1; p <= page_count; ++p) {
                if (!cover[static_cast<std::size_t>(p)]) is_partition = false;
            }
        }

        bool validator_accepts = true;
        try {
            manifest.validate(page_count);
        } catch (const ValidationError&) {
            validator_accepts = false;
        }
        require(validator_accepts == is_partition,
                "validator disagrees with the partition oracle at trial " + str(trial) +
                    " (oracle " + (is_partition ? "accepts" : "rejects") + ")");
        ++(validator_accepts ? accepted : rejected);
    }
    require(accepted > 0 && rejected > 0,
            "degenerate sample: " + str(accepted) + " accepted / " + str(rejected) + " rejected");
}

// --- criterion 7: native classifier on a separable 10-class corpus ------------

void criterion_classifier_sanity() {
    SplitMix64 rng(700);
    std::vector<std::string> class_names;
    for (int c = 0; c < 10; ++c) class_names.push_back("field" + str(c));

    // Disjoint vocabulary per class: 30 exclusive words each, 50 docs/class.
    std::vector<std::string> texts;
    std::vector<LabeledDoc> records;
    std::map<std::string, std::string> doc_text;
    for (int c = 0; c < 10; ++c) {
        for (int d = 0; d < 50; ++d) {
            std::string doc_id = class_names[static_cast<std::size_t>(c)] + "-" + str(d);
            std::string text;
            for (int w = 0; w < 25; ++w) {
                text += "w" + str(c) + "x" + str(rng.bounded(30));
                text += ' ';
            }
            doc_text[doc_id] = text;
            records.emplace_back(doc_id, class_names[static_cast<std::size_t>(c)]);
        }
    }

    SplitResult split = stratified_split(records, 0.8, 7001);
    require(split.train.size() == 400 && split.test.size() == 100,
            "split " + str(split.train.size()) + "/" + str(split.test.size()) +
                ", want 400/100");

    std::vector<std::string> train_texts, train_labels;
    for (const auto& [id, label] : split.train) {
        train_texts.push_back(doc_text[id]);
        train_labels.push_back(label);
    }
    Vocabulary vocab = Vocabulary::build(train_texts, 1, 10000);
    std::vector<SparseVector> features;
    for (const std::string& t : train_texts) features.push_back(featurize(t, vocab));

    LabelSet label_set(class_names);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.seed = 4242;
    LinearModel model = train_linear_ovr(features, train_labels, label_set, cfg);

    std::vector<Prediction> preds;
    std::vector<std::string> truth;
    for (const auto& [id, label] : split.test) {
        preds.push_back(to_single(predict_scores(model, featurize(doc_text[id], vocab))));
        truth.push_back(label);
    }
    MetricsReport rep = precision_recall_f1(confusion(preds, truth, label_set));
    require(rep.macro_f1 >= 0.9,
            "held-out macro-F1 " + str(rep.macro_f1) + ", want at least 0.9");

    LinearModel again = train_linear_ovr(features, train_labels, label_set, cfg);
    require(again.weights == model.weights, "training is not deterministic under a fixed seed");
}

// --- criterion 8: split arithmetic --------------------------------------------

void criterion_split_arithmetic() {
    std::vector<LabeledDoc> records;
    for (int c = 0; c < 47; ++c) {
        for (int d = 0; d < 200; ++d) {
            records.emplace_back("doc" + str(c) + "-" + str(d), "dept" + str(c));
        }
    }
    SplitResult split = stratified_split(records, 0.8, 1);
    require(split.train.size() == 7520,
            "train size " + str(split.train.size()) + ", want 7520");
    require(split.test.size() == 1880, "test size " + str(split.test.size()) + ", want 1880");
}

// --- criterion 9: two-level parsing -------------------------------------------

void criterion_two_level_parsing() {
    std::string marker_sample =
        "I classified the text into the following category and subcategory: \n"
        "Category: Electrical and Computer Engineering \n"
        "Subcategory: Materials Science and Engineering";
    TwoLevelLabel parsed = parse_two_level(marker_sample);
    require(parsed.category == "Electrical and Computer Engineering",
            "marker sample category parsed as \"" + parsed.category + "\"");
    require(parsed.subcategory == "Materials Science and Engineering",
            "marker sample subcategory parsed as \"" + parsed.subcategory + "\"");

    std::string quoted_sample =
        "Based on the content you provided, I would categorize your text under "
        "\"Electrical and Computer Engineering\" This field encompasses the study of "
        "electrical and computer engineering topics, including the theory, design, and "
        "application of electronic";
    TwoLevelLabel quoted = parse_two_level(quoted_sample);
    require(quoted.category == "Electrical and Computer Engineering",
            "quoted sample category parsed as \"" + quoted.category + "\"");
    require(quoted.subcategory.empty(), "quoted sample should have no subcategory");

    // 100 mutated marker-format variants round-trip X and Y.
    SplitMix64 rng(900);
    const std::string charset = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    auto phrase = [&] {
        std::string s;
        std::size_t words = 1 + rng.bounded(4);
        for (std::size_t w = 0; w < words; ++w) {
            if (w) s.push_back(' ');
            std::size_t len = 2 + rng.bounded(9);
            for (std::size_t i = 0; i < len; ++i) {
                s.push_back(charset[rng.bounded(charset.size())]);
            }
        }
        return s;
    };
    auto mutate_case = [&](std::string marker) {
        switch (rng.bounded(3)) {
            case 0: return to_lower_ascii(marker);
            case 1: {
                std::string upper = marker;
                for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
                return upper;
            }
            default: return marker;
        }
    };
    for (int variant = 0; variant < 100; ++variant) {
        std::string x = phrase();
        std::string y = phrase();
        std::string raw;
        if (rng.bounded(2)) raw += "Here is the classification you asked for\n";
        raw += mutate_case("Category:");
        raw += std::string(1 + rng.bounded(3), ' ');
        bool quote_x = rng.bounded(2);
        raw += quote_x ? "\"" + x + "\"" : x;
        if (rng.bounded(2)) raw += ".";
        raw += rng.bounded(2) ? "\n" : " ";
        raw += mutate_case("Subcategory:");
        raw += std::string(1 + rng.bounded(3), ' ');
        bool quote_y = rng.bounded(2);
        raw += quote_y ? "\"" + y + "\"" : y;
        if (rng.bounded(2)) raw += ".";
        if (rng.bounded(2)) raw += "\nHope this helps";

        TwoLevelLabel round = parse_two_level(raw);
        require(round.category == x, "variant " + str(variant) + ": category \"" +
                                         round.category + "\" != \"" + x + "\"");
        require(round.subcategory == y, "variant " + str(variant) + ": subcategory \"" +
                                            round.subcategory + "\" != \"" + y + "\"");
    }
}

// --- criterion 10: label normalization variants --------------------------------

void criterion_label_normalization() {
    LabelSet labels = fixture_label_set();
    require(labels.size() == 47, "fixture inventory has " + str(labels.size()) + " labels");
    TrigramEmbedder provider;

    auto check = [&](const std::string& query, const std::string& want) {
        NormalizationResult got = normalize_label(query, labels, provider, 0.6);
        require(canonical_key(got.label) == canonical_key(want),
                "\"" + query + "\" resolved to \"" + got.label + "\", want \"" + want + "\"");

        // Exhaustive-cosine oracle over the whole inventory.
        EmbeddingVector q = provider.embed(query);
        double best = -2.0;
        std::string best_label;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            double c = cosine(q, provider.embed(labels.at(i)));
            if (c > best) {
                best = c;
                best_label = labels.at(i);
            }
        }
        require(got.label == best_label, "normalize_label disagrees with the exhaustive oracle");
        require(std::abs(got.score - best) < 1e-12, "best cosine differs from the oracle");
    };
    check("linguistic science", "Linguistics");
    check("political science and international relations", "Political science");
}

struct Criterion {
    int id;
    std::string description;
    std::function<void()> run;
    double time_budget_s;  // 0 = untimed
};

}  // namespace

int main() {
    std::vector<Criterion> criteria = {
        {1, "metrics match brute-force recomputation within 1e-9", criterion_metrics_oracle, 5.0},
        {2, "ROC/AUC anchors: diagonal 0.5, perfect 1.0, random within [0.45,0.55]",
         criterion_roc_auc, 10.0},
        {3, "top-3 dominates top-1 and equals the 3-largest oracle", criterion_topk_dominance, 0},
        {4, "histogram reproduces bin counts [334,352,199,96,141] and 237 at/above 0.6",
         criterion_histogram, 0},
        {5, "fusion drops all drop-region tokens; disabling filtering restores them",
         criterion_fusion_soundness, 0},
        {6, "manifest validator matches the brute-force partition checker on 500 candidates",
         criterion_segmentation_validity, 0},
        {7, "10-class separable corpus: held-out macro-F1 >= 0.9, deterministic",
         criterion_classifier_sanity, 60.0},
        {8, "stratified 80/20 split of 47x200 yields 7520/1880", criterion_split_arithmetic, 0},
        {9, "two-level parsing: published samples and 100 mutated variants",
         criterion_two_level_parsing, 0},
        {10, "\"linguistic science\" and \"political science and international relations\" "
             "normalize to their canonical labels",
         criterion_label_normalization, 0},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        std::string failure;
        try {
            c.run();
        } catch (const std::exception& e) {
            failure = e.what();
        }
        double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (failure.empty() && c.time_budget_s > 0 && elapsed > c.time_budget_s) {
            std::ostringstream os;
            os << "took " << elapsed << "s, budget " << c.time_budget_s << "s";
            failure = os.str();
        }
        if (failure.empty()) {
            std::printf("PASS  [%2d] %s (%.2fs)\n", c.id, c.description.c_str(), elapsed);
        } else {
            std::printf("FAIL  [%2d] %s: %s\n", c.id, c.description.c_str(), failure.c_str());
            ++failures;
        }
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
