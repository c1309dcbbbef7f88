#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "chapterkit/classifier.hpp"
#include "chapterkit/corpus.hpp"
#include "chapterkit/llm.hpp"

namespace chapterkit {

struct ClassCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
};

struct ConfusionCounts {
    LabelSet labels;
    std::vector<ClassCounts> per_class;
    std::size_t n_instances = 0;
};

// One-vs-rest counts per class from single-label predictions.
ConfusionCounts confusion(const std::vector<Prediction>& preds,
                          const std::vector<std::string>& truth, const LabelSet& label_set);

struct ClassMetrics {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct RunMetadata {
    std::string model_id;
    std::string prompt_id;
    std::uint64_t seed = 0;
    std::string timestamp;  // left empty by batch commands; wall clock goes to the run log
};

// Macro values are unweighted means over classes; micro values pool counts.
// Zero denominators yield 0 by convention. Displays default to macro.
struct MetricsReport {
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double micro_precision = 0.0;
    double micro_recall = 0.0;
    double micro_f1 = 0.0;
    double accuracy = 0.0;
    std::size_t n_instances = 0;
    std::string label_set_id;
    std::string averaging = "macro";
    RunMetadata meta;
};

// P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R).
MetricsReport precision_recall_f1(const ConfusionCounts& counts);

// Fraction of instances whose truth label appears among the top-k labels.
// All predictions must share the same k.
double topk_accuracy(const std::vector<Prediction>& preds, const std::vector<std::string>& truth);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::string label;
    std::vector<RocPoint> points;       // starts at (0,0), ends at (1,1), fpr nondecreasing
    std::vector<double> thresholds;     // aligned with points; +inf for the origin
};

// Threshold sweep over descending unique scores; ties grouped. Needs at
// least one positive and one negative instance.
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& truth_binary);

// Trapezoidal area under the curve over FPR.
double auc(const RocCurve& curve);

// u.v / (|u||v|), clamped into [-1,1] against rounding. Both vectors must be
// nonzero and of equal dimension.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

struct SimilarityHistogram {
    static constexpr std::array<double, 6> kEdges = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::array<std::size_t, 5> counts = {0, 0, 0, 0, 0};
    std::size_t total = 0;
    std::size_t count_at_or_above_06 = 0;
    double fraction_at_or_above_06 = 0.0;
};

// Bins [0,0.2), [0.2,0.4), [0.4,0.6), [0.6,0.8), [0.8,1.0] (final bin
// closed); values must lie in [0,1].
SimilarityHistogram similarity_histogram(const std::vector<double>& values);

// Population standard deviation (divisor n), n >= 2.
double run_stddev(const std::vector<double>& values);

// --- exports ---------------------------------------------------------------

// JSON with stable key order.
std::string metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const std::string& content, const std::string& origin);

// CSV "class,precision,recall,f1" plus macro/micro/accuracy footer rows.
std::string metrics_to_csv(const MetricsReport& report);

// CSV "fpr,tpr,threshold".
std::string roc_to_csv(const RocCurve& curve);

// CSV "bin_low,bin_high,count".
std::string histogram_to_csv(const SimilarityHistogram& hist);

}  // namespace chapterkit
