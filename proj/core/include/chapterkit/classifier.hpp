#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chapterkit/corpus.hpp"

namespace chapterkit {

// Sparse feature vector; indices strictly ascending and < dimension.
struct SparseVector {
    std::vector<std::pair<std::size_t, double>> entries;
    std::size_t dimension = 0;

    void validate() const;
    double l2_norm() const;
};

class Vocabulary {
public:
    Vocabulary() = default;

    // Lowercased letter/digit tokenization; terms with document frequency
    // < min_df are dropped, then the top max_features by document frequency
    // are kept (ties to the lexicographically smaller term). Indices are
    // assigned in lexicographic term order.
    static Vocabulary build(const std::vector<std::string>& texts, std::size_t min_df,
                            std::size_t max_features);
    static Vocabulary from_parts(std::vector<std::string> terms, std::vector<std::size_t> doc_freq,
                                 std::size_t doc_count);

    std::size_t size() const { return terms_.size(); }
    std::size_t doc_count() const { return doc_count_; }
    const std::vector<std::string>& terms() const { return terms_; }
    const std::string& term(std::size_t i) const { return terms_.at(i); }
    std::size_t doc_freq(std::size_t i) const { return doc_freq_.at(i); }
    std::optional<std::size_t> index_of(std::string_view term) const;

private:
    std::vector<std::string> terms_;
    std::vector<std::size_t> doc_freq_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t doc_count_ = 0;
};

// tf-idf with tf = raw count, idf = ln((1+N)/(1+df)) + 1, L2-normalized.
// Out-of-vocabulary tokens are ignored; empty text gives the zero vector.
SparseVector featurize(const std::string& text, const Vocabulary& vocab);

struct TrainConfig {
    int epochs = 10;
    double learning_rate = 0.1;
    double lambda = 1e-4;  // L2 regularization strength
    std::uint64_t seed = 42;
};

// One-vs-rest max-margin linear classifier. weights[c] has length
// dimension+1 with the bias in the last slot.
struct LinearModel {
    LabelSet label_set;
    std::size_t dimension = 0;
    std::vector<std::vector<double>> weights;
    TrainConfig config;
};

// Per class, minimizes lambda/2*||w||^2 + mean hinge loss by stochastic
// subgradient descent with a per-epoch Fisher-Yates shuffle keyed on
// (seed, class). Deterministic for a fixed config.
LinearModel train_linear_ovr(const std::vector<SparseVector>& features,
                             const std::vector<std::string>& labels, const LabelSet& label_set,
                             const TrainConfig& config);

// Mean over classes of the regularized hinge objective on the given set.
double ovr_objective(const LinearModel& model, const std::vector<SparseVector>& features,
                     const std::vector<std::string>& labels);

enum class Calibration { kRawMargin, kSigmoid, kSoftmax };

std::string_view to_string(Calibration c);
Calibration calibration_from_string(std::string_view s);

struct ScoreVector {
    LabelSet labels;
    std::vector<double> scores;
    Calibration calibration = Calibration::kRawMargin;

    void validate() const;
};

// Per-class margin w.x + b.
ScoreVector predict_scores(const LinearModel& model, const SparseVector& x);

// sigmoid: elementwise 1/(1+exp(-s)); softmax: exp(s-max)/sum.
ScoreVector calibrate(const ScoreVector& raw, Calibration mode);

enum class PredictionKind { kSingle, kTopK, kTwoLevel };

struct ScoredLabel {
    std::string label;
    double score = 0.0;
};

struct Prediction {
    PredictionKind kind = PredictionKind::kSingle;
    // kind == kSingle
    std::string label;
    double score = 0.0;
    // kind == kTopK, scores nonincreasing
    std::vector<ScoredLabel> topk;
    // kind == kTwoLevel
    std::string category;
    std::string subcategory;
    std::optional<std::string> canonical_category;
    std::optional<double> match_score;

    static Prediction single(std::string label, double score);
    static Prediction top_k(std::vector<ScoredLabel> items);
    static Prediction two_level(std::string category, std::string subcategory);

    void validate() const;
};

// Argmax label; ties go to the lower label index.
Prediction to_single(const ScoreVector& scores);

// k distinct labels by decreasing score, ties to the lower label index.
// Requires sigmoid-calibrated scores (independent per-class probabilities).
Prediction to_topk(const ScoreVector& scores, std::size_t k = 3);

// --- remote scorer -------------------------------------------------------

struct ScorerResponse {
    std::vector<double> scores;
    std::string calibration;
};

class ScorerBackend {
public:
    virtual ~ScorerBackend() = default;
    virtual ScorerResponse score(const std::string& text,
                                 const std::vector<std::string>& labels) = 0;
};

struct EndpointConfig {
    std::string url;
    int timeout_ms = 30000;
    int max_retries = 3;
    std::string bearer_token;  // sent as Authorization: Bearer when nonempty
};

// HTTP POST {"text","labels"} -> {"scores":[...],"calibration":"..."}.
class HttpScorerBackend : public ScorerBackend {
public:
    explicit HttpScorerBackend(EndpointConfig endpoint) : endpoint_(std::move(endpoint)) {}
    ScorerResponse score(const std::string& text, const std::vector<std::string>& labels) override;

private:
    EndpointConfig endpoint_;
};

// Asks the backend for one score per canonical label and validates the
// response against the ScoreVector invariants for its declared calibration.
ScoreVector remote_scores(ScorerBackend& backend, const std::string& text,
                          const LabelSet& label_set);

// --- model file ----------------------------------------------------------

struct ModelBundle {
    Vocabulary vocab;
    LinearModel model;
    std::string model_id = "linear-ovr/v1";
};

std::string serialize_model(const ModelBundle& bundle);
ModelBundle parse_model(const std::string& content, const std::string& origin);
void save_model(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace chapterkit
