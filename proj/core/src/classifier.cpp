#include "chapterkit/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"

#include "chapterkit/errors.hpp"
#include "chapterkit/io.hpp"
#include "chapterkit/rng.hpp"
#include "chapterkit/text.hpp"
#include "http_util.hpp"

namespace chapterkit {

void SparseVector::validate() const {
    std::size_t prev = 0;
    bool first = true;
    for (const auto& [idx, w] : entries) {
        if (!first && idx <= prev) {
            throw ValidationError("sparse vector indices not strictly ascending");
        }
        if (idx >= dimension) {
            throw ValidationError("sparse index " + std::to_string(idx) + " >= dimension " +
                                  std::to_string(dimension));
        }
        if (!std::isfinite(w)) throw ValidationError("non-finite sparse weight");
        prev = idx;
        first = false;
    }
}

double SparseVector::l2_norm() const {
    double sum = 0.0;
    for (const auto& [idx, w] : entries) sum += w * w;
    return std::sqrt(sum);
}

// --- Vocabulary ---------------------------------------------------------------

Vocabulary Vocabulary::build(const std::vector<std::string>& texts, std::size_t min_df,
                             std::size_t max_features) {
    if (texts.empty()) throw ValidationError("build_vocabulary: no texts");
    if (min_df < 1) throw ValidationError("build_vocabulary: min_df must be >= 1");
    if (max_features < 1) throw ValidationError("build_vocabulary: max_features must be >= 1");

    std::map<std::string, std::size_t> df;
    bool any_token = false;
    for (const std::string& text : texts) {
        std::set<std::string> seen;
        for (std::string& tok : tokenize(text)) seen.insert(std::move(tok));
        if (!seen.empty()) any_token = true;
        for (const std::string& tok : seen) ++df[tok];
    }
    if (!any_token) throw ValidationError("build_vocabulary: all texts are empty");

    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [term, count] : df) {
        if (count >= min_df) kept.emplace_back(term, count);
    }
    // Highest document frequency first, ties to the lexicographically
    // smaller term (the map iteration already orders terms, so stable sort
    // keeps that order inside equal-df runs).
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (kept.size() > max_features) kept.resize(max_features);
    // Index assignment is lexicographic over the surviving terms.
    std::sort(kept.begin(), kept.end());

    std::vector<std::string> terms;
    std::vector<std::size_t> freqs;
    terms.reserve(kept.size());
    freqs.reserve(kept.size());
    for (auto& [term, count] : kept) {
        terms.push_back(std::move(term));
        freqs.push_back(count);
    }
    return from_parts(std::move(terms), std::move(freqs), texts.size());
}

Vocabulary Vocabulary::from_parts(std::vector<std::string> terms, std::vector<std::size_t> doc_freq,
                                  std::size_t doc_count) {
    if (terms.size() != doc_freq.size()) {
        throw ValidationError("vocabulary terms/doc_freq size mismatch");
    }
    Vocabulary v;
    v.terms_ = std::move(terms);
    v.doc_freq_ = std::move(doc_freq);
    v.doc_count_ = doc_count;
    for (std::size_t i = 0; i < v.terms_.size(); ++i) {
        if (v.doc_freq_[i] < 1) {
            throw ValidationError("vocabulary term \"" + v.terms_[i] + "\" has zero doc_freq");
        }
        if (!v.index_.emplace(v.terms_[i], i).second) {
            throw ValidationError("duplicate vocabulary term \"" + v.terms_[i] + "\"");
        }
    }
    return v;
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view term) const {
    auto it = index_.find(std::string(term));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

SparseVector featurize(const std::string& text, const Vocabulary& vocab) {
    std::map<std::size_t, double> tf;
    for (const std::string& tok : tokenize(text)) {
        if (auto idx = vocab.index_of(tok)) ++tf[*idx];
    }

    SparseVector x;
    x.dimension = vocab.size();
    x.entries.reserve(tf.size());
    double n = static_cast<double>(vocab.doc_count());
    double norm_sq = 0.0;
    for (const auto& [idx, count] : tf) {
        double idf = std::log((1.0 + n) / (1.0 + static_cast<double>(vocab.doc_freq(idx)))) + 1.0;
        double w = count * idf;
        x.entries.emplace_back(idx, w);
        norm_sq += w * w;
    }
    if (norm_sq > 0.0) {
        double inv = 1.0 / std::sqrt(norm_sq);
        for (auto& [idx, w] : x.entries) w *= inv;
    }
    return x;
}

// --- training -------------------------------------------------------------------

namespace {

double sparse_dot(const std::vector<double>& dense, const SparseVector& x) {
    double sum = 0.0;
    for (const auto& [idx, w] : x.entries) sum += dense[idx] * w;
    return sum;
}

}  // namespace

LinearModel train_linear_ovr(const std::vector<SparseVector>& features,
                             const std::vector<std::string>& labels, const LabelSet& label_set,
                             const TrainConfig& config) {
    if (features.size() != labels.size()) {
        throw ValidationError("train_linear_ovr: features/labels size mismatch");
    }
    if (features.size() < 2) throw ValidationError("train_linear_ovr: need at least 2 examples");
    if (label_set.empty()) throw ValidationError("train_linear_ovr: empty label set");
    if (config.epochs < 1) throw ValidationError("train_linear_ovr: epochs must be >= 1");
    if (!(config.learning_rate > 0.0)) {
        throw ValidationError("train_linear_ovr: learning_rate must be positive");
    }
    if (config.lambda < 0.0) throw ValidationError("train_linear_ovr: negative lambda");

    std::size_t dim = features.front().dimension;
    std::vector<std::size_t> label_idx(labels.size());
    std::vector<std::size_t> class_counts(label_set.size(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        features[i].validate();
        if (features[i].dimension != dim) {
            throw ValidationError("train_linear_ovr: inconsistent feature dimensions");
        }
        auto idx = label_set.index_of(labels[i]);
        if (!idx) throw ValidationError("train_linear_ovr: label \"" + labels[i] +
                                        "\" not in label set");
        label_idx[i] = *idx;
        ++class_counts[*idx];
    }
    for (std::size_t c = 0; c < label_set.size(); ++c) {
        if (class_counts[c] == 0) {
            throw ValidationError("train_linear_ovr: class \"" + label_set.at(c) +
                                  "\" absent from training data");
        }
    }

    LinearModel model;
    model.label_set = label_set;
    model.dimension = dim;
    model.config = config;
    model.weights.assign(label_set.size(), std::vector<double>(dim + 1, 0.0));

    for (std::size_t c = 0; c < label_set.size(); ++c) {
        // w is kept as scale * v so the L2 shrink step stays O(1).
        std::vector<double> v(dim, 0.0);
        double scale = 1.0;
        double bias = 0.0;
        const double eta = config.learning_rate;

        SplitMix64 rng(config.seed ^ fnv1a64(&c, sizeof(c)) ^ 0x5bd1e995u);
        std::vector<std::size_t> order(features.size());
        std::iota(order.begin(), order.end(), 0);

        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            deterministic_shuffle(order, rng);
            for (std::size_t i : order) {
                double y = label_idx[i] == c ? 1.0 : -1.0;
                double margin = scale * sparse_dot(v, features[i]) + bias;
                scale *= (1.0 - eta * config.lambda);
                if (scale < 1e-9) {  // refold before underflow
                    for (double& w : v) w *= scale;
                    scale = 1.0;
                }
                if (y * margin < 1.0) {
                    double step = eta * y / scale;
                    for (const auto& [idx, w] : features[i].entries) v[idx] += step * w;
                    bias += eta * y;
                }
            }
        }

        std::vector<double>& w = model.weights[c];
        for (std::size_t d = 0; d < dim; ++d) w[d] = scale * v[d];
        w[dim] = bias;
        for (double x : w) {
            if (!std::isfinite(x)) {
                throw ValidationError("training diverged for class \"" + label_set.at(c) +
                                      "\"; lower the learning rate");
            }
        }
    }
    return model;
}

double ovr_objective(const LinearModel& model, const std::vector<SparseVector>& features,
                     const std::vector<std::string>& labels) {
    if (features.size() != labels.size() || features.empty()) {
        throw ValidationError("ovr_objective: bad inputs");
    }
    double total = 0.0;
    for (std::size_t c = 0; c < model.label_set.size(); ++c) {
        const std::vector<double>& w = model.weights[c];
        double reg = 0.0;
        for (std::size_t d = 0; d < model.dimension; ++d) reg += w[d] * w[d];
        reg *= 0.5 * model.config.lambda;

        double hinge = 0.0;
        for (std::size_t i = 0; i < features.size(); ++i) {
            double y = labels[i] == model.label_set.at(c) ? 1.0 : -1.0;
            double margin = sparse_dot(w, features[i]) + w[model.dimension];
            hinge += std::max(0.0, 1.0 - y * margin);
        }
        total += reg + hinge / static_cast<double>(features.size());
    }
    return total / static_cast<double>(model.label_set.size());
}

// --- scoring --------------------------------------------------------------------

std::string_view to_string(Calibration c) {
    switch (c) {
        case Calibration::kRawMargin: return "raw_margin";
        case Calibration::kSigmoid: return "sigmoid";
        case Calibration::kSoftmax: return "softmax";
    }
    return "?";
}

Calibration calibration_from_string(std::string_view s) {
    if (s == "raw_margin") return Calibration::kRawMargin;
    if (s == "sigmoid") return Calibration::kSigmoid;
    if (s == "softmax") return Calibration::kSoftmax;
    throw ParseError("unknown calibration \"" + std::string(s) + "\"");
}

void ScoreVector::validate() const {
    if (scores.size() != labels.size()) {
        throw ValidationError("score vector length " + std::to_string(scores.size()) +
                              " != label count " + std::to_string(labels.size()));
    }
    double sum = 0.0;
    for (double s : scores) {
        if (!std::isfinite(s)) throw ValidationError("non-finite score");
        if (calibration == Calibration::kSigmoid && !(s > 0.0 && s < 1.0)) {
            throw ValidationError("sigmoid score outside (0,1)");
        }
        if (calibration == Calibration::kSoftmax && !(s > 0.0 && s < 1.0)) {
            throw ValidationError("softmax score outside (0,1)");
        }
        sum += s;
    }
    if (calibration == Calibration::kSoftmax && std::abs(sum - 1.0) > 1e-9) {
        throw ValidationError("softmax scores sum to " + std::to_string(sum));
    }
}

ScoreVector predict_scores(const LinearModel& model, const SparseVector& x) {
    if (x.dimension != model.dimension) {
        throw ValidationError("feature dimension " + std::to_string(x.dimension) +
                              " != model dimension " + std::to_string(model.dimension));
    }
    x.validate();
    ScoreVector sv;
    sv.labels = model.label_set;
    sv.calibration = Calibration::kRawMargin;
    sv.scores.reserve(model.weights.size());
    for (const std::vector<double>& w : model.weights) {
        sv.scores.push_back(sparse_dot(w, x) + w[model.dimension]);
    }
    return sv;
}

ScoreVector calibrate(const ScoreVector& raw, Calibration mode) {
    if (raw.calibration != Calibration::kRawMargin) {
        throw ValidationError("calibrate expects raw margins");
    }
    if (mode == Calibration::kRawMargin) return raw;
    ScoreVector out;
    out.labels = raw.labels;
    out.calibration = mode;
    out.scores.resize(raw.scores.size());
    // Extreme margins round to exactly 0 or 1 in doubles; nudge back inside
    // the open interval the calibrations promise.
    const double lo = std::numeric_limits<double>::min();
    const double hi = std::nextafter(1.0, 0.0);
    if (mode == Calibration::kSigmoid) {
        for (std::size_t i = 0; i < raw.scores.size(); ++i) {
            out.scores[i] = std::clamp(1.0 / (1.0 + std::exp(-raw.scores[i])), lo, hi);
        }
    } else {
        double mx = *std::max_element(raw.scores.begin(), raw.scores.end());
        double sum = 0.0;
        for (std::size_t i = 0; i < raw.scores.size(); ++i) {
            out.scores[i] = std::exp(raw.scores[i] - mx);
            sum += out.scores[i];
        }
        for (double& s : out.scores) s = std::clamp(s / sum, lo, hi);
    }
    return out;
}

// --- predictions ------------------------------------------------------------------

Prediction Prediction::single(std::string label, double score) {
    Prediction p;
    p.kind = PredictionKind::kSingle;
    p.label = std::move(label);
    p.score = score;
    p.validate();
    return p;
}

Prediction Prediction::top_k(std::vector<ScoredLabel> items) {
    Prediction p;
    p.kind = PredictionKind::kTopK;
    p.topk = std::move(items);
    p.validate();
    return p;
}

Prediction Prediction::two_level(std::string category, std::string subcategory) {
    Prediction p;
    p.kind = PredictionKind::kTwoLevel;
    p.category = std::move(category);
    p.subcategory = std::move(subcategory);
    p.validate();
    return p;
}

void Prediction::validate() const {
    switch (kind) {
        case PredictionKind::kSingle:
            if (label.empty()) throw ValidationError("single prediction with empty label");
            if (!topk.empty() || !category.empty() || !subcategory.empty()) {
                throw ValidationError("single prediction carries foreign fields");
            }
            break;
        case PredictionKind::kTopK: {
            if (topk.empty()) throw ValidationError("top-k prediction with no labels");
            if (!label.empty() || !category.empty() || !subcategory.empty()) {
                throw ValidationError("top-k prediction carries foreign fields");
            }
            std::set<std::string> seen;
            for (std::size_t i = 0; i < topk.size(); ++i) {
                if (!seen.insert(topk[i].label).second) {
                    throw ValidationError("top-k labels not distinct");
                }
                if (i > 0 && topk[i].score > topk[i - 1].score) {
                    throw ValidationError("top-k scores not nonincreasing");
                }
            }
            break;
        }
        case PredictionKind::kTwoLevel:
            if (category.empty()) throw ValidationError("two-level prediction with empty category");
            if (!label.empty() || !topk.empty()) {
                throw ValidationError("two-level prediction carries foreign fields");
            }
            if (match_score && !canonical_category) {
                throw ValidationError("match_score without canonical mapping");
            }
            break;
    }
}

Prediction to_single(const ScoreVector& scores) {
    scores.validate();
    if (scores.scores.empty()) throw ValidationError("to_single: empty score vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.scores.size(); ++i) {
        if (scores.scores[i] > scores.scores[best]) best = i;  // ties keep the lower index
    }
    return Prediction::single(scores.labels.at(best), scores.scores[best]);
}

Prediction to_topk(const ScoreVector& scores, std::size_t k) {
    scores.validate();
    if (scores.calibration != Calibration::kSigmoid) {
        throw ValidationError("to_topk expects sigmoid-calibrated scores");
    }
    if (k < 1) throw ValidationError("to_topk: k must be >= 1");
    if (k > scores.scores.size()) {
        throw ValidationError("to_topk: k=" + std::to_string(k) + " exceeds " +
                              std::to_string(scores.scores.size()) + " labels");
    }
    std::vector<std::size_t> idx(scores.scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return scores.scores[a] > scores.scores[b];  // stable: ties keep lower index first
    });
    std::vector<ScoredLabel> items;
    items.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        items.push_back({scores.labels.at(idx[i]), scores.scores[idx[i]]});
    }
    return Prediction::top_k(std::move(items));
}

// --- remote scorer ------------------------------------------------------------------

ScorerResponse HttpScorerBackend::score(const std::string& text,
                                        const std::vector<std::string>& labels) {
    nlohmann::json body = {{"text", text}, {"labels", labels}};
    nlohmann::json res = detail::post_json(endpoint_, body);
    ScorerResponse out;
    try {
        out.scores = res.at("scores").get<std::vector<double>>();
        out.calibration = res.at("calibration").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ContractError("scorer response missing fields: " + std::string(e.what()));
    }
    return out;
}

ScoreVector remote_scores(ScorerBackend& backend, const std::string& text,
                          const LabelSet& label_set) {
    if (label_set.empty()) throw ValidationError("remote_scores: empty label set");
    ScorerResponse res = backend.score(text, label_set.labels());
    if (res.scores.size() != label_set.size()) {
        throw ContractError("scorer returned " + std::to_string(res.scores.size()) +
                            " scores for " + std::to_string(label_set.size()) + " labels");
    }
    ScoreVector sv;
    sv.labels = label_set;
    sv.scores = std::move(res.scores);
    try {
        sv.calibration = calibration_from_string(res.calibration);
    } catch (const ParseError& e) {
        throw ContractError(e.what());
    }
    try {
        sv.validate();
    } catch (const ValidationError& e) {
        throw ContractError(std::string("scorer response violates invariants: ") + e.what());
    }
    return sv;
}

// --- model file ---------------------------------------------------------------------

namespace {
constexpr int kModelFormatVersion = 1;
}

std::string serialize_model(const ModelBundle& bundle) {
    nlohmann::ordered_json j;
    j["format"] = "chapterkit-linear-model";
    j["format_version"] = kModelFormatVersion;
    j["model_id"] = bundle.model_id;
    j["labels"] = bundle.model.label_set.labels();
    j["config"] = {{"epochs", bundle.model.config.epochs},
                   {"learning_rate", bundle.model.config.learning_rate},
                   {"lambda", bundle.model.config.lambda},
                   {"seed", bundle.model.config.seed}};
    j["vocabulary"] = {{"doc_count", bundle.vocab.doc_count()},
                       {"terms", bundle.vocab.terms()}};
    std::vector<std::size_t> freqs;
    freqs.reserve(bundle.vocab.size());
    for (std::size_t i = 0; i < bundle.vocab.size(); ++i) freqs.push_back(bundle.vocab.doc_freq(i));
    j["vocabulary"]["doc_freq"] = freqs;
    j["dimension"] = bundle.model.dimension;
    j["weights"] = bundle.model.weights;
    return j.dump(2) + "\n";
}

ModelBundle parse_model(const std::string& content, const std::string& origin) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(content);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "chapterkit-linear-model" ||
            j.at("format_version").get<int>() != kModelFormatVersion) {
            throw ParseError(origin + ": unsupported model format");
        }
        ModelBundle b;
        b.model_id = j.value("model_id", std::string("linear-ovr/v1"));
        b.model.label_set = LabelSet(j.at("labels").get<std::vector<std::string>>());
        b.model.config.epochs = j.at("config").at("epochs").get<int>();
        b.model.config.learning_rate = j.at("config").at("learning_rate").get<double>();
        b.model.config.lambda = j.at("config").at("lambda").get<double>();
        b.model.config.seed = j.at("config").at("seed").get<std::uint64_t>();
        b.vocab = Vocabulary::from_parts(
            j.at("vocabulary").at("terms").get<std::vector<std::string>>(),
            j.at("vocabulary").at("doc_freq").get<std::vector<std::size_t>>(),
            j.at("vocabulary").at("doc_count").get<std::size_t>());
        b.model.dimension = j.at("dimension").get<std::size_t>();
        b.model.weights = j.at("weights").get<std::vector<std::vector<double>>>();
        if (b.model.dimension != b.vocab.size()) {
            throw ParseError(origin + ": dimension does not match vocabulary size");
        }
        if (b.model.weights.size() != b.model.label_set.size()) {
            throw ParseError(origin + ": one weight vector per label required");
        }
        for (const auto& w : b.model.weights) {
            if (w.size() != b.model.dimension + 1) {
                throw ParseError(origin + ": weight vector length must be dimension+1");
            }
            for (double x : w) {
                if (!std::isfinite(x)) throw ParseError(origin + ": non-finite weight");
            }
        }
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
}

void save_model(const std::filesystem::path& path, const ModelBundle& bundle) {
    write_file_atomic(path, serialize_model(bundle));
}

ModelBundle load_model(const std::filesystem::path& path) {
    return parse_model(read_file(path), path.string());
}

}  // namespace chapterkit
