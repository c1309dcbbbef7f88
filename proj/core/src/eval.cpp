#include "chapterkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "chapterkit/errors.hpp"
#include "chapterkit/text.hpp"

namespace chapterkit {

namespace {

// Shortest representation that round-trips a double, for CSV exports.
std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    std::string wide = os.str();
    for (int prec = 1; prec < 17; ++prec) {
        std::ostringstream trial;
        trial.precision(prec);
        trial << v;
        if (std::stod(trial.str()) == v) return trial.str();
    }
    return wide;
}

double safe_ratio(std::size_t num, std::size_t den) {
    // Zero denominators yield 0 by convention.
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(double p, double r) { return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

// --- confusion and P/R/F1 -----------------------------------------------------

ConfusionCounts confusion(const std::vector<Prediction>& preds,
                          const std::vector<std::string>& truth, const LabelSet& label_set) {
    if (preds.size() != truth.size()) {
        throw ValidationError("confusion: " + std::to_string(preds.size()) +
                              " predictions vs " + std::to_string(truth.size()) + " truths");
    }
    if (preds.empty()) throw ValidationError("confusion: no instances");
    if (label_set.empty()) throw ValidationError("confusion: empty label set");

    ConfusionCounts c;
    c.labels = label_set;
    c.per_class.assign(label_set.size(), {});
    c.n_instances = preds.size();

    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i].kind != PredictionKind::kSingle) {
            throw ValidationError("confusion expects single-label predictions");
        }
        auto p = label_set.index_of(preds[i].label);
        if (!p) {
            throw ValidationError("prediction label \"" + preds[i].label +
                                  "\" not in label set");
        }
        auto t = label_set.index_of(truth[i]);
        if (!t) {
            throw ValidationError("truth label \"" + truth[i] + "\" not in label set");
        }
        for (std::size_t cls = 0; cls < label_set.size(); ++cls) {
            bool predicted = cls == *p;
            bool actual = cls == *t;
            if (predicted && actual) ++c.per_class[cls].tp;
            else if (predicted && !actual) ++c.per_class[cls].fp;
            else if (!predicted && actual) ++c.per_class[cls].fn;
            else ++c.per_class[cls].tn;
        }
    }
    return c;
}

MetricsReport precision_recall_f1(const ConfusionCounts& counts) {
    if (counts.per_class.size() != counts.labels.size() || counts.per_class.empty()) {
        throw ValidationError("precision_recall_f1: malformed counts");
    }
    MetricsReport rep;
    rep.n_instances = counts.n_instances;
    rep.label_set_id = counts.labels.id();

    std::size_t tp_sum = 0, fp_sum = 0, fn_sum = 0;
    for (std::size_t i = 0; i < counts.per_class.size(); ++i) {
        const ClassCounts& cc = counts.per_class[i];
        if (cc.tp + cc.fp + cc.fn + cc.tn != counts.n_instances) {
            throw ValidationError("class \"" + counts.labels.at(i) +
                                  "\" counts do not sum to n_instances");
        }
        ClassMetrics m;
        m.label = counts.labels.at(i);
        m.precision = safe_ratio(cc.tp, cc.tp + cc.fp);
        m.recall = safe_ratio(cc.tp, cc.tp + cc.fn);
        m.f1 = f1_of(m.precision, m.recall);
        rep.per_class.push_back(std::move(m));
        rep.macro_precision += rep.per_class.back().precision;
        rep.macro_recall += rep.per_class.back().recall;
        rep.macro_f1 += rep.per_class.back().f1;
        tp_sum += cc.tp;
        fp_sum += cc.fp;
        fn_sum += cc.fn;
    }
    const double k = static_cast<double>(counts.per_class.size());
    rep.macro_precision /= k;
    rep.macro_recall /= k;
    rep.macro_f1 /= k;
    rep.micro_precision = safe_ratio(tp_sum, tp_sum + fp_sum);
    rep.micro_recall = safe_ratio(tp_sum, tp_sum + fn_sum);
    rep.micro_f1 = f1_of(rep.micro_precision, rep.micro_recall);
    rep.accuracy = safe_ratio(tp_sum, counts.n_instances);
    return rep;
}

double topk_accuracy(const std::vector<Prediction>& preds,
                     const std::vector<std::string>& truth) {
    if (preds.size() != truth.size() || preds.empty()) {
        throw ValidationError("topk_accuracy: length mismatch or empty input");
    }
    std::size_t k = 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i].kind != PredictionKind::kTopK) {
            throw ValidationError("topk_accuracy expects top-k predictions");
        }
        if (i == 0) {
            k = preds[i].topk.size();
        } else if (preds[i].topk.size() != k) {
            throw ValidationError("topk_accuracy: mixed k (" + std::to_string(k) + " vs " +
                                  std::to_string(preds[i].topk.size()) + ")");
        }
        for (const ScoredLabel& sl : preds[i].topk) {
            if (sl.label == truth[i]) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

// --- ROC / AUC ------------------------------------------------------------------

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& truth_binary) {
    if (scores.size() != truth_binary.size() || scores.empty()) {
        throw ValidationError("roc_curve: length mismatch or empty input");
    }
    std::size_t positives = 0;
    for (double s : scores) {
        if (!std::isfinite(s)) throw ValidationError("roc_curve: non-finite score");
    }
    for (int t : truth_binary) {
        if (t != 0 && t != 1) throw ValidationError("roc_curve: truth values must be 0/1");
        positives += static_cast<std::size_t>(t);
    }
    std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw ValidationError("roc_curve: need at least one positive and one negative instance");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({0.0, 0.0});
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());

    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        double threshold = scores[order[i]];
        // Group ties: one point per unique threshold.
        while (i < order.size() && scores[order[i]] == threshold) {
            if (truth_binary[order[i]] == 1) ++tp;
            else ++fp;
            ++i;
        }
        curve.points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                                static_cast<double>(tp) / static_cast<double>(positives)});
        curve.thresholds.push_back(threshold);
    }
    // The sweep ends with everything predicted positive, i.e. (1,1).
    return curve;
}

double auc(const RocCurve& curve) {
    if (curve.points.size() < 2) throw ValidationError("auc: curve needs at least two points");
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const RocPoint& a = curve.points[i - 1];
        const RocPoint& b = curve.points[i];
        if (b.fpr < a.fpr) throw ValidationError("auc: FPR not nondecreasing");
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    }
    return area;
}

// --- similarity -------------------------------------------------------------------

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.values.size() != v.values.size() || u.values.empty()) {
        throw ValidationError("cosine: dimension mismatch (" + std::to_string(u.values.size()) +
                              " vs " + std::to_string(v.values.size()) + ")");
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        dot += u.values[i] * v.values[i];
        nu += u.values[i] * u.values[i];
        nv += v.values[i] * v.values[i];
    }
    if (nu == 0.0 || nv == 0.0) {
        throw ValidationError("cosine: undefined for a zero vector");
    }
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

SimilarityHistogram similarity_histogram(const std::vector<double>& values) {
    SimilarityHistogram h;
    h.total = values.size();
    for (double v : values) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ValidationError("similarity value " + std::to_string(v) + " outside [0,1]");
        }
        std::size_t bin;
        if (v < 0.2) bin = 0;
        else if (v < 0.4) bin = 1;
        else if (v < 0.6) bin = 2;
        else if (v < 0.8) bin = 3;
        else bin = 4;  // final bin closed at 1.0
        ++h.counts[bin];
        if (v >= 0.6) ++h.count_at_or_above_06;
    }
    h.fraction_at_or_above_06 =
        h.total == 0 ? 0.0
                     : static_cast<double>(h.count_at_or_above_06) / static_cast<double>(h.total);
    return h;
}

double run_stddev(const std::vector<double>& values) {
    if (values.size() < 2) throw ValidationError("run_stddev: need at least 2 values");
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) return 0.0;  // identical runs, exactly zero
    double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                  static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    return std::sqrt(sq / static_cast<double>(values.size()));  // population stddev
}

// --- exports ----------------------------------------------------------------------

std::string metrics_to_json(const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["n_instances"] = report.n_instances;
    j["accuracy"] = report.accuracy;
    j["averaging"] = report.averaging;
    j["macro"] = {{"precision", report.macro_precision},
                  {"recall", report.macro_recall},
                  {"f1", report.macro_f1}};
    j["micro"] = {{"precision", report.micro_precision},
                  {"recall", report.micro_recall},
                  {"f1", report.micro_f1}};
    j["per_class"] = nlohmann::ordered_json::array();
    for (const ClassMetrics& m : report.per_class) {
        j["per_class"].push_back({{"class", m.label},
                                  {"precision", m.precision},
                                  {"recall", m.recall},
                                  {"f1", m.f1}});
    }
    j["label_set_id"] = report.label_set_id;
    j["run"] = {{"model_id", report.meta.model_id},
                {"prompt_id", report.meta.prompt_id},
                {"seed", report.meta.seed},
                {"timestamp", report.meta.timestamp}};
    return j.dump(2) + "\n";
}

MetricsReport metrics_from_json(const std::string& content, const std::string& origin) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(content);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
    MetricsReport rep;
    try {
        rep.n_instances = j.at("n_instances").get<std::size_t>();
        rep.accuracy = j.at("accuracy").get<double>();
        rep.averaging = j.value("averaging", std::string("macro"));
        rep.macro_precision = j.at("macro").at("precision").get<double>();
        rep.macro_recall = j.at("macro").at("recall").get<double>();
        rep.macro_f1 = j.at("macro").at("f1").get<double>();
        rep.micro_precision = j.at("micro").at("precision").get<double>();
        rep.micro_recall = j.at("micro").at("recall").get<double>();
        rep.micro_f1 = j.at("micro").at("f1").get<double>();
        for (const auto& m : j.at("per_class")) {
            rep.per_class.push_back({m.at("class").get<std::string>(),
                                     m.at("precision").get<double>(),
                                     m.at("recall").get<double>(), m.at("f1").get<double>()});
        }
        rep.label_set_id = j.value("label_set_id", std::string());
        if (j.contains("run")) {
            rep.meta.model_id = j["run"].value("model_id", std::string());
            rep.meta.prompt_id = j["run"].value("prompt_id", std::string());
            rep.meta.seed = j["run"].value("seed", std::uint64_t{0});
            rep.meta.timestamp = j["run"].value("timestamp", std::string());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    return rep;
}

std::string metrics_to_csv(const MetricsReport& report) {
    std::string out = "class,precision,recall,f1\n";
    for (const ClassMetrics& m : report.per_class) {
        out += csv_escape(m.label) + "," + format_double(m.precision) + "," +
               format_double(m.recall) + "," + format_double(m.f1) + "\n";
    }
    out += "__macro__," + format_double(report.macro_precision) + "," +
           format_double(report.macro_recall) + "," + format_double(report.macro_f1) + "\n";
    out += "__micro__," + format_double(report.micro_precision) + "," +
           format_double(report.micro_recall) + "," + format_double(report.micro_f1) + "\n";
    out += "__accuracy__," + format_double(report.accuracy) + ",," + "\n";
    return out;
}

std::string roc_to_csv(const RocCurve& curve) {
    std::string out = "fpr,tpr,threshold\n";
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        double t = curve.thresholds.at(i);
        out += format_double(curve.points[i].fpr) + "," + format_double(curve.points[i].tpr) +
               "," + (std::isinf(t) ? std::string("inf") : format_double(t)) + "\n";
    }
    return out;
}

std::string histogram_to_csv(const SimilarityHistogram& hist) {
    std::string out = "bin_low,bin_high,count\n";
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        out += format_double(SimilarityHistogram::kEdges[i]) + "," +
               format_double(SimilarityHistogram::kEdges[i + 1]) + "," +
               std::to_string(hist.counts[i]) + "\n";
    }
    return out;
}

}  // namespace chapterkit
