#include <benchmark/benchmark.h>

#include <vector>

#include "chapterkit/eval.hpp"
#include "chapterkit/rng.hpp"

using namespace chapterkit;

namespace {

void BM_RocCurveAuc(benchmark::State& state) {
    SplitMix64 rng(1);
    std::size_t n = static_cast<std::size_t>(state.range(0));
    std::vector<double> scores(n);
    std::vector<int> truth(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = rng.next_double();
        truth[i] = static_cast<int>(rng.bounded(2));
    }
    truth[0] = 1;
    truth[1] = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(auc(roc_curve(scores, truth)));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_RocCurveAuc)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_ConfusionMetrics(benchmark::State& state) {
    SplitMix64 rng(2);
    std::vector<std::string> names;
    for (int i = 0; i < 47; ++i) names.push_back("c" + std::to_string(i));
    LabelSet labels(names);
    std::size_t n = static_cast<std::size_t>(state.range(0));
    std::vector<Prediction> preds;
    std::vector<std::string> truth;
    for (std::size_t i = 0; i < n; ++i) {
        preds.push_back(Prediction::single(names[rng.bounded(47)], 1.0));
        truth.push_back(names[rng.bounded(47)]);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(precision_recall_f1(confusion(preds, truth, labels)));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_ConfusionMetrics)->Arg(1000)->Arg(10000);

void BM_SimilarityHistogram(benchmark::State& state) {
    SplitMix64 rng(3);
    std::vector<double> values(static_cast<std::size_t>(state.range(0)));
    for (double& v : values) v = rng.next_double();
    for (auto _ : state) {
        benchmark::DoNotOptimize(similarity_histogram(values));
    }
}
BENCHMARK(BM_SimilarityHistogram)->Arg(10000);

}  // namespace
