#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "chapterkit/classifier.hpp"
#include "chapterkit/rng.hpp"

using namespace chapterkit;

namespace {

std::vector<std::string> synthetic_corpus(std::size_t docs, std::size_t classes,
                                          std::vector<std::string>* labels) {
    SplitMix64 rng(11);
    std::vector<std::string> texts;
    for (std::size_t d = 0; d < docs; ++d) {
        std::size_t c = d % classes;
        std::string text;
        for (int w = 0; w < 60; ++w) {
            text += "w" + std::to_string(c) + "x" + std::to_string(rng.bounded(40));
            text += ' ';
        }
        texts.push_back(std::move(text));
        if (labels) labels->push_back("class" + std::to_string(c));
    }
    return texts;
}

void BM_BuildVocabulary(benchmark::State& state) {
    auto texts = synthetic_corpus(static_cast<std::size_t>(state.range(0)), 10, nullptr);
    for (auto _ : state) {
        benchmark::DoNotOptimize(Vocabulary::build(texts, 1, 50000));
    }
}
BENCHMARK(BM_BuildVocabulary)->Arg(100)->Arg(500);

void BM_Featurize(benchmark::State& state) {
    auto texts = synthetic_corpus(200, 10, nullptr);
    Vocabulary vocab = Vocabulary::build(texts, 1, 50000);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(featurize(texts[i % texts.size()], vocab));
        ++i;
    }
}
BENCHMARK(BM_Featurize);

void BM_TrainLinearOvr(benchmark::State& state) {
    std::vector<std::string> labels;
    auto texts = synthetic_corpus(static_cast<std::size_t>(state.range(0)), 10, &labels);
    Vocabulary vocab = Vocabulary::build(texts, 1, 50000);
    std::vector<SparseVector> features;
    for (const std::string& t : texts) features.push_back(featurize(t, vocab));
    std::vector<std::string> names;
    for (int c = 0; c < 10; ++c) names.push_back("class" + std::to_string(c));
    LabelSet label_set(names);
    TrainConfig cfg;
    cfg.epochs = 5;
    for (auto _ : state) {
        benchmark::DoNotOptimize(train_linear_ovr(features, labels, label_set, cfg));
    }
}
BENCHMARK(BM_TrainLinearOvr)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_PredictScores(benchmark::State& state) {
    std::vector<std::string> labels;
    auto texts = synthetic_corpus(300, 10, &labels);
    Vocabulary vocab = Vocabulary::build(texts, 1, 50000);
    std::vector<SparseVector> features;
    for (const std::string& t : texts) features.push_back(featurize(t, vocab));
    std::vector<std::string> names;
    for (int c = 0; c < 10; ++c) names.push_back("class" + std::to_string(c));
    LinearModel model = train_linear_ovr(features, labels, LabelSet(names), {});
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(predict_scores(model, features[i % features.size()]));
        ++i;
    }
}
BENCHMARK(BM_PredictScores);

}  // namespace
