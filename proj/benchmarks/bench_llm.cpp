#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "chapterkit/llm.hpp"
#include "chapterkit/rng.hpp"

using namespace chapterkit;

namespace {

LabelSet bench_labels() {
    std::vector<std::string> names;
    for (int i = 0; i < 47; ++i) names.push_back("Subject area " + std::to_string(i));
    return LabelSet(names);
}

void BM_RenderPrompt(benchmark::State& state) {
    PromptSpec spec;
    spec.label_inventory = bench_labels();
    std::string chapter(static_cast<std::size_t>(state.range(0)), 'x');
    for (auto _ : state) {
        benchmark::DoNotOptimize(render_prompt(spec, chapter));
    }
}
BENCHMARK(BM_RenderPrompt)->Arg(1000)->Arg(100000);

void BM_TrigramEmbed(benchmark::State& state) {
    TrigramEmbedder emb;
    std::string text = "political science and international relations";
    for (auto _ : state) {
        benchmark::DoNotOptimize(emb.embed(text));
    }
}
BENCHMARK(BM_TrigramEmbed);

void BM_NormalizeLabel(benchmark::State& state) {
    TrigramEmbedder emb;
    LabelSet labels = bench_labels();
    for (auto _ : state) {
        benchmark::DoNotOptimize(normalize_label("subject area 12 studies", labels, emb));
    }
}
BENCHMARK(BM_NormalizeLabel);

void BM_ParseTwoLevel(benchmark::State& state) {
    std::string raw =
        "I classified the text into the following category and subcategory: "
        "Category: Electrical and Computer Engineering "
        "Subcategory: Materials Science and Engineering";
    for (auto _ : state) {
        benchmark::DoNotOptimize(parse_two_level(raw));
    }
}
BENCHMARK(BM_ParseTwoLevel);

}  // namespace
