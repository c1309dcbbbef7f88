#include <benchmark/benchmark.h>

#include <vector>

#include "chapterkit/layout.hpp"
#include "chapterkit/rng.hpp"

using namespace chapterkit;

namespace {

std::vector<OcrBlock> synthetic_blocks(int pages, int lines_per_page) {
    SplitMix64 rng(21);
    std::vector<OcrBlock> blocks;
    for (int p = 1; p <= pages; ++p) {
        for (int l = 0; l < lines_per_page; ++l) {
            OcrBlock b;
            b.id = "p" + std::to_string(p) + "l" + std::to_string(l);
            b.type = OcrBlockType::kLine;
            b.page = p;
            double y = rng.next_double() * 0.95;
            b.bbox = {0.1, y, 0.9, y + 0.02};
            b.text = "line text " + std::to_string(l);
            blocks.push_back(std::move(b));
        }
    }
    return blocks;
}

std::vector<LayoutRegion> synthetic_regions(int pages) {
    std::vector<LayoutRegion> regions;
    for (int p = 1; p <= pages; ++p) {
        regions.push_back({RegionLabel::kPageHeader, {0, 0, 612, 60}, p, 0.95});
        regions.push_back({RegionLabel::kPageFooter, {0, 740, 612, 792}, p, 0.95});
        regions.push_back({RegionLabel::kFigure, {100, 300, 500, 450}, p, 0.9});
    }
    return regions;
}

void BM_FilterBlocks(benchmark::State& state) {
    int pages = static_cast<int>(state.range(0));
    auto blocks = synthetic_blocks(pages, 40);
    auto regions = synthetic_regions(pages);
    std::vector<PageDims> dims(static_cast<std::size_t>(pages), {612, 792});
    for (auto _ : state) {
        benchmark::DoNotOptimize(filter_blocks(blocks, regions, dims, FilterPolicy{}));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(blocks.size()));
}
BENCHMARK(BM_FilterBlocks)->Arg(10)->Arg(100);

void BM_AssembleText(benchmark::State& state) {
    auto blocks = synthetic_blocks(static_cast<int>(state.range(0)), 40);
    for (auto _ : state) {
        benchmark::DoNotOptimize(assemble_text(blocks));
    }
}
BENCHMARK(BM_AssembleText)->Arg(10)->Arg(100);

void BM_Containment(benchmark::State& state) {
    BBox inner{0.1, 0.1, 0.3, 0.3};
    BBox outer{0.05, 0.05, 0.5, 0.5};
    for (auto _ : state) {
        benchmark::DoNotOptimize(containment(inner, outer));
    }
}
BENCHMARK(BM_Containment);

}  // namespace
