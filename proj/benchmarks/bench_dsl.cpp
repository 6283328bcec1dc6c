#include "bondflow/dsl.hpp"
#include "bondflow/models.hpp"

#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

namespace {

std::string corpus_text(const char* name) {
    std::ifstream in(std::string(BONDFLOW_BENCH_CORPUS_DIR) + "/" + name + ".bg");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void BM_ParseCorpus(benchmark::State& state) {
    const std::string text = corpus_text("lift_a_load");
    for (auto _ : state) benchmark::DoNotOptimize(bondflow::parse(text));
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ParseCorpus);

void BM_EmitCorpus(benchmark::State& state) {
    const bondflow::BondGraph g = bondflow::lift_a_load();
    for (auto _ : state) benchmark::DoNotOptimize(bondflow::emit(g));
}
BENCHMARK(BM_EmitCorpus);

// A chain of n linked 1-junctions, each carrying an I and an R.
void BM_ParseChain(benchmark::State& state) {
    std::ostringstream s;
    s << "model chain\nelement SE src { value = 1 }\n";
    const auto n = state.range(0);
    for (int64_t i = 0; i < n; ++i) {
        s << "element 1 j" << i << "\nelement I m" << i << " { k = 1 }\nelement R r" << i << " { k = 0.5 }\n";
        if (i > 0) s << "bond bj" << i << " j" << i - 1 << " -> j" << i << "\n";
        s << "bond bm" << i << " j" << i << " -> m" << i << "\nbond br" << i << " j" << i << " -> r" << i << "\n";
    }
    s << "bond b0 src -> j0\n";
    const std::string text = s.str();
    if (!bondflow::parse(text).ok()) state.SkipWithError("chain model does not validate");
    for (auto _ : state) benchmark::DoNotOptimize(bondflow::parse(text));
    state.SetComplexityN(n);
}
BENCHMARK(BM_ParseChain)->RangeMultiplier(4)->Range(4, 1024)->Complexity();

}  // namespace
