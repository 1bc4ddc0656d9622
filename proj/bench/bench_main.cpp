#include <benchmark/benchmark.h>

#include <random>

#include "lmr/engine.hpp"

namespace {

std::vector<lmr::memory::SemanticDoc> random_docs(std::size_t n, std::size_t d) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<lmr::memory::SemanticDoc> docs(n);
    for (std::size_t i = 0; i < n; ++i) {
        docs[i].doc_id = "d" + std::to_string(i);
        docs[i].vector.resize(d);
        for (auto& x : docs[i].vector) x = u(rng);
    }
    return docs;
}

void score_docs(benchmark::State& state, bool parallel) {
    const auto n = static_cast<std::size_t>(state.range(0));
    auto docs = random_docs(n, 256);
    auto q = random_docs(1, 256).front().vector;
    for (auto _ : state) {
        auto s = parallel ? lmr::memory::score_all(docs, q) : lmr::memory::score_all_serial(docs, q);
        benchmark::DoNotOptimize(s.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

void BM_score_all_serial(benchmark::State& state) { score_docs(state, false); }
void BM_score_all(benchmark::State& state) { score_docs(state, true); }
BENCHMARK(BM_score_all_serial)->RangeMultiplier(8)->Range(64, 32768);
BENCHMARK(BM_score_all)->RangeMultiplier(8)->Range(64, 32768);

const lmr::Environment& env() {
    static const auto e = lmr::Environment::load(LMR_DEFAULT_DATA_DIR);
    return e;
}

void corpus_bench(benchmark::State& state, bool parallel) {
    auto corpus = env().corpus();
    lmr::eval::ScriptedJudge judge;
    lmr::RunSettings rs;
    for (auto _ : state) {
        auto r = lmr::run_bench(env(), corpus, rs, judge, parallel);
        benchmark::DoNotOptimize(r.aggregate.overall);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * corpus.size()));
}

void BM_bench_serial(benchmark::State& state) { corpus_bench(state, false); }
void BM_bench_parallel(benchmark::State& state) { corpus_bench(state, true); }
BENCHMARK(BM_bench_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bench_parallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
