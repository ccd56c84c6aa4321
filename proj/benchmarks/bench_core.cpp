// Microbenchmarks for the hot paths of a desk run.

#include <benchmark/benchmark.h>

#include "mast/bleu.hpp"
#include "mast/experiment.hpp"
#include "mast/mat.hpp"

using namespace mast;

namespace {

struct DeskData {
  PreparedData data;
  ParallelData labeled;
  AgentModel agent;

  DeskData()
      : data(prepare_data(preset_config("desk"))),
        labeled(data.labeled(1)),
        agent(make_agent({0, "src"}, {1, "a"}, data.source_vocab, data.target_vocabs[0],
                         preset_config("desk").model, 1)) {}
};

const DeskData& desk() {
  static const DeskData d;
  return d;
}

void BM_TrainStep(benchmark::State& state) {
  const DeskData& d = desk();
  AgentModel agent = d.agent;
  const auto batch = static_cast<std::size_t>(state.range(0));
  const std::span<const TokenIds> src(d.labeled.src.data(), batch), tgt(d.labeled.tgt.data(), batch);
  auto params = agent.parameters();
  Rng rng(3);
  for (auto _ : state) {
    zero_grads(params);
    Graph g;
    Var loss = teacher_forced_loss(g, agent.encoder, agent.decoder, agent.dims, src, tgt, true, &rng);
    g.backward(loss);
    g.accumulate(params);
    benchmark::DoNotOptimize(g.scalar(loss));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_TrainStep)->Arg(4)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_GreedyDecode(benchmark::State& state) {
  const DeskData& d = desk();
  const auto batch = static_cast<std::size_t>(state.range(0));
  const std::span<const TokenIds> src(d.labeled.src.data(), batch);
  for (auto _ : state) benchmark::DoNotOptimize(greedy_decode(d.agent, src, 60));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_GreedyDecode)->Arg(1)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_MatDecode(benchmark::State& state) {
  const DeskData& d = desk();
  const AgentModel n1 = make_agent({0, "src"}, {2, "b"}, d.data.source_vocab, d.data.target_vocabs[1], d.agent.dims, 2);
  const AgentModel n2 = make_agent({0, "src"}, {3, "c"}, d.data.source_vocab, d.data.target_vocabs[2], d.agent.dims, 3);
  const MatSystem sys = make_system({&d.agent, &n1, &n2});
  ControllerParams c(d.data.source_vocab.size(), d.agent.target_vocab.size(), 2, ControllerConfig{});
  init_controller(c, 4);
  const std::vector<Sentence> src = d.data.rows(0, std::vector<std::size_t>(d.data.split.dev.begin(), d.data.split.dev.begin() + 64));
  MatDecodeOptions opts;
  opts.max_len = 60;
  for (auto _ : state) benchmark::DoNotOptimize(mat_decode(c, sys, src, opts));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(src.size()));
}
BENCHMARK(BM_MatDecode)->Unit(benchmark::kMillisecond);

void BM_CorpusBleu(benchmark::State& state) {
  const DeskData& d = desk();
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<std::size_t> idx(d.data.split.labeled_train.begin(), d.data.split.labeled_train.begin() + static_cast<long>(n));
  const auto hyps = d.data.rows(1, idx), refs = d.data.rows(2, idx);
  for (auto _ : state) benchmark::DoNotOptimize(bleu(hyps, refs));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_CorpusBleu)->Arg(200)->Arg(500);

}  // namespace

BENCHMARK_MAIN();
