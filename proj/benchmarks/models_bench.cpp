#include <benchmark/benchmark.h>

#include "sleepstage/dbn.hpp"
#include "sleepstage/hmm.hpp"
#include "sleepstage/lstm.hpp"
#include "sleepstage/random.hpp"

using namespace sleepstage;

namespace {

std::vector<SequenceWindow> windows(Eigen::Index in_dim, int seq_len, int count) {
  Rng rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<SequenceWindow> out(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    auto& w = out[static_cast<std::size_t>(k)];
    w.inputs.resize(in_dim, seq_len);
    for (Eigen::Index i = 0; i < w.inputs.size(); ++i) w.inputs.data()[i] = g(rng);
    w.label = k % 5;
  }
  return out;
}

}  // namespace

// One mini-batch of BPTT at the default 128/64/32 stack.
static void BM_LstmBptt(benchmark::State& state) {
  const int seq_len = static_cast<int>(state.range(0));
  const StackedLstm m = StackedLstm::init(5, {128, 64, 32}, 5, seq_len, 1);
  const auto batch = windows(5, seq_len, 500);
  for (auto _ : state) benchmark::DoNotOptimize(bptt_gradients(m, batch).loss);
  state.SetItemsProcessed(state.iterations() * 500);
}
BENCHMARK(BM_LstmBptt)->Arg(5)->Arg(15)->Unit(benchmark::kMillisecond);

static void BM_LstmForward(benchmark::State& state) {
  const StackedLstm m = StackedLstm::init(5, {128, 64, 32}, 5, 5, 1);
  const auto batch = windows(5, 5, 800);
  for (auto _ : state) benchmark::DoNotOptimize(forward_batch(m, batch));
  state.SetItemsProcessed(state.iterations() * 800);
}
BENCHMARK(BM_LstmForward)->Unit(benchmark::kMillisecond);

static void BM_DbnGradients(benchmark::State& state) {
  const DbnModel m = DbnModel::init(28, {200, 200}, 5, 1);
  const Eigen::MatrixXd x = (Eigen::MatrixXd::Random(28, 1000).array() + 1.0) / 2.0;
  std::vector<int> y(1000);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 5);
  for (auto _ : state) benchmark::DoNotOptimize(dbn_loss_gradients(m, x, y).loss);
}
BENCHMARK(BM_DbnGradients)->Unit(benchmark::kMillisecond);

static void BM_Viterbi(benchmark::State& state) {
  const auto T = state.range(0);
  std::vector<std::vector<int>> seq(1);
  for (Eigen::Index t = 0; t < T; ++t) seq[0].push_back(static_cast<int>((t / 7) % 5));
  const HmmModel hmm = estimate_transitions(seq);
  Eigen::MatrixXd post = Eigen::MatrixXd::Random(T, 5).cwiseAbs();
  post.array() += 0.01;
  for (Eigen::Index t = 0; t < T; ++t) post.row(t) /= post.row(t).sum();
  for (auto _ : state) benchmark::DoNotOptimize(viterbi(hmm, post).log_score);
  state.SetItemsProcessed(state.iterations() * T);
}
BENCHMARK(BM_Viterbi)->Arg(800)->Arg(8000);

BENCHMARK_MAIN();
