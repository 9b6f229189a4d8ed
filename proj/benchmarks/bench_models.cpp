#include <benchmark/benchmark.h>

#include "mbridge/captioner/captioner.hpp"
#include "mbridge/synthdata/synthdata.hpp"
#include "mbridge/textae/autoencoder.hpp"

using namespace mbridge;

namespace {

std::vector<CaptionSample> samples(std::size_t n) {
  synthdata::CorpusConfig cfg;
  cfg.n_scenes = n;
  return synthdata::generate_samples(cfg, synthdata::synthetic_vocabulary());
}

void BM_AutoEncoderBatch(benchmark::State& state) {
  const auto vocab = synthdata::synthetic_vocabulary();
  textae::AutoEncoderConfig cfg;
  cfg.vocab_size = vocab.size();
  textae::AutoEncoderModel model(cfg);
  Rng rng(1);
  model.init_uniform(rng, 0.5);
  // Sixteen copies of one caption form a valid equal-length batch.
  const auto targets = caption_targets(samples(1).front().caption, cfg.max_len);
  const std::vector<const std::vector<TokenId>*> batch(16, &targets);
  const auto params = model.parameters();
  for (auto _ : state) {
    zero_grads(params);
    benchmark::DoNotOptimize(textae::autoencoder_batch(model, batch, state.range(0) != 0));
  }
}
BENCHMARK(BM_AutoEncoderBatch)->Arg(0)->Arg(1);

void BM_GreedyDecode(benchmark::State& state) {
  const auto data = samples(8);
  captioner::CaptionerConfig cfg;
  cfg.vocab_size = synthdata::synthetic_vocabulary().size();
  cfg.attention = state.range(0) != 0;
  auto models = captioner::init_models(cfg, 32, 64, true, 1);
  for (auto _ : state) {
    for (const auto& s : data) benchmark::DoNotOptimize(captioner::greedy_decode(models.cap, &*models.mtm, s.regions));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_GreedyDecode)->Arg(0)->Arg(1);

void BM_BeamDecode(benchmark::State& state) {
  const auto data = samples(4);
  captioner::CaptionerConfig cfg;
  cfg.vocab_size = synthdata::synthetic_vocabulary().size();
  auto models = captioner::init_models(cfg, 32, 64, true, 1);
  const auto width = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    for (const auto& s : data) {
      benchmark::DoNotOptimize(captioner::beam_decode(models.cap, &*models.mtm, s.regions, width));
    }
  }
}
BENCHMARK(BM_BeamDecode)->Arg(1)->Arg(3)->Arg(5);

}  // namespace
