#include "mbridge/textae/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mbridge/numcore/errors.hpp"
#include "mbridge/numcore/ops.hpp"

namespace mbridge::textae {

namespace {

struct EncoderPass {
  std::vector<std::vector<TokenId>> step_ids;
  std::vector<std::vector<LstmStepCache>> caches;
  Tensor codes;  // [B×d_e]
};

struct DecoderPass {
  std::vector<std::vector<TokenId>> input_ids;
  std::vector<std::vector<TokenId>> target_ids;
  std::vector<std::vector<LstmStepCache>> caches;
  std::vector<Tensor> tops;
  std::vector<Tensor> logits;
  BatchStats stats;
};

std::size_t common_length(std::span<const std::vector<TokenId>* const> batch) {
  if (batch.empty()) throw InputError("empty batch");
  const std::size_t n = batch.front()->size();
  if (n == 0) throw InputError("empty caption in batch");
  for (const auto* seq : batch) {
    if (seq->size() != n) throw InputError("batch sequences must share one length");
  }
  return n;
}

std::vector<TokenId> column(std::span<const std::vector<TokenId>* const> batch, std::size_t t) {
  std::vector<TokenId> ids(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) ids[b] = (*batch[b])[t];
  return ids;
}

EncoderPass run_encoder(const AutoEncoderModel& model,
                        std::span<const std::vector<TokenId>* const> batch, bool keep_cache) {
  const std::size_t n = common_length(batch);
  const auto& cfg = model.config();
  EncoderPass pass;
  StackState state = StackState::zeros(cfg.layers, batch.size(), cfg.d_e);
  if (keep_cache) pass.caches.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    auto ids = column(batch, t);
    const Tensor x = gather_rows(model.embedding.value, ids);
    lstm_stack_step(model.encoder, x, state, keep_cache ? &pass.caches[t] : nullptr);
    if (keep_cache) pass.step_ids.push_back(std::move(ids));
  }
  pass.codes = state.h.back();
  return pass;
}

DecoderPass run_decoder(const AutoEncoderModel& model, const Tensor& codes,
                        std::span<const std::vector<TokenId>* const> batch, bool keep_cache) {
  const std::size_t n = common_length(batch);
  const auto& cfg = model.config();
  const std::size_t bsz = batch.size();
  DecoderPass pass;
  pass.stats.sample_loss_sum.assign(bsz, 0.0);
  StackState state = StackState::zeros(cfg.layers, bsz, cfg.d_e);
  for (auto& h : state.h) h = codes;
  if (keep_cache) pass.caches.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<TokenId> in = t == 0 ? std::vector<TokenId>(bsz, Vocabulary::kBos) : column(batch, t - 1);
    std::vector<TokenId> target = column(batch, t);
    const Tensor x = gather_rows(model.embedding.value, in);
    Tensor top = lstm_stack_step(model.decoder, x, state, keep_cache ? &pass.caches[t] : nullptr);
    Tensor logits = model.output.forward(top);
    for (std::size_t b = 0; b < bsz; ++b) {
      const auto row = logits.row(b);
      const double loss = softmax_cross_entropy(row, target[b]);
      pass.stats.loss_sum += loss;
      pass.stats.sample_loss_sum[b] += loss;
      if (static_cast<TokenId>(argmax(row)) == target[b]) ++pass.stats.correct;
    }
    pass.stats.tokens += bsz;
    if (keep_cache) {
      pass.input_ids.push_back(std::move(in));
      pass.target_ids.push_back(std::move(target));
      pass.tops.push_back(std::move(top));
      pass.logits.push_back(std::move(logits));
    }
  }
  return pass;
}

}  // namespace

AutoEncoderModel::AutoEncoderModel(const AutoEncoderConfig& config) : config_(config) {
  if (config.vocab_size <= Vocabulary::kNumSpecials) throw InputError("vocab_size must exceed the 4 specials");
  if (config.d_emb == 0 || config.d_e == 0 || config.layers == 0 || config.max_len == 0) {
    throw InputError("auto-encoder dimensions must be positive");
  }
  embedding = Parameter("ae.embedding", {config.vocab_size, config.d_emb});
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t in = l == 0 ? config.d_emb : config.d_e;
    encoder.emplace_back("ae.encoder.l" + std::to_string(l), in, config.d_e);
    decoder.emplace_back("ae.decoder.l" + std::to_string(l), in, config.d_e);
  }
  output = Linear("ae.output", config.d_e, config.vocab_size);
}

void AutoEncoderModel::init_uniform(Rng& rng, double bound) {
  for (auto* p : parameters()) p->init_uniform(rng, bound);
}

ParameterList AutoEncoderModel::parameters() {
  ParameterList out{&embedding};
  for (auto& layer : encoder) {
    for (auto* p : layer.parameters()) out.push_back(p);
  }
  for (auto& layer : decoder) {
    for (auto* p : layer.parameters()) out.push_back(p);
  }
  for (auto* p : output.parameters()) out.push_back(p);
  return out;
}

Tensor AutoEncoderModel::encode(const TokenSequence& s) const {
  const auto targets = caption_targets(s, config_.max_len);
  const std::vector<TokenId>* ptr = &targets;
  auto pass = run_encoder(*this, std::span(&ptr, 1), false);
  return pass.codes.reshaped({config_.d_e});
}

Tensor AutoEncoderModel::encode_all(std::span<const TokenSequence> captions) const {
  std::vector<std::vector<TokenId>> targets;
  targets.reserve(captions.size());
  std::map<std::size_t, std::vector<std::size_t>> by_length;
  for (std::size_t i = 0; i < captions.size(); ++i) {
    targets.push_back(caption_targets(captions[i], config_.max_len));
    by_length[targets.back().size()].push_back(i);
  }
  Tensor codes({std::max<std::size_t>(captions.size(), 1), config_.d_e});
  for (const auto& [len, indices] : by_length) {
    std::vector<const std::vector<TokenId>*> batch;
    for (auto i : indices) batch.push_back(&targets[i]);
    const auto pass = run_encoder(*this, batch, false);
    for (std::size_t b = 0; b < indices.size(); ++b) {
      const auto src = pass.codes.row(b);
      std::copy(src.begin(), src.end(), codes.row(indices[b]).begin());
    }
  }
  return codes;
}

double AutoEncoderModel::decode_train(const Tensor& u_g, const TokenSequence& s) const {
  if (u_g.size() != config_.d_e) {
    throw DimensionError("decode_train: code " + shape_to_string(u_g.shape()) + " vs d_e " +
                         std::to_string(config_.d_e));
  }
  const auto targets = caption_targets(s, config_.max_len);
  const std::vector<TokenId>* ptr = &targets;
  const auto pass = run_decoder(*this, u_g.reshaped({1, config_.d_e}), std::span(&ptr, 1), false);
  return pass.stats.loss_sum / static_cast<double>(pass.stats.tokens);
}

TokenSequence AutoEncoderModel::reconstruct(const Tensor& u_g) const {
  if (u_g.size() != config_.d_e) {
    throw DimensionError("reconstruct: code " + shape_to_string(u_g.shape()) + " vs d_e " +
                         std::to_string(config_.d_e));
  }
  StackState state = StackState::zeros(config_.layers, 1, config_.d_e);
  for (auto& h : state.h) h = u_g.reshaped({1, config_.d_e});
  TokenSequence out;
  TokenId input = Vocabulary::kBos;
  while (out.ids.size() < config_.max_len) {
    const Tensor x = gather_rows(embedding.value, std::span(&input, 1));
    const Tensor top = lstm_stack_step(decoder, x, state);
    const Tensor logits = output.forward(top);
    input = static_cast<TokenId>(argmax(logits.row(0)));
    out.ids.push_back(input);
    if (input == Vocabulary::kEos) break;
  }
  return out;
}

BatchStats autoencoder_batch(AutoEncoderModel& model,
                             std::span<const std::vector<TokenId>* const> batch, bool backward) {
  auto enc = run_encoder(model, batch, backward);
  auto dec = run_decoder(model, enc.codes, batch, backward);
  if (!backward) return std::move(dec.stats);

  const auto& cfg = model.config();
  const std::size_t bsz = batch.size();
  const std::size_t n = dec.tops.size();
  const double scale = 1.0 / static_cast<double>(dec.stats.tokens);

  StackState grad_state = StackState::zeros(cfg.layers, bsz, cfg.d_e);
  Tensor grad_logits({bsz, cfg.vocab_size});
  for (std::size_t t = n; t-- > 0;) {
    for (std::size_t b = 0; b < bsz; ++b) {
      softmax_cross_entropy_backward(dec.logits[t].row(b), dec.target_ids[t][b], grad_logits.row(b), scale);
    }
    const Tensor grad_top = model.output.backward(dec.tops[t], grad_logits);
    const Tensor grad_x = lstm_stack_step_backward(model.decoder, dec.caches[t], grad_top, grad_state);
    scatter_add_rows(model.embedding.grad, dec.input_ids[t], grad_x);
  }

  Tensor grad_code({bsz, cfg.d_e});
  for (const auto& g : grad_state.h) grad_code += g;

  StackState enc_grad = StackState::zeros(cfg.layers, bsz, cfg.d_e);
  enc_grad.h.back() = grad_code;
  const Tensor no_grad({bsz, cfg.d_e});
  for (std::size_t t = enc.caches.size(); t-- > 0;) {
    const Tensor grad_x = lstm_stack_step_backward(model.encoder, enc.caches[t], no_grad, enc_grad);
    scatter_add_rows(model.embedding.grad, enc.step_ids[t], grad_x);
  }
  return std::move(dec.stats);
}

double scheduled_lr(double base, double decay, std::size_t every, std::size_t epoch) {
  if (every == 0) return base;
  return base * std::pow(decay, static_cast<double>(epoch / every));
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> lengths,
                                                   std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw InputError("batch_size must be positive");
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < lengths.size(); ++i) buckets[lengths[i]].push_back(i);

  auto shuffle = [&rng](auto& items) {
    for (std::size_t k = items.size(); k > 1; --k) {
      const std::size_t j = static_cast<std::size_t>(rng.index(k));
      std::swap(items[k - 1], items[j]);
    }
  };

  std::vector<std::vector<std::size_t>> batches;
  for (auto& [len, indices] : buckets) {
    shuffle(indices);
    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
      const std::size_t stop = std::min(indices.size(), start + batch_size);
      if (stop - start == 1 && start > 0) {
        // A trailing singleton joins the previous batch of its bucket.
        batches.back().push_back(indices[start]);
        continue;
      }
      batches.emplace_back(indices.begin() + static_cast<std::ptrdiff_t>(start),
                           indices.begin() + static_cast<std::ptrdiff_t>(stop));
    }
  }
  shuffle(batches);
  return batches;
}

AutoEncoderTrainer::AutoEncoderTrainer(std::span<const TokenSequence> corpus, AutoEncoderModel model,
                                       const AeTrainConfig& config)
    : model_(std::move(model)), config_(config), rng_(mix_seed(config.seed, 1)) {
  if (corpus.empty()) throw InputError("auto-encoder corpus is empty");
  targets_.reserve(corpus.size());
  for (const auto& s : corpus) targets_.push_back(caption_targets(s, model_.config().max_len));
  adam_ = Adam(model_.parameters(), config_.lr);
}

AeEpochStats AutoEncoderTrainer::run_epoch() {
  adam_.set_lr(scheduled_lr(config_.lr, config_.lr_decay, config_.lr_decay_every, epoch_));
  std::vector<std::size_t> lengths;
  lengths.reserve(targets_.size());
  for (const auto& t : targets_) lengths.push_back(t.size());
  const auto batches = make_batches(lengths, config_.batch_size, rng_);

  const auto params = model_.parameters();
  std::vector<double> sample_loss(targets_.size(), 0.0);
  std::size_t tokens = 0;
  std::size_t correct = 0;
  for (const auto& indices : batches) {
    std::vector<const std::vector<TokenId>*> batch;
    batch.reserve(indices.size());
    for (auto i : indices) batch.push_back(&targets_[i]);
    zero_grads(params);
    const auto stats = autoencoder_batch(model_, batch, true);
    if (!std::isfinite(stats.loss_sum)) {
      throw TrainingError("non-finite reconstruction loss in epoch " + std::to_string(epoch_ + 1));
    }
    adam_.step(params);
    for (std::size_t b = 0; b < indices.size(); ++b) sample_loss[indices[b]] = stats.sample_loss_sum[b];
    tokens += stats.tokens;
    correct += stats.correct;
  }
  double total = 0.0;
  for (double v : sample_loss) total += v;

  ++epoch_;
  AeEpochStats out{epoch_, total / static_cast<double>(tokens),
                   static_cast<double>(correct) / static_cast<double>(tokens)};
  trace_.push_back(out);
  return out;
}

void AutoEncoderTrainer::run() {
  while (epoch_ < config_.epochs) run_epoch();
}

void AutoEncoderTrainer::restore(std::size_t epoch, std::vector<AeEpochStats> trace,
                                 const std::string& rng_state) {
  epoch_ = epoch;
  trace_ = std::move(trace);
  rng_.set_state(rng_state);
}

AeTrainResult train_autoencoder(std::span<const TokenSequence> corpus, const Vocabulary& vocab,
                                const AutoEncoderConfig& model_config, const AeTrainConfig& config) {
  if (corpus.empty()) throw InputError("auto-encoder corpus is empty");
  AutoEncoderConfig cfg = model_config;
  cfg.vocab_size = vocab.size();
  AutoEncoderModel model(cfg);
  Rng init_rng(mix_seed(config.seed, 0));
  model.init_uniform(init_rng, config.init_bound);
  AutoEncoderTrainer trainer(corpus, std::move(model), config);
  trainer.run();
  return {std::move(trainer.model()), trainer.trace()};
}

ReconstructionScore reconstruction_accuracy(const AutoEncoderModel& model,
                                            std::span<const TokenSequence> corpus) {
  if (corpus.empty()) throw InputError("reconstruction corpus is empty");
  const Tensor codes = model.encode_all(corpus);
  std::size_t matches = 0;
  std::size_t denom = 0;
  std::size_t exact = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto gold = caption_targets(corpus[i], model.config().max_len);
    const auto pred = model.reconstruct(Tensor({model.config().d_e}, std::vector<double>(codes.row(i).begin(), codes.row(i).end())));
    const std::size_t common = std::min(gold.size(), pred.ids.size());
    for (std::size_t t = 0; t < common; ++t) matches += gold[t] == pred.ids[t] ? 1 : 0;
    denom += std::max(gold.size(), pred.ids.size());
    if (gold == pred.ids) ++exact;
  }
  return {static_cast<double>(matches) / static_cast<double>(denom),
          static_cast<double>(exact) / static_cast<double>(corpus.size())};
}

}  // namespace mbridge::textae
