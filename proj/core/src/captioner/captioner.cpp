#include "mbridge/captioner/captioner.hpp"

#include <algorithm>
#include <cmath>

#include "mbridge/numcore/errors.hpp"
#include "mbridge/numcore/ops.hpp"

namespace mbridge::captioner {

namespace {

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  const std::size_t rows = a.rows();
  const std::size_t ca = a.cols();
  const std::size_t cb = b.cols();
  Tensor out({rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    auto dst = out.row(r);
    const auto ra = a.row(r);
    const auto rb = b.row(r);
    std::copy(ra.begin(), ra.end(), dst.begin());
    std::copy(rb.begin(), rb.end(), dst.begin() + static_cast<std::ptrdiff_t>(ca));
  }
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  Tensor out({x.rows(), count});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto src = x.row(r).subspan(begin, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

void check_regions(const CaptionerModel& cap, const Tensor& regions) {
  if (regions.rank() != 2) {
    throw DimensionError("region features must be [K×d_v], got " + shape_to_string(regions.shape()));
  }
  if (cap.attention && regions.cols() != cap.config().d_v) {
    throw DimensionError("region features " + shape_to_string(regions.shape()) + " vs attention d_v " +
                         std::to_string(cap.config().d_v));
  }
}

}  // namespace

CaptionerModel::CaptionerModel(const CaptionerConfig& config) : config_(config) {
  if (config.vocab_size <= Vocabulary::kNumSpecials) throw InputError("vocab_size must exceed the 4 specials");
  if (config.bridge_in == 0 || config.d_emb == 0 || config.d_h == 0 || config.max_len == 0 ||
      (config.attention && (config.d_v == 0 || config.d_att == 0))) {
    throw InputError("captioner dimensions must be positive");
  }
  embedding = Parameter("cap.embedding", {config.vocab_size, config.d_emb});
  bridge = Linear("cap.bridge", config.bridge_in, config.d_emb);
  const std::size_t lstm_in = config.d_emb + (config.attention ? config.d_v : 0);
  lstm = LstmParams("cap.lstm", lstm_in, config.d_h);
  if (config.attention) attention.emplace("cap.attention", config.d_h, config.d_v, config.d_att);
  output = Linear("cap.output", config.d_h, config.vocab_size);
}

void CaptionerModel::init_uniform(Rng& rng, double bound) {
  for (auto* p : parameters()) p->init_uniform(rng, bound);
}

ParameterList CaptionerModel::parameters() {
  ParameterList out{&embedding};
  for (auto* p : bridge.parameters()) out.push_back(p);
  for (auto* p : lstm.parameters()) out.push_back(p);
  if (attention) {
    for (auto* p : attention->parameters()) out.push_back(p);
  }
  for (auto* p : output.parameters()) out.push_back(p);
  return out;
}

Tensor bridge_source(const mtm::MtmModel* mtm, const Tensor& regions) {
  const Tensor pooled = mtm::pool_regions(regions);
  return mtm ? mtm->project(pooled) : pooled;
}

TrainStepReport forward_train_batch(CaptionerModel& cap, mtm::MtmModel* mtm,
                                    std::span<const CaptionSample* const> batch, const Tensor& codes,
                                    mtm::ModalityLossKind kind, bool backward) {
  const auto& cfg = cap.config();
  const std::size_t bsz = batch.size();
  if (bsz == 0) throw InputError("empty captioner batch");

  std::vector<std::vector<TokenId>> targets;
  targets.reserve(bsz);
  for (const auto* s : batch) targets.push_back(caption_targets(s->caption, cfg.max_len));
  const std::size_t n = targets.front().size();
  for (const auto& t : targets) {
    if (t.size() != n) throw InputError("captioner batch captions must share one length");
  }

  const std::size_t d_v = batch.front()->regions.cols();
  Tensor pooled({bsz, d_v});
  for (std::size_t b = 0; b < bsz; ++b) {
    check_regions(cap, batch[b]->regions);
    if (batch[b]->regions.cols() != d_v) throw DimensionError("region width differs within a batch");
    const Tensor p = mtm::pool_regions(batch[b]->regions);
    std::copy(p.data().begin(), p.data().end(), pooled.row(b).begin());
  }

  mtm::MtmCache mtm_cache;
  const Tensor source = mtm ? mtm->forward(pooled, &mtm_cache) : pooled;
  if (source.cols() != cfg.bridge_in) {
    throw DimensionError("bridge input width " + std::to_string(source.cols()) + " vs configured " +
                         std::to_string(cfg.bridge_in));
  }
  const Tensor bridged = cap.bridge.forward(source);

  const bool attn = cap.attention.has_value();
  std::vector<Tensor> region_proj;
  if (attn) {
    for (const auto* s : batch) region_proj.push_back(project_regions(*cap.attention, s->regions));
  }

  std::vector<LstmStepCache> lstm_cache(n);
  std::vector<std::vector<AttentionStepCache>> attn_cache(attn ? n : 0);
  std::vector<Tensor> h_before(n), h_after(n), logits(n);
  std::vector<std::vector<TokenId>> word_ids(n);

  Tensor h({bsz, cfg.d_h});
  Tensor c({bsz, cfg.d_h});
  double loss_sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    Tensor word;
    if (t == 0) {
      word = bridged;
    } else {
      word_ids[t].resize(bsz);
      for (std::size_t b = 0; b < bsz; ++b) word_ids[t][b] = targets[b][t - 1];
      word = gather_rows(cap.embedding.value, word_ids[t]);
    }
    Tensor x;
    if (attn) {
      const Tensor query_proj = matmul_nt(h, cap.attention->w_h.value);
      Tensor context({bsz, d_v});
      attn_cache[t].resize(bsz);
      for (std::size_t b = 0; b < bsz; ++b) {
        const auto res = attend_projected(*cap.attention, query_proj.row(b), region_proj[b], batch[b]->regions,
                                          &attn_cache[t][b]);
        std::copy(res.context.data().begin(), res.context.data().end(), context.row(b).begin());
      }
      x = concat_cols(word, context);
    } else {
      x = std::move(word);
    }
    h_before[t] = h;
    auto next = lstm_cell(cap.lstm, x, h, c, &lstm_cache[t]);
    h = std::move(next.h);
    c = std::move(next.c);
    logits[t] = cap.output.forward(h);
    h_after[t] = h;
    for (std::size_t b = 0; b < bsz; ++b) loss_sum += softmax_cross_entropy(logits[t].row(b), targets[b][t]);
  }

  TrainStepReport report;
  report.tokens = bsz * n;
  report.ce_loss = loss_sum / static_cast<double>(report.tokens);
  if (!std::isfinite(report.ce_loss)) throw TrainingError("non-finite cross-entropy loss");
  mtm::LossValue modality;
  if (mtm) {
    if (codes.rows() != bsz || codes.cols() != source.cols()) {
      throw DimensionError("auto-encoder codes " + shape_to_string(codes.shape()) + " vs MTM output " +
                           shape_to_string(source.shape()));
    }
    modality = mtm::modality_loss(kind, source, codes.rank() == 2 ? codes : codes.reshaped({1, codes.size()}));
    if (!std::isfinite(modality.value)) throw TrainingError("non-finite modality loss");
    report.modality_loss = modality.value;
    report.has_modality = true;
  }
  report.total = report.ce_loss + report.modality_loss;
  if (!backward) return report;

  const double scale = 1.0 / static_cast<double>(report.tokens);
  Tensor grad_h_carry({bsz, cfg.d_h});
  Tensor grad_c_carry({bsz, cfg.d_h});
  Tensor grad_bridged;
  std::vector<Tensor> grad_region_proj;
  if (attn) {
    for (const auto& rp : region_proj) grad_region_proj.emplace_back(rp.shape());
  }
  Tensor grad_logits({bsz, cfg.vocab_size});
  for (std::size_t t = n; t-- > 0;) {
    for (std::size_t b = 0; b < bsz; ++b) {
      softmax_cross_entropy_backward(logits[t].row(b), targets[b][t], grad_logits.row(b), scale);
    }
    Tensor grad_h = cap.output.backward(h_after[t], grad_logits);
    grad_h += grad_h_carry;
    auto g = lstm_cell_backward(cap.lstm, lstm_cache[t], grad_h, grad_c_carry);
    grad_c_carry = std::move(g.c_prev);
    grad_h_carry = std::move(g.h_prev);

    const Tensor grad_word = attn ? slice_cols(g.x, 0, cfg.d_emb) : g.x;
    if (t == 0) {
      grad_bridged = grad_word;
    } else {
      scatter_add_rows(cap.embedding.grad, word_ids[t], grad_word);
    }
    if (attn) {
      const Tensor grad_context = slice_cols(g.x, cfg.d_emb, d_v);
      Tensor grad_query_proj({bsz, cap.attention->attn_dim()});
      for (std::size_t b = 0; b < bsz; ++b) {
        attend_projected_backward(*cap.attention, attn_cache[t][b], batch[b]->regions, grad_context.row(b),
                                  grad_query_proj.row(b), grad_region_proj[b]);
      }
      gemm_tn_accumulate(grad_query_proj, h_before[t], cap.attention->w_h.grad);
      gemm_nn_accumulate(grad_query_proj, cap.attention->w_h.value, grad_h_carry);
    }
  }
  if (attn) {
    for (std::size_t b = 0; b < bsz; ++b) project_regions_backward(*cap.attention, batch[b]->regions, grad_region_proj[b]);
  }
  Tensor grad_source = cap.bridge.backward(source, grad_bridged);
  if (mtm) {
    grad_source += modality.grad;
    mtm->backward(mtm_cache, grad_source);
  }
  return report;
}

TrainStepReport forward_train(CaptionerModel& cap, mtm::MtmModel* mtm, const textae::AutoEncoderModel& ae,
                              const CaptionSample& sample, mtm::ModalityLossKind kind, bool backward) {
  const CaptionSample* ptr = &sample;
  Tensor codes;
  if (mtm) {
    const Tensor code = ae.encode(sample.caption);
    codes = code.reshaped({1, code.size()});
  }
  return forward_train_batch(cap, mtm, std::span(&ptr, 1), codes, kind, backward);
}

CaptionDecoder::CaptionDecoder(const CaptionerModel& cap, const mtm::MtmModel* mtm, const Tensor& regions)
    : cap_(cap), regions_(regions) {
  check_regions(cap, regions);
  source_ = bridge_source(mtm, regions);
  if (source_.size() != cap.config().bridge_in) {
    throw DimensionError("bridge input width " + std::to_string(source_.size()) + " vs configured " +
                         std::to_string(cap.config().bridge_in));
  }
  if (cap.attention) region_proj_ = project_regions(*cap.attention, regions);
}

CaptionDecoder::State CaptionDecoder::step(const Tensor& word_input, const State& prev) const {
  Tensor x = word_input;
  if (cap_.attention) {
    const Tensor query_proj = matmul_nt(prev.h, cap_.attention->w_h.value);
    const auto res = attend_projected(*cap_.attention, query_proj.row(0), region_proj_, regions_);
    x = concat_cols(word_input, res.context.reshaped({1, res.context.size()}));
  }
  auto next = lstm_cell(cap_.lstm, x, prev.h, prev.c);
  const Tensor logits = cap_.output.forward(next.h);
  return State{std::move(next.h), std::move(next.c), log_softmax(logits.row(0))};
}

CaptionDecoder::State CaptionDecoder::start() const {
  const auto d_h = cap_.config().d_h;
  const State zero{Tensor({1, d_h}), Tensor({1, d_h}), {}};
  const Tensor bridged = cap_.bridge.forward(source_.reshaped({1, source_.size()}));
  return step(bridged, zero);
}

CaptionDecoder::State CaptionDecoder::advance(const State& s, TokenId token) const {
  return step(gather_rows(cap_.embedding.value, std::span(&token, 1)), s);
}

TokenSequence greedy_decode(const CaptionerModel& cap, const mtm::MtmModel* mtm, const Tensor& regions) {
  const CaptionDecoder decoder(cap, mtm, regions);
  return TokenSequence{greedy_search(decoder, cap.config().max_len).tokens};
}

TokenSequence beam_decode(const CaptionerModel& cap, const mtm::MtmModel* mtm, const Tensor& regions,
                          std::size_t beam_width) {
  if (beam_width < 1) throw InputError("beam width must be at least 1");
  const CaptionDecoder decoder(cap, mtm, regions);
  return TokenSequence{beam_search(decoder, beam_width, cap.config().max_len).tokens};
}

namespace {

struct Validation {
  metrics::EvalCorpus corpus;
  std::size_t exact = 0;
};

Validation validate(const CaptionerModel& cap, const mtm::MtmModel* mtm, std::span<const CaptionSample> samples,
                    const Vocabulary* vocab) {
  Validation out;
  for (const auto& s : samples) {
    const auto pred = greedy_decode(cap, mtm, s.regions);
    const auto gold = caption_targets(s.caption, cap.config().max_len);
    if (pred.ids == gold) ++out.exact;
    if (vocab) {
      out.corpus.add(s.scene_id, vocab->decode(content_tokens(pred.ids)),
                     {vocab->decode(content_tokens(gold))});
    }
  }
  return out;
}

}  // namespace

metrics::EvalCorpus decode_corpus(const CaptionerModel& cap, const mtm::MtmModel* mtm,
                                  std::span<const CaptionSample> samples, const Vocabulary& vocab) {
  return validate(cap, mtm, samples, &vocab).corpus;
}

double exact_match(const CaptionerModel& cap, const mtm::MtmModel* mtm, std::span<const CaptionSample> samples) {
  if (samples.empty()) throw InputError("exact_match: no samples");
  return static_cast<double>(validate(cap, mtm, samples, nullptr).exact) / static_cast<double>(samples.size());
}

CaptionerTrainer::CaptionerTrainer(std::vector<CaptionSample> train, std::vector<CaptionSample> val,
                                   const textae::AutoEncoderModel& ae, const Vocabulary& vocab, CaptionerModel cap,
                                   std::optional<mtm::MtmModel> mtm, const CaptionerTrainConfig& config)
    : train_(std::move(train)),
      val_(std::move(val)),
      vocab_(vocab),
      cap_(std::move(cap)),
      mtm_(std::move(mtm)),
      config_(config),
      rng_(mix_seed(config.seed, 1)) {
  if (train_.empty()) throw InputError("captioner training set is empty");
  if (config_.validate && val_.size() < 2) throw InputError("validation needs at least two samples");
  if (cap_.config().vocab_size != vocab.size() || ae.config().vocab_size != vocab.size()) {
    throw DimensionError("vocabulary size " + std::to_string(vocab.size()) + " vs captioner " +
                         std::to_string(cap_.config().vocab_size) + " / auto-encoder " +
                         std::to_string(ae.config().vocab_size));
  }
  if (mtm_) {
    if (mtm_->d_e() != ae.config().d_e) {
      throw DimensionError("MTM d_e " + std::to_string(mtm_->d_e()) + " vs auto-encoder d_e " +
                           std::to_string(ae.config().d_e));
    }
    std::vector<TokenSequence> captions;
    captions.reserve(train_.size());
    for (const auto& s : train_) captions.push_back(s.caption);
    codes_ = ae.encode_all(captions);
  }
  adam_ = Adam(parameters(), config_.lr);
}

ParameterList CaptionerTrainer::parameters() {
  auto out = cap_.parameters();
  if (mtm_) {
    for (auto* p : mtm_->parameters()) out.push_back(p);
  }
  return out;
}

CaptionerEpochStats CaptionerTrainer::run_epoch() {
  adam_.set_lr(textae::scheduled_lr(config_.lr, config_.lr_decay, config_.lr_decay_every, epoch_));
  std::vector<std::size_t> lengths;
  lengths.reserve(train_.size());
  for (const auto& s : train_) lengths.push_back(caption_targets(s.caption, cap_.config().max_len).size());
  const auto batches = textae::make_batches(lengths, config_.batch_size, rng_);

  const auto params = parameters();
  double ce_sum = 0.0;
  std::size_t tokens = 0;
  double modality_sum = 0.0;
  std::size_t samples = 0;
  for (const auto& indices : batches) {
    std::vector<const CaptionSample*> batch;
    Tensor codes;
    if (mtm_) codes = Tensor({indices.size(), codes_.cols()});
    for (std::size_t b = 0; b < indices.size(); ++b) {
      batch.push_back(&train_[indices[b]]);
      if (mtm_) {
        const auto src = codes_.row(indices[b]);
        std::copy(src.begin(), src.end(), codes.row(b).begin());
      }
    }
    zero_grads(params);
    const auto report = forward_train_batch(cap_, mtm(), batch, codes, config_.kind, true);
    adam_.step(params);
    ce_sum += report.ce_loss * static_cast<double>(report.tokens);
    tokens += report.tokens;
    modality_sum += report.modality_loss * static_cast<double>(indices.size());
    samples += indices.size();
  }

  ++epoch_;
  CaptionerEpochStats stats;
  stats.epoch = epoch_;
  stats.ce_loss = ce_sum / static_cast<double>(tokens);
  stats.has_modality = mtm_.has_value();
  stats.modality_loss = mtm_ ? modality_sum / static_cast<double>(samples) : 0.0;
  if (config_.validate) {
    const auto v = validate(cap_, mtm(), val_, &vocab_);
    const auto report = metrics::evaluate(v.corpus);
    stats.val_bleu4 = report.bleu[3];
    stats.val_rouge_l = report.rouge_l;
    stats.val_cider = report.cider;
    stats.val_exact = static_cast<double>(v.exact) / static_cast<double>(val_.size());
  }
  trace_.push_back(stats);
  return stats;
}

void CaptionerTrainer::run() {
  while (epoch_ < config_.epochs) run_epoch();
}

void CaptionerTrainer::restore(std::size_t epoch, std::vector<CaptionerEpochStats> trace,
                               const std::string& rng_state) {
  epoch_ = epoch;
  trace_ = std::move(trace);
  rng_.set_state(rng_state);
}

CaptioningModels init_models(const CaptionerConfig& config, std::size_t d_v, std::size_t d_e, bool use_mtm,
                             std::uint64_t seed, double init_bound) {
  CaptionerConfig cfg = config;
  cfg.bridge_in = use_mtm ? d_e : d_v;
  cfg.d_v = d_v;
  CaptioningModels out{CaptionerModel(cfg), std::nullopt};
  Rng rng(mix_seed(seed, 0));
  out.cap.init_uniform(rng, init_bound);
  if (use_mtm) {
    out.mtm.emplace(d_v, d_e);
    out.mtm->init_uniform(rng, init_bound);
  }
  return out;
}

}  // namespace mbridge::captioner
