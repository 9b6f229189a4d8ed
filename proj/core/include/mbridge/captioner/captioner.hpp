#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mbridge/captioner/attention.hpp"
#include "mbridge/captioner/decoding.hpp"
#include "mbridge/captioner/sample.hpp"
#include "mbridge/metrics/metrics.hpp"
#include "mbridge/mtm/modality_loss.hpp"
#include "mbridge/mtm/mtm.hpp"
#include "mbridge/numcore/adam.hpp"
#include "mbridge/numcore/linear.hpp"
#include "mbridge/numcore/lstm.hpp"
#include "mbridge/textae/autoencoder.hpp"

namespace mbridge::captioner {

struct CaptionerConfig {
  std::size_t vocab_size = 0;
  /// Width of the vector fed through the bridge: d_e with the MTM, d_v for
  /// the baseline that bridges the pooled visual feature directly.
  std::size_t bridge_in = 64;
  std::size_t d_emb = 64;
  std::size_t d_h = 64;
  bool attention = false;
  std::size_t d_v = 32;
  std::size_t d_att = 64;
  std::size_t max_len = 20;
};

/// One-layer LSTM language decoder.
///
/// Step 0 reads bridge(u') in place of a word embedding and predicts the
/// first word; step t reads the embedding of word t. Hidden and cell states
/// start at zero. With attention on, every step input is the concatenation
/// [word-or-bridge ; context], the context attending from the previous
/// hidden state over the regions.
class CaptionerModel {
 public:
  explicit CaptionerModel(const CaptionerConfig& config);

  void init_uniform(Rng& rng, double bound = 0.08);
  const CaptionerConfig& config() const { return config_; }
  ParameterList parameters();

  Parameter embedding;  // [|V|×d_emb]
  Linear bridge;        // bridge_in → d_emb
  LstmParams lstm;
  std::optional<AttentionParams> attention;
  Linear output;        // d_h → |V|

 private:
  CaptionerConfig config_;
};

/// Vector bridged into the decoder for one sample: MTM projection of the
/// pooled regions, or the pooled regions themselves when `mtm` is null.
Tensor bridge_source(const mtm::MtmModel* mtm, const Tensor& regions);

/// ce + modality; total is their plain sum.
struct TrainStepReport {
  double ce_loss = 0.0;
  double modality_loss = 0.0;
  double total = 0.0;
  bool has_modality = false;
  std::size_t tokens = 0;
};

/// Teacher-forced combined loss for a batch of samples whose captions share
/// one length. `codes` holds the frozen auto-encoder code of each caption
/// (rows aligned with `batch`); it is ignored when `mtm` is null. With
/// `backward` set, gradients accumulate into the captioner and MTM only.
/// Throws TrainingError when either loss term is non-finite.
TrainStepReport forward_train_batch(CaptionerModel& cap, mtm::MtmModel* mtm,
                                    std::span<const CaptionSample* const> batch, const Tensor& codes,
                                    mtm::ModalityLossKind kind, bool backward);

/// Single-sample form; encodes the caption with the frozen auto-encoder.
TrainStepReport forward_train(CaptionerModel& cap, mtm::MtmModel* mtm, const textae::AutoEncoderModel& ae,
                              const CaptionSample& sample, mtm::ModalityLossKind kind, bool backward = true);

/// StepDecoder over a trained captioner for one set of regions.
class CaptionDecoder {
 public:
  struct State {
    Tensor h;  // [1×d_h]
    Tensor c;
    std::vector<double> log_probs;
  };

  CaptionDecoder(const CaptionerModel& cap, const mtm::MtmModel* mtm, const Tensor& regions);

  State start() const;
  const std::vector<double>& log_probs(const State& s) const { return s.log_probs; }
  State advance(const State& s, TokenId token) const;

 private:
  State step(const Tensor& word_input, const State& prev) const;

  const CaptionerModel& cap_;
  const Tensor& regions_;
  Tensor source_;
  Tensor region_proj_;
};

TokenSequence greedy_decode(const CaptionerModel& cap, const mtm::MtmModel* mtm, const Tensor& regions);
/// Throws InputError when beam_width < 1.
TokenSequence beam_decode(const CaptionerModel& cap, const mtm::MtmModel* mtm, const Tensor& regions,
                          std::size_t beam_width);

struct CaptionerTrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  double lr = 5e-4;
  double lr_decay = 0.8;
  std::size_t lr_decay_every = 50;
  std::uint64_t seed = 0;
  mtm::ModalityLossKind kind = mtm::ModalityLossKind::MSE;
  bool use_mtm = true;
  bool validate = true;
};

struct CaptionerEpochStats {
  std::size_t epoch = 0;
  double ce_loss = 0.0;
  double modality_loss = 0.0;  // meaningful only with the MTM
  bool has_modality = false;
  double val_bleu4 = 0.0;
  double val_rouge_l = 0.0;
  double val_cider = 0.0;
  double val_exact = 0.0;
};

/// Evaluation corpus from greedy captions of `samples` against their gold captions.
metrics::EvalCorpus decode_corpus(const CaptionerModel& cap, const mtm::MtmModel* mtm,
                                  std::span<const CaptionSample> samples, const Vocabulary& vocab);
/// Fraction of samples whose greedy caption equals the gold caption.
double exact_match(const CaptionerModel& cap, const mtm::MtmModel* mtm, std::span<const CaptionSample> samples);

/// Resumable captioner training against a frozen auto-encoder.
class CaptionerTrainer {
 public:
  /// Throws InputError for an empty training set or mismatched dimensions.
  CaptionerTrainer(std::vector<CaptionSample> train, std::vector<CaptionSample> val,
                   const textae::AutoEncoderModel& ae, const Vocabulary& vocab, CaptionerModel cap,
                   std::optional<mtm::MtmModel> mtm, const CaptionerTrainConfig& config);

  CaptionerEpochStats run_epoch();
  void run();

  CaptionerModel& captioner() { return cap_; }
  const CaptionerModel& captioner() const { return cap_; }
  mtm::MtmModel* mtm() { return mtm_ ? &*mtm_ : nullptr; }
  const mtm::MtmModel* mtm() const { return mtm_ ? &*mtm_ : nullptr; }
  ParameterList parameters();
  Adam& optimizer() { return adam_; }
  const Adam& optimizer() const { return adam_; }
  const Rng& rng() const { return rng_; }
  std::size_t epoch() const { return epoch_; }
  const std::vector<CaptionerEpochStats>& trace() const { return trace_; }
  const CaptionerTrainConfig& config() const { return config_; }
  void set_total_epochs(std::size_t epochs) { config_.epochs = epochs; }
  void restore(std::size_t epoch, std::vector<CaptionerEpochStats> trace, const std::string& rng_state);

 private:
  std::vector<CaptionSample> train_;
  std::vector<CaptionSample> val_;
  Tensor codes_;  // frozen AE code per training sample
  const Vocabulary& vocab_;
  CaptionerModel cap_;
  std::optional<mtm::MtmModel> mtm_;
  CaptionerTrainConfig config_;
  Adam adam_;
  Rng rng_;
  std::size_t epoch_ = 0;
  std::vector<CaptionerEpochStats> trace_;
};

/// Fresh captioner (and MTM when enabled) initialized from `seed`.
struct CaptioningModels {
  CaptionerModel cap;
  std::optional<mtm::MtmModel> mtm;
};
CaptioningModels init_models(const CaptionerConfig& config, std::size_t d_v, std::size_t d_e, bool use_mtm,
                             std::uint64_t seed, double init_bound = 0.08);

}  // namespace mbridge::captioner
