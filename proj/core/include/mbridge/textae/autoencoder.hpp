#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mbridge/numcore/adam.hpp"
#include "mbridge/numcore/linear.hpp"
#include "mbridge/numcore/lstm.hpp"
#include "mbridge/numcore/rng.hpp"
#include "mbridge/textae/vocabulary.hpp"

namespace mbridge::textae {

struct AutoEncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t d_emb = 64;
  std::size_t d_e = 64;
  std::size_t layers = 2;
  std::size_t max_len = 20;
};

/// LSTM sequence auto-encoder producing a global caption code u_g.
///
/// The encoder reads S_1..S_N (ending with `<eos>`); u_g is the top-layer
/// hidden state after the last step, and the cell state is discarded. The
/// decoder starts from h = u_g in every layer with zero cells, reads
/// `<bos>`, S_1..S_{N-1} and predicts S_1..S_N. Encoder and decoder share the
/// embedding table and nothing else.
class AutoEncoderModel {
 public:
  /// All weights zero. Throws InputError for degenerate dimensions.
  explicit AutoEncoderModel(const AutoEncoderConfig& config);

  void init_uniform(Rng& rng, double bound = 0.08);

  const AutoEncoderConfig& config() const { return config_; }

  /// Global code of one caption, shape [d_e].
  Tensor encode(const TokenSequence& s) const;
  /// Codes for many captions, one row each: [B×d_e].
  Tensor encode_all(std::span<const TokenSequence> captions) const;
  /// Mean per-token teacher-forced cross-entropy of `s` given u_g.
  double decode_train(const Tensor& u_g, const TokenSequence& s) const;
  /// Greedy reconstruction from u_g; generated tokens, at most max_len,
  /// ending with `<eos>` unless truncated. Ties go to the lowest id.
  TokenSequence reconstruct(const Tensor& u_g) const;

  ParameterList parameters();

  Parameter embedding;               // [|V|×d_emb]
  std::vector<LstmParams> encoder;   // layer 0 reads embeddings
  std::vector<LstmParams> decoder;
  Linear output;                     // d_e → |V|

 private:
  AutoEncoderConfig config_;
};

struct BatchStats {
  double loss_sum = 0.0;   // summed token cross-entropy
  std::size_t tokens = 0;
  std::size_t correct = 0; // teacher-forced argmax hits
  std::vector<double> sample_loss_sum;
};

/// Teacher-forced reconstruction over a batch of equal-length target
/// sequences (as produced by caption_targets). With `backward` set, the
/// gradient of the mean token loss accumulates into the model parameters.
BatchStats autoencoder_batch(AutoEncoderModel& model,
                             std::span<const std::vector<TokenId>* const> batch, bool backward);

struct AeTrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  double lr = 2e-3;
  double lr_decay = 0.8;
  std::size_t lr_decay_every = 50;
  std::uint64_t seed = 0;
  /// Uniform init bound used by train_autoencoder.
  double init_bound = 0.5;
};

struct AeEpochStats {
  std::size_t epoch = 0;     // 1-based
  double loss = 0.0;         // mean token cross-entropy
  double token_acc = 0.0;    // teacher-forced accuracy
};

/// Learning rate in effect during a 0-based epoch.
double scheduled_lr(double base, double decay, std::size_t every, std::size_t epoch);

/// Length-bucketed mini-batches in a seeded random order. A bucket's
/// trailing singleton is merged into its previous batch.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> lengths,
                                                   std::size_t batch_size, Rng& rng);

/// Resumable auto-encoder training loop.
class AutoEncoderTrainer {
 public:
  /// Throws InputError for an empty corpus.
  AutoEncoderTrainer(std::span<const TokenSequence> corpus, AutoEncoderModel model,
                     const AeTrainConfig& config);

  AeEpochStats run_epoch();
  /// Trains until `config.epochs` epochs have completed.
  void run();

  AutoEncoderModel& model() { return model_; }
  const AutoEncoderModel& model() const { return model_; }
  Adam& optimizer() { return adam_; }
  const Adam& optimizer() const { return adam_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }
  std::size_t epoch() const { return epoch_; }
  const std::vector<AeEpochStats>& trace() const { return trace_; }
  const AeTrainConfig& config() const { return config_; }
  void set_total_epochs(std::size_t epochs) { config_.epochs = epochs; }

  /// Restores the loop position; used when resuming from a checkpoint.
  void restore(std::size_t epoch, std::vector<AeEpochStats> trace, const std::string& rng_state);

 private:
  std::vector<std::vector<TokenId>> targets_;
  AutoEncoderModel model_;
  AeTrainConfig config_;
  Adam adam_;
  Rng rng_;
  std::size_t epoch_ = 0;
  std::vector<AeEpochStats> trace_;
};

struct AeTrainResult {
  AutoEncoderModel model;
  std::vector<AeEpochStats> trace;
};

/// Initializes a model from `config.seed`, trains it, and returns it frozen.
AeTrainResult train_autoencoder(std::span<const TokenSequence> corpus, const Vocabulary& vocab,
                                const AutoEncoderConfig& model_config, const AeTrainConfig& config);

struct ReconstructionScore {
  double token_accuracy = 0.0;  // matches / Σ max(len_gold, len_pred)
  double exact_match = 0.0;
};

/// reconstruct(encode(s)) compared with the encoder targets of every caption.
ReconstructionScore reconstruction_accuracy(const AutoEncoderModel& model,
                                            std::span<const TokenSequence> corpus);

}  // namespace mbridge::textae
