#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "mbridge/captioner/captioner.hpp"
#include "mbridge/mtm/modality_loss.hpp"
#include "mbridge/synthdata/synthdata.hpp"
#include "mbridge/textae/autoencoder.hpp"

namespace mbridge::pipeline {

/// Every tunable of a run. JSON keys match the field names.
struct RunConfig {
  // corpus
  std::size_t n_scenes = 1000;
  std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
  double noise_sigma = 0.1;
  std::size_t d_v = 32;

  // auto-encoder
  std::size_t d_e = 64;
  std::size_t ae_layers = 2;
  std::size_t ae_epochs = 200;
  double ae_lr = 2e-3;
  double ae_init_bound = 0.5;

  // captioner
  std::size_t d_emb = 64;
  std::size_t d_h = 64;
  std::size_t d_att = 64;
  bool attention = false;
  bool use_mtm = true;
  mtm::ModalityLossKind modality_loss = mtm::ModalityLossKind::MSE;
  std::size_t epochs = 100;
  double lr = 5e-4;
  double init_bound = 0.08;

  // shared
  double lr_decay = 0.8;
  std::size_t lr_decay_every = 50;
  std::size_t batch_size = 16;
  std::size_t max_len = 20;
  std::uint64_t seed = 0;
};

/// Throws InputError naming the first offending field.
void validate(const RunConfig& config);

/// Canonical compact JSON (fixed key order).
std::string to_json(const RunConfig& config);
/// Fields absent from `text` keep the values already in `base`. Unknown keys
/// and ill-typed values throw InputError.
RunConfig merge_json(const RunConfig& base, const std::string& text);
RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = {});

synthdata::CorpusConfig corpus_config(const RunConfig& config);
textae::AutoEncoderConfig ae_model_config(const RunConfig& config, std::size_t vocab_size);
textae::AeTrainConfig ae_train_config(const RunConfig& config);
captioner::CaptionerConfig captioner_config(const RunConfig& config, std::size_t vocab_size);
captioner::CaptionerTrainConfig captioner_train_config(const RunConfig& config);

}  // namespace mbridge::pipeline
