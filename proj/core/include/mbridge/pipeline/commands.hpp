#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mbridge/metrics/metrics.hpp"
#include "mbridge/pipeline/checkpoint.hpp"
#include "mbridge/pipeline/config.hpp"

namespace mbridge::pipeline {

namespace fs = std::filesystem;

/// Synthetic corpus under `out`; returns the manifest path.
fs::path gen_data(const RunConfig& config, const fs::path& out);

struct TrainOptions {
  RunConfig config;
  fs::path data_dir;
  fs::path out_dir;
  std::optional<fs::path> ae_checkpoint;  // captioner training only
  std::optional<fs::path> resume;
  /// Stop once this many epochs are complete (simulates an interruption).
  std::optional<std::size_t> stop_after;
  std::ostream* log = nullptr;
};

/// Writes ae.ckpt and ae_loss.csv (epoch,loss,token_acc) under out_dir.
/// Returns the checkpoint path.
fs::path train_ae(const TrainOptions& options);

/// Writes captioner.ckpt and trace.csv (epoch,ce_loss,modality_loss,
/// val_BLEU4,val_ROUGE_L,val_CIDEr) under out_dir. The modality_loss cells
/// are empty without the MTM. Returns the checkpoint path.
fs::path train_captioner(const TrainOptions& options);

struct CaptionOptions {
  fs::path checkpoint;
  fs::path input;  // JSONL records with scene_id and features
  fs::path output;
  std::size_t beam = 0;  // 0 = greedy
  std::optional<fs::path> manifest;
};

/// Writes one {"scene_id","caption"} record per input record, in input order.
void caption(const CaptionOptions& options);

struct EvalOptions {
  fs::path candidates;
  fs::path references;
  fs::path out_dir;
  std::optional<fs::path> plot_trace;  // trace.csv to turn into plot data
  unsigned threads = 1;
};

/// Writes report.json and report.csv (and plot_data.csv when requested)
/// under out_dir. Throws InputError listing ids that do not align.
metrics::EvalReport eval(const EvalOptions& options);

struct AblationRow {
  std::string variant;  // "baseline" or a loss name
  double val_cider = 0.0;
  metrics::EvalReport test;
};

/// Baseline without the MTM plus one run per modality loss, each in its own
/// subdirectory of out_dir, and ablation.csv summarizing them.
std::vector<AblationRow> ablate(const TrainOptions& options);

/// Models restored from a captioner checkpoint.
struct LoadedCaptioner {
  RunConfig config;
  Vocabulary vocab;
  captioner::CaptionerModel cap;
  std::optional<mtm::MtmModel> mtm;
};
LoadedCaptioner load_captioner(const fs::path& checkpoint);

struct LoadedAutoEncoder {
  RunConfig config;
  Vocabulary vocab;
  textae::AutoEncoderModel model;
};
LoadedAutoEncoder load_autoencoder(const fs::path& checkpoint);

/// Reads a split and checks its width against the corpus manifest.
std::vector<CaptionSample> read_corpus_split(const fs::path& data_dir, const std::string& split,
                                             const Vocabulary& vocab);

}  // namespace mbridge::pipeline
