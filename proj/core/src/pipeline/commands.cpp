#include "mbridge/pipeline/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mbridge/numcore/errors.hpp"

namespace mbridge::pipeline {

namespace {

using Json = nlohmann::json;

constexpr const char* kAeKind = "autoencoder";
constexpr const char* kCaptionerKind = "captioner";

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory " + dir.string());
}

void log_line(std::ostream* log, const std::string& line) {
  if (log) *log << line << '\n' << std::flush;
}

synthdata::Manifest corpus_manifest(const fs::path& data_dir) {
  const auto path = data_dir / "manifest.json";
  if (!fs::exists(path)) throw InputError("no corpus at " + data_dir.string() + " (missing manifest.json)");
  return synthdata::read_manifest(path);
}

void check_vocab(const std::vector<std::string>& expected, const Vocabulary& vocab, const std::string& what) {
  if (expected != vocab.tokens()) {
    throw InputError("vocabulary mismatch: " + what + " has " + std::to_string(expected.size()) +
                     " tokens, model has " + std::to_string(vocab.size()));
  }
}

std::vector<TokenSequence> captions_of(const std::vector<CaptionSample>& samples) {
  std::vector<TokenSequence> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.caption);
  return out;
}

Checkpoint require_kind(Checkpoint ck, const std::string& kind, const fs::path& path) {
  if (ck.kind != kind) {
    throw InputError(path.string() + " is a " + ck.kind + " checkpoint, expected " + kind);
  }
  return ck;
}

std::vector<double> ae_row(const textae::AeEpochStats& s) {
  return {static_cast<double>(s.epoch), s.loss, s.token_acc};
}

textae::AeEpochStats ae_stats(const std::vector<double>& r) {
  return {static_cast<std::size_t>(r.at(0)), r.at(1), r.at(2)};
}

std::vector<double> captioner_row(const captioner::CaptionerEpochStats& s) {
  return {static_cast<double>(s.epoch), s.ce_loss, s.modality_loss, s.has_modality ? 1.0 : 0.0,
          s.val_bleu4, s.val_rouge_l, s.val_cider, s.val_exact};
}

captioner::CaptionerEpochStats captioner_stats(const std::vector<double>& r) {
  captioner::CaptionerEpochStats s;
  s.epoch = static_cast<std::size_t>(r.at(0));
  s.ce_loss = r.at(1);
  s.modality_loss = r.at(2);
  s.has_modality = r.at(3) != 0.0;
  s.val_bleu4 = r.at(4);
  s.val_rouge_l = r.at(5);
  s.val_cider = r.at(6);
  s.val_exact = r.at(7);
  return s;
}

void write_ae_csv(const fs::path& path, const std::vector<textae::AeEpochStats>& trace) {
  auto out = open_out(path);
  out << "epoch,loss,token_acc\n";
  for (const auto& s : trace) out << s.epoch << ',' << fmt(s.loss) << ',' << fmt(s.token_acc) << '\n';
}

void write_trace_csv(const fs::path& path, const std::vector<captioner::CaptionerEpochStats>& trace) {
  auto out = open_out(path);
  out << "epoch,ce_loss,modality_loss,val_BLEU4,val_ROUGE_L,val_CIDEr\n";
  for (const auto& s : trace) {
    out << s.epoch << ',' << fmt(s.ce_loss) << ',' << (s.has_modality ? fmt(s.modality_loss) : "") << ','
        << fmt(s.val_bleu4) << ',' << fmt(s.val_rouge_l) << ',' << fmt(s.val_cider) << '\n';
  }
}

struct CaptionRecord {
  std::int64_t id = 0;
  std::vector<metrics::Tokens> captions;
};

/// Records keyed by "id" or "scene_id", with "tokens" or "caption". Repeated
/// ids collect several captions; a "references" array of token lists is
/// accepted in their place.
std::vector<CaptionRecord> read_captions(const fs::path& path, bool allow_repeats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::vector<CaptionRecord> out;
  std::map<std::int64_t, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      const auto rec = Json::parse(line);
      const auto id = rec.at(rec.contains("id") ? "id" : "scene_id").get<std::int64_t>();
      std::vector<metrics::Tokens> caps;
      if (rec.contains("references")) {
        caps = rec.at("references").get<std::vector<metrics::Tokens>>();
      } else {
        caps.push_back(rec.at(rec.contains("tokens") ? "tokens" : "caption").get<metrics::Tokens>());
      }
      const auto it = index.find(id);
      if (it != index.end()) {
        if (!allow_repeats) throw InputError(where + ": duplicate scene_id " + std::to_string(id));
        auto& dst = out[it->second].captions;
        dst.insert(dst.end(), caps.begin(), caps.end());
      } else {
        index.emplace(id, out.size());
        out.push_back({id, std::move(caps)});
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  return out;
}

std::string id_list(const std::vector<std::int64_t>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < 20; ++i) out += (i ? ", " : "") + std::to_string(ids[i]);
  if (ids.size() > 20) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

}  // namespace

fs::path gen_data(const RunConfig& config, const fs::path& out) {
  validate(config);
  ensure_dir(out);
  try {
    return synthdata::build_corpus(corpus_config(config), out);
  } catch (const IoError& e) {
    // An unwritable output path is a usage problem at this level.
    throw InputError(e.what());
  }
}

std::vector<CaptionSample> read_corpus_split(const fs::path& data_dir, const std::string& split,
                                             const Vocabulary& vocab) {
  const auto manifest = corpus_manifest(data_dir);
  check_vocab(manifest.vocabulary, vocab, "corpus manifest");
  const auto path = data_dir / (split + ".jsonl");
  if (!fs::exists(path)) throw InputError("missing corpus split " + path.string());
  auto samples = synthdata::read_split(path, vocab);
  for (const auto& s : samples) {
    if (s.regions.cols() != manifest.d_v) {
      throw DimensionError(path.string() + ": scene " + std::to_string(s.scene_id) + " has d_v " +
                           std::to_string(s.regions.cols()) + ", manifest says " + std::to_string(manifest.d_v));
    }
    if (s.caption.ids.empty()) throw InputError(path.string() + ": scene " + std::to_string(s.scene_id) + " has no caption");
  }
  return samples;
}

fs::path train_ae(const TrainOptions& o) {
  const RunConfig& cfg = o.config;
  validate(cfg);
  const auto manifest = corpus_manifest(o.data_dir);
  const Vocabulary vocab(manifest.vocabulary);
  const auto train = read_corpus_split(o.data_dir, "train", vocab);
  if (train.empty()) throw InputError("training split is empty");
  const auto captions = captions_of(train);
  ensure_dir(o.out_dir);

  textae::AutoEncoderModel model(ae_model_config(cfg, vocab.size()));
  Rng init_rng(mix_seed(cfg.seed, 0));
  model.init_uniform(init_rng, cfg.ae_init_bound);
  textae::AutoEncoderTrainer trainer(captions, std::move(model), ae_train_config(cfg));

  if (o.resume) {
    const auto ck = require_kind(load_checkpoint(*o.resume), kAeKind, *o.resume);
    check_vocab(ck.vocabulary, vocab, "resume checkpoint");
    restore_parameters(ck, trainer.model().parameters());
    restore_optimizer(ck, trainer.optimizer());
    std::vector<textae::AeEpochStats> trace;
    for (const auto& r : ck.trace) trace.push_back(ae_stats(r));
    trainer.restore(ck.epoch, std::move(trace), ck.rng_state);
    log_line(o.log, "resumed auto-encoder at epoch " + std::to_string(ck.epoch));
  }

  const std::size_t stop = std::min(cfg.ae_epochs, o.stop_after.value_or(cfg.ae_epochs));
  while (trainer.epoch() < stop) {
    const auto s = trainer.run_epoch();
    log_line(o.log, "ae epoch " + std::to_string(s.epoch) + " loss " + fmt(s.loss) + " token_acc " + fmt(s.token_acc));
  }

  Checkpoint ck;
  ck.kind = kAeKind;
  ck.config_json = to_json(cfg);
  ck.vocabulary = vocab.tokens();
  store_parameters(ck, trainer.model().parameters());
  store_optimizer(ck, trainer.optimizer());
  ck.rng_state = trainer.rng().state();
  ck.epoch = trainer.epoch();
  ck.trace_columns = {"epoch", "loss", "token_acc"};
  for (const auto& s : trainer.trace()) ck.trace.push_back(ae_row(s));
  const auto path = o.out_dir / "ae.ckpt";
  save_checkpoint(ck, path);
  write_ae_csv(o.out_dir / "ae_loss.csv", trainer.trace());
  if (trainer.epoch() == cfg.ae_epochs) {
    const auto score = textae::reconstruction_accuracy(trainer.model(), captions);
    log_line(o.log, "reconstruction token accuracy " + fmt(score.token_accuracy) + " exact " + fmt(score.exact_match));
  }
  return path;
}

LoadedAutoEncoder load_autoencoder(const fs::path& checkpoint) {
  const auto ck = require_kind(load_checkpoint(checkpoint), kAeKind, checkpoint);
  const RunConfig cfg = merge_json(RunConfig{}, ck.config_json);
  Vocabulary vocab(ck.vocabulary);
  textae::AutoEncoderModel model(ae_model_config(cfg, vocab.size()));
  restore_parameters(ck, model.parameters());
  return {cfg, std::move(vocab), std::move(model)};
}

LoadedCaptioner load_captioner(const fs::path& checkpoint) {
  const auto ck = require_kind(load_checkpoint(checkpoint), kCaptionerKind, checkpoint);
  const RunConfig cfg = merge_json(RunConfig{}, ck.config_json);
  Vocabulary vocab(ck.vocabulary);
  captioner::CaptionerModel cap(captioner_config(cfg, vocab.size()));
  std::optional<mtm::MtmModel> mtm;
  if (cfg.use_mtm) mtm.emplace(cfg.d_v, cfg.d_e);
  auto params = cap.parameters();
  if (mtm) {
    for (auto* p : mtm->parameters()) params.push_back(p);
  }
  restore_parameters(ck, params);
  return {cfg, std::move(vocab), std::move(cap), std::move(mtm)};
}

fs::path train_captioner(const TrainOptions& o) {
  const RunConfig& cfg = o.config;
  validate(cfg);
  if (!o.ae_checkpoint) throw InputError("train-captioner needs an auto-encoder checkpoint");
  const auto ae = load_autoencoder(*o.ae_checkpoint);
  const auto manifest = corpus_manifest(o.data_dir);
  check_vocab(manifest.vocabulary, ae.vocab, "corpus manifest");
  if (cfg.use_mtm && cfg.d_e != ae.model.config().d_e) {
    throw DimensionError("config d_e=" + std::to_string(cfg.d_e) + " but the auto-encoder has d_e=" +
                         std::to_string(ae.model.config().d_e));
  }
  if (cfg.d_v != manifest.d_v) {
    throw DimensionError("config d_v=" + std::to_string(cfg.d_v) + " but the corpus has d_v=" +
                         std::to_string(manifest.d_v));
  }
  auto train = read_corpus_split(o.data_dir, "train", ae.vocab);
  auto val = read_corpus_split(o.data_dir, "val", ae.vocab);
  if (train.empty()) throw InputError("training split is empty");
  ensure_dir(o.out_dir);

  auto models = captioner::init_models(captioner_config(cfg, ae.vocab.size()), cfg.d_v, cfg.d_e, cfg.use_mtm, cfg.seed,
                                       cfg.init_bound);
  captioner::CaptionerTrainer trainer(std::move(train), std::move(val), ae.model, ae.vocab, std::move(models.cap),
                                      std::move(models.mtm), captioner_train_config(cfg));
  if (o.resume) {
    const auto ck = require_kind(load_checkpoint(*o.resume), kCaptionerKind, *o.resume);
    check_vocab(ck.vocabulary, ae.vocab, "resume checkpoint");
    restore_parameters(ck, trainer.parameters());
    restore_optimizer(ck, trainer.optimizer());
    std::vector<captioner::CaptionerEpochStats> trace;
    for (const auto& r : ck.trace) trace.push_back(captioner_stats(r));
    trainer.restore(ck.epoch, std::move(trace), ck.rng_state);
    log_line(o.log, "resumed captioner at epoch " + std::to_string(ck.epoch));
  }

  const std::size_t stop = std::min(cfg.epochs, o.stop_after.value_or(cfg.epochs));
  while (trainer.epoch() < stop) {
    const auto s = trainer.run_epoch();
    log_line(o.log, "captioner epoch " + std::to_string(s.epoch) + " ce " + fmt(s.ce_loss) +
                        (s.has_modality ? " modality " + fmt(s.modality_loss) : std::string()) + " val_CIDEr " +
                        fmt(s.val_cider) + " val_exact " + fmt(s.val_exact));
  }

  Checkpoint ck;
  ck.kind = kCaptionerKind;
  ck.config_json = to_json(cfg);
  ck.vocabulary = ae.vocab.tokens();
  store_parameters(ck, trainer.parameters());
  store_optimizer(ck, trainer.optimizer());
  ck.rng_state = trainer.rng().state();
  ck.epoch = trainer.epoch();
  ck.trace_columns = {"epoch", "ce_loss", "modality_loss", "has_modality",
                      "val_bleu4", "val_rouge_l", "val_cider", "val_exact"};
  for (const auto& s : trainer.trace()) ck.trace.push_back(captioner_row(s));
  const auto path = o.out_dir / "captioner.ckpt";
  save_checkpoint(ck, path);
  write_trace_csv(o.out_dir / "trace.csv", trainer.trace());
  return path;
}

void caption(const CaptionOptions& o) {
  const auto lc = load_captioner(o.checkpoint);
  std::optional<fs::path> manifest = o.manifest;
  if (!manifest && fs::exists(o.input.parent_path() / "manifest.json")) manifest = o.input.parent_path() / "manifest.json";
  if (manifest) check_vocab(synthdata::read_manifest(*manifest).vocabulary, lc.vocab, "corpus manifest");
  if (!fs::exists(o.input)) throw InputError("missing input " + o.input.string());
  const auto samples = synthdata::read_split(o.input, lc.vocab);
  const mtm::MtmModel* mtm = lc.mtm ? &*lc.mtm : nullptr;
  std::set<std::int64_t> seen;
  for (const auto& s : samples) {
    if (s.regions.cols() != lc.config.d_v) {
      throw DimensionError("scene " + std::to_string(s.scene_id) + " has d_v " + std::to_string(s.regions.cols()) +
                           ", model expects " + std::to_string(lc.config.d_v));
    }
    if (!seen.insert(s.scene_id).second) throw InputError("duplicate scene_id " + std::to_string(s.scene_id));
  }
  auto out = open_out(o.output);
  for (const auto& s : samples) {
    const auto tokens = o.beam == 0 ? captioner::greedy_decode(lc.cap, mtm, s.regions)
                                    : captioner::beam_decode(lc.cap, mtm, s.regions, o.beam);
    Json rec;
    rec["scene_id"] = s.scene_id;
    rec["caption"] = lc.vocab.decode(tokens.ids);
    out << rec.dump() << '\n';
  }
}

metrics::EvalReport eval(const EvalOptions& o) {
  const auto candidates = read_captions(o.candidates, false);
  if (candidates.empty()) throw InputError("no candidates in " + o.candidates.string());
  const auto references = read_captions(o.references, true);
  std::map<std::int64_t, const CaptionRecord*> refs;
  for (const auto& r : references) refs.emplace(r.id, &r);

  std::vector<std::int64_t> no_reference, no_candidate;
  std::set<std::int64_t> candidate_ids;
  for (const auto& c : candidates) {
    candidate_ids.insert(c.id);
    if (!refs.count(c.id)) no_reference.push_back(c.id);
    if (c.captions.size() != 1) throw InputError("candidate " + std::to_string(c.id) + " must have one caption");
  }
  for (const auto& r : references) {
    if (!candidate_ids.count(r.id)) no_candidate.push_back(r.id);
  }
  if (!no_reference.empty() || !no_candidate.empty()) {
    std::string msg = "candidate and reference ids differ";
    if (!no_reference.empty()) msg += "; no reference for: " + id_list(no_reference);
    if (!no_candidate.empty()) msg += "; no candidate for: " + id_list(no_candidate);
    throw InputError(msg);
  }

  metrics::EvalCorpus corpus;
  for (const auto& c : candidates) corpus.add(c.id, c.captions.front(), refs.at(c.id)->captions);
  const auto report = metrics::evaluate(corpus, o.threads);

  ensure_dir(o.out_dir);
  open_out(o.out_dir / "report.json") << report.to_json() << '\n';
  open_out(o.out_dir / "report.csv") << metrics::EvalReport::csv_header() << '\n' << report.csv_row() << '\n';

  if (o.plot_trace) {
    std::ifstream in(*o.plot_trace, std::ios::binary);
    if (!in) throw InputError("cannot read trace " + o.plot_trace->string());
    std::string line;
    std::getline(in, line);
    if (line.rfind("epoch,ce_loss,modality_loss,", 0) != 0) {
      throw InputError(o.plot_trace->string() + " is not a captioner trace");
    }
    auto out = open_out(o.out_dir / "plot_data.csv");
    out << "epoch,modality_loss,CIDEr\n";
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      if (cells.size() < 6) throw InputError("short trace row: " + line);
      out << cells[0] << ',' << cells[2] << ',' << cells[5] << '\n';
    }
  }
  return report;
}

std::vector<AblationRow> ablate(const TrainOptions& o) {
  validate(o.config);
  ensure_dir(o.out_dir);
  std::vector<std::pair<std::string, RunConfig>> runs;
  RunConfig baseline = o.config;
  baseline.use_mtm = false;
  runs.emplace_back("baseline", baseline);
  for (auto kind : mtm::kAllLossKinds) {
    RunConfig c = o.config;
    c.use_mtm = true;
    c.modality_loss = kind;
    runs.emplace_back(std::string(mtm::to_string(kind)), c);
  }

  std::vector<AblationRow> rows;
  for (const auto& [name, cfg] : runs) {
    log_line(o.log, "ablation run " + name);
    TrainOptions run = o;
    run.config = cfg;
    run.out_dir = o.out_dir / name;
    run.resume.reset();
    run.stop_after.reset();
    const auto ckpt = train_captioner(run);
    const auto lc = load_captioner(ckpt);
    const auto ck = load_checkpoint(ckpt);
    const auto test = read_corpus_split(o.data_dir, "test", lc.vocab);
    const auto corpus = captioner::decode_corpus(lc.cap, lc.mtm ? &*lc.mtm : nullptr, test, lc.vocab);
    AblationRow row;
    row.variant = name;
    row.val_cider = ck.trace.empty() ? 0.0 : captioner_stats(ck.trace.back()).val_cider;
    row.test = metrics::evaluate(corpus, metrics::threads_from_env());
    rows.push_back(row);
  }

  auto out = open_out(o.out_dir / "ablation.csv");
  out << "variant,val_CIDEr," << metrics::EvalReport::csv_header() << '\n';
  for (const auto& r : rows) out << r.variant << ',' << fmt(r.val_cider) << ',' << r.test.csv_row() << '\n';
  return rows;
}

}  // namespace mbridge::pipeline
