// mbridge: corpus generation, training, captioning and evaluation.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "mbridge/metrics/metrics.hpp"
#include "mbridge/numcore/errors.hpp"
#include "mbridge/pipeline/commands.hpp"

namespace fs = std::filesystem;
using namespace mbridge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

pipeline::RunConfig base_config(const Globals& g) {
  pipeline::RunConfig cfg;
  if (!g.config.empty()) cfg = pipeline::load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

fs::path out_dir(const Globals& g, const char* fallback) { return g.out.empty() ? fs::path(fallback) : fs::path(g.out); }

template <typename T>
void override_if(const CLI::Option* opt, const T& value, T& target) {
  if (opt->count() > 0) target = value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image captioning with a modality transition module, on a synthetic corpus"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed overriding the configuration");
  app.add_option("--out", g.out, "Output directory (or file for caption)");
  bool quiet = false;
  app.add_flag("--quiet", quiet, "No per-epoch progress on stderr");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write train/val/test JSONL and a manifest");
  std::size_t n_scenes = 0;
  std::size_t d_v = 0;
  double noise = 0.0;
  auto* gen_n = gen->add_option("--n", n_scenes, "Number of scenes");
  auto* gen_dv = gen->add_option("--d-v", d_v, "Region feature width (>= 16)");
  auto* gen_noise = gen->add_option("--noise", noise, "Feature noise std");

  // training flags shared by train-ae, train-captioner and ablate
  std::string data_dir = "data";
  std::string ae_ckpt;
  std::string resume;
  std::size_t stop_after = 0;
  std::size_t epochs = 0;
  std::string loss_name;
  auto* tae = app.add_subcommand("train-ae", "Pre-train the caption auto-encoder");
  auto* tcap = app.add_subcommand("train-captioner", "Train the captioner against a frozen auto-encoder");
  auto* abl = app.add_subcommand("ablate", "Baseline plus one captioner per modality loss");
  CLI::Option* epochs_opts[3]{};
  CLI::Option* stop_opts[2]{};
  int i = 0;
  for (auto* sub : {tae, tcap, abl}) {
    sub->add_option("--data", data_dir, "Corpus directory")->capture_default_str();
    epochs_opts[i] = sub->add_option("--epochs", epochs, "Epochs (overrides the configuration)");
    if (sub != abl) {
      sub->add_option("--resume", resume, "Checkpoint to resume from");
      stop_opts[i] = sub->add_option("--stop-after", stop_after, "Stop once this many epochs are done");
    }
    ++i;
  }
  bool no_mtm = false;
  bool attention = false;
  CLI::Option* att_opts[2]{};
  auto* loss_opt = tcap->add_option("--modality-loss", loss_name, "mse, mae, cos, kld or mmd");
  tcap->add_flag("--no-mtm", no_mtm, "Bridge the pooled visual feature directly (no modality loss)");
  i = 0;
  for (auto* sub : {tcap, abl}) {
    sub->add_option("--ae", ae_ckpt, "Auto-encoder checkpoint")->required();
    att_opts[i++] = sub->add_flag("--attention", attention, "Enable additive attention over regions");
  }

  // caption
  auto* cap = app.add_subcommand("caption", "Caption region features with a trained model");
  pipeline::CaptionOptions cap_opts;
  std::string cap_ckpt, cap_input, cap_manifest;
  cap->add_option("--ckpt", cap_ckpt, "Captioner checkpoint")->required();
  cap->add_option("--input", cap_input, "JSONL with scene_id and features")->required();
  cap->add_option("--beam", cap_opts.beam, "Beam width (default greedy)")->check(CLI::PositiveNumber);
  cap->add_option("--manifest", cap_manifest, "Corpus manifest for the vocabulary check");

  // eval
  auto* ev = app.add_subcommand("eval", "Score candidate captions against references");
  std::string candidates, references, plot_trace;
  ev->add_option("--candidates", candidates, "Candidate JSONL")->required();
  ev->add_option("--references", references, "Reference JSONL")->required();
  ev->add_option("--plot-data", plot_trace, "Captioner trace.csv to convert into plot data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::ostream* log = quiet ? nullptr : &std::cerr;
  try {
    pipeline::RunConfig cfg = base_config(g);
    if (gen->parsed()) {
      override_if(gen_n, n_scenes, cfg.n_scenes);
      override_if(gen_dv, d_v, cfg.d_v);
      override_if(gen_noise, noise, cfg.noise_sigma);
      std::cout << pipeline::gen_data(cfg, out_dir(g, "data")).string() << '\n';
    } else if (tae->parsed()) {
      override_if(epochs_opts[0], epochs, cfg.ae_epochs);
      pipeline::TrainOptions o{cfg, data_dir, out_dir(g, "runs/ae"), std::nullopt, std::nullopt, std::nullopt, log};
      if (!resume.empty()) o.resume = resume;
      if (stop_opts[0]->count()) o.stop_after = stop_after;
      std::cout << pipeline::train_ae(o).string() << '\n';
    } else if (tcap->parsed() || abl->parsed()) {
      const bool is_cap = tcap->parsed();
      override_if(epochs_opts[is_cap ? 1 : 2], epochs, cfg.epochs);
      override_if(att_opts[is_cap ? 0 : 1], attention, cfg.attention);
      if (is_cap) {
        if (loss_opt->count()) cfg.modality_loss = mtm::parse_loss_kind(loss_name);
        if (no_mtm) cfg.use_mtm = false;
      }
      pipeline::TrainOptions o{cfg, data_dir, out_dir(g, is_cap ? "runs/captioner" : "runs/ablation"),
                               fs::path(ae_ckpt), std::nullopt, std::nullopt, log};
      if (is_cap) {
        if (!resume.empty()) o.resume = resume;
        if (stop_opts[1]->count()) o.stop_after = stop_after;
        std::cout << pipeline::train_captioner(o).string() << '\n';
      } else {
        pipeline::ablate(o);
        std::cout << (o.out_dir / "ablation.csv").string() << '\n';
      }
    } else if (cap->parsed()) {
      cap_opts.checkpoint = cap_ckpt;
      cap_opts.input = cap_input;
      cap_opts.output = g.out.empty() ? fs::path("captions.jsonl") : fs::path(g.out);
      if (!cap_manifest.empty()) cap_opts.manifest = cap_manifest;
      pipeline::caption(cap_opts);
      std::cout << cap_opts.output.string() << '\n';
    } else if (ev->parsed()) {
      pipeline::EvalOptions o{candidates, references, out_dir(g, "eval"), std::nullopt, metrics::threads_from_env()};
      if (!plot_trace.empty()) o.plot_trace = plot_trace;
      std::cout << pipeline::eval(o).to_json() << '\n';
    }
  } catch (const std::invalid_argument& e) {  // InputError, DimensionError
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::out_of_range& e) {  // IndexError
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
