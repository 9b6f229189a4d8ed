#include <sstream>

#include "doctest.h"
#include "mbridge/numcore/errors.hpp"
#include "mbridge/pipeline/checkpoint.hpp"
#include "mbridge/pipeline/commands.hpp"
#include "mbridge/pipeline/config.hpp"
#include "support.hpp"

using namespace mbridge;
using namespace mbridge::pipeline;

namespace {

RunConfig tiny_config() {
  RunConfig c;
  c.n_scenes = 60;
  c.d_v = 16;
  c.d_e = 8;
  c.d_emb = 8;
  c.d_h = 8;
  c.d_att = 8;
  c.ae_epochs = 4;
  c.epochs = 4;
  c.batch_size = 8;
  c.seed = 3;
  return c;
}

Checkpoint sample_checkpoint() {
  Checkpoint ck;
  ck.kind = "autoencoder";
  ck.config_json = to_json(tiny_config());
  ck.vocabulary = {"<pad>", "<bos>", "<eos>", "<unk>", "a"};
  Rng rng(1);
  ck.tensors = {{"w", testing::random_tensor(rng, {2, 3})}, {"b", testing::random_tensor(rng, {3})}};
  Parameter p("w", {2, 3});
  p.grad = testing::random_tensor(rng, {2, 3});
  Adam adam({&p}, 1e-3);
  adam.step({&p});
  store_optimizer(ck, adam);
  ck.rng_state = rng.state();
  ck.epoch = 7;
  ck.trace_columns = {"epoch", "loss"};
  ck.trace = {{1, 0.5}, {2, 0.25}};
  return ck;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(validate(RunConfig{}));
  auto c = RunConfig{};
  c.d_v = 8;
  CHECK_THROWS_AS(validate(c), InputError);
  c = RunConfig{};
  c.n_scenes = 0;
  CHECK_THROWS_AS(validate(c), InputError);
  c = RunConfig{};
  c.split_ratios = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(validate(c), InputError);
  c = RunConfig{};
  c.lr_decay = 1.5;
  CHECK_THROWS_AS(validate(c), InputError);
  c = RunConfig{};
  c.modality_loss = mtm::ModalityLossKind::MMD;
  c.batch_size = 1;
  CHECK_THROWS_AS(validate(c), InputError);
  c = RunConfig{};
  c.d_h = 0;
  CHECK_THROWS_AS(validate(c), InputError);
}

TEST_CASE("config json") {
  const auto base = tiny_config();
  const auto round = merge_json(RunConfig{}, to_json(base));
  CHECK(to_json(round) == to_json(base));
  const auto merged = merge_json(base, R"({"lr": 0.01, "modality_loss": "kld", "attention": true})");
  CHECK(merged.lr == 0.01);
  CHECK(merged.modality_loss == mtm::ModalityLossKind::KLD);
  CHECK(merged.attention);
  CHECK(merged.d_e == base.d_e);
  CHECK_THROWS_AS(merge_json(base, R"({"learning_rate": 0.1})"), InputError);
  CHECK_THROWS_AS(merge_json(base, R"({"d_e": "big"})"), InputError);
  CHECK_THROWS_AS(merge_json(base, R"({"d_e": -4})"), InputError);
  CHECK_THROWS_AS(merge_json(base, "[1, 2]"), InputError);
  CHECK_THROWS_AS(merge_json(base, "{not json"), InputError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), InputError);
}

TEST_CASE("checkpoint round trip") {
  const auto ck = sample_checkpoint();
  const auto bytes = serialize(ck);
  CHECK(bytes.substr(0, 8) == std::string("MBRCKPT\0", 8));
  const auto back = deserialize(bytes);
  CHECK(back == ck);
  CHECK(serialize(back) == bytes);
  CHECK(back.tensors[0].second == ck.tensors[0].second);
  CHECK(back.adam.at("w").m == ck.adam.at("w").m);
  CHECK(back.adam.at("w").step == 1);
  CHECK(back.trace == ck.trace);

  testing::TempDir dir;
  save_checkpoint(ck, dir / "x.ckpt");
  CHECK(testing::slurp(dir / "x.ckpt") == bytes);
  CHECK(load_checkpoint(dir / "x.ckpt") == ck);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), InputError);
}

TEST_CASE("checkpoint rejects corruption and other versions") {
  const auto bytes = serialize(sample_checkpoint());
  CHECK_THROWS_AS(deserialize("NOTACKPT" + bytes.substr(8)), IoError);
  CHECK_THROWS_AS(deserialize(bytes.substr(0, bytes.size() - 8)), IoError);
  CHECK_THROWS_AS(deserialize(bytes.substr(0, 12)), IoError);
  auto future = sample_checkpoint();
  future.format_version = kCheckpointFormatVersion + 1;
  CHECK_THROWS_AS(deserialize(serialize(future)), IoError);
}

TEST_CASE("parameter store and restore") {
  Rng rng(2);
  Parameter a("a", {2, 2}), b("b", {3});
  a.value = testing::random_tensor(rng, {2, 2});
  b.value = testing::random_tensor(rng, {3});
  Checkpoint ck;
  store_parameters(ck, {&a, &b});
  Parameter a2("a", {2, 2}), b2("b", {3});
  restore_parameters(ck, {&a2, &b2});
  CHECK(a2.value == a.value);
  CHECK(b2.value == b.value);
  Parameter wrong("a", {4});
  CHECK_THROWS_AS(restore_parameters(ck, {&wrong}), DimensionError);
  Parameter missing("c", {1});
  CHECK_THROWS_AS(restore_parameters(ck, {&missing}), InputError);
}

TEST_CASE("training commands are deterministic and resumable") {
  testing::TempDir dir;
  const auto cfg = tiny_config();
  gen_data(cfg, dir / "data");

  TrainOptions ae;
  ae.config = cfg;
  ae.data_dir = dir / "data";
  ae.out_dir = dir / "ae1";
  const auto ae1 = train_ae(ae);
  ae.out_dir = dir / "ae2";
  const auto ae2 = train_ae(ae);
  CHECK(testing::slurp(ae1) == testing::slurp(ae2));

  ae.out_dir = dir / "ae3";
  ae.stop_after = 2;
  const auto partial = train_ae(ae);
  CHECK(load_checkpoint(partial).epoch == 2);
  ae.stop_after.reset();
  ae.resume = partial;
  const auto ae3 = train_ae(ae);
  CHECK(testing::slurp(ae3) == testing::slurp(ae1));
  CHECK(testing::slurp(dir / "ae3" / "ae_loss.csv") == testing::slurp(dir / "ae1" / "ae_loss.csv"));

  for (const bool attention : {false, true}) {
    CAPTURE(attention);
    TrainOptions cap;
    cap.config = cfg;
    cap.config.attention = attention;
    cap.data_dir = dir / "data";
    cap.ae_checkpoint = ae1;
    cap.out_dir = dir / "cap1";
    const auto c1 = train_captioner(cap);
    cap.out_dir = dir / "cap2";
    const auto c2 = train_captioner(cap);
    CHECK(testing::slurp(c1) == testing::slurp(c2));

    cap.out_dir = dir / "cap3";
    cap.stop_after = 1;
    const auto partial_cap = train_captioner(cap);
    cap.stop_after.reset();
    cap.resume = partial_cap;
    const auto c3 = train_captioner(cap);
    CHECK(testing::slurp(c3) == testing::slurp(c1));
    CHECK(testing::slurp(dir / "cap3" / "trace.csv") == testing::slurp(dir / "cap1" / "trace.csv"));

    const auto loaded = load_captioner(c1);
    CHECK(loaded.cap.config().attention == attention);
    CHECK(loaded.mtm.has_value());
  }

  SUBCASE("a mismatched code width is rejected") {
    TrainOptions cap;
    cap.config = cfg;
    cap.config.d_e = 12;
    cap.data_dir = dir / "data";
    cap.ae_checkpoint = ae1;
    cap.out_dir = dir / "bad";
    CHECK_THROWS_AS(train_captioner(cap), DimensionError);
  }
  SUBCASE("an auto-encoder checkpoint is not a captioner") {
    CHECK_THROWS_AS(load_captioner(ae1), InputError);
  }
  SUBCASE("missing corpus") {
    TrainOptions bad = ae;
    bad.resume.reset();
    bad.data_dir = dir / "nowhere";
    CHECK_THROWS_AS(train_ae(bad), InputError);
  }
}

TEST_CASE("caption and eval commands") {
  testing::TempDir dir;
  const auto cfg = tiny_config();
  gen_data(cfg, dir / "data");
  TrainOptions ae;
  ae.config = cfg;
  ae.data_dir = dir / "data";
  ae.out_dir = dir / "ae";
  TrainOptions cap = ae;
  cap.ae_checkpoint = train_ae(ae);
  cap.out_dir = dir / "cap";
  const auto ckpt = train_captioner(cap);

  CaptionOptions co;
  co.checkpoint = ckpt;
  co.input = dir / "data" / "test.jsonl";
  co.output = dir / "greedy.jsonl";
  caption(co);
  co.output = dir / "beam1.jsonl";
  co.beam = 1;
  caption(co);
  CHECK(testing::slurp(dir / "greedy.jsonl") == testing::slurp(dir / "beam1.jsonl"));
  co.output = dir / "greedy2.jsonl";
  co.beam = 0;
  caption(co);
  CHECK(testing::slurp(dir / "greedy.jsonl") == testing::slurp(dir / "greedy2.jsonl"));

  EvalOptions self;
  self.candidates = dir / "data" / "test.jsonl";
  self.references = dir / "data" / "test.jsonl";
  self.out_dir = dir / "self";
  const auto r = eval(self);
  CHECK(r.bleu[3] == 1.0);
  CHECK(r.rouge_l == 1.0);

  EvalOptions ev;
  ev.candidates = dir / "greedy.jsonl";
  ev.references = dir / "data" / "test.jsonl";
  ev.out_dir = dir / "eval";
  ev.plot_trace = dir / "cap" / "trace.csv";
  const auto rep = eval(ev);
  CHECK(std::filesystem::exists(dir / "eval" / "report.json"));
  CHECK(std::filesystem::exists(dir / "eval" / "report.csv"));
  CHECK(std::filesystem::exists(dir / "eval" / "plot_data.csv"));
  ev.threads = 3;
  ev.out_dir = dir / "eval3";
  CHECK(eval(ev).to_json() == rep.to_json());

  EvalOptions mismatch = ev;
  mismatch.references = dir / "data" / "val.jsonl";
  try {
    eval(mismatch);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("no reference for") != std::string::npos);
  }
}
