#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "support.hpp"

namespace {

// Runs the CLI with `args`, stdout and stderr discarded; returns the exit code.
int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + MBRIDGE_CLI_PATH + " --quiet " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("usage errors exit with 2") {
  testing::TempDir dir;
  CHECK(run("") == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("gen-data --n 0 --out " + q(dir / "d")) == 2);
  CHECK(run("gen-data --d-v 8 --out " + q(dir / "d")) == 2);
  CHECK(run("gen-data --n 10 --d-v 16 --out /proc/mbridge-cannot-write") == 2);
  CHECK(run("train-ae --data " + q(dir / "nowhere") + " --out " + q(dir / "ae")) == 2);
  write(dir / "bad.json", R"({"no_such_key": 1})");
  CHECK(run("--config " + q(dir / "bad.json") + " gen-data --out " + q(dir / "d")) == 2);
  write(dir / "empty.jsonl", "");
  CHECK(run("eval --candidates " + q(dir / "empty.jsonl") + " --references " + q(dir / "empty.jsonl") + " --out " +
            q(dir / "e")) == 2);
  CHECK(run("train-captioner --modality-loss l2 --ae x --data y") == 2);
}

TEST_CASE("help exits with 0") { CHECK(run("--help") == 0); }

TEST_CASE("runtime failures exit with 1") {
  testing::TempDir dir;
  write(dir / "corrupt.ckpt", "MBRCKPT");
  write(dir / "in.jsonl", "");
  CHECK(run("caption --ckpt " + q(dir / "corrupt.ckpt") + " --input " + q(dir / "in.jsonl") + " --out " +
            q(dir / "out.jsonl")) == 1);
}

TEST_CASE("end to end through the command line") {
  testing::TempDir dir;
  write(dir / "cfg.json",
        R"({"n_scenes": 50, "d_v": 16, "d_e": 8, "d_emb": 8, "d_h": 8, "d_att": 8,
            "ae_epochs": 2, "epochs": 2, "batch_size": 8})");
  const std::string cfg = "--config " + q(dir / "cfg.json") + " --seed 4 ";
  REQUIRE(run(cfg + "gen-data --out " + q(dir / "data")) == 0);
  REQUIRE(run(cfg + "train-ae --data " + q(dir / "data") + " --out " + q(dir / "ae")) == 0);
  REQUIRE(run(cfg + "train-captioner --data " + q(dir / "data") + " --ae " + q(dir / "ae" / "ae.ckpt") +
              " --attention --out " + q(dir / "cap")) == 0);

  SUBCASE("mismatched code width") {
    CHECK(run(cfg + "train-captioner --data " + q(dir / "data") + " --ae " + q(dir / "ae" / "ae.ckpt") + " --out " +
              q(dir / "cap2")) == 0);
    write(dir / "wide.json", R"({"d_v": 16, "d_e": 12, "epochs": 1})");
    CHECK(run("--config " + q(dir / "wide.json") + " train-captioner --data " + q(dir / "data") + " --ae " +
              q(dir / "ae" / "ae.ckpt") + " --out " + q(dir / "cap3")) == 2);
  }

  SUBCASE("caption: beam 1 equals greedy and reruns are identical") {
    const std::string base = "caption --ckpt " + q(dir / "cap" / "captioner.ckpt") + " --input " +
                             q(dir / "data" / "test.jsonl");
    REQUIRE(run(base + " --out " + q(dir / "g.jsonl")) == 0);
    REQUIRE(run(base + " --out " + q(dir / "g2.jsonl")) == 0);
    REQUIRE(run(base + " --beam 1 --out " + q(dir / "b1.jsonl")) == 0);
    REQUIRE(run(base + " --beam 3 --out " + q(dir / "b3.jsonl")) == 0);
    const auto greedy = testing::slurp(dir / "g.jsonl");
    CHECK(!greedy.empty());
    CHECK(greedy == testing::slurp(dir / "g2.jsonl"));
    CHECK(greedy == testing::slurp(dir / "b1.jsonl"));

    // Output ids follow the input ids.
    std::ifstream in(dir / "g.jsonl"), ref(dir / "data" / "test.jsonl");
    std::string a, b;
    while (std::getline(in, a) && std::getline(ref, b)) {
      CHECK(nlohmann::json::parse(a).at("scene_id") == nlohmann::json::parse(b).at("scene_id"));
    }

    CHECK(run("eval --candidates " + q(dir / "g.jsonl") + " --references " + q(dir / "data" / "test.jsonl") +
              " --plot-data " + q(dir / "cap" / "trace.csv") + " --out " + q(dir / "eval")) == 0);
    CHECK(std::filesystem::exists(dir / "eval" / "plot_data.csv"));
  }

  SUBCASE("caption: vocabulary mismatch against a manifest") {
    auto manifest = nlohmann::json::parse(testing::slurp(dir / "data" / "manifest.json"));
    manifest["vocabulary"].push_back("zebra");
    write(dir / "manifest.json", manifest.dump());
    CHECK(run("caption --ckpt " + q(dir / "cap" / "captioner.ckpt") + " --input " + q(dir / "data" / "test.jsonl") +
              " --manifest " + q(dir / "manifest.json") + " --out " + q(dir / "x.jsonl")) == 2);
  }

  SUBCASE("eval: self-evaluation is perfect at any thread count") {
    const std::string args = "eval --candidates " + q(dir / "data" / "val.jsonl") + " --references " +
                             q(dir / "data" / "val.jsonl");
    REQUIRE(run(args + " --out " + q(dir / "e1")) == 0);
    REQUIRE(run(args + " --out " + q(dir / "e4"), "MBRIDGE_THREADS=4") == 0);
    const auto r1 = nlohmann::json::parse(testing::slurp(dir / "e1" / "report.json"));
    CHECK(r1.dump() == nlohmann::json::parse(testing::slurp(dir / "e4" / "report.json")).dump());
    CHECK(r1.at("BLEU-4").get<double>() == 1.0);
    CHECK(r1.at("ROUGE-L").get<double>() == 1.0);
    CHECK(run("eval --candidates " + q(dir / "data" / "val.jsonl") + " --references " +
              q(dir / "data" / "test.jsonl") + " --out " + q(dir / "e5")) == 2);
  }
}
