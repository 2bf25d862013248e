#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdcap/cli.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "sdcap");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = sdcap::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sdcap_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("gradcheck prints every layer below tolerance") {
  const Run r = run({"gradcheck", "--seed", "3"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["command"] == "gradcheck");
  CHECK(j["seed"] == 3);
  CHECK(j["max_rel_error"].get<double>() < 1e-4);
  CHECK(j["layers"].size() >= 7);
}

TEST_CASE("evaluate on identical candidate and reference") {
  const fs::path dir = scratch("eval");
  {
    std::ofstream f(dir / "pairs.jsonl");
    f << R"({"candidate": "a dog runs on the grass", "references": ["a dog runs on the grass"]})"
      << "\n\n"
      << R"({"candidate": "two men ride bikes", "references": ["two men ride bikes", "men on bikes"]})"
      << "\n";
  }
  const Run r = run({"evaluate", "--input", (dir / "pairs.jsonl").string()});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["report"]["bleu_1"].get<double>() == doctest::Approx(1.0));
  CHECK(j["report"]["bleu_4"].get<double>() == doctest::Approx(1.0));
  CHECK(j["report"]["pairs"] == 2);
  CHECK(j.contains("config"));
}

TEST_CASE("usage and load errors exit with 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"gradcheck", "--no-such-flag"}).code == 1);
  const Run missing = run({"evaluate", "--input", "/nonexistent/pairs.jsonl"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("error:") == 0);
  CHECK(missing.err.find('\n') == missing.err.size() - 1);
  const fs::path dir = scratch("bad");
  {
    std::ofstream f(dir / "pairs.jsonl");
    f << "{not json\n";
  }
  CHECK(run({"evaluate", "--input", (dir / "pairs.jsonl").string()}).code == 1);
  CHECK(run({"train", "--features", "x"}).code == 1);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("fixture, pretrain, train, caption and evaluate end to end") {
  const fs::path dir = scratch("e2e");
  const std::string d = dir.string();
  REQUIRE(run({"fixture", "--out", d, "--n-images", "10", "--corpus-pairs", "6",
               "--feature-dim", "8"})
              .code == 0);
  const Run pre = run({"pretrain", "--corpus", d + "/corpus.jsonl", "--vocab", d + "/vocab.txt",
                       "--out", d + "/sum.ckpt", "--epochs", "2", "--summary-embedding", "8",
                       "--summary-hidden", "8"});
  REQUIRE(pre.code == 0);
  CHECK(json::parse(pre.out)["config"]["epochs"] == 2);

  const std::vector<std::string> train_args = {
      "train", "--features", d + "/features.jsonl", "--captions", d + "/captions.jsonl",
      "--vocab", d + "/vocab.txt", "--summarizer", d + "/sum.ckpt", "--epochs", "2",
      "--embedding-size", "8", "--lr", "0.1", "--max-len", "8"};
  auto with = [&](std::vector<std::string> a, const std::string& tag) {
    a.insert(a.end(), {"--checkpoint", d + "/" + tag + ".ckpt", "--out", d + "/" + tag + ".csv"});
    return a;
  };
  const Run t1 = run(with(train_args, "a"));
  REQUIRE(t1.code == 0);
  const Run t2 = run(with(train_args, "b"));
  REQUIRE(t2.code == 0);
  CHECK(slurp(d + "/a.csv") == slurp(d + "/b.csv"));
  CHECK(slurp(d + "/a.ckpt") == slurp(d + "/b.ckpt"));
  const json tj = json::parse(t1.out);
  CHECK(tj["config"]["beam"] == 4);
  CHECK(tj["seed"] == 42);

  const Run cap = run({"caption", "--features", d + "/features.jsonl", "--checkpoint",
                       d + "/a.ckpt", "--beam", "2", "--max-len", "8"});
  REQUIRE(cap.code == 0);
  CHECK(json::parse(cap.out)["captions"].size() == 10);

  const Run ev = run({"evaluate", "--features", d + "/features.jsonl", "--captions",
                      d + "/captions.jsonl", "--checkpoint", d + "/a.ckpt", "--split", "val",
                      "--max-len", "8"});
  REQUIRE(ev.code == 0);
  CHECK(json::parse(ev.out)["report"]["pairs"] == 1);

  const Run ab = run(with({"ablate", "--features", d + "/features.jsonl", "--captions",
                           d + "/captions.jsonl", "--vocab", d + "/vocab.txt", "--epochs", "1",
                           "--embedding-size", "8", "--max-len", "8"},
                          "c"));
  CHECK(ab.code == 0);
  CHECK(run({"evaluate", "--features", d + "/features.jsonl", "--captions",
             d + "/captions.jsonl", "--checkpoint", d + "/a.ckpt", "--split", "dev"})
            .code == 1);
}
