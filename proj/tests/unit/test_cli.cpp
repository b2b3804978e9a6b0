#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "../../tools/cli.hpp"
#include "hoir/ingest.hpp"
#include "support.hpp"

using namespace hoir;
using hoir::test::kFixture;
using hoir::test::TempDir;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string fx(const char* name) { return (kFixture / name).string(); }

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(call({}).code == cli::kInvalid);
  CHECK(call({"frobnicate"}).code == cli::kInvalid);
  CHECK(call({"refine", "--predictions", fx("predictions.jsonl")}).code == cli::kInvalid);
  TempDir dir;
  auto r = call({"refine", "--config", (dir / "missing.json").string(), "--predictions", fx("predictions.jsonl"),
                 "--out", (dir / "o.jsonl").string()});
  CHECK(r.code == cli::kInvalid);
  CHECK(r.err.find("missing.json") != std::string::npos);
}

TEST_CASE("vocabulary mismatch exits 1") {
  TempDir dir;
  write_text_file(dir / "vocab.txt", "hold\nride\n");
  auto r = call({"eval", "--predictions", fx("predictions.jsonl"), "--gt", fx("gt.jsonl"), "--vocab",
                 (dir / "vocab.txt").string(), "--out", (dir / "r.jsonl").string()});
  CHECK(r.code == cli::kInvalid);
}

TEST_CASE("eval on the fixture baseline") {
  TempDir dir;
  auto r = call({"eval", "--predictions", fx("predictions.jsonl"), "--gt", fx("gt.jsonl"), "--vocab",
                 fx("vocab.txt"), "--out", (dir / "r.jsonl").string()});
  REQUIRE(r.code == cli::kOk);
  CHECK(r.out.find("52.32") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "r.jsonl"));
}

TEST_CASE("gradcheck exit codes") {
  TempDir dir;
  auto batch = (dir / "b.txt").string();
  REQUIRE(call({"make-batch", "--out", batch, "--seed", "3"}).code == cli::kOk);
  CHECK(call({"gradcheck", "--batch", batch, "--metric", "neg_cosine", "--h", "1e-5"}).code == cli::kOk);
  CHECK(call({"gradcheck", "--batch", batch, "--h", "0"}).code == cli::kInvalid);
  CHECK(call({"gradcheck", "--batch", batch, "--metric", "chebyshev"}).code == cli::kInvalid);
  write_text_file(dir / "bad.txt", "2 2 l1\n1 2 3\n");
  CHECK(call({"gradcheck", "--batch", (dir / "bad.txt").string()}).code == cli::kInvalid);
  CHECK(call({"gradcheck", "--batch", (dir / "nope.txt").string()}).code == cli::kInvalid);
}

TEST_CASE("clip text") {
  auto r = call({"clip-text", "--predictions", fx("predictions.jsonl"), "--vocab", fx("vocab.txt")});
  REQUIRE(r.code == cli::kOk);
  CHECK(r.out.find("A scene of a person ") != std::string::npos);
}

TEST_CASE("unreachable providers exit 2") {
  TempDir dir;
  ::setenv("HOIR_CLI_TEST_KEY", "k", 1);
  write_text_file(dir / "config.json", R"({
    "providers": [{"id": "dead", "kind": "http", "endpoint": "http://127.0.0.1:1/v1/chat/completions",
                   "api_key_env": "HOIR_CLI_TEST_KEY", "max_retries": 0, "backoff_base": 0, "timeout": 1}],
    "vocabulary": ")" + fx("vocab.txt") + R"("})");
  auto r = call({"refine", "--config", (dir / "config.json").string(), "--predictions", fx("predictions.jsonl"),
                 "--out", (dir / "o.jsonl").string()});
  CHECK(r.code == cli::kProviderExhausted);
}

TEST_CASE("refine then eval") {
  TempDir dir;
  auto out = (dir / "refined.jsonl").string();
  auto r = call({"refine", "--config", fx("config.json"), "--predictions", fx("predictions.jsonl"), "--out", out,
                 "--cache-dir", (dir / "cache").string()});
  REQUIRE(r.code == cli::kOk);
  auto e = call({"eval", "--predictions", out, "--gt", fx("gt.jsonl"), "--config", fx("config.json")});
  REQUIRE(e.code == cli::kOk);
  CHECK(e.out.find("68.04") != std::string::npos);
}
