// Runs the segqc executable end to end and checks exit codes and outputs.
#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <string>

#include "segqc/io.hpp"
#include "support.hpp"

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(SEGQC_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  Result r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help lists subcommands and defaults") {
    const auto top = run("--help");
    CHECK(top.code == 0);
    for (const char* s : {"index", "rca", "calibrate", "predict", "synth", "eval"}) {
      CHECK(top.out.find(s) != std::string::npos);
    }
    const auto ev = run("eval --help");
    CHECK(ev.code == 0);
    CHECK(ev.out.find("--alpha") != std::string::npos);
    CHECK(ev.out.find("[0.1]") != std::string::npos);
    CHECK(ev.out.find("--k-ref") != std::string::npos);
  }

  TEST_CASE("usage and data errors map to exit codes") {
    CHECK(run("").code == 1);
    CHECK(run("eval --no-such-flag").code == 1);
    CHECK(run("synth --alpha 1.5").code == 1);
    CHECK(run("index --dataset /nonexistent").code == 2);
  }

  TEST_CASE("phantom dataset end to end") {
    testing::TempDir dir;
    const auto ds = dir / "ds";
    REQUIRE(run("synth --phantom " + q(ds) + " --phantom-cases 8 --phantom-references 3 --phantom-size 32").code == 0);
    CHECK(run("index --dataset " + q(ds)).code == 0);

    const std::string target = " --target " + q(ds / "images/case001.png") + " --pred " +
                               q(ds / "predictions/case001.png");
    const auto a = run("rca --dataset " + q(ds) + " --size 0" + target);
    CHECK(a.code == 0);
    CHECK(nlohmann::json::parse(a.out).at("scores").size() == 3);
    CHECK(run("rca --dataset " + q(ds) + " --size 0" + target).out == a.out);

    // config file supplies options, flags override
    segqc::write_file_atomic(dir / "cfg.json",
                             nlohmann::json{{"dataset", ds.string()}, {"size", 0}, {"alpha", 0.3}}.dump());
    const auto calib = dir / "calib.json";
    const auto c = run("calibrate --config " + q(dir / "cfg.json") + " --alpha 0.25 --out " + q(calib));
    REQUIRE(c.code == 0);
    CHECK(nlohmann::json::parse(c.out).at("alpha") == 0.25);

    const auto p = run("predict --dataset " + q(ds) + " --calib " + q(calib) + target);
    CHECK(p.code == 0);
    CHECK(nlohmann::json::parse(p.out).contains("interval"));

    const auto e = run("eval --config " + q(dir / "cfg.json") + " --out-dir " + q(dir / "eval"));
    CHECK(e.code == 0);
    CHECK(std::filesystem::exists(dir / "eval" / "report.csv"));

    segqc::write_file_atomic(dir / "bad.json", R"({"alhpa": 0.3})");
    CHECK(run("synth --config " + q(dir / "bad.json")).code == 1);
  }
}
