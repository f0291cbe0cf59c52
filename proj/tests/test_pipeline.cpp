#include <doctest.h>

#include <nlohmann/json.hpp>

#include "segqc/errors.hpp"
#include "segqc/io.hpp"
#include "segqc/pipeline.hpp"
#include "segqc/synthval.hpp"
#include "support.hpp"

using namespace segqc;
using nlohmann::json;

namespace {

void small_phantom(const std::filesystem::path& dir, std::size_t cases = 12, std::size_t refs = 3) {
  PhantomConfig cfg;
  cfg.size = 32;
  cfg.cases = cases;
  cfg.references = refs;
  cfg.seed = 3;
  write_phantom_dataset(make_phantom_set(cfg), dir);
}

json base(const std::filesystem::path& ds) { return {{"dataset", ds.string()}, {"size", 0}}; }

json with(json j, const json& extra) {
  j.update(extra);
  return j;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("dataset manifest validation") {
    testing::TempDir dir;
    CHECK_THROWS_AS(Dataset::open(dir / "missing"), DataError);
    CHECK_THROWS_AS(Dataset::open(dir.path()), DataError);
    write_file_atomic(dir / "dataset.json", R"({"class_count": 2, "cases": [{"id": "a"}, {"id": "a"}]})");
    CHECK_THROWS_WITH_AS(Dataset::open(dir.path()), doctest::Contains("duplicate"), DataError);
    write_file_atomic(dir / "dataset.json", R"({"class_count": 2, "cases": [{"id": "a", "role": "train"}]})");
    CHECK_THROWS_AS(Dataset::open(dir.path()), DataError);
    write_file_atomic(dir / "dataset.json", R"({"class_count": 3, "cases": [{"id": "a"}, {"id": "b", "role": "test"}]})");
    const auto ds = Dataset::open(dir.path());
    CHECK(ds.class_count() == 3);
    CHECK(ds.contains("b"));
    CHECK(ds.fingerprint().rfind("fnv1a64:", 0) == 0);
  }

  TEST_CASE("splits keep explicit roles and are seeded") {
    testing::TempDir dir;
    json cases = json::array();
    for (int i = 0; i < 20; ++i) cases.push_back({{"id", "c" + std::to_string(i)}});
    cases.push_back({{"id", "fixed"}, {"role", "test"}});
    write_file_atomic(dir / "dataset.json", json{{"class_count", 2}, {"cases", cases}}.dump());
    const auto ds = Dataset::open(dir.path());
    const auto a = split_dataset(ds, 0.8, 0.1, 1);
    CHECK(a.reference.size() == 16);
    CHECK(a.calibration.size() == 2);
    CHECK(a.test.size() == 3);
    CHECK(std::find(a.test.begin(), a.test.end(), "fixed") != a.test.end());
    CHECK(to_json(a) == to_json(split_dataset(ds, 0.8, 0.1, 1)));
    CHECK(to_json(a) != to_json(split_dataset(ds, 0.8, 0.1, 2)));
  }

  TEST_CASE("config layering and validation") {
    RunConfig cfg;
    cfg.apply({{"alpha", 0.2}, {"k_ref", 4}, {"metric", "assd"}});
    CHECK(cfg.alpha == 0.2);
    CHECK(cfg.k_ref == 4);
    CHECK(cfg.metric == "assd");
    CHECK(cfg.p_low == 0.4);
    CHECK_THROWS_AS(cfg.apply({{"alpah", 0.2}}), UsageError);
    CHECK_THROWS_AS(cfg.apply({{"alpha", "high"}}), UsageError);
    CHECK_THROWS_AS(cfg.apply({{"k_ref", 1.5}}), UsageError);
    CHECK_THROWS_AS(cfg.apply({{"k_ref", -1}}), UsageError);

    RunConfig fractions;
    fractions.apply({{"train_fraction", 0.5}});
    CHECK_THROWS_AS(fractions.validate(), UsageError);
    RunConfig seg;
    seg.apply({{"segmenter", "unet"}});
    CHECK_THROWS_AS(seg.validate(), UsageError);

    // every option has help text
    const auto defaults = RunConfig{}.to_json();
    for (auto it = defaults.begin(); it != defaults.end(); ++it) CHECK(option_help().contains(it.key()));
  }

  TEST_CASE("index command") {
    testing::TempDir dir;
    small_phantom(dir.path(), 4, 2);
    const auto ok = cmd_index([&] {
      RunConfig c;
      c.dataset = dir.path();
      return c;
    }());
    CHECK(ok.at("ok") == true);
    CHECK(ok.at("count") == 6);
    CHECK(ok.at("dim") == 64);

    write_file_atomic(dir / "embeddings.jsonl", "{\"id\":\"a\",\"vec\":[1,2]}\n{\"id\":\"b\",\"vec\":[1]}\n");
    CHECK_THROWS_WITH_AS(run_command("index", {{"dataset", dir.path().string()}}), doctest::Contains("'b'"),
                         DataError);
    std::filesystem::remove(dir / "embeddings.jsonl");
    CHECK_THROWS_WITH_AS(run_command("index", {{"dataset", dir.path().string()}}), doctest::Contains("does not exist"),
                         DataError);
  }

  TEST_CASE("rca command") {
    testing::TempDir dir;
    small_phantom(dir.path());
    const auto ds = dir.path();
    const json self = with(base(ds), {{"target", (ds / "images/ref000.png").string()},
                                      {"pred", (ds / "masks/ref000.png").string()},
                                      {"retrieval", "all"}});
    const auto r = run_command("rca", self);
    CHECK(r.at("target_id") == "ref000");
    CHECK(r.at("scores").size() == 3);
    CHECK(r.at("scores")[0].at("id") == "ref000");
    CHECK(r.at("scores")[0].at("score") == 1.0);
    CHECK(r.at("estimate") == 1.0);

    // k larger than the reference count uses every reference
    const json big_k = with(base(ds), {{"target", (ds / "images/case001.png").string()},
                                       {"pred", (ds / "predictions/case001.png").string()},
                                       {"k_ref", 50}});
    const auto a = run_command("rca", big_k);
    CHECK(a.at("scores").size() == 3);
    CHECK(a.dump() == run_command("rca", big_k).dump());

    const json random_k = with(big_k, {{"retrieval", "random"}, {"k_ref", 2}});
    CHECK(run_command("rca", random_k).at("scores").size() == 2);

    CHECK_THROWS_AS(run_command("rca", base(ds)), UsageError);
    CHECK_THROWS_AS(run_command("rca", with(big_k, {{"target_id", "nobody"}})), DataError);
    CHECK_THROWS_AS(run_command("bogus", base(ds)), UsageError);
  }

  TEST_CASE("calibrate, predict and eval") {
    testing::TempDir dir;
    small_phantom(dir.path());
    const auto ds = dir.path();
    const auto calib_path = dir / "out" / "calib.json";
    const auto c = run_command("calibrate", with(base(ds), {{"out", calib_path.string()}, {"alpha", 0.2}}));
    CHECK(c.at("n") == 6);
    const json doc = json::parse(read_text_file(calib_path));
    CHECK(doc.at("pipeline").at("size") == 0);
    CHECK(doc.at("records").size() == 6);
    CHECK(std::filesystem::exists(dir / "out" / "splits.json"));
    // the same run writes the same bytes
    const std::string first = read_text_file(calib_path);
    run_command("calibrate", with(base(ds), {{"out", calib_path.string()}, {"alpha", 0.2}}));
    CHECK(read_text_file(calib_path) == first);

    // predict picks up size=0 from the calibration's pipeline
    const json pred_opts{{"dataset", ds.string()},
                         {"calib", calib_path.string()},
                         {"target", (ds / "images/case003.png").string()},
                         {"pred", (ds / "predictions/case003.png").string()}};
    const auto p = run_command("predict", pred_opts);
    const auto& iv = p.at("interval");
    CHECK(iv.at("lower").get<double>() <= iv.at("upper").get<double>());
    CHECK(p.at("q_low").get<double>() <= p.at("q_high").get<double>());
    CHECK(p.at("q_hat") == doc.at("q_hat"));

    const auto out = dir / "eval";
    const auto e = run_command("eval", with(base(ds), {{"out_dir", out.string()}, {"alpha", 0.2}}));
    CHECK(e.at("summary").at("count") == 6);
    for (const char* f : {"report.json", "report.csv", "splits.json", "calibration.json"}) {
      CHECK(std::filesystem::exists(out / f));
    }
    const auto splits = json::parse(read_text_file(out / "splits.json"));
    CHECK(splits.at("reference").size() == 3);
    CHECK(splits.at("calibration").size() == 6);
    CHECK(splits.at("test").size() == 6);
  }

  TEST_CASE("empty calibration split") {
    testing::TempDir dir;
    small_phantom(dir.path(), 0, 2);
    CHECK_THROWS_WITH_AS(run_command("calibrate", with(base(dir.path()), {{"out", (dir / "c.json").string()}})),
                         doctest::Contains("empty"), DataError);
  }

  TEST_CASE("synth command") {
    testing::TempDir dir;
    const auto r = run_command("synth", {{"trials", 3}, {"n_test", 200}, {"out_dir", dir.path().string()}});
    CHECK(r.at("trials").size() == 3);
    CHECK(r.at("trials")[1].at("seed") == 1);
    CHECK(std::filesystem::exists(dir / "synth.json"));
    CHECK(std::filesystem::exists(dir / "synth.csv"));
    CHECK(r.dump() == run_command("synth", {{"trials", 3}, {"n_test", 200}}).dump());

    const auto ph = run_command("synth", {{"phantom", (dir / "ph").string()}, {"phantom_cases", 4}});
    CHECK(ph.at("cases") == 4);
    CHECK(Dataset::open(dir / "ph").entries().size() == 12);
  }

  TEST_CASE("external segmenter through the pipeline") {
    testing::TempDir dir;
    small_phantom(dir.path(), 2, 2);
    const auto ds = dir.path();
    // flat manifest: every reference "segmented" as its own ground truth
    json flat{{"ref000", (ds / "masks/ref000.png").string()}, {"ref001", (ds / "masks/ref001.png").string()}};
    write_file_atomic(dir / "ext.json", flat.dump());
    const json opts = with(base(ds), {{"target", (ds / "images/case000.png").string()},
                                      {"pred", (ds / "predictions/case000.png").string()},
                                      {"segmenter", "external:" + (dir / "ext.json").string()},
                                      {"retrieval", "all"}});
    const auto r = run_command("rca", opts);
    CHECK(r.at("scores")[0].at("score") == 1.0);
    CHECK(r.at("scores")[1].at("score") == 1.0);

    json nested{{"case000", flat}};
    write_file_atomic(dir / "nested.json", nested.dump());
    const auto n = run_command("rca", with(opts, {{"segmenter", "external:" + (dir / "nested.json").string()}}));
    CHECK(n.at("estimate") == 1.0);
    CHECK_THROWS_WITH_AS(
        run_command("rca", with(opts, {{"segmenter", "external:" + (dir / "nested.json").string()},
                                       {"target_id", "case001"}})),
        doctest::Contains("case001"), DataError);
  }
}
