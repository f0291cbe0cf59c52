#include "segqc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "segqc/errors.hpp"
#include "segqc/io.hpp"
#include "segqc/report.hpp"
#include "segqc/rng.hpp"
#include "segqc/synthval.hpp"

namespace segqc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Role parse_role(const std::string& s) {
  if (s == "reference") return Role::Reference;
  if (s == "calibration") return Role::Calibration;
  if (s == "test") return Role::Test;
  throw DataError("unknown role '" + s + "' (expected reference, calibration or test)");
}

std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

std::uint64_t case_seed(std::uint64_t seed, const std::string& case_id) {
  const std::string s = std::to_string(seed);
  return fnv1a64(case_id.data(), case_id.size(), fnv1a64(s.data(), s.size()));
}

void require_path(const fs::path& p, const char* option) {
  if (p.empty()) throw UsageError(std::string("missing required option --") + option);
}

void require_dir(const fs::path& p, const char* option) {
  require_path(p, option);
  if (!fs::is_directory(p)) throw DataError(std::string("--") + option + " '" + p.string() + "' is not a directory");
}

std::string file_id(const fs::path& p) { return p.stem().string(); }

CalibrationOptions calibration_options(const RunConfig& cfg) {
  CalibrationOptions o;
  o.alpha = cfg.alpha;
  o.p_low = cfg.p_low;
  o.p_high = cfg.p_high;
  o.kind = parse_nonconformity(cfg.kind);
  o.mode = parse_estimate_mode(cfg.mode);
  o.metric = parse_metric(cfg.metric);
  return o;
}

std::optional<EmbeddingIndex> maybe_embeddings(const RunConfig& cfg, const Dataset& ds) {
  const bool wants = cfg.retrieval == "cosine" || cfg.retrieval == "euclidean" || cfg.retrieval == "inner" ||
                     (cfg.retrieval == "auto" && ds.has_embeddings());
  if (!wants) return std::nullopt;
  return load_embeddings(ds.embeddings_path());
}

// RCA for one case against the retrieved references.
struct CaseRca {
  std::vector<std::string> references;
  ScoreSet scores;
};

CaseRca run_case(const RunConfig& cfg, ReferenceStore& store, const std::vector<std::string>& reference_ids,
                 const std::optional<EmbeddingIndex>& embeddings, const std::string& case_id, const GrayImage& target,
                 const LabelMask& prediction) {
  CaseRca out;
  out.references = select_references(cfg, reference_ids, embeddings, case_id);
  const ReferenceDatabase db = store.database(out.references);
  const auto segmenter = make_segmenter(cfg, case_id);
  out.scores = rca_scores({target, prediction, *segmenter, db, parse_metric(cfg.metric)});
  return out;
}

json scores_json(const ScoreSet& s) {
  json arr = json::array();
  for (const auto& e : s.entries) arr.push_back({{"id", e.reference_id}, {"score", e.score}});
  return arr;
}

json interval_json(const PredictionInterval& iv) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(v > 0 ? "inf" : "-inf"); };
  return {{"lower", num(iv.lower)},         {"upper", num(iv.upper)},       {"raw_lower", num(iv.raw_lower)},
          {"raw_upper", num(iv.raw_upper)}, {"degenerate", iv.degenerate}, {"width", num(iv.width())}};
}

struct CalibrationRun {
  ConformalCalibration calibration;
  json document;
};

CalibrationRun calibrate_split(const RunConfig& cfg, const Dataset& ds, const Splits& splits) {
  if (splits.calibration.empty()) throw DataError("calibration split is empty");
  if (splits.reference.empty()) throw DataError("reference split is empty");
  const auto opts = calibration_options(cfg);
  const auto metric = parse_metric(cfg.metric);
  const auto embeddings = maybe_embeddings(cfg, ds);
  ReferenceStore store(ds, cfg.size);

  std::vector<CalibrationRecord> records;
  json record_docs = json::array();
  for (const auto& id : splits.calibration) {
    const GrayImage image = load_working_image(ds.image_path(id), cfg.size);
    const LabelMask pred = load_working_mask(ds.prediction_path(id), ds.class_count(), cfg.size);
    const LabelMask gt = load_working_mask(ds.mask_path(id), ds.class_count(), cfg.size);
    CaseRca rca = run_case(cfg, store, splits.reference, embeddings, id, image, pred);
    CalibrationRecord r{id, rca.scores.values(), evaluate_metric(metric, pred, gt), std::nullopt};
    record_docs.push_back({{"id", id}, {"truth", r.truth}, {"scores", r.scores}});
    records.push_back(std::move(r));
  }
  CalibrationRun run;
  run.calibration = calibrate(records, opts);
  std::string fp = ds.fingerprint();
  for (const auto& id : splits.calibration) fp += "," + id;
  run.calibration.created_from = "fnv1a64:" + hex64(fnv1a64(fp.data(), fp.size()));

  run.document = run.calibration;
  run.document["pipeline"] = cfg.pipeline_json();
  for (std::size_t i = 0; i < record_docs.size(); ++i) {
    record_docs[i]["nonconformity"] = run.calibration.scores[i];
  }
  run.document["records"] = record_docs;
  return run;
}

ConformalCalibration load_calibration(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw DataError("calibration file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return j.get<ConformalCalibration>();
}

}  // namespace

std::string to_string(Role role) {
  switch (role) {
    case Role::Reference: return "reference";
    case Role::Calibration: return "calibration";
    case Role::Test: return "test";
  }
  return "unknown";
}

Dataset Dataset::open(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory '" + dir.string() + "' does not exist");
  Dataset ds;
  ds.dir_ = dir;
  ds.manifest_text_ = read_text_file(dir / "dataset.json");
  try {
    const json j = json::parse(ds.manifest_text_);
    ds.class_count_ = j.at("class_count").get<int>();
    std::set<std::string> seen;
    for (const auto& c : j.at("cases")) {
      DatasetEntry e;
      e.id = c.at("id").get<std::string>();
      if (e.id.empty() || e.id.find('/') != std::string::npos) throw DataError("invalid case id '" + e.id + "'");
      if (c.contains("role") && !c.at("role").is_null()) e.role = parse_role(c.at("role").get<std::string>());
      if (!seen.insert(e.id).second) throw DataError("duplicate case id '" + e.id + "' in dataset.json");
      ds.entries_.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DataError("malformed dataset.json: " + std::string(e.what()));
  }
  if (ds.class_count_ < 2) throw DataError("dataset.json: class_count must be >= 2");
  if (ds.entries_.empty()) throw DataError("dataset.json lists no cases");
  return ds;
}

bool Dataset::contains(const std::string& id) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.id == id; });
}

std::string Dataset::fingerprint() const {
  return "fnv1a64:" + hex64(fnv1a64(manifest_text_.data(), manifest_text_.size()));
}

Splits split_dataset(const Dataset& ds, double reference_fraction, double calibration_fraction, std::uint64_t seed) {
  Splits s;
  std::vector<std::string> unassigned;
  for (const auto& e : ds.entries()) {
    if (!e.role) {
      unassigned.push_back(e.id);
      continue;
    }
    switch (*e.role) {
      case Role::Reference: s.reference.push_back(e.id); break;
      case Role::Calibration: s.calibration.push_back(e.id); break;
      case Role::Test: s.test.push_back(e.id); break;
    }
  }
  if (!unassigned.empty()) {
    auto shuffled = random_subset(unassigned, unassigned.size(), seed);
    const auto n = static_cast<double>(shuffled.size());
    const auto n_ref = static_cast<std::size_t>(std::llround(reference_fraction * n));
    const auto n_cal = std::min(shuffled.size() - n_ref, static_cast<std::size_t>(std::llround(calibration_fraction * n)));
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
      auto& dst = i < n_ref ? s.reference : i < n_ref + n_cal ? s.calibration : s.test;
      dst.push_back(shuffled[i]);
    }
  }
  return s;
}

json to_json(const Splits& s) {
  return {{"reference", s.reference}, {"calibration", s.calibration}, {"test", s.test}};
}

json RunConfig::to_json() const {
  return {{"dataset", dataset.string()},
          {"train_fraction", train_fraction},
          {"calibration_fraction", calibration_fraction},
          {"test_fraction", test_fraction},
          {"metric", metric},
          {"segmenter", segmenter},
          {"retrieval", retrieval},
          {"k_ref", k_ref},
          {"mode", mode},
          {"size", size},
          {"atlas_levels", atlas_levels},
          {"atlas_iterations", atlas_iterations},
          {"seed", seed},
          {"alpha", alpha},
          {"p_low", p_low},
          {"p_high", p_high},
          {"kind", kind},
          {"target", target.string()},
          {"pred", pred.string()},
          {"target_id", target_id},
          {"calib", calib.string()},
          {"out", out.string()},
          {"out_dir", out_dir.string()},
          {"trials", trials},
          {"n_cal", n_cal},
          {"n_test", n_test},
          {"ref_size", ref_size},
          {"sigma", sigma},
          {"phantom", phantom.string()},
          {"phantom_cases", phantom_cases},
          {"phantom_references", phantom_references},
          {"phantom_size", phantom_size}};
}

json RunConfig::pipeline_json() const {
  const json all = to_json();
  json out;
  for (const char* key : {"train_fraction", "calibration_fraction", "test_fraction", "metric", "segmenter", "retrieval",
                          "k_ref", "mode", "size", "atlas_levels", "atlas_iterations", "seed"}) {
    out[key] = all.at(key);
  }
  return out;
}

void RunConfig::apply(const json& overrides) {
  if (overrides.is_null()) return;
  if (!overrides.is_object()) throw UsageError("configuration must be a JSON object");
  json merged = to_json();
  for (const auto& [key, value] : overrides.items()) {
    if (!merged.contains(key)) throw UsageError("unknown option '" + key + "'");
    if (value.is_null()) continue;
    const auto& current = merged.at(key);
    const bool ok = (current.is_string() && value.is_string()) ||
                    (current.is_number_float() && value.is_number()) ||
                    (current.is_number_integer() && value.is_number_integer());
    if (!ok) throw UsageError("option '" + key + "' has the wrong type");
    if (current.is_number_unsigned() && value.is_number_integer() && value.get<std::int64_t>() < 0) {
      throw UsageError("option '" + key + "' must be non-negative");
    }
    merged[key] = value;
  }
  RunConfig c;
  c.dataset = merged["dataset"].get<std::string>();
  c.train_fraction = merged["train_fraction"].get<double>();
  c.calibration_fraction = merged["calibration_fraction"].get<double>();
  c.test_fraction = merged["test_fraction"].get<double>();
  c.metric = merged["metric"].get<std::string>();
  c.segmenter = merged["segmenter"].get<std::string>();
  c.retrieval = merged["retrieval"].get<std::string>();
  c.k_ref = merged["k_ref"].get<std::size_t>();
  c.mode = merged["mode"].get<std::string>();
  c.size = merged["size"].get<int>();
  c.atlas_levels = merged["atlas_levels"].get<int>();
  c.atlas_iterations = merged["atlas_iterations"].get<int>();
  c.seed = merged["seed"].get<std::uint64_t>();
  c.alpha = merged["alpha"].get<double>();
  c.p_low = merged["p_low"].get<double>();
  c.p_high = merged["p_high"].get<double>();
  c.kind = merged["kind"].get<std::string>();
  c.target = merged["target"].get<std::string>();
  c.pred = merged["pred"].get<std::string>();
  c.target_id = merged["target_id"].get<std::string>();
  c.calib = merged["calib"].get<std::string>();
  c.out = merged["out"].get<std::string>();
  c.out_dir = merged["out_dir"].get<std::string>();
  c.trials = merged["trials"].get<std::size_t>();
  c.n_cal = merged["n_cal"].get<std::size_t>();
  c.n_test = merged["n_test"].get<std::size_t>();
  c.ref_size = merged["ref_size"].get<std::size_t>();
  c.sigma = merged["sigma"].get<double>();
  c.phantom = merged["phantom"].get<std::string>();
  c.phantom_cases = merged["phantom_cases"].get<std::size_t>();
  c.phantom_references = merged["phantom_references"].get<std::size_t>();
  c.phantom_size = merged["phantom_size"].get<int>();
  *this = std::move(c);
}

void RunConfig::validate() const {
  for (double f : {train_fraction, calibration_fraction, test_fraction}) {
    if (!(f >= 0 && f <= 1)) throw UsageError("split fractions must lie in [0,1]");
  }
  if (std::abs(train_fraction + calibration_fraction + test_fraction - 1.0) > 1e-9) {
    throw UsageError("split fractions must sum to 1");
  }
  parse_metric(metric);
  parse_estimate_mode(mode);
  if (segmenter != "atlas" && segmenter.rfind("external:", 0) != 0) {
    throw UsageError("segmenter must be 'atlas' or 'external:<manifest>'");
  }
  static const std::set<std::string> kRetrieval{"auto", "all", "random", "cosine", "euclidean", "inner"};
  if (!kRetrieval.contains(retrieval)) {
    throw UsageError("retrieval must be one of auto, all, random, cosine, euclidean, inner");
  }
  if (k_ref < 1) throw UsageError("k_ref must be >= 1");
  if (size < 0) throw UsageError("size must be >= 0 (0 keeps native resolution)");
  AtlasConfig atlas;
  atlas.pyramid_levels = atlas_levels;
  atlas.iterations_per_level = atlas_iterations;
  atlas.validate();
  CalibrationOptions{alpha, p_low, p_high}.validate();
  parse_nonconformity(kind);
}

const std::map<std::string, std::string>& option_help() {
  static const std::map<std::string, std::string> help{
      {"dataset", "dataset directory (dataset.json, images/, masks/, predictions/, embeddings.jsonl)"},
      {"train_fraction", "fraction of unassigned cases used as the reference database"},
      {"calibration_fraction", "fraction of unassigned cases used for conformal calibration"},
      {"test_fraction", "fraction of unassigned cases used for testing"},
      {"metric", "agreement metric: dsc | hausdorff | assd"},
      {"segmenter", "reverse segmenter: atlas | external:<manifest.json>"},
      {"retrieval", "reference selection: auto (cosine if embeddings.jsonl exists, else random) | all | random | "
                    "cosine | euclidean | inner"},
      {"k_ref", "number of references per case"},
      {"mode", "RCA point estimate: max | mean"},
      {"size", "working resolution (square, pixels); 0 keeps native size"},
      {"atlas_levels", "atlas registration pyramid levels"},
      {"atlas_iterations", "atlas registration iterations per level"},
      {"seed", "seed for splitting, random retrieval and synthetic data"},
      {"alpha", "miscoverage level; intervals target 1-alpha coverage"},
      {"p_low", "lower empirical quantile level of the RCA scores"},
      {"p_high", "upper empirical quantile level of the RCA scores"},
      {"kind", "nonconformity score: cqr | residual | locally-weighted"},
      {"target", "target image (PNG)"},
      {"pred", "predicted mask of the target (PNG)"},
      {"target_id", "embedding id of the target (default: target file stem)"},
      {"calib", "calibration JSON produced by 'calibrate'"},
      {"out", "output file"},
      {"out_dir", "output directory"},
      {"trials", "number of synthetic trials"},
      {"n_cal", "synthetic calibration cases per trial"},
      {"n_test", "synthetic test cases per trial"},
      {"ref_size", "synthetic RCA scores per case"},
      {"sigma", "standard deviation of the synthetic score noise"},
      {"phantom", "write a synthetic phantom dataset to this directory instead of running trials"},
      {"phantom_cases", "calibration+test cases in the phantom dataset"},
      {"phantom_references", "reference cases in the phantom dataset"},
      {"phantom_size", "phantom image size in pixels"},
  };
  return help;
}

ReferenceStore::ReferenceStore(const Dataset& ds, int size) : ds_(ds), size_(size) {}

const ReferenceRecord& ReferenceStore::get(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto it = cache_.find(id);
  if (it != cache_.end()) return *it->second;
  auto rec = std::make_unique<ReferenceRecord>();
  rec->id = id;
  rec->image = load_working_image(ds_.image_path(id), size_);
  rec->gt_mask = load_working_mask(ds_.mask_path(id), ds_.class_count(), size_);
  if (!same_dims(rec->image, rec->gt_mask)) throw DataError("reference '" + id + "': image and mask sizes differ");
  return *cache_.emplace(id, std::move(rec)).first->second;
}

ReferenceDatabase ReferenceStore::database(const std::vector<std::string>& ids) {
  std::vector<ReferenceRecord> records;
  records.reserve(ids.size());
  for (const auto& id : ids) records.push_back(get(id));
  return ReferenceDatabase(std::move(records));
}

GrayImage load_working_image(const fs::path& path, int size) {
  GrayImage img = load_image(path);
  return size > 0 ? resize_bilinear(img, size, size) : img;
}

LabelMask load_working_mask(const fs::path& path, int class_count, int size) {
  LabelMask m = load_mask(path, class_count);
  return size > 0 ? resize_nearest(m, size, size) : m;
}

std::vector<std::string> select_references(const RunConfig& cfg, const std::vector<std::string>& reference_ids,
                                           const std::optional<EmbeddingIndex>& embeddings,
                                           const std::string& case_id) {
  if (reference_ids.empty()) throw DataError("no reference cases available");
  std::string mode = cfg.retrieval;
  if (mode == "auto") mode = embeddings ? "cosine" : "random";
  if (mode == "all") return reference_ids;
  if (mode == "random") return random_subset(reference_ids, cfg.k_ref, case_seed(cfg.seed, case_id));

  if (!embeddings) throw DataError("retrieval '" + mode + "' needs embeddings.jsonl");
  const EmbeddingVector* query = embeddings->find(case_id);
  if (query == nullptr) throw DataError("no embedding for target id '" + case_id + "'");
  const EmbeddingIndex refs = embeddings->restricted_to(reference_ids);
  if (refs.size() != reference_ids.size()) {
    for (const auto& id : reference_ids) {
      if (refs.find(id) == nullptr) throw DataError("no embedding for reference id '" + id + "'");
    }
  }
  std::vector<std::string> out;
  for (const auto& n : refs.top_k(*query, cfg.k_ref, parse_similarity(mode))) out.push_back(n.id);
  return out;
}

std::unique_ptr<ReverseSegmenter> make_segmenter(const RunConfig& cfg, const std::string& case_id) {
  if (cfg.segmenter == "atlas") {
    AtlasConfig atlas;
    atlas.pyramid_levels = cfg.atlas_levels;
    atlas.iterations_per_level = cfg.atlas_iterations;
    return std::make_unique<AtlasSegmenter>(atlas);
  }
  const fs::path manifest_path = cfg.segmenter.substr(std::string("external:").size());
  json j;
  try {
    j = json::parse(read_text_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw DataError("external manifest '" + manifest_path.string() + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw DataError("external manifest must be a JSON object");
  // Nested manifests map case id -> {reference id -> mask path}.
  const bool nested = !j.empty() && j.begin()->is_object();
  if (nested) {
    if (!j.contains(case_id)) throw DataError("external manifest has no entry for case '" + case_id + "'");
    j = j.at(case_id);
  }
  return std::make_unique<ExternalSegmenter>(ExternalManifest::from_json_text(j.dump(), manifest_path.parent_path()));
}

json cmd_index(const RunConfig& cfg) {
  require_dir(cfg.dataset, "dataset");
  const Dataset ds = Dataset::open(cfg.dataset);
  const EmbeddingIndex index = load_embeddings(ds.embeddings_path());
  std::vector<std::string> missing;
  for (const auto& e : ds.entries()) {
    if (index.find(e.id) == nullptr) missing.push_back(e.id);
  }
  return {{"ok", missing.empty()},
          {"path", ds.embeddings_path().string()},
          {"count", index.size()},
          {"dim", index.dim()},
          {"missing", missing}};
}

json cmd_rca(const RunConfig& cfg) {
  require_dir(cfg.dataset, "dataset");
  require_path(cfg.target, "target");
  require_path(cfg.pred, "pred");
  const Dataset ds = Dataset::open(cfg.dataset);
  const Splits splits = split_dataset(ds, cfg.train_fraction, cfg.calibration_fraction, cfg.seed);
  const std::string id = cfg.target_id.empty() ? file_id(cfg.target) : cfg.target_id;
  const GrayImage image = load_working_image(cfg.target, cfg.size);
  const LabelMask pred = load_working_mask(cfg.pred, ds.class_count(), cfg.size);
  ReferenceStore store(ds, cfg.size);
  const auto rca = run_case(cfg, store, splits.reference, maybe_embeddings(cfg, ds), id, image, pred);
  const auto mode = parse_estimate_mode(cfg.mode);
  return {{"target_id", id},
          {"metric", cfg.metric},
          {"mode", cfg.mode},
          {"retrieval", cfg.retrieval},
          {"segmenter", cfg.segmenter},
          {"scores", scores_json(rca.scores)},
          {"estimate", rca_point_estimate(rca.scores, mode)}};
}

json cmd_calibrate(const RunConfig& cfg) {
  require_dir(cfg.dataset, "dataset");
  fs::path out = cfg.out;
  if (out.empty() && !cfg.out_dir.empty()) out = cfg.out_dir / "calibration.json";
  require_path(out, "out");
  const Dataset ds = Dataset::open(cfg.dataset);
  const Splits splits = split_dataset(ds, cfg.train_fraction, cfg.calibration_fraction, cfg.seed);
  CalibrationRun run = calibrate_split(cfg, ds, splits);
  write_file_atomic(out, run.document.dump(2) + "\n");
  const fs::path split_dir = cfg.out_dir.empty() ? out.parent_path() : cfg.out_dir;
  write_file_atomic(split_dir / "splits.json", to_json(splits).dump(2) + "\n");
  json summary = run.calibration;
  summary.erase("nonconformity");
  summary["out"] = out.string();
  return summary;
}

json cmd_predict(const RunConfig& cfg) {
  require_path(cfg.calib, "calib");
  require_dir(cfg.dataset, "dataset");
  require_path(cfg.target, "target");
  require_path(cfg.pred, "pred");
  const ConformalCalibration calib = load_calibration(cfg.calib);
  const Dataset ds = Dataset::open(cfg.dataset);
  const Splits splits = split_dataset(ds, cfg.train_fraction, cfg.calibration_fraction, cfg.seed);
  const std::string id = cfg.target_id.empty() ? file_id(cfg.target) : cfg.target_id;
  const GrayImage image = load_working_image(cfg.target, cfg.size);
  const LabelMask pred = load_working_mask(cfg.pred, ds.class_count(), cfg.size);
  ReferenceStore store(ds, cfg.size);
  const auto rca = run_case(cfg, store, splits.reference, maybe_embeddings(cfg, ds), id, image, pred);
  const auto values = rca.scores.values();
  const auto iv = predict_interval(values, calib);
  json out{{"target_id", id},
           {"estimate", rca_point_estimate(values, calib.mode, calib.metric)},
           {"q_hat", calib.finite() ? json(calib.q_hat) : json(nullptr)},
           {"alpha", calib.alpha},
           {"kind", to_string(calib.kind)},
           {"interval", interval_json(iv)},
           {"scores", scores_json(rca.scores)}};
  if (calib.kind == NonconformityKind::CqrEmpirical) {
    const auto q = quantile_pair(values, calib.p_low, calib.p_high);
    out["q_low"] = q.low;
    out["q_high"] = q.high;
  }
  return out;
}

json cmd_synth(const RunConfig& cfg) {
  if (!cfg.phantom.empty()) {
    PhantomConfig pc;
    pc.size = cfg.phantom_size;
    pc.references = cfg.phantom_references;
    pc.cases = cfg.phantom_cases;
    pc.seed = cfg.seed;
    write_phantom_dataset(make_phantom_set(pc), cfg.phantom);
    return {{"phantom", cfg.phantom.string()},
            {"references", pc.references},
            {"cases", pc.cases},
            {"size", pc.size},
            {"seed", pc.seed}};
  }
  if (cfg.trials < 1) throw UsageError("trials must be >= 1");
  SyntheticConfig sc;
  sc.n_cal = cfg.n_cal;
  sc.n_test = cfg.n_test;
  sc.ref_size = cfg.ref_size;
  sc.noise_sigma = cfg.sigma;
  sc.alpha = cfg.alpha;
  sc.p_low = cfg.p_low;
  sc.p_high = cfg.p_high;

  json trials = json::array();
  std::string csv = "trial,seed,coverage,mean_width,q_hat\n";
  double cov_sum = 0, width_sum = 0, cov_min = 1, cov_max = 0;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    sc.seed = cfg.seed + t;
    const TrialResult r = run_synthetic_trial(sc);
    const json q = std::isfinite(r.q_hat) ? json(r.q_hat) : json(nullptr);
    trials.push_back({{"trial", t}, {"seed", r.seed}, {"coverage", r.coverage}, {"mean_width", r.mean_width}, {"q_hat", q}});
    csv += std::to_string(t) + "," + std::to_string(r.seed) + "," + json(r.coverage).dump() + "," +
           json(r.mean_width).dump() + "," + (std::isfinite(r.q_hat) ? json(r.q_hat).dump() : "inf") + "\n";
    cov_sum += r.coverage;
    width_sum += r.mean_width;
    cov_min = std::min(cov_min, r.coverage);
    cov_max = std::max(cov_max, r.coverage);
  }
  const double n = static_cast<double>(cfg.trials);
  json out{{"config",
            {{"trials", cfg.trials},
             {"seed", cfg.seed},
             {"n_cal", sc.n_cal},
             {"n_test", sc.n_test},
             {"ref_size", sc.ref_size},
             {"sigma", sc.noise_sigma},
             {"alpha", sc.alpha},
             {"p_low", sc.p_low},
             {"p_high", sc.p_high}}},
           {"trials", trials},
           {"aggregate",
            {{"mean_coverage", cov_sum / n},
             {"min_coverage", cov_min},
             {"max_coverage", cov_max},
             {"mean_width", width_sum / n},
             {"target_coverage", 1.0 - sc.alpha}}}};
  if (!cfg.out_dir.empty()) {
    write_file_atomic(cfg.out_dir / "synth.json", out.dump(2) + "\n");
    write_file_atomic(cfg.out_dir / "synth.csv", csv);
  }
  return out;
}

json cmd_eval(const RunConfig& cfg) {
  require_dir(cfg.dataset, "dataset");
  require_path(cfg.out_dir, "out-dir");
  const Dataset ds = Dataset::open(cfg.dataset);
  const Splits splits = split_dataset(ds, cfg.train_fraction, cfg.calibration_fraction, cfg.seed);
  if (splits.test.empty()) throw DataError("test split is empty");
  write_file_atomic(cfg.out_dir / "splits.json", to_json(splits).dump(2) + "\n");

  ConformalCalibration calib;
  if (!cfg.calib.empty()) {
    calib = load_calibration(cfg.calib);
  } else {
    CalibrationRun run = calibrate_split(cfg, ds, splits);
    write_file_atomic(cfg.out_dir / "calibration.json", run.document.dump(2) + "\n");
    calib = run.calibration;
  }

  const auto metric = parse_metric(cfg.metric);
  const auto embeddings = maybe_embeddings(cfg, ds);
  ReferenceStore store(ds, cfg.size);
  EvaluationReport report;
  for (const auto& id : splits.test) {
    const GrayImage image = load_working_image(ds.image_path(id), cfg.size);
    const LabelMask pred = load_working_mask(ds.prediction_path(id), ds.class_count(), cfg.size);
    const LabelMask gt = load_working_mask(ds.mask_path(id), ds.class_count(), cfg.size);
    const auto rca = run_case(cfg, store, splits.reference, embeddings, id, image, pred);
    const auto values = rca.scores.values();
    const auto iv = predict_interval(values, calib);
    ReportPair p;
    p.id = id;
    p.predicted = rca_point_estimate(values, calib.mode, calib.metric);
    p.truth = evaluate_metric(metric, pred, gt);
    p.lower = iv.lower;
    p.upper = iv.upper;
    p.degenerate = iv.degenerate;
    report.pairs.push_back(std::move(p));
  }
  report.summarize();
  emit(report, ReportFormat::Json, cfg.out_dir / "report.json");
  emit(report, ReportFormat::Csv, cfg.out_dir / "report.csv");

  const json full = json::parse(report_to_json(report));
  return {{"summary", full.at("summary")},
          {"q_hat", calib.finite() ? json(calib.q_hat) : json(nullptr)},
          {"report_json", (cfg.out_dir / "report.json").string()},
          {"report_csv", (cfg.out_dir / "report.csv").string()}};
}

json run_command(const std::string& command, const json& options) {
  if (!options.is_null() && !options.is_object()) throw UsageError("options must be a JSON object");
  RunConfig cfg;
  if ((command == "predict" || command == "eval") && options.is_object() && options.contains("calib") &&
      options.at("calib").is_string() && !options.at("calib").get<std::string>().empty()) {
    const json doc = json::parse(read_text_file(options.at("calib").get<std::string>()), nullptr, false);
    if (doc.is_discarded()) throw DataError("calibration file is not valid JSON");
    if (doc.contains("pipeline")) cfg.apply(doc.at("pipeline"));
  }
  cfg.apply(options);
  cfg.validate();

  if (command == "index") return cmd_index(cfg);
  if (command == "rca") return cmd_rca(cfg);
  if (command == "calibrate") return cmd_calibrate(cfg);
  if (command == "predict") return cmd_predict(cfg);
  if (command == "synth") return cmd_synth(cfg);
  if (command == "eval") return cmd_eval(cfg);
  throw UsageError("unknown command '" + command + "' (expected index, rca, calibrate, predict, synth or eval)");
}

}  // namespace segqc
