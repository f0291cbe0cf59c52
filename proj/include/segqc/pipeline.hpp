#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "segqc/conformal.hpp"
#include "segqc/core.hpp"
#include "segqc/metrics.hpp"
#include "segqc/rca.hpp"
#include "segqc/retrieval.hpp"
#include "segqc/segmenter.hpp"

namespace segqc {

enum class Role { Reference, Calibration, Test };

std::string to_string(Role role);

struct DatasetEntry {
  std::string id;
  std::optional<Role> role;  // unassigned entries are split by seeded fractions
};

/// On-disk dataset:
///   dataset.json        {"class_count": int, "cases": [{"id": str, "role": "reference"|"calibration"|"test"}]}
///   images/<id>.png     grayscale image
///   masks/<id>.png      ground-truth labels
///   predictions/<id>.png  predicted labels (calibration and test cases)
///   embeddings.jsonl    optional, one {"id", "vec"} per line
class Dataset {
 public:
  static Dataset open(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const { return dir_; }
  int class_count() const { return class_count_; }
  const std::vector<DatasetEntry>& entries() const { return entries_; }
  bool contains(const std::string& id) const;

  std::filesystem::path image_path(const std::string& id) const { return dir_ / "images" / (id + ".png"); }
  std::filesystem::path mask_path(const std::string& id) const { return dir_ / "masks" / (id + ".png"); }
  std::filesystem::path prediction_path(const std::string& id) const { return dir_ / "predictions" / (id + ".png"); }
  std::filesystem::path embeddings_path() const { return dir_ / "embeddings.jsonl"; }
  bool has_embeddings() const { return std::filesystem::exists(embeddings_path()); }

  /// FNV-1a 64 of the manifest bytes, as "fnv1a64:<hex>".
  std::string fingerprint() const;

 private:
  std::filesystem::path dir_;
  int class_count_ = 2;
  std::vector<DatasetEntry> entries_;
  std::string manifest_text_;
};

struct Splits {
  std::vector<std::string> reference;
  std::vector<std::string> calibration;
  std::vector<std::string> test;
};

/// Entries with an explicit role keep it. The rest are shuffled with `seed`
/// and cut by the fractions (reference, calibration, remainder to test).
Splits split_dataset(const Dataset& ds, double reference_fraction, double calibration_fraction, std::uint64_t seed);
nlohmann::json to_json(const Splits& s);

/// Every option of every command. Field names match the CLI flags with
/// dashes replaced by underscores.
struct RunConfig {
  // pipeline
  std::filesystem::path dataset;
  double train_fraction = 0.8;
  double calibration_fraction = 0.1;
  double test_fraction = 0.1;
  std::string metric = "dsc";
  std::string segmenter = "atlas";
  std::string retrieval = "auto";
  std::size_t k_ref = 32;
  std::string mode = "max";
  int size = 256;
  int atlas_levels = 3;
  int atlas_iterations = 100;
  std::uint64_t seed = 0;
  // conformal
  double alpha = 0.1;
  double p_low = 0.4;
  double p_high = 0.95;
  std::string kind = "cqr";
  // per-command inputs and outputs
  std::filesystem::path target;
  std::filesystem::path pred;
  std::string target_id;
  std::filesystem::path calib;
  std::filesystem::path out;
  std::filesystem::path out_dir;
  // synth
  std::size_t trials = 50;
  std::size_t n_cal = 200;
  std::size_t n_test = 2000;
  std::size_t ref_size = 32;
  double sigma = 0.1;
  std::filesystem::path phantom;
  std::size_t phantom_cases = 60;
  std::size_t phantom_references = 8;
  int phantom_size = 64;

  /// Layers `overrides` (a JSON object of option -> value) over this config.
  /// Unknown keys are usage errors.
  void apply(const nlohmann::json& overrides);
  nlohmann::json to_json() const;
  /// The subset of options that shape RCA scores; stored with calibrations so
  /// prediction reuses the calibrated pipeline.
  nlohmann::json pipeline_json() const;
  void validate() const;
};

/// Help text for each option, keyed like RunConfig::to_json().
const std::map<std::string, std::string>& option_help();

/// Lazily loads and caches reference records at the working resolution.
class ReferenceStore {
 public:
  ReferenceStore(const Dataset& ds, int size);
  const ReferenceRecord& get(const std::string& id);
  ReferenceDatabase database(const std::vector<std::string>& ids);

 private:
  const Dataset& ds_;
  int size_;
  std::mutex mutex_;
  std::map<std::string, std::unique_ptr<ReferenceRecord>> cache_;
};

GrayImage load_working_image(const std::filesystem::path& path, int size);
LabelMask load_working_mask(const std::filesystem::path& path, int class_count, int size);

/// Chooses the reference ids for one case according to cfg.retrieval.
std::vector<std::string> select_references(const RunConfig& cfg, const std::vector<std::string>& reference_ids,
                                           const std::optional<EmbeddingIndex>& embeddings,
                                           const std::string& case_id);

/// Builds the reverse segmenter named by cfg.segmenter for one case.
std::unique_ptr<ReverseSegmenter> make_segmenter(const RunConfig& cfg, const std::string& case_id);

/// Command entry points; each returns the JSON document printed by the CLI.
nlohmann::json cmd_index(const RunConfig& cfg);
nlohmann::json cmd_rca(const RunConfig& cfg);
nlohmann::json cmd_calibrate(const RunConfig& cfg);
nlohmann::json cmd_predict(const RunConfig& cfg);
nlohmann::json cmd_synth(const RunConfig& cfg);
nlohmann::json cmd_eval(const RunConfig& cfg);

/// Resolves defaults <- calibration pipeline (predict/eval with calib) <- user
/// options, then dispatches.
nlohmann::json run_command(const std::string& command, const nlohmann::json& options);

}  // namespace segqc
