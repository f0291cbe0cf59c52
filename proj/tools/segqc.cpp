// Command-line front end. Everything goes through the C interface; options are
// collected into a JSON object and handed to segqc_run.
#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "segqc/segqc.h"

using nlohmann::json;

namespace {

json take_json(segqc_status (*fn)(char**)) {
  char* text = nullptr;
  if (const segqc_status st = fn(&text); st != SEGQC_OK) {
    std::cerr << "error: " << segqc_last_error() << "\n";
    std::exit(SEGQC_ERR_INTERNAL);
  }
  json j = json::parse(text);
  segqc_string_free(text);
  return j;
}

const std::vector<std::string> kPipeline{"dataset",   "train_fraction", "calibration_fraction", "test_fraction",
                                         "metric",    "segmenter",      "retrieval",            "k_ref",
                                         "mode",      "size",           "atlas_levels",         "atlas_iterations",
                                         "seed"};
const std::vector<std::string> kConformal{"alpha", "p_low", "p_high", "kind"};

std::vector<std::string> join(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::string flag_name(std::string key) {
  for (auto& c : key) {
    if (c == '_') c = '-';
  }
  return "--" + key;
}

void add_options(CLI::App* sub, const std::vector<std::string>& keys, const json& defaults, const json& help,
                 json& values) {
  for (const auto& key : keys) {
    const json& def = defaults.at(key);
    const std::string text = help.value(key, "");
    const std::string name = flag_name(key);
    CLI::Option* opt = nullptr;
    if (def.is_number_unsigned()) {
      opt = sub->add_option_function<std::uint64_t>(name, [&values, key](const std::uint64_t& v) { values[key] = v; }, text);
    } else if (def.is_number_integer()) {
      opt = sub->add_option_function<std::int64_t>(name, [&values, key](const std::int64_t& v) { values[key] = v; }, text);
    } else if (def.is_number_float()) {
      opt = sub->add_option_function<double>(name, [&values, key](const double& v) { values[key] = v; }, text);
    } else {
      opt = sub->add_option_function<std::string>(name, [&values, key](const std::string& v) { values[key] = v; }, text);
    }
    const std::string shown = def.is_string() ? def.get<std::string>() : def.dump();
    if (!shown.empty()) opt->default_str(shown);
  }
}

json read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open config file '" << path << "'\n";
    std::exit(SEGQC_ERR_USAGE);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    std::cerr << "error: config file '" << path << "' must hold a JSON object\n";
    std::exit(SEGQC_ERR_USAGE);
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  const json defaults = take_json(segqc_default_config);
  const json help = take_json(segqc_option_help);

  CLI::App app{"Segmentation quality control: reverse classification accuracy with conformal intervals"};
  app.set_version_flag("--version", std::string(segqc_version()));
  app.require_subcommand(1);

  const std::map<std::string, std::pair<std::string, std::vector<std::string>>> commands{
      {"index", {"validate embeddings.jsonl of a dataset", {"dataset"}}},
      {"rca", {"RCA scores and point estimate for one target", join({kPipeline, {"target", "pred", "target_id"}})}},
      {"calibrate", {"fit conformal calibration on the calibration split", join({kPipeline, kConformal, {"out", "out_dir"}})}},
      {"predict", {"conformal interval for one target", join({kPipeline, {"calib", "target", "pred", "target_id"}})}},
      {"synth",
       {"synthetic coverage trials, or write a phantom dataset with --phantom",
        {"trials", "n_cal", "n_test", "ref_size", "sigma", "alpha", "p_low", "p_high", "seed", "out_dir", "phantom",
         "phantom_cases", "phantom_references", "phantom_size"}}},
      {"eval", {"calibrate and evaluate on the test split", join({kPipeline, kConformal, {"calib", "out_dir"}})}},
  };

  json values = json::object();
  std::string config_path;
  std::string chosen;
  for (const auto& [name, spec] : commands) {
    CLI::App* sub = app.add_subcommand(name, spec.first);
    sub->add_option("--config", config_path, "JSON file of options; command-line flags take precedence");
    add_options(sub, spec.second, defaults, help, values);
    sub->callback([&chosen, name = name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : SEGQC_ERR_USAGE;
  }

  json options = config_path.empty() ? json::object() : read_config(config_path);
  for (const auto& [key, value] : values.items()) options[key] = value;

  char* out = nullptr;
  const segqc_status st = segqc_run(chosen.c_str(), options.dump().c_str(), &out);
  if (st != SEGQC_OK) {
    std::cerr << "error: " << segqc_last_error() << "\n";
    return st;
  }
  std::cout << out << "\n";
  segqc_string_free(out);
  return 0;
}
