#pragma once

// Pipeline configuration: flat "key = value" lines with dotted section
// prefixes ("train.epochs = 20"), '#' comments, and environment overrides
// named MORALKB_<KEY> with dots turned into underscores and letters
// upper-cased (MORALKB_TRAIN_EPOCHS).

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "moralkb/corpus.hpp"
#include "moralkb/features.hpp"
#include "moralkb/knowledge.hpp"
#include "moralkb/linking.hpp"
#include "moralkb/model.hpp"

namespace moralkb {

inline constexpr std::string_view kEnvPrefix = "MORALKB_";

struct PipelineConfig {
  struct Paths {
    std::filesystem::path corpus;
    std::filesystem::path embeddings;
    std::filesystem::path mfd;
    std::filesystem::path output_dir = "moralkb-out";
  } paths;

  struct Linking {
    std::string mode = "fixture";  // fixture | remote
    std::filesystem::path fixtures;
    std::string endpoint;
    std::string api_key;
    std::filesystem::path cache_dir;
    LinkerConfig filters;
    std::size_t max_concurrency = 4;
    int retries = 3;
  } linker;

  struct Kb {
    std::string mode = "snapshot";  // snapshot | remote
    std::filesystem::path snapshot;
    std::string endpoint;
    std::filesystem::path cache_dir;
    PropertyWhitelist properties;
    std::size_t max_concurrency = 4;
    int retries = 3;
  } kb;

  CpmidConfig cpmid;
  SoftEncoderConfig soft;
  TrainConfig train;
  ClassifierKind classifier = ClassifierKind::Lstm;
  /// Input combination used by the train and predict stages.
  FeatureSet model_features = FeatureSet::E_BK;

  struct Eval {
    std::size_t folds = 10;
    std::uint64_t seed = 1;
    std::vector<FeatureSet> feature_sets{kFeatureSets.begin(), kFeatureSets.end()};
    std::vector<MoralClass> targets{kMoralClasses.begin(), kMoralClasses.end()};
    std::size_t threads = 1;
  } eval;

  /// Every recognised key with its effective value, in key order.
  std::map<std::string, std::string> values() const;
  /// Throws UsageError on out-of-range settings.
  void validate() const;
};

/// All recognised keys.
std::vector<std::string> config_keys();

/// Environment variable name for a key.
std::string env_name(std::string_view key);

/// Applies one setting. Throws UsageError on an unknown key or bad value.
void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value);

/// Parses config text. Relative paths resolve against `base_dir`. `env`
/// holds MORALKB_* variables, which override the file; an unrecognised one
/// is an error.
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                            const std::map<std::string, std::string>& env = {},
                            std::string_view source = "config");

/// Reads the file and the process environment.
PipelineConfig load_config(const std::filesystem::path& path);

/// MORALKB_* variables of the current process.
std::map<std::string, std::string> environment_overrides();

}  // namespace moralkb
