#include "moralkb/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <set>

#include "moralkb/errors.hpp"
#include "moralkb/io.hpp"

extern char** environ;

namespace moralkb {

namespace {

namespace fs = std::filesystem;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view v) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    auto comma = v.find(',', start);
    if (comma == std::string_view::npos) comma = v.size();
    auto item = trim(v.substr(start, comma - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto s = trim(v);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw UsageError("bad value '" + std::string(v) + "' for " + std::string(key));
  return out;
}

std::string join_list(const auto& items, auto&& fmt) {
  std::string s;
  for (const auto& i : items) {
    if (!s.empty()) s += ",";
    s += fmt(i);
  }
  return s;
}

struct Key {
  std::string name;
  bool is_path = false;
  std::function<void(PipelineConfig&, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    auto path = [&](std::string name, auto accessor) {
      k.push_back({std::move(name), true,
                   [accessor](PipelineConfig& c, std::string_view v) { accessor(c) = fs::path(trim(v)); },
                   [accessor](const PipelineConfig& c) {
                     return accessor(const_cast<PipelineConfig&>(c)).string();
                   }});
    };
    auto text = [&](std::string name, auto accessor) {
      k.push_back({std::move(name), false,
                   [accessor](PipelineConfig& c, std::string_view v) { accessor(c) = trim(v); },
                   [accessor](const PipelineConfig& c) {
                     return accessor(const_cast<PipelineConfig&>(c));
                   }});
    };
    auto size = [&](std::string name, auto accessor) {
      k.push_back({name, false,
                   [accessor, name](PipelineConfig& c, std::string_view v) {
                     accessor(c) = parse_number<std::size_t>(name, v);
                   },
                   [accessor](const PipelineConfig& c) {
                     return std::to_string(accessor(const_cast<PipelineConfig&>(c)));
                   }});
    };
    auto real = [&](std::string name, auto accessor) {
      k.push_back({name, false,
                   [accessor, name](PipelineConfig& c, std::string_view v) {
                     accessor(c) = parse_number<double>(name, v);
                   },
                   [accessor](const PipelineConfig& c) {
                     return format_double(accessor(const_cast<PipelineConfig&>(c)));
                   }});
    };
    auto integer = [&](std::string name, auto accessor) {
      k.push_back({name, false,
                   [accessor, name](PipelineConfig& c, std::string_view v) {
                     accessor(c) = parse_number<int>(name, v);
                   },
                   [accessor](const PipelineConfig& c) {
                     return std::to_string(accessor(const_cast<PipelineConfig&>(c)));
                   }});
    };

    path("paths.corpus", [](PipelineConfig& c) -> fs::path& { return c.paths.corpus; });
    path("paths.embeddings", [](PipelineConfig& c) -> fs::path& { return c.paths.embeddings; });
    path("paths.mfd", [](PipelineConfig& c) -> fs::path& { return c.paths.mfd; });
    path("paths.output_dir", [](PipelineConfig& c) -> fs::path& { return c.paths.output_dir; });

    text("linker.mode", [](PipelineConfig& c) -> std::string& { return c.linker.mode; });
    path("linker.fixtures", [](PipelineConfig& c) -> fs::path& { return c.linker.fixtures; });
    text("linker.endpoint", [](PipelineConfig& c) -> std::string& { return c.linker.endpoint; });
    text("linker.api_key", [](PipelineConfig& c) -> std::string& { return c.linker.api_key; });
    path("linker.cache_dir", [](PipelineConfig& c) -> fs::path& { return c.linker.cache_dir; });
    real("linker.rho_threshold",
         [](PipelineConfig& c) -> double& { return c.linker.filters.rho_threshold; });
    k.push_back({"linker.type_blacklist", false,
                 [](PipelineConfig& c, std::string_view v) {
                   auto items = split_list(v);
                   c.linker.filters.type_blacklist = {items.begin(), items.end()};
                 },
                 [](const PipelineConfig& c) {
                   return join_list(c.linker.filters.type_blacklist, [](const auto& s) { return s; });
                 }});
    k.push_back({"linker.nominal_tags", false,
                 [](PipelineConfig& c, std::string_view v) {
                   std::set<PosTag> tags;
                   for (const auto& item : split_list(v)) {
                     auto t = parse_pos_tag(item);
                     if (!t) throw UsageError("unknown POS tag '" + item + "' in linker.nominal_tags");
                     tags.insert(*t);
                   }
                   c.linker.filters.nominal_tags = std::move(tags);
                 },
                 [](const PipelineConfig& c) {
                   return join_list(c.linker.filters.nominal_tags,
                                    [](PosTag t) { return std::string(to_string(t)); });
                 }});
    size("linker.max_concurrency",
         [](PipelineConfig& c) -> std::size_t& { return c.linker.max_concurrency; });
    integer("linker.retries", [](PipelineConfig& c) -> int& { return c.linker.retries; });

    text("kb.mode", [](PipelineConfig& c) -> std::string& { return c.kb.mode; });
    path("kb.snapshot", [](PipelineConfig& c) -> fs::path& { return c.kb.snapshot; });
    text("kb.endpoint", [](PipelineConfig& c) -> std::string& { return c.kb.endpoint; });
    path("kb.cache_dir", [](PipelineConfig& c) -> fs::path& { return c.kb.cache_dir; });
    k.push_back({"kb.properties", false,
                 [](PipelineConfig& c, std::string_view v) { c.kb.properties.names = split_list(v); },
                 [](const PipelineConfig& c) {
                   return join_list(c.kb.properties.names, [](const auto& s) { return s; });
                 }});
    size("kb.max_concurrency", [](PipelineConfig& c) -> std::size_t& { return c.kb.max_concurrency; });
    integer("kb.retries", [](PipelineConfig& c) -> int& { return c.kb.retries; });

    real("features.delta", [](PipelineConfig& c) -> double& { return c.cpmid.delta; });
    size("features.k", [](PipelineConfig& c) -> std::size_t& { return c.cpmid.k; });
    size("features.min_df", [](PipelineConfig& c) -> std::size_t& { return c.cpmid.min_df; });
    real("features.theta", [](PipelineConfig& c) -> double& { return c.soft.theta; });

    k.push_back({"train.classifier", false,
                 [](PipelineConfig& c, std::string_view v) {
                   const auto s = trim(v);
                   if (s == "lstm") c.classifier = ClassifierKind::Lstm;
                   else if (s == "logreg") c.classifier = ClassifierKind::LogReg;
                   else throw UsageError("train.classifier must be lstm or logreg, got '" + s + "'");
                 },
                 [](const PipelineConfig& c) {
                   return std::string(c.classifier == ClassifierKind::Lstm ? "lstm" : "logreg");
                 }});
    k.push_back({"train.features", false,
                 [](PipelineConfig& c, std::string_view v) {
                   auto fs = parse_feature_set_name(trim(v));
                   if (!fs) throw UsageError("unknown feature set '" + trim(v) + "' for train.features");
                   c.model_features = *fs;
                 },
                 [](const PipelineConfig& c) { return std::string(name_of(c.model_features)); }});
    size("train.hidden_dim", [](PipelineConfig& c) -> std::size_t& { return c.train.hidden_dim; });
    size("train.head_dim", [](PipelineConfig& c) -> std::size_t& { return c.train.head_dim; });
    real("train.learning_rate", [](PipelineConfig& c) -> double& { return c.train.learning_rate; });
    size("train.epochs", [](PipelineConfig& c) -> std::size_t& { return c.train.epochs; });
    real("train.dropout_embed", [](PipelineConfig& c) -> double& { return c.train.dropout_embed; });
    real("train.dropout_lstm", [](PipelineConfig& c) -> double& { return c.train.dropout_lstm; });
    real("train.dropout_fc", [](PipelineConfig& c) -> double& { return c.train.dropout_fc; });
    real("train.l2_lambda", [](PipelineConfig& c) -> double& { return c.train.l2_lambda; });

    size("eval.folds", [](PipelineConfig& c) -> std::size_t& { return c.eval.folds; });
    k.push_back({"eval.seed", false,
                 [](PipelineConfig& c, std::string_view v) {
                   c.eval.seed = parse_number<std::uint64_t>("eval.seed", v);
                 },
                 [](const PipelineConfig& c) { return std::to_string(c.eval.seed); }});
    k.push_back({"eval.feature_sets", false,
                 [](PipelineConfig& c, std::string_view v) {
                   std::vector<FeatureSet> sets;
                   for (const auto& item : split_list(v)) {
                     auto fs = parse_feature_set_name(item);
                     if (!fs) throw UsageError("unknown feature set '" + item + "' in eval.feature_sets");
                     sets.push_back(*fs);
                   }
                   c.eval.feature_sets = std::move(sets);
                 },
                 [](const PipelineConfig& c) {
                   return join_list(c.eval.feature_sets,
                                    [](FeatureSet fs) { return std::string(name_of(fs)); });
                 }});
    k.push_back({"eval.targets", false,
                 [](PipelineConfig& c, std::string_view v) {
                   std::vector<MoralClass> targets;
                   for (const auto& item : split_list(v)) {
                     auto mc = parse_class(item);
                     if (!mc) throw UsageError("unknown class '" + item + "' in eval.targets");
                     targets.push_back(*mc);
                   }
                   c.eval.targets = std::move(targets);
                 },
                 [](const PipelineConfig& c) {
                   return join_list(c.eval.targets,
                                    [](MoralClass mc) { return std::string(key_name(mc)); });
                 }});
    size("eval.threads", [](PipelineConfig& c) -> std::size_t& { return c.eval.threads; });

    std::sort(k.begin(), k.end(), [](const Key& a, const Key& b) { return a.name < b.name; });
    return k;
  }();
  return table;
}

const Key* find_key(std::string_view name) {
  for (const auto& k : keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.push_back(k.name);
  return out;
}

std::string env_name(std::string_view key) {
  std::string out(kEnvPrefix);
  for (char c : key) {
    out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

std::map<std::string, std::string> PipelineConfig::values() const {
  std::map<std::string, std::string> out;
  for (const auto& k : keys()) out[k.name] = k.get(*this);
  return out;
}

void PipelineConfig::validate() const {
  if (linker.mode != "fixture" && linker.mode != "remote")
    throw UsageError("linker.mode must be fixture or remote, got '" + linker.mode + "'");
  if (kb.mode != "snapshot" && kb.mode != "remote")
    throw UsageError("kb.mode must be snapshot or remote, got '" + kb.mode + "'");
  if (linker.retries < 1 || kb.retries < 1) throw UsageError("retries must be at least 1");
  if (linker.max_concurrency == 0 || kb.max_concurrency == 0)
    throw UsageError("max_concurrency must be at least 1");
  linker.filters.validate();
  kb.properties.validate();
  cpmid.validate();
  soft.validate();
  train.validate();
  if (eval.folds < 2) throw UsageError("eval.folds must be at least 2");
  if (eval.feature_sets.empty()) throw UsageError("eval.feature_sets is empty");
  if (eval.targets.empty()) throw UsageError("eval.targets is empty");
  if (eval.threads == 0) throw UsageError("eval.threads must be at least 1");
}

void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value) {
  const Key* k = find_key(key);
  if (!k) throw UsageError("unknown config key '" + std::string(key) + "'");
  k->set(cfg, value);
}

PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                            const std::map<std::string, std::string>& env,
                            std::string_view source) {
  PipelineConfig cfg;
  std::set<std::string> seen;
  for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    const std::string where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') return;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(where + "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const Key* k = find_key(key);
    if (!k) throw UsageError(where + "unknown config key '" + key + "'");
    if (!seen.insert(key).second) throw UsageError(where + "key '" + key + "' set twice");
    try {
      k->set(cfg, value);
    } catch (const UsageError& e) {
      throw UsageError(where + e.what());
    }
  });
  // Relative paths, including defaults, are relative to the config file.
  for (const auto& k : keys()) {
    if (!k.is_path) continue;
    const fs::path p(k.get(cfg));
    if (!p.empty() && p.is_relative()) k.set(cfg, (base_dir / p).lexically_normal().string());
  }

  std::map<std::string, const Key*> by_env;
  for (const auto& k : keys()) by_env[env_name(k.name)] = &k;
  for (const auto& [name, value] : env) {
    if (name.rfind(kEnvPrefix, 0) != 0) continue;
    auto it = by_env.find(name);
    if (it == by_env.end()) throw UsageError("unknown environment override " + name);
    try {
      it->second->set(cfg, value);
    } catch (const UsageError& e) {
      throw UsageError(name + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

std::map<std::string, std::string> environment_overrides() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    std::string_view kv(*e);
    if (kv.rfind(kEnvPrefix, 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    out[std::string(kv.substr(0, eq))] = std::string(kv.substr(eq + 1));
  }
  return out;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw UsageError(std::string("cannot read config: ") + e.what());
  }
  return parse_config(text, std::filesystem::absolute(path).parent_path(), environment_overrides(),
                      path.string());
}

}  // namespace moralkb
