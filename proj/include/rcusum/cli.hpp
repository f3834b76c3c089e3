#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rcusum/detectors.hpp"
#include "rcusum/models.hpp"

namespace rcusum::cli {

/// One documented configuration key. An empty default marks a key that must
/// be supplied when a workflow reads it.
struct KeySpec {
  std::string name;     // as written in the config file, e.g. "outlier.sd"
  std::string section;  // help grouping
  std::string default_value;
  std::string help;
};

const std::vector<KeySpec>& key_registry();
const KeySpec* find_key(const std::string& name);

/// "alpha_grid" -> "alpha-grid", "outlier.sd" -> "outlier-sd".
std::string flag_name(const std::string& key);

/// Fields recognised inside a `[scheme NAME]` section.
const std::vector<std::string>& scheme_fields();

/// Key-value configuration assembled from defaults, an optional file, and
/// command-line overrides, in increasing priority.
class Config {
 public:
  Config();

  /// Parses the sectioned key-value format. Module sections such as [model]
  /// group keys without changing their names; [outlier], [case] and [profile]
  /// prefix their keys ("sd" under [outlier] is "outlier.sd"); `[scheme NAME]`
  /// declares a named detector for the multi-scheme workflows.
  void load(std::istream& in, const std::string& origin = "config");
  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  std::string str(const std::string& key) const;
  double num(const std::string& key) const;
  long long integer(const std::string& key) const;
  std::optional<double> optional_num(const std::string& key) const;  // empty or "auto" -> nullopt

  using SchemeFields = std::map<std::string, std::string>;
  const std::vector<std::pair<std::string, SchemeFields>>& schemes() const { return schemes_; }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::pair<std::string, SchemeFields>> schemes_;
};

/// Comma list and/or start:step:stop ranges, e.g. "1,3,5" or "0.02:0.02:0.2".
std::vector<double> parse_grid(const std::string& text, const std::string& key);

GrossErrorModel model_from(const Config& cfg);

/// Runs one invocation. Data goes to `out` (or the --output file), diagnostics
/// and summaries to `err`. Returns 0 on success, 1 on a configuration error,
/// 2 on a numerical failure.
int parse_and_dispatch(int argc, const char* const* argv, std::istream& in, std::ostream& out,
                       std::ostream& err);
int parse_and_dispatch(int argc, const char* const* argv);

}  // namespace rcusum::cli
