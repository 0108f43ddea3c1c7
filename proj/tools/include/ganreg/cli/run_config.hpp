#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ganreg/mixture.hpp"
#include "ganreg/training.hpp"
#include "ganreg/verify.hpp"

namespace ganreg::cli {

/// Everything a command needs, resolved from defaults, an optional config
/// file and command-line flags (applied in that order).
///
/// File format: INI sections [train], [mixture], [verify], [sample] with
/// `key = value` lines. Unknown sections or keys are rejected.
struct RunConfig {
  train::TrainConfig train = train::mixture_preset();
  mixture::MixtureSpec mixture;
  verify::VerifyOptions verify;
  Index sample_count = 2000;

  void validate() const;
};

/// "section.key" for every accepted key, in echo order.
std::vector<std::string> config_keys();

/// Sets one key from its text value. Throws ConfigError naming the key.
void set_config_value(RunConfig& config, const std::string& qualified_key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& qualified_key);

RunConfig read_run_config(std::istream& is);
/// Throws IoError if the file cannot be opened, ConfigError on bad content.
RunConfig load_run_config(const std::string& path);

/// Writes every key; reading the result back reproduces the config exactly.
void write_run_config(std::ostream& os, const RunConfig& config);
void save_run_config(const std::string& path, const RunConfig& config);

}  // namespace ganreg::cli
