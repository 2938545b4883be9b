#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "air/trainer.hpp"

namespace air::cli {

enum ExitCode : int { kOk = 0, kRuntime = 1, kValidation = 2, kResource = 3 };

// Config text: `key = value` lines, `# comments`, and `[section]` headers
// that prefix the following keys with `section.`. Keys are listed by
// config_keys(); unknown keys and bad values throw ConfigError naming the key.
train::TrainConfig parse_config(const std::string& text);
void apply_setting(train::TrainConfig& config, const std::string& key, const std::string& value);
// Every key with its current value; parse_config(dump_config(c)) == c.
std::string dump_config(const train::TrainConfig& config);
std::vector<std::string> config_keys();

// SVG line chart of the named metrics columns against env_steps. NaN cells
// are skipped. Throws ConfigError("columns") listing the available columns.
std::string render_svg(const std::string& csv, const std::vector<std::string>& columns);

// Entry point shared by the `air` binary and the tests; argv[0] is skipped.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace air::cli
