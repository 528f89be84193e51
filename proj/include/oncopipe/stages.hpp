#pragma once

#include <map>
#include <string>

#include "oncopipe/config.hpp"

namespace oncopipe::stage {

/// Runs one pipeline stage. `overrides` are CLI flag values that shadow the
/// stage's config section key-for-key. Reads only declared inputs, writes
/// the declared outputs plus a `<primary output>.run.json` manifest with
/// input/output hashes, the config hash, and the wall-clock duration.
/// Throws ConfigError / InputError / BackendError; the caller maps these to
/// exit codes.
void run_stage(const std::string& name, const config::ParsedConfig& cfg,
               const std::map<std::string, std::string>& overrides);

}  // namespace oncopipe::stage
