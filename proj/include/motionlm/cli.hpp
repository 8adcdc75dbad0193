// Command-line surface: synth-data, train-tokenizer, train-lm, generate,
// evaluate, export-traces. Every command accepts --config <json> (flags
// override it), writes its effective RunConfig with input hashes next to the
// outputs, and maps errors to exit codes 2 (config), 3 (data), 4 (numeric).
#pragma once

#include <string>
#include <vector>

namespace motionlm {

inline constexpr const char* kDataDirEnv = "MOTIONLM_DATA_DIR";

int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // without program name

std::string fnv1a64_file_hex(const std::string& path);

}  // namespace motionlm
