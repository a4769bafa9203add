#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>

namespace ratatool::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitRemote = 4;

/// Key-value config file: `key = value` per line, `#` comments. Keys that look
/// like secrets are rejected; tokens come from the environment only.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Entry point shared by the binary and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ratatool::cli
