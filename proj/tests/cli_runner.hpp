#pragma once

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

namespace cli {

inline const std::string kBinary = EBHB_CLI_PATH;

/// Runs the CLI with `args` (shell syntax), stdout and stderr redirected to
/// files. Returns the exit status.
inline int run(const std::string& args, const std::filesystem::path& stdout_path = "/dev/null",
               const std::filesystem::path& stderr_path = "/dev/null") {
  const std::string cmd = "'" + kBinary + "' " + args + " >'" + stdout_path.string() + "' 2>'" + stderr_path.string() + "'";
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

/// Fresh per-process scratch directory.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / (tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace cli
