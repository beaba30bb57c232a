#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#ifndef CONCEPTLENS_CLI_PATH
#error "CONCEPTLENS_CLI_PATH must point at the conceptlens executable"
#endif

namespace conceptlens::testing {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Runs the CLI with `args`, capturing stdout/stderr via files in `scratch`.
inline CliResult run_cli(const std::vector<std::string>& args, const std::filesystem::path& scratch) {
  std::string cmd = shell_quote(CONCEPTLENS_CLI_PATH);
  for (const auto& a : args) cmd += " " + shell_quote(a);
  const auto out = scratch / "cli.stdout";
  const auto err = scratch / "cli.stderr";
  cmd += " >" + shell_quote(out.string()) + " 2>" + shell_quote(err.string());
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

}  // namespace conceptlens::testing
