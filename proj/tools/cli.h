#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace zachvit::cli {

enum ExitCode : int { kOk = 0, kVerificationFailed = 1, kInputError = 2, kConfigError = 3 };

// Parses argv and runs one subcommand; never throws. Progress goes to `out`,
// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string sha256_file(const std::filesystem::path& path);

// Provenance record written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config;
  nlohmann::json inputs = nlohmann::json::object();   // path -> sha256
  nlohmann::json outputs = nlohmann::json::object();  // path -> sha256
  double duration_seconds = 0.0;

  void add_input(const std::filesystem::path& p);
  // Hashes every regular file under `dir`, skipping run manifests.
  void add_outputs(const std::filesystem::path& dir);
  nlohmann::json to_json() const;
  void write(const std::filesystem::path& dir) const;
};

}  // namespace zachvit::cli
