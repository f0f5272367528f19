// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "clstm/contours.hpp"
#include "clstm/data.hpp"
#include "clstm/evaluation.hpp"
#include "clstm/training.hpp"

namespace CLI {
class App;
}

namespace clstm {

/// Everything the command line can set. Fields mirror the library configs.
struct CliConfig {
  std::string command;

  SynthConfig synth;
  TrainConfig train;
  SnakeParams snake;
  CwSsimConfig cwssim;

  std::string hidden = "8,8,8";
  std::string scales = "4,8";
  std::string orientations = "0,45,90,135";
  int precision = 32;
  std::string target = "frames";  // or "contours"
  std::string split = "test";     // or "all"
  int test_videos = -1;           // -1: a quarter of the videos
  std::size_t expected_offset = 0;  // evaluate: 0 accepts the model's offset

  std::filesystem::path data;
  std::filesystem::path out;
  std::filesystem::path model;
  std::filesystem::path report;
  std::filesystem::path frames_out;
  std::filesystem::path loss_csv;
  std::filesystem::path config_file;
};

/// Builds the parser bound to `config`. Options of every subcommand share
/// take-last semantics so config-file values can be overridden by flags.
std::unique_ptr<CLI::App> build_cli(CliConfig& config);

/// Reads flat key=value lines into "--key=value" arguments.
std::vector<std::string> config_file_args(const std::filesystem::path& path);

/// args excludes the program name. Returns the process exit code:
/// 0 success, 1 runtime failure, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clstm
