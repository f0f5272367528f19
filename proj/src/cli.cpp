// SPDX-License-Identifier: Apache-2.0
#include "clstm/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "clstm/checkpoint.hpp"
#include "clstm/errors.hpp"

namespace clstm {

namespace fs = std::filesystem;

namespace {

template <typename U>
std::vector<U> parse_list(const std::string& text, const char* what) {
  std::vector<U> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::istringstream is(item);
    U v{};
    if (!(is >> v) || !(is >> std::ws).eof()) {
      throw std::invalid_argument(std::string("bad ") + what + " list: " + text);
    }
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument(std::string("empty ") + what + " list");
  return out;
}

void add_snake_options(CLI::App& cmd, SnakeParams& s) {
  cmd.add_option("--snake-alpha", s.alpha, "Snake elasticity weight")->capture_default_str();
  cmd.add_option("--snake-beta", s.beta, "Snake rigidity weight")->capture_default_str();
  cmd.add_option("--snake-gamma", s.gamma, "Snake step-size parameter")->capture_default_str();
  cmd.add_option("--snake-sigma", s.sigma, "Gaussian pre-smoothing in pixels")->capture_default_str();
  cmd.add_option("--snake-iterations", s.iterations, "Maximum snake iterations")->capture_default_str();
  cmd.add_option("--snake-line-weight", s.line_weight, "Weight of the bright-line energy")->capture_default_str();
  cmd.add_option("--snake-edge-weight", s.edge_weight, "Weight of the edge energy")->capture_default_str();
  cmd.add_option("--snake-points", s.points, "Contour points")->capture_default_str();
}

void add_frame_size(CLI::App& cmd, CliConfig& c) {
  cmd.add_option("--height", c.train.arch.height, "Frame height after resizing")->capture_default_str();
  cmd.add_option("--width", c.train.arch.width, "Frame width after resizing")->capture_default_str();
}

void add_split(CLI::App& cmd, CliConfig& c) {
  cmd.add_option("--test-videos", c.test_videos,
                 "Videos held out for testing, taken from the end (-1: a quarter)")
      ->capture_default_str();
}

void add_common(CLI::App& cmd, CliConfig& c) {
  cmd.add_option("--seed", c.train.seed, "Seed for all randomness")->capture_default_str();
  cmd.add_option("--jobs", c.train.jobs, "Worker threads (1 is fully deterministic)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd.add_option("--precision", c.precision, "Floating-point width: 32 or 64")
      ->capture_default_str()
      ->check(CLI::IsMember({32, 64}));
  cmd.add_option("--config", c.config_file, "Flat key=value file; flags take precedence");
}

Dataset load_split(const CliConfig& c, std::size_t height, std::size_t width, bool want_test) {
  Dataset ds = load_dataset(c.data, height, width);
  const std::size_t held_out =
      c.test_videos < 0 ? default_test_videos(ds.size()) : static_cast<std::size_t>(c.test_videos);
  if (held_out == 0) return ds;
  auto split = split_videos(std::move(ds), held_out);
  return want_test ? std::move(split.test) : std::move(split.train);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

template <typename T>
int do_train(CliConfig& c, std::ostream& out, std::ostream& err) {
  TrainConfig cfg = c.train;
  cfg.arch.hidden_channels = parse_list<std::size_t>(c.hidden, "hidden channel");
  cfg.validate();

  Dataset ds = load_dataset(c.data, cfg.arch.height, cfg.arch.width);
  const std::size_t held_out =
      c.test_videos < 0 ? default_test_videos(ds.size()) : static_cast<std::size_t>(c.test_videos);
  if (held_out == 0) throw std::invalid_argument("need at least two videos to hold one out for testing");
  auto split = split_videos(std::move(ds), held_out);

  auto train_windows = make_windows(split.train, cfg.arch.offset, cfg.arch.window);
  auto test_windows = make_windows(split.test, cfg.arch.offset, cfg.arch.window);
  ContourSet train_contours, test_contours;
  if (c.target == "contours") {
    train_contours = extract_dataset_contours(split.train, c.snake, cfg.jobs);
    test_contours = extract_dataset_contours(split.test, c.snake, cfg.jobs);
    train_windows = retarget(std::move(train_windows), train_contours.rasterized);
    test_windows = retarget(std::move(test_windows), test_contours.rasterized);
  }
  err << "training on " << train_windows.size() << " windows, testing on " << test_windows.size() << "\n";

  auto result = train<T>(cfg, train_windows, test_windows, [&](const EpochLoss& e) {
    err << "epoch " << e.epoch << "/" << cfg.epochs << " train_mse=" << e.train_mse
        << " test_mse=" << e.test_mse << "\n";
  });

  ConfigMap extra{{"target", c.target},
                  {"lr", std::to_string(cfg.lr)},
                  {"batch", std::to_string(cfg.batch)},
                  {"epochs", std::to_string(cfg.epochs)},
                  {"seed", std::to_string(cfg.seed)},
                  {"precision", std::to_string(c.precision)},
                  {"test_videos", std::to_string(held_out)}};
  ensure_parent(c.out);
  checkpoint_save(result.model, c.out, extra);
  fs::path curve = c.loss_csv;
  if (curve.empty()) curve = fs::path(c.out).replace_extension(".loss.csv");
  ensure_parent(curve);
  write_loss_curve(curve, result.curve);
  out << "wrote " << c.out.string() << " and " << curve.string() << "\n";
  return 0;
}

template <typename T>
int do_predict(CliConfig& c, std::ostream& out) {
  const Checkpoint ckpt = checkpoint_load(c.model);
  const Model<T> model = ckpt.model.cast<T>();
  const Dataset ds = load_split(c, model.arch.height, model.arch.width, c.split == "test");
  std::size_t written = 0;
  for (std::size_t v = 0; v < ds.size(); ++v) {
    const fs::path dir = c.out / ds.names[v];
    fs::create_directories(dir);
    for (const auto& w : make_windows(ds.videos[v], model.arch.offset, model.arch.window, v)) {
      const std::size_t index = w.start + model.arch.window - 1 + w.offset;
      write_pgm(dir / ("pred_" + frame_file_name(index)), frame_to_image(predict(w.inputs, model)));
      ++written;
    }
  }
  out << "wrote " << written << " predicted frames under " << c.out.string() << "\n";
  return 0;
}

template <typename T>
int do_evaluate(CliConfig& c, std::ostream& out) {
  const Checkpoint ckpt = checkpoint_load(c.model);
  const Model<T> model = ckpt.model.cast<T>();
  if (c.expected_offset != 0 && c.expected_offset != model.arch.offset) {
    throw std::invalid_argument("model was trained for offset " + std::to_string(model.arch.offset) +
                                " but --offset " + std::to_string(c.expected_offset) + " was requested");
  }
  std::string target = c.target;
  if (auto it = ckpt.config.find("target"); it != ckpt.config.end() && target == "frames") target = it->second;
  int test_videos = c.test_videos;
  if (auto it = ckpt.config.find("test_videos"); it != ckpt.config.end() && test_videos < 0) {
    test_videos = std::stoi(it->second);
  }
  CliConfig local = c;
  local.test_videos = test_videos;
  const Dataset ds = load_split(local, model.arch.height, model.arch.width, c.split == "test");
  auto windows = make_windows(ds, model.arch.offset, model.arch.window);

  EvalOptions options;
  options.cwssim = c.cwssim;
  options.cwssim.wavelengths = parse_list<double>(c.scales, "scale");
  options.cwssim.orientations_deg = parse_list<double>(c.orientations, "orientation");
  options.jobs = c.train.jobs;
  if (!c.frames_out.empty()) options.frames_dir = c.frames_out;

  std::vector<Predictor> predictors{model_predictor(model)};
  ContourSet contours;
  if (target == "contours") {
    contours = extract_dataset_contours(ds, c.snake, c.train.jobs);
    windows = retarget(std::move(windows), contours.rasterized);
    predictors.push_back({"contour-copy", std::nullopt, [&contours](const SampleWindow& w) {
                            return contours.rasterized.videos[w.video][w.start + w.inputs.size() - 1];
                          }});
  } else {
    predictors.push_back(average_predictor());
    predictors.push_back(copy_last_predictor());
  }
  if (windows.empty()) throw std::invalid_argument("no evaluation windows: videos are too short");
  const EvalReport report = evaluate(predictors, windows, model.arch.offset, options);
  ensure_parent(c.report);
  write_report(c.report, report);
  out << report_csv(report);
  return 0;
}

int do_contour(CliConfig& c, std::ostream& out) {
  const Dataset ds = load_dataset(c.data, c.train.arch.height, c.train.arch.width);
  const ContourSet set = extract_dataset_contours(ds, c.snake, c.train.jobs);
  std::string manifest;
  for (std::size_t v = 0; v < ds.size(); ++v) {
    const fs::path dir = c.out / ds.names[v];
    fs::create_directories(dir);
    for (std::size_t t = 0; t < set.contours[v].size(); ++t) {
      const std::string frame = frame_file_name(t);
      write_contour(dir / (frame.substr(0, frame.size() - 4) + ".txt"), set.contours[v][t]);
      write_pgm(dir / frame, frame_to_image(set.rasterized.videos[v][t]));
    }
    manifest += ds.names[v] + " " + std::to_string(set.contours[v].size()) + "\n";
  }
  write_file_atomic(c.out / "manifest.txt", manifest);
  out << "wrote contours for " << ds.size() << " videos under " << c.out.string() << "\n";
  return 0;
}

}  // namespace

std::unique_ptr<CLI::App> build_cli(CliConfig& c) {
  auto app = std::make_unique<CLI::App>("ConvLSTM ultrasound frame prediction", "clstm");
  app->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app->require_subcommand(1);

  auto* synth = app->add_subcommand("synth", "Generate a synthetic tongue-video dataset");
  synth->add_option("--out", c.out, "Dataset root directory")->required();
  synth->add_option("--videos", c.synth.videos, "Number of videos")->capture_default_str();
  synth->add_option("--frames", c.synth.frames_per_video, "Frames per video")->capture_default_str();
  synth->add_option("--height", c.synth.height, "Frame height")->capture_default_str();
  synth->add_option("--width", c.synth.width, "Frame width")->capture_default_str();
  synth->add_option("--amplitude", c.synth.amplitude, "Arc amplitude as a fraction of height")
      ->capture_default_str();
  synth->add_option("--cycles", c.synth.cycles, "Spatial periods across the width")->capture_default_str();
  synth->add_option("--phase-drift", c.synth.phase_drift, "Mean phase velocity, rad/frame")
      ->capture_default_str();
  synth->add_option("--phase-speed", c.synth.phase_speed, "Std of the phase velocity fluctuation, rad/frame")
      ->capture_default_str();
  synth->add_option("--phase-inertia", c.synth.phase_inertia, "AR(1) coefficient of the fluctuation")
      ->capture_default_str();
  synth->add_option("--arc-intensity", c.synth.arc_intensity, "Peak arc brightness")->capture_default_str();
  synth->add_option("--arc-width", c.synth.arc_width, "Arc FWHM in pixels")->capture_default_str();
  synth->add_option("--background", c.synth.background, "Background brightness")->capture_default_str();
  synth->add_option("--speckle", c.synth.speckle, "Std of multiplicative speckle")->capture_default_str();
  synth->add_option("--seed", c.synth.seed, "Generator seed")->capture_default_str();
  synth->add_option("--config", c.config_file, "Flat key=value file; flags take precedence");

  auto* train_cmd = app->add_subcommand("train", "Train a predictor for one target offset");
  train_cmd->add_option("--data", c.data, "Dataset root")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", c.out, "Checkpoint path")->required();
  train_cmd->add_option("--loss-csv", c.loss_csv, "Loss curve CSV (default: next to the checkpoint)");
  train_cmd->add_option("--offset", c.train.arch.offset, "Predict frame 8+offset (1, 2 or 3)")
      ->capture_default_str()
      ->check(CLI::Range(1, 3));
  train_cmd->add_option("--epochs", c.train.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--lr", c.train.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--batch", c.train.batch, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--hidden", c.hidden, "Hidden channels per layer, comma separated")->capture_default_str();
  train_cmd->add_option("--kernel", c.train.arch.kernel_size, "Odd convolution kernel size")->capture_default_str();
  train_cmd->add_option("--window", c.train.arch.window, "Input frames per sample")->capture_default_str();
  train_cmd->add_option("--target", c.target, "Training target: frames or contours")
      ->capture_default_str()
      ->check(CLI::IsMember({"frames", "contours"}));
  add_frame_size(*train_cmd, c);
  add_split(*train_cmd, c);
  add_snake_options(*train_cmd, c.snake);
  add_common(*train_cmd, c);

  auto* predict_cmd = app->add_subcommand("predict", "Write predicted frames as PGM");
  predict_cmd->add_option("--model", c.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--data", c.data, "Dataset root")->required()->check(CLI::ExistingDirectory);
  predict_cmd->add_option("--out", c.out, "Output directory")->required();
  predict_cmd->add_option("--split", c.split, "Videos to use: test or all")
      ->capture_default_str()
      ->check(CLI::IsMember({"test", "all"}));
  add_split(*predict_cmd, c);
  add_common(*predict_cmd, c);

  auto* eval_cmd = app->add_subcommand("evaluate", "Score a model and the baselines");
  eval_cmd->add_option("--model", c.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", c.data, "Dataset root")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--report", c.report, "Report CSV path")->required();
  eval_cmd->add_option("--frames-out", c.frames_out, "Directory for predicted frames");
  eval_cmd->add_option("--offset", c.expected_offset, "Expected target offset (must match the model)")
      ->check(CLI::Range(1, 3));
  eval_cmd->add_option("--split", c.split, "Videos to use: test or all")
      ->capture_default_str()
      ->check(CLI::IsMember({"test", "all"}));
  eval_cmd->add_option("--target", c.target, "Evaluation target: frames or contours")
      ->capture_default_str()
      ->check(CLI::IsMember({"frames", "contours"}));
  eval_cmd->add_option("--cwssim-scales", c.scales, "Gabor wavelengths in pixels")->capture_default_str();
  eval_cmd->add_option("--cwssim-orientations", c.orientations, "Gabor orientations in degrees")
      ->capture_default_str();
  eval_cmd->add_option("--cwssim-support", c.cwssim.support, "Gabor filter support")->capture_default_str();
  eval_cmd->add_option("--cwssim-window", c.cwssim.window, "CW-SSIM window size")->capture_default_str();
  eval_cmd->add_option("--cwssim-stride", c.cwssim.stride, "CW-SSIM window stride")->capture_default_str();
  eval_cmd->add_option("--cwssim-k", c.cwssim.stabilizer, "CW-SSIM stabilizer K")->capture_default_str();
  add_split(*eval_cmd, c);
  add_snake_options(*eval_cmd, c.snake);
  add_common(*eval_cmd, c);

  auto* contour_cmd = app->add_subcommand("contour", "Extract snake contours for a dataset");
  contour_cmd->add_option("--data", c.data, "Dataset root")->required()->check(CLI::ExistingDirectory);
  contour_cmd->add_option("--out", c.out, "Output root")->required();
  add_frame_size(*contour_cmd, c);
  add_snake_options(*contour_cmd, c.snake);
  add_common(*contour_cmd, c);

  for (auto* sub : app->get_subcommands({})) {
    sub->callback([&c, sub] { c.command = sub->get_name(); });
  }
  return app;
}

std::vector<std::string> config_file_args(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::vector<std::string> args;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("config line without '=': " + line);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    args.push_back("--" + trim(line.substr(0, eq)) + "=" + trim(line.substr(eq + 1)));
  }
  return args;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> full = args;
  // Config-file flags go right after the subcommand so later flags win.
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    if (path.empty()) continue;
    try {
      auto extra = config_file_args(path);
      full.insert(full.begin() + 1, extra.begin(), extra.end());
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    }
    break;
  }

  CliConfig config;
  auto app = build_cli(config);
  try {
    std::vector<std::string> reversed(full.rbegin(), full.rend());
    app->parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app->help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app->help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app->help();
    return 2;
  }

  try {
    if (config.command == "synth") {
      synth_generate(config.synth, config.out);
      out << "wrote " << config.synth.videos << " videos under " << config.out.string() << "\n";
      return 0;
    }
    const bool wide = config.precision == 64;
    if (config.command == "train") return wide ? do_train<double>(config, out, err) : do_train<float>(config, out, err);
    if (config.command == "predict") return wide ? do_predict<double>(config, out) : do_predict<float>(config, out);
    if (config.command == "evaluate") {
      return wide ? do_evaluate<double>(config, out) : do_evaluate<float>(config, out);
    }
    if (config.command == "contour") return do_contour(config, out);
    err << "error: unknown command\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace clstm
