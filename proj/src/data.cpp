// SPDX-License-Identifier: Apache-2.0
#include "clstm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "clstm/errors.hpp"

namespace clstm {

namespace fs = std::filesystem;

Frame resize_bilinear(const Frame& frame, std::size_t out_height, std::size_t out_width) {
  if (frame.rank() != 3 || frame.dim(0) != 1) throw ShapeError("resize expects a [1,H,W] frame");
  if (out_height == 0 || out_width == 0) throw ShapeError("resize target must be positive");
  const std::size_t in_h = frame.dim(1), in_w = frame.dim(2);
  if (in_h == out_height && in_w == out_width) return frame;

  auto source = [](std::size_t dst, std::size_t in, std::size_t out) {
    if (out == 1) return static_cast<double>(in - 1) / 2.0;
    return static_cast<double>(dst) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
  };

  Frame out(Shape{1, out_height, out_width});
  for (std::size_t y = 0; y < out_height; ++y) {
    const double sy = source(y, in_h, out_height);
    const std::size_t y0 = std::min(static_cast<std::size_t>(sy), in_h - 1);
    const std::size_t y1 = std::min(y0 + 1, in_h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_width; ++x) {
      const double sx = source(x, in_w, out_width);
      const std::size_t x0 = std::min(static_cast<std::size_t>(sx), in_w - 1);
      const std::size_t x1 = std::min(x0 + 1, in_w - 1);
      const double fx = sx - static_cast<double>(x0);
      const double top = frame.at(0, y0, x0) * (1.0 - fx) + frame.at(0, y0, x1) * fx;
      const double bottom = frame.at(0, y1, x0) * (1.0 - fx) + frame.at(0, y1, x1) * fx;
      out.at(0, y, x) = static_cast<float>(std::clamp(top * (1.0 - fy) + bottom * fy, 0.0, 1.0));
    }
  }
  return out;
}

Frame frame_from_image(const GrayImage& image) {
  Frame out(Shape{1, image.height, image.width});
  const float scale = 1.0f / static_cast<float>(image.maxval);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(image.pixels[i]) * scale;
  return out;
}

GrayImage frame_to_image(const Frame& frame) {
  if (frame.rank() != 3 || frame.dim(0) != 1) throw ShapeError("frame_to_image expects [1,H,W]");
  GrayImage img;
  img.height = frame.dim(1);
  img.width = frame.dim(2);
  img.maxval = 255;
  img.pixels.resize(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const double v = std::clamp(static_cast<double>(frame[i]), 0.0, 1.0);
    img.pixels[i] = static_cast<std::uint16_t>(std::lround(v * 255.0));
  }
  return img;
}

Video load_video(const fs::path& dir, std::size_t height, std::size_t width) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());

  Video frames;
  frames.reserve(files.size());
  std::size_t first_w = 0, first_h = 0;
  for (const auto& file : files) {
    const GrayImage img = read_pgm(file);
    if (frames.empty()) {
      first_w = img.width;
      first_h = img.height;
    } else if (img.width != first_w || img.height != first_h) {
      throw DimensionError(file.string() + ": " + std::to_string(img.width) + "x" +
                           std::to_string(img.height) + " differs from " + std::to_string(first_w) +
                           "x" + std::to_string(first_h) + " earlier in the video");
    }
    frames.push_back(resize_bilinear(frame_from_image(img), height, width));
  }
  return frames;
}

Dataset load_dataset(const fs::path& root, std::size_t height, std::size_t width) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IoError("dataset root is not a directory: " + root.string());
  Dataset ds;
  const fs::path manifest = root / "manifest.txt";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    if (!in) throw IoError("cannot open " + manifest.string());
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string name;
      if (!(ls >> name)) continue;
      ds.names.push_back(name);
    }
  } else {
    for (const auto& entry : fs::directory_iterator(root, ec)) {
      if (entry.is_directory()) ds.names.push_back(entry.path().filename().string());
    }
    std::sort(ds.names.begin(), ds.names.end());
  }
  for (const auto& name : ds.names) ds.videos.push_back(load_video(root / name, height, width));
  return ds;
}

std::vector<SampleWindow> make_windows(std::span<const Frame> frames, std::size_t offset,
                                       std::size_t window, std::size_t video) {
  std::vector<SampleWindow> out;
  if (frames.size() < window + offset) return out;
  const std::size_t count = frames.size() - window - offset + 1;
  out.reserve(count);
  for (std::size_t start = 0; start < count; ++start) {
    out.push_back(SampleWindow{frames.subspan(start, window), &frames[start + window - 1 + offset],
                               offset, video, start});
  }
  return out;
}

std::vector<SampleWindow> make_windows(const Dataset& dataset, std::size_t offset, std::size_t window) {
  std::vector<SampleWindow> out;
  for (std::size_t v = 0; v < dataset.videos.size(); ++v) {
    auto w = make_windows(dataset.videos[v], offset, window, v);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

std::size_t default_test_videos(std::size_t total) {
  if (total < 2) return 0;
  return std::max<std::size_t>(1, total / 4);
}

DatasetSplit split_videos(Dataset dataset, std::size_t test_videos) {
  if (test_videos >= dataset.size()) throw std::invalid_argument("test split leaves no training videos");
  DatasetSplit split;
  const std::size_t n_train = dataset.size() - test_videos;
  for (std::size_t v = 0; v < dataset.size(); ++v) {
    Dataset& side = v < n_train ? split.train : split.test;
    side.names.push_back(std::move(dataset.names[v]));
    side.videos.push_back(std::move(dataset.videos[v]));
  }
  return split;
}

Frame mean_frame(std::span<const Frame> frames) {
  if (frames.empty()) throw ShapeError("mean of zero frames");
  std::vector<double> acc(frames[0].size(), 0.0);
  for (const auto& f : frames) {
    frames[0].require_same_shape(f, "mean_frame");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f[i];
  }
  Frame out(frames[0].shape());
  const double n = static_cast<double>(frames.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / n);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic videos

namespace {

struct ArcTrack {
  double baseline;  // y0, px
  double amplitude;  // px
  std::vector<double> phase;
};

std::uint64_t stream_seed(std::uint64_t seed, std::size_t video, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(video), static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

ArcTrack arc_track(const SynthConfig& cfg, std::size_t video) {
  std::mt19937_64 rng(stream_seed(cfg.seed, video, 1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double h = static_cast<double>(cfg.height);
  ArcTrack track;
  track.baseline = h * (0.45 + 0.1 * unit(rng));
  track.amplitude = h * cfg.amplitude * (0.8 + 0.4 * unit(rng));
  track.phase.resize(cfg.frames_per_video);
  double phase = 2.0 * std::numbers::pi * unit(rng);
  const double drift = unit(rng) < 0.5 ? -cfg.phase_drift : cfg.phase_drift;
  double velocity = cfg.phase_speed * normal(rng);
  const double kick = cfg.phase_speed * std::sqrt(1.0 - cfg.phase_inertia * cfg.phase_inertia);
  for (std::size_t t = 0; t < cfg.frames_per_video; ++t) {
    track.phase[t] = phase;
    velocity = cfg.phase_inertia * velocity + kick * normal(rng);
    phase += drift + velocity;
  }
  return track;
}

double arc_y(const SynthConfig& cfg, const ArcTrack& track, std::size_t t, double x) {
  const double arg = 2.0 * std::numbers::pi * cfg.cycles * x / static_cast<double>(cfg.width) + track.phase[t];
  return track.baseline + track.amplitude * std::sin(arg);
}

double arc_slope(const SynthConfig& cfg, const ArcTrack& track, std::size_t t, double x) {
  const double k = 2.0 * std::numbers::pi * cfg.cycles / static_cast<double>(cfg.width);
  return track.amplitude * k * std::cos(k * x + track.phase[t]);
}

std::pair<double, double> arc_extent(const SynthConfig& cfg) {
  const double w = static_cast<double>(cfg.width);
  return {0.1 * (w - 1.0), 0.9 * (w - 1.0)};
}

}  // namespace

std::vector<std::pair<double, double>> synthetic_arc(const SynthConfig& cfg, std::size_t video,
                                                     std::size_t frame, std::size_t points) {
  const ArcTrack track = arc_track(cfg, video);
  const auto [x0, x1] = arc_extent(cfg);
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(points - 1);
    out.emplace_back(x, arc_y(cfg, track, frame, x));
  }
  return out;
}

std::vector<Video> render_synthetic(const SynthConfig& cfg) {
  if (cfg.videos == 0 || cfg.frames_per_video == 0 || cfg.height == 0 || cfg.width == 0) {
    throw std::invalid_argument("synthetic dataset dimensions must be positive");
  }
  const double sigma = cfg.arc_width / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const auto [x_begin, x_end] = arc_extent(cfg);
  const double taper = 3.0;

  std::vector<Video> videos(cfg.videos);
  for (std::size_t v = 0; v < cfg.videos; ++v) {
    const ArcTrack track = arc_track(cfg, v);
    std::mt19937_64 noise_rng(stream_seed(cfg.seed, v, 2));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t t = 0; t < cfg.frames_per_video; ++t) {
      Frame f(Shape{1, cfg.height, cfg.width});
      for (std::size_t x = 0; x < cfg.width; ++x) {
        const double xd = static_cast<double>(x);
        double weight = 0.0;
        if (xd >= x_begin - taper && xd <= x_end + taper) {
          const double inside = std::min(xd - (x_begin - taper), (x_end + taper) - xd);
          weight = std::clamp(inside / (2.0 * taper), 0.0, 1.0);
        }
        const double yc = arc_y(cfg, track, t, xd);
        const double slope = arc_slope(cfg, track, t, xd);
        const double norm = 1.0 / std::sqrt(1.0 + slope * slope);
        for (std::size_t y = 0; y < cfg.height; ++y) {
          const double d = (static_cast<double>(y) - yc) * norm;
          const double clean =
              cfg.background + (cfg.arc_intensity - cfg.background) * weight * std::exp(-d * d / (2 * sigma * sigma));
          f.at(0, y, x) = static_cast<float>(clean);
        }
      }
      // Speckle is drawn in raster order so it does not depend on the loop above.
      for (auto& px : f.values()) {
        px = static_cast<float>(std::clamp(px * (1.0 + cfg.speckle * normal(noise_rng)), 0.0, 1.0));
      }
      videos[v].push_back(std::move(f));
    }
  }
  return videos;
}

std::string video_dir_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "utt_%04zu", index);
  return buf;
}

std::string frame_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu.pgm", index);
  return buf;
}

void synth_generate(const SynthConfig& cfg, const fs::path& root) {
  const auto videos = render_synthetic(cfg);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
  std::string manifest;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    const fs::path dir = root / video_dir_name(v);
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (std::size_t t = 0; t < videos[v].size(); ++t) {
      write_pgm(dir / frame_file_name(t), frame_to_image(videos[v][t]));
    }
    manifest += video_dir_name(v) + " " + std::to_string(videos[v].size()) + "\n";
  }
  write_file_atomic(root / "manifest.txt", manifest);
}

}  // namespace clstm
