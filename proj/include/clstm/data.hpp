// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "clstm/network.hpp"
#include "clstm/pgm.hpp"

namespace clstm {

using Video = std::vector<Frame>;

struct Dataset {
  std::vector<std::string> names;  // one per video, e.g. "utt_0003"
  std::vector<Video> videos;

  std::size_t size() const { return videos.size(); }
};

/// `window` consecutive input frames of one video and the frame `offset`
/// steps after the last of them. Views into a Dataset that must outlive it.
struct SampleWindow {
  std::span<const Frame> inputs;
  const Frame* target = nullptr;
  std::size_t offset = 1;
  std::size_t video = 0;
  std::size_t start = 0;
};

/// Corner-aligned bilinear resampling.
Frame resize_bilinear(const Frame& frame, std::size_t out_height, std::size_t out_width);

Frame frame_from_image(const GrayImage& image);
/// Clamps to [0,1] and quantizes to 8 bits.
GrayImage frame_to_image(const Frame& frame);

/// Loads every *.pgm in `dir` in lexicographic order, resized to H x W.
Video load_video(const std::filesystem::path& dir, std::size_t height, std::size_t width);

/// Loads the videos listed in `<root>/manifest.txt` (or every subdirectory
/// when there is no manifest).
Dataset load_dataset(const std::filesystem::path& root, std::size_t height, std::size_t width);

/// One window per start index, stride 1. Too-short videos yield nothing.
std::vector<SampleWindow> make_windows(std::span<const Frame> frames, std::size_t offset,
                                       std::size_t window = 8, std::size_t video = 0);
std::vector<SampleWindow> make_windows(const Dataset& dataset, std::size_t offset,
                                       std::size_t window = 8);

/// Splits whole videos: the last `test_videos` go to the test side.
struct DatasetSplit {
  Dataset train;
  Dataset test;
};
DatasetSplit split_videos(Dataset dataset, std::size_t test_videos);
/// Default test share: a quarter of the videos, at least one.
std::size_t default_test_videos(std::size_t total);

/// Synthetic ultrasound-like videos: a bright open arc whose phase follows
/// a smooth random walk, on a dark speckled background.
struct SynthConfig {
  std::size_t videos = 8;
  std::size_t frames_per_video = 120;
  std::size_t height = 96;
  std::size_t width = 96;
  std::uint64_t seed = 1;
  double amplitude = 0.15;      // fraction of height
  double cycles = 1.0;          // spatial periods across the width
  double phase_drift = 0.2;     // mean phase velocity, rad/frame, sign drawn per video
  double phase_speed = 0.1;     // stationary std of the velocity fluctuation, rad/frame
  double phase_inertia = 0.9;   // AR(1) coefficient of the fluctuation
  double arc_intensity = 0.9;
  double arc_width = 3.0;       // full width at half maximum, px
  double background = 0.1;
  double speckle = 0.25;        // std of the multiplicative noise
};

/// Renders the videos in memory, before quantization.
std::vector<Video> render_synthetic(const SynthConfig& cfg);

/// Centerline of the arc in frame t of video v, sampled at `points` columns
/// over the arc's horizontal extent. Used as ground truth by contour tests.
std::vector<std::pair<double, double>> synthetic_arc(const SynthConfig& cfg, std::size_t video,
                                                     std::size_t frame, std::size_t points);

/// Writes `<root>/utt_<NNNN>/frame_<NNNNNN>.pgm` plus `<root>/manifest.txt`.
void synth_generate(const SynthConfig& cfg, const std::filesystem::path& root);

std::string video_dir_name(std::size_t index);
std::string frame_file_name(std::size_t index);

/// Pixelwise mean of the frames.
Frame mean_frame(std::span<const Frame> frames);

}  // namespace clstm
