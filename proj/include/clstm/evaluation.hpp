// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "clstm/data.hpp"
#include "clstm/network.hpp"

namespace clstm {

/// Mean over pixels of (255 a - 255 b)^2.
double mse_8bit(const Frame& a, const Frame& b);

struct CwSsimConfig {
  std::vector<double> wavelengths{4.0, 8.0};
  std::vector<double> orientations_deg{0.0, 45.0, 90.0, 135.0};
  std::size_t support = 11;
  std::size_t window = 7;
  std::size_t stride = 4;
  double stabilizer = 0.01;  // K
  double envelope = 0.56;    // Gaussian sigma as a fraction of the wavelength

  void validate() const;
};

/// Zero-mean complex Gabor filters with unit L1 norm, one per
/// (wavelength, orientation) pair.
class GaborBank {
 public:
  explicit GaborBank(const CwSsimConfig& cfg);

  std::size_t subbands() const { return filters_.size(); }
  const std::vector<std::complex<double>>& filter(std::size_t i) const { return filters_[i]; }

  /// Same-size (zero padded) complex responses, one map per subband.
  std::vector<std::vector<std::complex<double>>> decompose(const Frame& frame) const;

  const CwSsimConfig& config() const { return cfg_; }

 private:
  CwSsimConfig cfg_;
  std::vector<std::vector<std::complex<double>>> filters_;
};

/// Complex-wavelet structural similarity in [0,1].
double cw_ssim(const Frame& a, const Frame& b, const CwSsimConfig& cfg = {});
double cw_ssim(const Frame& a, const Frame& b, const GaborBank& bank);

Frame baseline_average(const SampleWindow& window);
Frame baseline_copy_last(const SampleWindow& window);

struct Predictor {
  std::string name;
  std::optional<std::size_t> offset;  // set for models trained on one offset
  std::function<Frame(const SampleWindow&)> predict;
};

template <typename T>
Predictor model_predictor(const Model<T>& model, std::string name = "ConvLSTM");
Predictor average_predictor();
Predictor copy_last_predictor();

struct EvalRow {
  std::string predictor;
  std::size_t offset = 0;
  double mse = 0.0;     // 8-bit scale
  double cwssim = 0.0;
  std::size_t n = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;

  const EvalRow* find(const std::string& predictor, std::size_t offset) const;
};

struct EvalOptions {
  CwSsimConfig cwssim;
  std::size_t jobs = 1;
  /// When set, predictions are written as PGM under <dir>/<predictor>/.
  std::optional<std::filesystem::path> frames_dir;
};

/// Scores every predictor on every window. All windows must share `offset`.
EvalReport evaluate(const std::vector<Predictor>& predictors, const std::vector<SampleWindow>& windows,
                    std::size_t offset, const EvalOptions& options = {});

std::string report_csv(const EvalReport& report);
/// Written atomically.
void write_report(const std::filesystem::path& path, const EvalReport& report);

}  // namespace clstm
