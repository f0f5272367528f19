// SPDX-License-Identifier: Apache-2.0
#include "clstm/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "clstm/parallel.hpp"
#include "clstm/pgm.hpp"

namespace clstm {

double mse_8bit(const Frame& a, const Frame& b) {
  a.require_same_shape(b, "mse_8bit");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = 255.0 * static_cast<double>(a[i]) - 255.0 * static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

void CwSsimConfig::validate() const {
  if (wavelengths.empty() || orientations_deg.empty()) throw std::invalid_argument("empty Gabor bank");
  if (support % 2 == 0) throw std::invalid_argument("Gabor support must be odd");
  if (window == 0 || stride == 0) throw std::invalid_argument("CW-SSIM window and stride must be positive");
  if (!(stabilizer > 0.0)) throw std::invalid_argument("CW-SSIM stabilizer K must be positive");
}

GaborBank::GaborBank(const CwSsimConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const long r = static_cast<long>(cfg_.support / 2);
  for (double lambda : cfg_.wavelengths) {
    const double sigma = cfg_.envelope * lambda;
    for (double deg : cfg_.orientations_deg) {
      const double theta = deg * std::numbers::pi / 180.0;
      const double ct = std::cos(theta), st = std::sin(theta);
      std::vector<double> env;
      std::vector<std::complex<double>> carrier;
      double env_sum = 0.0;
      std::complex<double> dc{0.0, 0.0};
      for (long y = -r; y <= r; ++y) {
        for (long x = -r; x <= r; ++x) {
          const double e = std::exp(-static_cast<double>(x * x + y * y) / (2.0 * sigma * sigma));
          const double phase = 2.0 * std::numbers::pi * (x * ct + y * st) / lambda;
          env.push_back(e);
          carrier.emplace_back(std::cos(phase), std::sin(phase));
          env_sum += e;
          dc += e * carrier.back();
        }
      }
      // Subtract a scaled envelope so the filter ignores mean brightness.
      const std::complex<double> offset = dc / env_sum;
      std::vector<std::complex<double>> filter(env.size());
      double l1 = 0.0;
      for (std::size_t i = 0; i < env.size(); ++i) {
        filter[i] = env[i] * (carrier[i] - offset);
        l1 += std::abs(filter[i]);
      }
      for (auto& f : filter) f /= l1;
      filters_.push_back(std::move(filter));
    }
  }
}

std::vector<std::vector<std::complex<double>>> GaborBank::decompose(const Frame& frame) const {
  if (frame.rank() != 3 || frame.dim(0) != 1) throw ShapeError("CW-SSIM expects [1,H,W] frames");
  const std::size_t h = frame.dim(1), w = frame.dim(2);
  if (h < cfg_.support || w < cfg_.support) {
    throw ShapeError("frame " + std::to_string(h) + "x" + std::to_string(w) +
                     " is smaller than the " + std::to_string(cfg_.support) + "px filter support");
  }
  const long r = static_cast<long>(cfg_.support / 2);
  const long k = static_cast<long>(cfg_.support);
  std::vector<std::vector<std::complex<double>>> maps;
  for (const auto& filter : filters_) {
    std::vector<std::complex<double>> map(h * w);
    for (long y = 0; y < static_cast<long>(h); ++y) {
      for (long x = 0; x < static_cast<long>(w); ++x) {
        double re = 0.0, im = 0.0;
        for (long dy = -r; dy <= r; ++dy) {
          const long sy = y + dy;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          for (long dx = -r; dx <= r; ++dx) {
            const long sx = x + dx;
            if (sx < 0 || sx >= static_cast<long>(w)) continue;
            const double v = frame.at(0, sy, sx);
            const auto& f = filter[(dy + r) * k + (dx + r)];
            re += f.real() * v;
            im += f.imag() * v;
          }
        }
        map[y * w + x] = {re, im};
      }
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

namespace {

using Subbands = std::vector<std::vector<std::complex<double>>>;

// Cross terms are written out so that swapping the arguments negates the
// imaginary sum exactly, keeping the index symmetric bit-for-bit.
double cw_ssim_maps(const Subbands& a, const Subbands& b, std::size_t height, std::size_t width,
                    const CwSsimConfig& cfg) {
  if (height < cfg.window || width < cfg.window) throw ShapeError("CW-SSIM window exceeds the subband maps");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    const auto& ma = a[s];
    const auto& mb = b[s];
    for (std::size_t y0 = 0; y0 + cfg.window <= height; y0 += cfg.stride) {
      for (std::size_t x0 = 0; x0 + cfg.window <= width; x0 += cfg.stride) {
        double cross_re = 0.0, cross_im = 0.0, energy_a = 0.0, energy_b = 0.0;
        for (std::size_t y = y0; y < y0 + cfg.window; ++y) {
          for (std::size_t x = x0; x < x0 + cfg.window; ++x) {
            const double ar = ma[y * width + x].real(), ai = ma[y * width + x].imag();
            const double br = mb[y * width + x].real(), bi = mb[y * width + x].imag();
            cross_re += ar * br + ai * bi;
            cross_im += ai * br - ar * bi;
            energy_a += ar * ar + ai * ai;
            energy_b += br * br + bi * bi;
          }
        }
        const double num = 2.0 * std::hypot(cross_re, cross_im) + cfg.stabilizer;
        const double den = energy_a + energy_b + cfg.stabilizer;
        total += std::min(1.0, num / den);
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace

double cw_ssim(const Frame& a, const Frame& b, const GaborBank& bank) {
  a.require_same_shape(b, "cw_ssim");
  return cw_ssim_maps(bank.decompose(a), bank.decompose(b), a.dim(1), a.dim(2), bank.config());
}

double cw_ssim(const Frame& a, const Frame& b, const CwSsimConfig& cfg) {
  return cw_ssim(a, b, GaborBank(cfg));
}

Frame baseline_average(const SampleWindow& window) { return mean_frame(window.inputs); }

Frame baseline_copy_last(const SampleWindow& window) { return window.inputs.back(); }

template <typename T>
Predictor model_predictor(const Model<T>& model, std::string name) {
  return Predictor{std::move(name), model.arch.offset,
                   [&model](const SampleWindow& w) { return predict(w.inputs, model); }};
}

Predictor average_predictor() { return {"average", std::nullopt, baseline_average}; }
Predictor copy_last_predictor() { return {"copy-8th", std::nullopt, baseline_copy_last}; }

const EvalRow* EvalReport::find(const std::string& predictor, std::size_t offset) const {
  for (const auto& row : rows) {
    if (row.predictor == predictor && row.offset == offset) return &row;
  }
  return nullptr;
}

EvalReport evaluate(const std::vector<Predictor>& predictors, const std::vector<SampleWindow>& windows,
                    std::size_t offset, const EvalOptions& options) {
  for (const auto& p : predictors) {
    if (p.offset && *p.offset != offset) {
      throw std::invalid_argument("predictor " + p.name + " was trained for offset " +
                                  std::to_string(*p.offset) + ", evaluation windows use offset " +
                                  std::to_string(offset));
    }
  }
  for (const auto& w : windows) {
    if (w.offset != offset) {
      throw std::invalid_argument("window with offset " + std::to_string(w.offset) +
                                  " in an offset-" + std::to_string(offset) + " evaluation");
    }
  }
  if (options.frames_dir) {
    for (const auto& p : predictors) std::filesystem::create_directories(*options.frames_dir / p.name);
  }

  const GaborBank bank(options.cwssim);
  const std::size_t np = predictors.size();
  std::vector<double> mse(windows.size() * np), ssim(windows.size() * np);
  parallel_for(windows.size(), options.jobs, [&](std::size_t i) {
    const SampleWindow& w = windows[i];
    const Frame& target = *w.target;
    const auto target_maps = bank.decompose(target);
    for (std::size_t p = 0; p < np; ++p) {
      const Frame pred = predictors[p].predict(w);
      mse[i * np + p] = mse_8bit(pred, target);
      ssim[i * np + p] = cw_ssim_maps(bank.decompose(pred), target_maps, target.dim(1), target.dim(2),
                                      bank.config());
      if (options.frames_dir) {
        char name[64];
        std::snprintf(name, sizeof name, "v%04zu_f%06zu.pgm", w.video,
                      w.start + w.inputs.size() - 1 + w.offset);
        write_pgm(*options.frames_dir / predictors[p].name / name, frame_to_image(pred));
      }
    }
  });

  EvalReport report;
  for (std::size_t p = 0; p < np; ++p) {
    EvalRow row{predictors[p].name, offset, 0.0, 0.0, windows.size()};
    for (std::size_t i = 0; i < windows.size(); ++i) {
      row.mse += mse[i * np + p];
      row.cwssim += ssim[i * np + p];
    }
    if (!windows.empty()) {
      row.mse /= static_cast<double>(windows.size());
      row.cwssim /= static_cast<double>(windows.size());
    }
    report.rows.push_back(row);
  }
  return report;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "predictor,offset,mse,cwssim,n\n";
  char buf[256];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f,%zu\n", r.predictor.c_str(), r.offset, r.mse,
                  r.cwssim, r.n);
    out += buf;
  }
  return out;
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
  write_file_atomic(path, report_csv(report));
}

template Predictor model_predictor(const Model<float>&, std::string);
template Predictor model_predictor(const Model<double>&, std::string);

}  // namespace clstm
