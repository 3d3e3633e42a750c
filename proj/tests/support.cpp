#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <unistd.h>

namespace esrgan::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("esrgan_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

ImageRGB synthetic_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  RngState rng(seed);
  ImageRGB img(h, w);
  const double pi = std::numbers::pi;
  struct Wave {
    double fx, fy, phase, amp;
    double tint[3];
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 24; ++k) {
    const double freq = 0.5 * std::pow(2.0, 5.0 * rng.uniform());  // cycles per 64 px
    const double angle = 2.0 * pi * rng.uniform();
    Wave wv{};
    wv.fx = freq * std::cos(angle) / 64.0;
    wv.fy = freq * std::sin(angle) / 64.0;
    wv.phase = 2.0 * pi * rng.uniform();
    wv.amp = 0.12 / freq;
    for (double& t : wv.tint) t = 0.6 + 0.4 * rng.uniform();
    waves.push_back(wv);
  }
  struct Edge {
    double nx, ny, offset, height, softness;
  };
  std::vector<Edge> edges;
  for (int k = 0; k < 4; ++k) {
    const double angle = 2.0 * pi * rng.uniform();
    edges.push_back({std::cos(angle), std::sin(angle), (rng.uniform() - 0.5) * static_cast<double>(std::min(h, w)),
                     (rng.uniform() - 0.5) * 0.3, 0.5 + 2.0 * rng.uniform()});
  }
  double base[3];
  for (double& b : base) b = 0.35 + 0.3 * rng.uniform();

  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double cx = static_cast<double>(x) - static_cast<double>(w) / 2.0;
      const double cy = static_cast<double>(y) - static_cast<double>(h) / 2.0;
      double edge_sum = 0.0;
      for (const auto& e : edges) edge_sum += e.height * std::tanh((e.nx * cx + e.ny * cy - e.offset) / e.softness);
      for (int c = 0; c < 3; ++c) {
        double v = base[c] + edge_sum;
        for (const auto& wv : waves) {
          v += wv.amp * wv.tint[c] * std::sin(2.0 * pi * (wv.fx * static_cast<double>(x) + wv.fy * static_cast<double>(y)) + wv.phase);
        }
        img.at(c, y, x) = std::clamp(v, 0.05, 0.95);
      }
    }
  }
  return img;
}

Tensor random_tensor(Shape shape, RngState& rng, double lo, double hi, bool requires_grad) {
  std::vector<double> data(shape.numel());
  for (double& v : data) v = lo + (hi - lo) * rng.uniform();
  return Tensor::from_data(shape, std::move(data), requires_grad);
}

void write_dataset(const fs::path& root, int count, std::size_t size, std::uint64_t seed) {
  fs::create_directories(root / "HR");
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "img_%02d.png", i);
    save_image(synthetic_image(size, size, seed * 1000 + static_cast<std::uint64_t>(i)), root / "HR" / name);
  }
}

double gradient_check(const std::function<Tensor(const std::vector<Tensor>&)>& loss, std::vector<Tensor> inputs,
                      double h) {
  for (auto& t : inputs) {
    t.zero_grad();
    t.set_requires_grad(true);
  }
  loss(inputs).backward();
  double max_err = 0.0;
  double max_mag = 0.0;
  for (auto& t : inputs) {
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    if (analytic.empty()) analytic.assign(t.numel(), 0.0);
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      double plus;
      double minus;
      {
        NoGradGuard g;
        data[i] = saved + h;
        plus = loss(inputs).item();
        data[i] = saved - h;
        minus = loss(inputs).item();
      }
      data[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      max_err = std::max(max_err, std::abs(numeric - analytic[i]));
      max_mag = std::max({max_mag, std::abs(numeric), std::abs(analytic[i])});
    }
  }
  return max_err / std::max(max_mag, 1e-12);
}

Tensor naive_conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  const long oh = (static_cast<long>(xs.h) + 2 * pad - static_cast<long>(ws.h)) / stride + 1;
  const long ow = (static_cast<long>(xs.w) + 2 * pad - static_cast<long>(ws.w)) / stride + 1;
  std::vector<double> out;
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t co = 0; co < ws.n; ++co) {
      for (long oy = 0; oy < oh; ++oy) {
        for (long ox = 0; ox < ow; ++ox) {
          double acc = b.defined() ? b.at(0, co, 0, 0) : 0.0;
          for (std::size_t ci = 0; ci < ws.c; ++ci) {
            for (long ky = 0; ky < static_cast<long>(ws.h); ++ky) {
              for (long kx = 0; kx < static_cast<long>(ws.w); ++kx) {
                const long iy = oy * stride + ky - pad;
                const long ix = ox * stride + kx - pad;
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(xs.h) || ix >= static_cast<long>(xs.w)) continue;
                acc += x.at(n, ci, iy, ix) * w.at(co, ci, ky, kx);
              }
            }
          }
          out.push_back(acc);
        }
      }
    }
  }
  return Tensor::from_data(Shape{xs.n, ws.n, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)},
                           std::move(out));
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Eigen::MatrixXd dense_resample_matrix(std::size_t in, std::size_t out, bool antialias) {
  const double s = static_cast<double>(out) / static_cast<double>(in);
  const double k = (antialias && s < 1.0) ? s : 1.0;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<long>(out), static_cast<long>(in));
  for (std::size_t i = 0; i < out; ++i) {
    const double centre = (static_cast<double>(i) + 0.5) / s - 0.5;
    double total = 0.0;
    for (long src = -64; src < static_cast<long>(in) + 64; ++src) {
      const double u = k * (centre - static_cast<double>(src));
      const double au = std::abs(u);
      double w = 0.0;
      if (au <= 1.0) {
        w = 1.5 * au * au * au - 2.5 * au * au + 1.0;
      } else if (au < 2.0) {
        w = -0.5 * au * au * au + 2.5 * au * au - 4.0 * au + 2.0;
      }
      if (w == 0.0) continue;
      const long clamped = std::clamp(src, 0L, static_cast<long>(in) - 1);
      m(static_cast<long>(i), clamped) += w;
      total += w;
    }
    m.row(static_cast<long>(i)) /= total;
  }
  return m;
}

}  // namespace esrgan::testing
