#include "esrgan/ops.hpp"

#include <Eigen/Core>
#include <cmath>

#include "esrgan/errors.hpp"

namespace esrgan::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw DimensionError(std::string(op) + ": undefined tensor");
}

struct ConvGeometry {
  std::size_t ci, h, w, kh, kw, ho, wo;
  int stride, padding;
  std::size_t rows() const { return ci * kh * kw; }
  std::size_t cols() const { return ho * wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && padding == 0; }
};

void im2col(const double* img, const ConvGeometry& g, double* out) {
  for (std::size_t c = 0; c < g.ci; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        double* row = out + ((c * g.kh + ky) * g.kw + kx) * g.cols();
        const double* plane = img + c * g.h * g.w;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - g.padding + static_cast<long>(ky);
          double* dst = row + oy * g.wo;
          if (iy < 0 || iy >= static_cast<long>(g.h)) {
            std::fill(dst, dst + g.wo, 0.0);
            continue;
          }
          const double* src = plane + iy * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox) * g.stride - g.padding + static_cast<long>(kx);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* img) {
  for (std::size_t c = 0; c < g.ci; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const double* row = cols + ((c * g.kh + ky) * g.kw + kx) * g.cols();
        double* plane = img + c * g.h * g.w;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - g.padding + static_cast<long>(ky);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          const double* src = row + oy * g.wo;
          double* dst = plane + iy * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox) * g.stride - g.padding + static_cast<long>(kx);
            if (ix >= 0 && ix < static_cast<long>(g.w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename Fn>
Tensor unary(const Tensor& x, Fn&& value_and_slope, const char* op) {
  require_defined(x, op);
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = value_and_slope(in[i]).first;
  return Tensor::make_result(x.shape(), std::move(out), {x},
                             [x, value_and_slope](std::span<const double> up, std::span<std::vector<double>*> g) {
                               const auto in = x.data();
                               auto& gx = *g[0];
                               for (std::size_t i = 0; i < in.size(); ++i) gx[i] += up[i] * value_and_slope(in[i]).second;
                             });
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding) {
  require_defined(input, "conv2d");
  require_defined(weight, "conv2d");
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  if (ws.c != is.c) {
    throw DimensionError("conv2d: input has " + std::to_string(is.c) + " channels but weight " + ws.str() +
                         " expects " + std::to_string(ws.c));
  }
  if (ws.h % 2 == 0 || ws.w % 2 == 0) throw DimensionError("conv2d: kernel sides must be odd, got " + ws.str());
  if (stride < 1 || padding < 0) throw DimensionError("conv2d: stride must be >= 1 and padding >= 0");
  if (bias.defined() && bias.shape() != Shape{1, ws.n, 1, 1}) {
    throw DimensionError("conv2d: bias shape " + bias.shape().str() + " does not match " + std::to_string(ws.n) +
                         " output channels");
  }
  const long span_h = static_cast<long>(is.h) + 2 * padding - static_cast<long>(ws.h);
  const long span_w = static_cast<long>(is.w) + 2 * padding - static_cast<long>(ws.w);
  if (span_h < 0 || span_w < 0) {
    throw DimensionError("conv2d: kernel " + ws.str() + " larger than padded input " + is.str());
  }

  ConvGeometry g{is.c, is.h, is.w, ws.h, ws.w, static_cast<std::size_t>(span_h / stride + 1),
                 static_cast<std::size_t>(span_w / stride + 1), stride, padding};
  const std::size_t co = ws.n;
  const std::size_t K = g.rows();
  const std::size_t P = g.cols();
  const Shape out_shape{is.n, co, g.ho, g.wo};

  std::vector<double> out(out_shape.numel());
  // Eigen only ever sees its own aligned buffers, so the vectorised summation
  // order never depends on where the tensor storage landed on the heap.
  const RowMat W = ConstRowMap(weight.data().data(), static_cast<long>(co), static_cast<long>(K));
  RowMat cols(static_cast<long>(K), static_cast<long>(P));
  RowMat O(static_cast<long>(co), static_cast<long>(P));
  for (std::size_t n = 0; n < is.n; ++n) {
    const double* img = input.data().data() + n * is.c * is.h * is.w;
    if (g.pointwise()) {
      cols = ConstRowMap(img, static_cast<long>(K), static_cast<long>(P));
    } else {
      im2col(img, g, cols.data());
    }
    O.noalias() = W * cols;
    if (bias.defined()) {
      const auto b = bias.data();
      for (std::size_t c = 0; c < co; ++c) O.row(static_cast<long>(c)).array() += b[c];
    }
    RowMap(out.data() + n * co * P, static_cast<long>(co), static_cast<long>(P)) = O;
  }

  return Tensor::make_result(
      out_shape, std::move(out), {input, weight, bias},
      [input, weight, g, co](std::span<const double> up, std::span<std::vector<double>*> grads) {
        const Shape& is = input.shape();
        const std::size_t K = g.rows();
        const std::size_t P = g.cols();
        const RowMat W = ConstRowMap(weight.data().data(), static_cast<long>(co), static_cast<long>(K));
        RowMat cols(static_cast<long>(K), static_cast<long>(P));
        RowMat dO(static_cast<long>(co), static_cast<long>(P));
        RowMat dcols(static_cast<long>(K), static_cast<long>(P));
        RowMat dW;
        if (grads[1]) dW = RowMat::Zero(static_cast<long>(co), static_cast<long>(K));
        for (std::size_t n = 0; n < is.n; ++n) {
          const double* img = input.data().data() + n * is.c * is.h * is.w;
          dO = ConstRowMap(up.data() + n * co * P, static_cast<long>(co), static_cast<long>(P));
          if (grads[1]) {
            if (g.pointwise()) {
              cols = ConstRowMap(img, static_cast<long>(K), static_cast<long>(P));
            } else {
              im2col(img, g, cols.data());
            }
            dW.noalias() += dO * cols.transpose();
          }
          if (grads[0]) {
            double* dimg = grads[0]->data() + n * is.c * is.h * is.w;
            dcols.noalias() = W.transpose() * dO;
            if (g.pointwise()) {
              RowMap(dimg, static_cast<long>(K), static_cast<long>(P)) += dcols;
            } else {
              col2im_add(dcols.data(), g, dimg);
            }
          }
          if (grads[2]) {
            auto& db = *grads[2];
            for (std::size_t c = 0; c < co; ++c) db[c] += dO.row(static_cast<long>(c)).sum();
          }
        }
        if (grads[1]) RowMap(grads[1]->data(), static_cast<long>(co), static_cast<long>(K)) += dW;
      });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  if (!(slope >= 0.0 && slope < 1.0)) throw std::invalid_argument("leaky_relu: slope must be in [0,1)");
  return unary(
      x, [slope](double v) { return v > 0.0 ? std::pair{v, 1.0} : std::pair{slope * v, slope}; }, "leaky_relu");
}

Tensor upsample_nearest(const Tensor& x, int factor) {
  require_defined(x, "upsample_nearest");
  if (factor < 1) throw DimensionError("upsample_nearest: factor must be >= 1");
  const Shape s = x.shape();
  const auto f = static_cast<std::size_t>(factor);
  const Shape os{s.n, s.c, s.h * f, s.w * f};
  std::vector<double> out(os.numel());
  const auto in = x.data();
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    for (std::size_t y = 0; y < os.h; ++y) {
      const double* src = in.data() + p * s.plane() + (y / f) * s.w;
      double* dst = out.data() + p * os.plane() + y * os.w;
      for (std::size_t xo = 0; xo < os.w; ++xo) dst[xo] = src[xo / f];
    }
  }
  return Tensor::make_result(os, std::move(out), {x}, [s, os, f](std::span<const double> up, std::span<std::vector<double>*> g) {
    auto& gx = *g[0];
    for (std::size_t p = 0; p < s.n * s.c; ++p) {
      for (std::size_t y = 0; y < os.h; ++y) {
        const double* src = up.data() + p * os.plane() + y * os.w;
        double* dst = gx.data() + p * s.plane() + (y / f) * s.w;
        for (std::size_t xo = 0; xo < os.w; ++xo) dst[xo / f] += src[xo];
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto da = a.data();
  const auto db = b.data();
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](std::span<const double> up, std::span<std::vector<double>*> g) {
    for (auto* buf : g) {
      if (!buf) continue;
      for (std::size_t i = 0; i < up.size(); ++i) (*buf)[i] += up[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto da = a.data();
  const auto db = b.data();
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] - db[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](std::span<const double> up, std::span<std::vector<double>*> g) {
    if (g[0]) {
      for (std::size_t i = 0; i < up.size(); ++i) (*g[0])[i] += up[i];
    }
    if (g[1]) {
      for (std::size_t i = 0; i < up.size(); ++i) (*g[1])[i] -= up[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto da = a.data();
  const auto db = b.data();
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b},
                             [a, b](std::span<const double> up, std::span<std::vector<double>*> g) {
                               const auto da = a.data();
                               const auto db = b.data();
                               if (g[0]) {
                                 for (std::size_t i = 0; i < up.size(); ++i) (*g[0])[i] += up[i] * db[i];
                               }
                               if (g[1]) {
                                 for (std::size_t i = 0; i < up.size(); ++i) (*g[1])[i] += up[i] * da[i];
                               }
                             });
}

Tensor scale(const Tensor& x, double factor) {
  require_defined(x, "scale");
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = factor * in[i];
  return Tensor::make_result(x.shape(), std::move(out), {x},
                             [factor](std::span<const double> up, std::span<std::vector<double>*> g) {
                               auto& gx = *g[0];
                               for (std::size_t i = 0; i < up.size(); ++i) gx[i] += factor * up[i];
                             });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  const Shape first = parts.front().shape();
  std::size_t channels = 0;
  for (const auto& p : parts) {
    require_defined(p, "concat_channels");
    const Shape& s = p.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw DimensionError("concat_channels: " + s.str() + " incompatible with " + first.str());
    }
    channels += s.c;
  }
  const Shape os{first.n, channels, first.h, first.w};
  const std::size_t plane = first.plane();
  std::vector<double> out(os.numel());
  std::vector<std::size_t> widths;
  widths.reserve(parts.size());
  for (std::size_t n = 0; n < first.n; ++n) {
    double* dst = out.data() + n * channels * plane;
    for (const auto& p : parts) {
      const std::size_t len = p.shape().c * plane;
      const double* src = p.data().data() + n * len;
      std::copy(src, src + len, dst);
      dst += len;
    }
  }
  for (const auto& p : parts) widths.push_back(p.shape().c * plane);
  return Tensor::make_result(os, std::move(out), parts,
                             [widths, total = channels * plane, batch = first.n](std::span<const double> up,
                                                                               std::span<std::vector<double>*> g) {
                               for (std::size_t n = 0; n < batch; ++n) {
                                 std::size_t offset = n * total;
                                 for (std::size_t k = 0; k < widths.size(); ++k) {
                                   if (g[k]) {
                                     double* dst = g[k]->data() + n * widths[k];
                                     for (std::size_t i = 0; i < widths[k]; ++i) dst[i] += up[offset + i];
                                   }
                                   offset += widths[k];
                                 }
                               }
                             });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape.numel() != x.numel()) {
    throw DimensionError("reshape: cannot view " + x.shape().str() + " as " + shape.str());
  }
  const auto in = x.data();
  return Tensor::make_result(shape, std::vector<double>(in.begin(), in.end()), {x},
                             [](std::span<const double> up, std::span<std::vector<double>*> g) {
                               auto& gx = *g[0];
                               for (std::size_t i = 0; i < up.size(); ++i) gx[i] += up[i];
                             });
}

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  double total = 0.0;
  for (double v : x.data()) total += v;
  return Tensor::make_result(Shape{1, 1, 1, 1}, {total}, {x}, [](std::span<const double> up, std::span<std::vector<double>*> g) {
    for (double& v : *g[0]) v += up[0];
  });
}

Tensor mean(const Tensor& x) {
  require_defined(x, "mean");
  if (x.numel() == 0) throw DimensionError("mean: empty tensor");
  const double count = static_cast<double>(x.numel());
  double total = 0.0;
  for (double v : x.data()) total += v;
  return Tensor::make_result(Shape{1, 1, 1, 1}, {total / count}, {x},
                             [count](std::span<const double> up, std::span<std::vector<double>*> g) {
                               const double d = up[0] / count;
                               for (double& v : *g[0]) v += d;
                             });
}

Tensor l1_distance(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "l1_distance");
  if (a.numel() == 0) throw DimensionError("l1_distance: empty tensors");
  const auto da = a.data();
  const auto db = b.data();
  const double count = static_cast<double>(da.size());
  double total = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) total += std::abs(da[i] - db[i]);
  return Tensor::make_result(Shape{1, 1, 1, 1}, {total / count}, {a, b},
                             [a, b, count](std::span<const double> up, std::span<std::vector<double>*> g) {
                               const auto da = a.data();
                               const auto db = b.data();
                               const double d = up[0] / count;
                               for (std::size_t i = 0; i < da.size(); ++i) {
                                 const double diff = da[i] - db[i];
                                 const double s = diff > 0.0 ? d : (diff < 0.0 ? -d : 0.0);
                                 if (g[0]) (*g[0])[i] += s;
                                 if (g[1]) (*g[1])[i] -= s;
                               }
                             });
}

Tensor add_channel_scaled(const Tensor& x, const Tensor& scales, const Tensor& noise) {
  require_defined(x, "add_channel_scaled");
  const Shape s = x.shape();
  if (scales.shape() != Shape{1, s.c, 1, 1}) {
    throw DimensionError("add_channel_scaled: scales " + scales.shape().str() + " do not match " +
                         std::to_string(s.c) + " channels");
  }
  if (noise.shape() != Shape{s.n, 1, s.h, s.w}) {
    throw DimensionError("add_channel_scaled: noise " + noise.shape().str() + " does not match features " + s.str());
  }
  const auto in = x.data();
  const auto sc = scales.data();
  const auto nz = noise.data();
  const std::size_t plane = s.plane();
  std::vector<double> out(in.size());
  for (std::size_t n = 0; n < s.n; ++n) {
    const double* noise_plane = nz.data() + n * plane;
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t base = (n * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) out[base + i] = in[base + i] + sc[c] * noise_plane[i];
    }
  }
  return Tensor::make_result(s, std::move(out), {x, scales, noise},
                             [s, scales, noise](std::span<const double> up, std::span<std::vector<double>*> g) {
                               const auto sc = scales.data();
                               const auto nz = noise.data();
                               const std::size_t plane = s.plane();
                               for (std::size_t n = 0; n < s.n; ++n) {
                                 const double* noise_plane = nz.data() + n * plane;
                                 for (std::size_t c = 0; c < s.c; ++c) {
                                   const std::size_t base = (n * s.c + c) * plane;
                                   double acc = 0.0;
                                   for (std::size_t i = 0; i < plane; ++i) {
                                     if (g[0]) (*g[0])[base + i] += up[base + i];
                                     acc += up[base + i] * noise_plane[i];
                                     if (g[2]) (*g[2])[n * plane + i] += up[base + i] * sc[c];
                                   }
                                   if (g[1]) (*g[1])[c] += acc;
                                 }
                               }
                             });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_defined(x, "batch_norm");
  const Shape s = x.shape();
  if (gamma.shape() != Shape{1, s.c, 1, 1} || beta.shape() != Shape{1, s.c, 1, 1}) {
    throw DimensionError("batch_norm: affine parameters do not match " + std::to_string(s.c) + " channels");
  }
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n * plane);
  const auto in = x.data();
  const auto gm = gamma.data();
  const auto bt = beta.data();
  std::vector<double> xhat(in.size());
  std::vector<double> inv_std(s.c);
  std::vector<double> out(in.size());
  for (std::size_t c = 0; c < s.c; ++c) {
    double mu = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const double* p = in.data() + (n * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) mu += p[i];
    }
    mu /= count;
    double var = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const double* p = in.data() + (n * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) var += (p[i] - mu) * (p[i] - mu);
    }
    var /= count;
    inv_std[c] = 1.0 / std::sqrt(var + eps);
    for (std::size_t n = 0; n < s.n; ++n) {
      const std::size_t base = (n * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        xhat[base + i] = (in[base + i] - mu) * inv_std[c];
        out[base + i] = gm[c] * xhat[base + i] + bt[c];
      }
    }
  }
  return Tensor::make_result(
      s, std::move(out), {x, gamma, beta},
      [s, gamma, xhat = std::move(xhat), inv_std = std::move(inv_std), count](std::span<const double> up,
                                                                              std::span<std::vector<double>*> g) {
        const std::size_t plane = s.plane();
        const auto gm = gamma.data();
        for (std::size_t c = 0; c < s.c; ++c) {
          double sum_dy = 0.0;
          double sum_dy_xhat = 0.0;
          for (std::size_t n = 0; n < s.n; ++n) {
            const std::size_t base = (n * s.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_dy += up[base + i];
              sum_dy_xhat += up[base + i] * xhat[base + i];
            }
          }
          if (g[1]) (*g[1])[c] += sum_dy_xhat;
          if (g[2]) (*g[2])[c] += sum_dy;
          if (!g[0]) continue;
          const double k = gm[c] * inv_std[c] / count;
          for (std::size_t n = 0; n < s.n; ++n) {
            const std::size_t base = (n * s.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              (*g[0])[base + i] += k * (count * up[base + i] - sum_dy - xhat[base + i] * sum_dy_xhat);
            }
          }
        }
      });
}

}  // namespace esrgan::ops
