#pragma once

// Slow, direct reference implementations used to check the library.
// They share no code with the library beyond its plain data types.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "surgecast/ingest.hpp"
#include "surgecast/nn/convlstm.hpp"
#include "surgecast/raster.hpp"
#include "surgecast/tensor.hpp"

namespace oracle {

using surgecast::Mesh;
using surgecast::Roi;
using surgecast::Tensor3;

inline double shoelace_area(double ax, double ay, double bx, double by, double cx, double cy) {
  return 0.5 * std::abs(ax * by - bx * ay + bx * cy - cx * by + cx * ay - ax * cy);
}

inline double mesh_area(const Mesh& m) {
  double a = 0.0;
  for (const auto& t : m.triangles) {
    a += shoelace_area(m.lon[t[0]], m.lat[t[0]], m.lon[t[1]], m.lat[t[1]], m.lon[t[2]], m.lat[t[2]]);
  }
  return a;
}

struct RasterResult {
  std::vector<std::int32_t> triangle;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;
};

/// Every pixel tests every triangle; weights come from sub-triangle areas
/// with signs taken from orientation.
inline RasterResult brute_force_raster(const Mesh& m, const Roi& roi, const std::vector<double>& node_values,
                                       double fill_value, double background) {
  const std::size_t P = roi.width * roi.height;
  RasterResult r{std::vector<std::int32_t>(P, -1), std::vector<double>(P, background), std::vector<std::uint8_t>(P, 0)};
  auto cross = [](double ox, double oy, double ax, double ay, double bx, double by) {
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox);
  };
  for (std::size_t row = 0; row < roi.height; ++row) {
    for (std::size_t col = 0; col < roi.width; ++col) {
      const double x = roi.lon_min + (col + 0.5) * (roi.lon_max - roi.lon_min) / roi.width;
      const double y = roi.lat_max - (row + 0.5) * (roi.lat_max - roi.lat_min) / roi.height;
      const std::size_t p = row * roi.width + col;
      for (std::size_t e = 0; e < m.triangles.size(); ++e) {
        const auto& t = m.triangles[e];
        const double ax = m.lon[t[0]], ay = m.lat[t[0]], bx = m.lon[t[1]], by = m.lat[t[1]];
        const double cx = m.lon[t[2]], cy = m.lat[t[2]];
        const double total = cross(ax, ay, bx, by, cx, cy);
        double w[3] = {cross(x, y, bx, by, cx, cy) / total, cross(ax, ay, x, y, cx, cy) / total,
                       cross(ax, ay, bx, by, x, y) / total};
        if (w[0] < -1e-12 || w[1] < -1e-12 || w[2] < -1e-12) continue;
        r.triangle[p] = static_cast<std::int32_t>(e);
        double s = 0.0;
        for (double& v : w) s += (v = std::max(v, 0.0));
        const double v0 = node_values[t[0]], v1 = node_values[t[1]], v2 = node_values[t[2]];
        if (v0 != fill_value && v1 != fill_value && v2 != fill_value) {
          r.values[p] = (w[0] * v0 + w[1] * v1 + w[2] * v2) / s;
          r.mask[p] = 1;
        }
        break;
      }
    }
  }
  return r;
}

/// Cross-correlation with zero padding, one output value at a time.
inline Tensor3<double> naive_conv(const Tensor3<double>& in, std::span<const double> weight,
                                  std::span<const double> bias, std::size_t out_channels, std::size_t kh,
                                  std::size_t kw, std::size_t pad_h, std::size_t pad_w) {
  const std::size_t C = in.channels(), H = in.height(), W = in.width();
  const std::size_t OH = H + 2 * pad_h - kh + 1, OW = W + 2 * pad_w - kw + 1;
  Tensor3<double> out(out_channels, OH, OW);
  for (std::size_t o = 0; o < out_channels; ++o) {
    for (std::size_t y = 0; y < OH; ++y) {
      for (std::size_t x = 0; x < OW; ++x) {
        double s = bias[o];
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t u = 0; u < kh; ++u) {
            for (std::size_t v = 0; v < kw; ++v) {
              const long iy = static_cast<long>(y + u) - static_cast<long>(pad_h);
              const long ix = static_cast<long>(x + v) - static_cast<long>(pad_w);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
              s += weight[((o * C + c) * kh + u) * kw + v] * in(c, iy, ix);
            }
          }
        }
        out(o, y, x) = s;
      }
    }
  }
  return out;
}

struct CellOut {
  Tensor3<double> hidden;
  Tensor3<double> cell;
};

/// The four gate equations evaluated pixel by pixel with explicit sums.
inline CellOut scalar_cell(const Tensor3<double>& x, const Tensor3<double>& h, const Tensor3<double>& c,
                           const surgecast::nn::ConvLstmCellParams<double>& p) {
  const std::size_t C = x.channels(), D = h.channels(), H = x.height(), W = x.width();
  const auto& k = p.gates;
  const long ph = static_cast<long>(k.pad_h), pw = static_cast<long>(k.pad_w);
  auto input_at = [&](std::size_t ch, long yy, long xx) -> double {
    if (yy < 0 || xx < 0 || yy >= static_cast<long>(H) || xx >= static_cast<long>(W)) return 0.0;
    return ch < C ? x(ch, yy, xx) : h(ch - C, yy, xx);
  };
  auto preact = [&](std::size_t gate, std::size_t d, std::size_t y, std::size_t xx) {
    const std::size_t o = gate * D + d;
    double s = k.bias[o];
    for (std::size_t ch = 0; ch < C + D; ++ch) {
      for (std::size_t u = 0; u < k.kernel_h; ++u) {
        for (std::size_t v = 0; v < k.kernel_w; ++v) {
          s += k.w(o, ch, u, v) * input_at(ch, static_cast<long>(y + u) - ph, static_cast<long>(xx + v) - pw);
        }
      }
    }
    return s;
  };
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  CellOut out{Tensor3<double>(D, H, W), Tensor3<double>(D, H, W)};
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t xx = 0; xx < W; ++xx) {
        const double f = sig(preact(0, d, y, xx));
        const double i = sig(preact(1, d, y, xx));
        const double g = std::tanh(preact(2, d, y, xx));
        const double o = sig(preact(3, d, y, xx));
        const double cn = f * c(d, y, xx) + i * g;
        out.cell(d, y, xx) = cn;
        out.hidden(d, y, xx) = o * std::tanh(cn);
      }
    }
  }
  return out;
}

struct NaiveMetrics {
  double mse = 0.0, mae = 0.0, rmse = 0.0;
  std::optional<double> r2;
};

inline NaiveMetrics naive_metrics(const Tensor3<float>& pred, const Tensor3<float>& truth) {
  long double sum = 0.0L;
  for (std::size_t c = 0; c < truth.channels(); ++c)
    for (std::size_t y = 0; y < truth.height(); ++y)
      for (std::size_t x = 0; x < truth.width(); ++x) sum += truth(c, y, x);
  const long double n = static_cast<long double>(truth.size());
  const long double mean = sum / n;
  long double se = 0.0L, ae = 0.0L, st = 0.0L;
  for (std::size_t c = 0; c < truth.channels(); ++c) {
    for (std::size_t y = 0; y < truth.height(); ++y) {
      for (std::size_t x = 0; x < truth.width(); ++x) {
        const long double d = static_cast<long double>(pred(c, y, x)) - truth(c, y, x);
        se += d * d;
        ae += d < 0 ? -d : d;
        st += (truth(c, y, x) - mean) * (truth(c, y, x) - mean);
      }
    }
  }
  NaiveMetrics m;
  m.mse = static_cast<double>(se / n);
  m.mae = static_cast<double>(ae / n);
  m.rmse = std::sqrt(m.mse);
  if (st >= 1e-12L) m.r2 = static_cast<double>(1.0L - se / st);
  return m;
}

/// Central difference of f with respect to *x.
inline double central_difference(double* x, double step, const std::function<double()>& f) {
  const double saved = *x;
  *x = saved + step;
  const double up = f();
  *x = saved - step;
  const double down = f();
  *x = saved;
  return (up - down) / (2.0 * step);
}

}  // namespace oracle
