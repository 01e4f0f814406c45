#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surgecast/clips.hpp"
#include "surgecast/encode.hpp"
#include "surgecast/error.hpp"
#include "surgecast/forecast.hpp"
#include "surgecast/parallel.hpp"
#include "surgecast/tensor.hpp"
#include "surgecast/text.hpp"

namespace surgecast {

/// Below this truth variance (sum of squares about the mean) R^2 is undefined.
inline constexpr double kR2VarianceFloor = 1e-12;

struct FrameMetrics {
  std::string clip_id;
  std::string region_id;
  std::size_t step = 0;  // 1-based forecast step
  double mse = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> r2;  // empty when the truth frame is constant
};

/// Per-frame errors over all channel and pixel entries.
template <typename T>
FrameMetrics frame_metrics(const Tensor3<T>& pred, const Tensor3<T>& truth) {
  if (!pred.same_shape(truth) || truth.empty()) {
    throw Error(ErrorKind::shape, "frame_metrics: shapes " + shape_string(pred) + " and " + shape_string(truth));
  }
  const std::size_t n = truth.size();
  double mean = 0.0;
  for (std::size_t k = 0; k < n; ++k) mean += static_cast<double>(truth.data()[k]);
  mean /= static_cast<double>(n);

  double sse = 0.0, sae = 0.0, sst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double y = truth.data()[k];
    const double d = static_cast<double>(pred.data()[k]) - y;
    sse += d * d;
    sae += std::abs(d);
    sst += (y - mean) * (y - mean);
  }
  FrameMetrics m;
  m.mse = sse / static_cast<double>(n);
  m.mae = sae / static_cast<double>(n);
  m.rmse = std::sqrt(m.mse);
  if (sst >= kR2VarianceFloor) m.r2 = 1.0 - sse / sst;
  return m;
}

struct BoxSummary {
  std::size_t step = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
  std::size_t n = 0;
};

/// Quantile by linear interpolation between order statistics at q*(n-1).
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// Quartiles plus Tukey whiskers: the most extreme data within 1.5 IQR of
/// the box.
inline BoxSummary box_summary(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::value, "box_summary: empty input");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  BoxSummary s;
  s.n = v.size();
  s.q1 = quantile_sorted(v, 0.25);
  s.median = quantile_sorted(v, 0.5);
  s.q3 = quantile_sorted(v, 0.75);
  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr;
  const double hi_fence = s.q3 + 1.5 * iqr;
  s.whisker_lo = *std::find_if(v.begin(), v.end(), [&](double x) { return x >= lo_fence; });
  s.whisker_hi = *std::find_if(v.rbegin(), v.rend(), [&](double x) { return x <= hi_fence; });
  return s;
}

inline const char* const kMetricNames[] = {"mse", "rmse", "mae", "r2"};

struct MetricSummary {
  std::string metric;
  BoxSummary box;
};

/// Per-step box summaries of each metric; undefined R^2 rows are skipped.
inline std::vector<MetricSummary> summarize(const std::vector<FrameMetrics>& rows) {
  std::size_t max_step = 0;
  for (const auto& r : rows) max_step = std::max(max_step, r.step);
  std::vector<MetricSummary> out;
  for (std::size_t step = 1; step <= max_step; ++step) {
    for (const char* metric : kMetricNames) {
      std::vector<double> vals;
      for (const auto& r : rows) {
        if (r.step != step) continue;
        const std::string_view m = metric;
        if (m == "mse") vals.push_back(r.mse);
        else if (m == "rmse") vals.push_back(r.rmse);
        else if (m == "mae") vals.push_back(r.mae);
        else if (r.r2) vals.push_back(*r.r2);
      }
      if (vals.empty()) continue;
      auto box = box_summary(vals);
      box.step = step;
      out.push_back({metric, box});
    }
  }
  return out;
}

/// Metrics rows for pre-computed predictions, one per clip and step.
inline std::vector<FrameMetrics> evaluate_predictions(std::span<const Clip> clips,
                                                      std::span<const std::vector<Tensor3<float>>> predictions) {
  if (clips.size() != predictions.size()) throw Error(ErrorKind::shape, "evaluate: clip/prediction count mismatch");
  std::vector<FrameMetrics> rows;
  for (std::size_t c = 0; c < clips.size(); ++c) {
    if (predictions[c].size() != clips[c].target.size()) {
      throw Error(ErrorKind::shape, "evaluate: prediction length differs for clip " + clips[c].id);
    }
    for (std::size_t t = 0; t < predictions[c].size(); ++t) {
      auto m = frame_metrics(predictions[c][t], clips[c].target[t]);
      m.clip_id = clips[c].id;
      m.region_id = clips[c].region_id;
      m.step = t + 1;
      rows.push_back(std::move(m));
    }
  }
  return rows;
}

/// Errors of the decoded zeta field in meters (derived from RGB via the
/// colormap inverse); R^2 is not reported here.
struct MeterMetrics {
  std::string clip_id;
  std::size_t step = 0;
  double mse_m2 = 0.0;
  double rmse_m = 0.0;
  double mae_m = 0.0;
};

inline std::vector<MeterMetrics> evaluate_meters(std::span<const Clip> clips,
                                                 std::span<const std::vector<Tensor3<float>>> predictions,
                                                 const Colormap& cmap, const ValueRange& zeta_range) {
  std::vector<MeterMetrics> rows;
  for (std::size_t c = 0; c < clips.size(); ++c) {
    for (std::size_t t = 0; t < predictions[c].size(); ++t) {
      const auto pred = decode_zeta(predictions[c][t], cmap, zeta_range);
      const auto truth = decode_zeta(clips[c].target[t], cmap, zeta_range);
      double sse = 0.0, sae = 0.0;
      for (std::size_t p = 0; p < pred.size(); ++p) {
        const double d = pred[p] - truth[p];
        sse += d * d;
        sae += std::abs(d);
      }
      MeterMetrics m{clips[c].id, t + 1, sse / static_cast<double>(pred.size()), 0.0,
                     sae / static_cast<double>(pred.size())};
      m.rmse_m = std::sqrt(m.mse_m2);
      rows.push_back(m);
    }
  }
  return rows;
}

struct EvaluationReport {
  std::vector<FrameMetrics> rows;
  std::vector<MetricSummary> summary;
  std::vector<MeterMetrics> meters;
};

/// Pure rollout (no teacher forcing, no dropout) over every clip.
inline EvaluationReport evaluate_run(const Model<float>& model, std::span<const Clip> clips, const Colormap& cmap,
                                     const ValueRange& zeta_range, std::size_t threads = 1) {
  if (clips.empty()) throw Error(ErrorKind::value, "evaluate: no clips");
  std::vector<std::vector<Tensor3<float>>> predictions(clips.size());
  parallel_for(clips.size(), threads, [&](std::size_t i) {
    predictions[i] = forecast_clip<float>(model, clips[i], RolloutConfig{}).predictions;
  });
  EvaluationReport report;
  report.rows = evaluate_predictions(clips, predictions);
  report.summary = summarize(report.rows);
  report.meters = evaluate_meters(clips, predictions, cmap, zeta_range);
  return report;
}

inline void write_metrics_csv(const std::filesystem::path& path, const std::vector<FrameMetrics>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "clip_id,region_id,step,mse,rmse,mae,r2\n";
  for (const auto& r : rows) {
    out << r.clip_id << ',' << r.region_id << ',' << r.step << ',' << text::format_double(r.mse) << ','
        << text::format_double(r.rmse) << ',' << text::format_double(r.mae) << ','
        << (r.r2 ? text::format_double(*r.r2) : std::string()) << '\n';
  }
}

inline void write_summary_csv(const std::filesystem::path& path, const std::vector<MetricSummary>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "step,metric,median,q1,q3,whisker_lo,whisker_hi,n\n";
  for (const auto& r : rows) {
    const auto& b = r.box;
    out << b.step << ',' << r.metric << ',' << text::format_double(b.median) << ',' << text::format_double(b.q1)
        << ',' << text::format_double(b.q3) << ',' << text::format_double(b.whisker_lo) << ','
        << text::format_double(b.whisker_hi) << ',' << b.n << '\n';
  }
}

inline void write_meters_csv(const std::filesystem::path& path, const std::vector<MeterMetrics>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "# derived: zeta decoded from RGB through the colormap inverse, in meters\n";
  out << "clip_id,step,mse_m2,rmse_m,mae_m\n";
  for (const auto& r : rows) {
    out << r.clip_id << ',' << r.step << ',' << text::format_double(r.mse_m2) << ',' << text::format_double(r.rmse_m)
        << ',' << text::format_double(r.mae_m) << '\n';
  }
}

}  // namespace surgecast
