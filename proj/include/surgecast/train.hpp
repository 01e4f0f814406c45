#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include "surgecast/checkpoint.hpp"
#include "surgecast/clips.hpp"
#include "surgecast/error.hpp"
#include "surgecast/forecast.hpp"
#include "surgecast/nn/network.hpp"
#include "surgecast/parallel.hpp"
#include "surgecast/random.hpp"
#include "surgecast/text.hpp"

namespace surgecast {

struct TrainConfig {
  std::size_t batch_size = 3;
  double lr = 1e-3;
  std::size_t epochs = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double plateau_factor = 0.5;
  std::size_t plateau_patience = 3;
  double min_lr = 1e-5;
  double plateau_threshold = 1e-6;
  double teacher_forcing_p = 0.5;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 = default_thread_count()
  bool record_wall_time = true;  // false keeps epoch logs byte-reproducible

  void validate() const {
    if (batch_size < 1) throw Error(ErrorKind::config, "train: batch_size must be >= 1");
    if (!(lr > 0.0)) throw Error(ErrorKind::config, "train: lr must be > 0");
    if (!(plateau_factor >= 0.0 && plateau_factor < 1.0)) {
      throw Error(ErrorKind::config, "train: plateau_factor must be in [0, 1)");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
      throw Error(ErrorKind::config, "train: invalid Adam constants");
    }
    if (!(min_lr >= 0.0)) throw Error(ErrorKind::config, "train: min_lr must be >= 0");
    if (!(teacher_forcing_p >= 0.0 && teacher_forcing_p <= 1.0)) {
      throw Error(ErrorKind::config, "train: teacher_forcing_p must be in [0, 1]");
    }
  }
};

// --- loss ------------------------------------------------------------------

template <typename T>
void check_same_frames(std::span<const Tensor3<T>> pred, std::span<const Tensor3<T>> target) {
  if (pred.size() != target.size()) throw Error(ErrorKind::shape, "loss: frame counts differ");
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (!pred[k].same_shape(target[k])) throw Error(ErrorKind::shape, "loss: frame shapes differ");
  }
}

/// Mean squared error over every entry of every frame.
template <typename T>
double mse_loss(std::span<const Tensor3<T>> pred, std::span<const Tensor3<T>> target) {
  check_same_frames(pred, target);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    for (std::size_t j = 0; j < pred[k].size(); ++j) {
      const double d = static_cast<double>(pred[k].data()[j]) - static_cast<double>(target[k].data()[j]);
      sum += d * d;
    }
    n += pred[k].size();
  }
  if (n == 0) throw Error(ErrorKind::shape, "loss: empty input");
  return sum / static_cast<double>(n);
}

/// d(mse_loss)/d(pred), frame by frame, optionally scaled.
template <typename T>
std::vector<Tensor3<T>> mse_loss_grad(std::span<const Tensor3<T>> pred, std::span<const Tensor3<T>> target,
                                      double scale = 1.0) {
  check_same_frames(pred, target);
  std::size_t n = 0;
  for (const auto& f : pred) n += f.size();
  const T c = static_cast<T>(2.0 * scale / static_cast<double>(n));
  std::vector<Tensor3<T>> grads;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    Tensor3<T> g(pred[k].channels(), pred[k].height(), pred[k].width());
    for (std::size_t j = 0; j < g.size(); ++j) g.data()[j] = c * (pred[k].data()[j] - target[k].data()[j]);
    grads.push_back(std::move(g));
  }
  return grads;
}

// --- optimizer ---------------------------------------------------------------

struct AdamState {
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const nn::NetworkParams<float>& params) {
    AdamState s;
    for (const auto& view : params.views()) {
      s.m.emplace_back(view.data.size(), 0.0f);
      s.v.emplace_back(view.data.size(), 0.0f);
    }
    return s;
  }
};

/// Bias-corrected Adam update. Non-finite gradients abort before any
/// parameter is touched.
inline void adam_step(nn::NetworkParams<float>& params, const nn::NetworkParams<float>& grads, AdamState& state,
                      double lr, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8) {
  auto p = params.views();
  const auto g = grads.views();
  if (p.size() != g.size() || state.m.size() != p.size()) throw Error(ErrorKind::shape, "adam: shape mismatch");
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g[k].data.size() != p[k].data.size() || state.m[k].size() != p[k].data.size()) {
      throw Error(ErrorKind::shape, "adam: shape mismatch in " + p[k].name);
    }
    for (float x : g[k].data) {
      if (!std::isfinite(x)) throw Error(ErrorKind::numeric, "adam: non-finite gradient in " + g[k].name);
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < p.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t j = 0; j < m.size(); ++j) {
      const double gj = g[k].data[j];
      m[j] = static_cast<float>(beta1 * m[j] + (1.0 - beta1) * gj);
      v[j] = static_cast<float>(beta2 * v[j] + (1.0 - beta2) * gj * gj);
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[k].data[j] = static_cast<float>(p[k].data[j] - lr * m_hat / (std::sqrt(v_hat) + epsilon));
    }
  }
}

// --- learning-rate schedule -------------------------------------------------

/// Reduce-on-plateau: after `patience` consecutive epochs without beating the
/// best validation loss by more than `threshold`, lr <- max(min_lr, lr * factor).
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, std::size_t patience, double min_lr, double threshold = 1e-6)
      : lr_(lr), factor_(factor), patience_(patience), min_lr_(min_lr), threshold_(threshold) {}

  double observe(double val_loss) {
    if (val_loss < best_ - threshold_) {
      best_ = val_loss;
      bad_epochs_ = 0;
    } else if (++bad_epochs_ >= patience_) {
      lr_ = std::max(min_lr_, lr_ * factor_);
      bad_epochs_ = 0;
    }
    return lr_;
  }

  double lr() const noexcept { return lr_; }

 private:
  double lr_;
  double factor_;
  std::size_t patience_;
  double min_lr_;
  double threshold_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs_ = 0;
};

/// Learning rate after replaying a validation-loss history.
inline double plateau_scheduler(std::span<const double> val_losses, double lr, double factor, std::size_t patience,
                                double min_lr, double threshold = 1e-6) {
  if (val_losses.empty()) throw Error(ErrorKind::value, "plateau_scheduler: no recorded epochs");
  PlateauScheduler s(lr, factor, patience, min_lr, threshold);
  for (double v : val_losses) s.observe(v);
  return s.lr();
}

// --- data sources ------------------------------------------------------------

class ClipSource {
 public:
  virtual ~ClipSource() = default;
  virtual std::size_t size() const = 0;
  virtual Clip get(std::size_t i) const = 0;
};

class InMemoryClips final : public ClipSource {
 public:
  explicit InMemoryClips(std::vector<Clip> clips) : clips_(std::move(clips)) {}
  std::size_t size() const override { return clips_.size(); }
  Clip get(std::size_t i) const override { return clips_.at(i); }

 private:
  std::vector<Clip> clips_;
};

/// Lazily loads one partition of a clip dataset directory.
class DatasetClips final : public ClipSource {
 public:
  DatasetClips(std::shared_ptr<const ClipDataset> dataset, Partition part)
      : dataset_(std::move(dataset)), indices_(dataset_->indices(part)) {}
  std::size_t size() const override { return indices_.size(); }
  Clip get(std::size_t i) const override { return dataset_->load(indices_.at(i)); }

 private:
  std::shared_ptr<const ClipDataset> dataset_;
  std::vector<std::size_t> indices_;
};

// --- training ----------------------------------------------------------------

struct ClipLossGrad {
  double loss = 0.0;
  nn::NetworkParams<float> grads;
};

/// Loss and gradients for one clip under training conditions (dropout,
/// teacher forcing), with all randomness drawn from `seed`.
inline ClipLossGrad clip_loss_and_gradients(const Model<float>& model, const Clip& clip, double teacher_forcing_p,
                                            std::uint64_t seed) {
  nn::Tape<float> tape;
  nn::Dropout dropout(model.config.dropout_p, derive_seed(seed, 1));
  RolloutConfig rc{kTargetFrames, teacher_forcing_p, derive_seed(seed, 2)};
  auto result = forecast_clip<float>(model, clip, rc, &dropout, &tape);
  std::span<const Tensor3<float>> pred(result.predictions), target(clip.target);
  ClipLossGrad out;
  out.loss = mse_loss(pred, target);
  if (!std::isfinite(out.loss)) throw Error(ErrorKind::numeric, "non-finite loss on clip " + clip.id);
  auto d_pred = mse_loss_grad(pred, target);
  for (std::size_t k = 0; k < d_pred.size(); ++k) tape.add_output_grad(result.first_tape_step + k, d_pred[k]);
  out.grads = nn::gradients(tape, model.config, model.params);
  return out;
}

/// Inference-path loss: no dropout, no teacher forcing.
inline double evaluation_loss(const Model<float>& model, const Clip& clip) {
  auto result = forecast_clip<float>(model, clip, RolloutConfig{});
  return mse_loss(std::span<const Tensor3<float>>(result.predictions), std::span<const Tensor3<float>>(clip.target));
}

inline double mean_evaluation_loss(const Model<float>& model, const ClipSource& clips, std::size_t threads) {
  std::vector<double> losses(clips.size());
  parallel_for(clips.size(), threads, [&](std::size_t i) { losses[i] = evaluation_loss(model, clips.get(i)); });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(losses.size());
}

/// Stateful optimizer over mini-batches. Per-clip gradients are summed in
/// batch order, so results do not depend on the worker count.
class Trainer {
 public:
  Trainer(Model<float> model, TrainConfig cfg)
      : model_(std::move(model)), cfg_(std::move(cfg)), adam_(AdamState::zeros_like(model_.params)), lr_(cfg_.lr) {
    cfg_.validate();
    threads_ = cfg_.threads ? cfg_.threads : default_thread_count();
  }

  /// One optimizer step; returns the mean clip loss before the update.
  double step(std::span<const Clip> batch, std::uint64_t batch_seed) {
    if (batch.empty()) throw Error(ErrorKind::value, "train: empty batch");
    std::vector<ClipLossGrad> results(batch.size());
    parallel_for(batch.size(), threads_, [&](std::size_t i) {
      results[i] = clip_loss_and_gradients(model_, batch[i], cfg_.teacher_forcing_p, derive_seed(batch_seed, i));
    });
    auto grads = std::move(results[0].grads);
    double loss = results[0].loss;
    for (std::size_t i = 1; i < results.size(); ++i) {
      grads.add(results[i].grads);
      loss += results[i].loss;
    }
    const float inv = 1.0f / static_cast<float>(batch.size());
    grads.scale(inv);
    adam_step(model_.params, grads, adam_, lr_, cfg_.beta1, cfg_.beta2, cfg_.epsilon);
    return loss / static_cast<double>(batch.size());
  }

  const Model<float>& model() const noexcept { return model_; }
  double lr() const noexcept { return lr_; }
  void set_lr(double lr) noexcept { lr_ = lr; }
  std::size_t threads() const noexcept { return threads_; }
  const TrainConfig& config() const noexcept { return cfg_; }

 private:
  Model<float> model_;
  TrainConfig cfg_;
  AdamState adam_;
  double lr_;
  std::size_t threads_ = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  nn::NetworkParams<float> best;
  nn::NetworkParams<float> last;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<EpochRecord> log;
};

using EpochCallback = std::function<void(const EpochRecord&, const nn::NetworkParams<float>& params, bool is_best)>;

/// Mini-batch training with per-epoch reshuffling (seed + epoch), validation
/// on the inference path, and reduce-on-plateau. The final short batch is kept.
inline TrainResult train_loop(const Model<float>& initial, const ClipSource& train, const ClipSource& validation,
                              const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train.size() == 0) throw Error(ErrorKind::value, "train: empty training set");
  if (validation.size() == 0) throw Error(ErrorKind::value, "train: empty validation set");
  Trainer trainer(initial, cfg);
  PlateauScheduler scheduler(cfg.lr, cfg.plateau_factor, cfg.plateau_patience, cfg.min_lr, cfg.plateau_threshold);
  TrainResult result{initial.params, initial.params, std::numeric_limits<double>::infinity(), {}};

  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, epoch));
    shuffle_rng.shuffle(order);

    const double lr_used = trainer.lr();
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size, ++batch_index) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - first);
      std::vector<Clip> batch(count);
      parallel_for(count, trainer.threads(), [&](std::size_t i) { batch[i] = train.get(order[first + i]); });
      loss_sum += trainer.step(batch, derive_seed(cfg.seed, epoch, batch_index, 0x7472ULL)) * static_cast<double>(count);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_loss = mean_evaluation_loss(trainer.model(), validation, trainer.threads());
    if (!std::isfinite(rec.val_loss)) throw Error(ErrorKind::numeric, "non-finite validation loss");
    rec.lr = lr_used;
    trainer.set_lr(scheduler.observe(rec.val_loss));
    if (cfg.record_wall_time) {
      rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }

    const bool is_best = rec.val_loss < result.best_val_loss;
    if (is_best) {
      result.best_val_loss = rec.val_loss;
      result.best = trainer.model().params;
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec, trainer.model().params, is_best);
  }
  result.last = trainer.model().params;
  return result;
}

inline void write_epoch_log_header(std::ostream& out) { out << "epoch,train_loss,val_loss,lr,wall_seconds\n"; }

inline void write_epoch_log_row(std::ostream& out, const EpochRecord& r) {
  out << r.epoch << ',' << text::format_double(r.train_loss) << ',' << text::format_double(r.val_loss) << ','
      << text::format_double(r.lr) << ',' << text::format_double(r.wall_seconds) << '\n';
}

/// train_loop writing `epochs.csv`, `last.ckpt` and `best.ckpt` into run_dir.
/// With zero epochs both checkpoints hold the initialization.
inline TrainResult train_run(const std::filesystem::path& run_dir, const Model<float>& initial,
                             const CheckpointMeta& meta, const ClipSource& train, const ClipSource& validation,
                             const TrainConfig& cfg) {
  std::filesystem::create_directories(run_dir);
  std::ofstream log(run_dir / "epochs.csv");
  if (!log) throw Error(ErrorKind::io, "cannot write " + (run_dir / "epochs.csv").string());
  write_epoch_log_header(log);
  write_checkpoint(run_dir / "last.ckpt", meta, initial.params);
  write_checkpoint(run_dir / "best.ckpt", meta, initial.params);
  auto result = train_loop(initial, train, validation, cfg,
                           [&](const EpochRecord& rec, const nn::NetworkParams<float>& params, bool is_best) {
                             write_epoch_log_row(log, rec);
                             log.flush();
                             write_checkpoint(run_dir / "last.ckpt", meta, params);
                             if (is_best) write_checkpoint(run_dir / "best.ckpt", meta, params);
                           });
  return result;
}

}  // namespace surgecast
