#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "c2f/config.hpp"
#include "c2f/data.hpp"
#include "c2f/metrics.hpp"
#include "c2f/network.hpp"

namespace c2f {

/// Bias-corrected adaptive-moment optimizer over the trainable entries of a
/// parameter list.
template <typename T>
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit Adam(const ParamList<T>& params);

  /// grads[i] belongs to trainable()[i]; nullptr means a zero gradient.
  /// Throws NumericError naming the first parameter with a non-finite
  /// gradient, before anything is modified.
  void step(const std::vector<const Tensor<T>*>& grads, double lr);

  const ParamList<T>& trainable() const noexcept { return params_; }
  std::int64_t steps() const noexcept { return t_; }
  const Tensor<T>& first_moment(std::size_t i) const { return m_.at(i); }
  const Tensor<T>& second_moment(std::size_t i) const { return v_.at(i); }

 private:
  ParamList<T> params_;
  std::vector<Tensor<T>> m_, v_;
  std::int64_t t_ = 0;
};

/// Step decay: `lr` before `decay_epoch` (0-based), `lr * factor` after.
struct Schedule {
  double lr = 1e-4;
  int decay_epoch = 30;
  double factor = 0.1;

  double lr_at(int epoch) const noexcept { return epoch < decay_epoch ? lr : lr * factor; }
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean total loss per epoch
  std::int64_t steps = 0;
  std::filesystem::path checkpoint;
  std::filesystem::path loss_log;
};

struct TrainHooks {
  std::function<void(int epoch, double loss)> on_epoch;  // optional progress callback
};

/// Trains a freshly initialized network on every sample of `manifest`.
/// Writes `<out>/model.ckpt` after every epoch and `<out>/loss.log`.
TrainResult train(const DatasetManifest& manifest, const Config& config,
                  const std::filesystem::path& out, const TrainHooks& hooks = {});

/// Header and body of the loss log.
std::string loss_log_text(const Config& config, const std::vector<double>& epoch_loss);

/// Eval-mode predictions at the input resolution for every `*.ppm` in
/// `images`, written as `<stem>.pgm` to `out`. Returns the file count.
int infer_directory(NetworkParams<float>& params, const std::filesystem::path& images,
                    const std::filesystem::path& out);

/// Predicts every manifest image into `pred_dir`, then scores it against
/// the manifest masks.
MetricReport evaluate(const std::filesystem::path& checkpoint, const DatasetManifest& manifest,
                      const std::filesystem::path& pred_dir);

struct AblationRow {
  Variant variant;
  ImageScores mean;
};

/// Trains and evaluates every variant on `<data>/train` and `<data>/test`
/// with the shared config seed. Results go to `<out>/<variant>/` and
/// `<out>/ablation.csv`.
std::vector<AblationRow> ablate(const Config& config, const std::filesystem::path& data,
                                const std::filesystem::path& out, const TrainHooks& hooks = {});

/// `variant,s_alpha,e_phi_mean,f_w,mae` with 6 decimals.
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace c2f
