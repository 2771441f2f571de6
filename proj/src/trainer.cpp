#include "c2f/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "c2f/error.hpp"
#include "c2f/image_io.hpp"
#include "c2f/losses.hpp"
#include "c2f/parallel.hpp"

namespace c2f {

template <typename T>
Adam<T>::Adam(const ParamList<T>& params) {
  for (const auto& p : params) {
    if (p.role != ParamRole::kTrainable) continue;
    params_.push_back(p);
    m_.emplace_back(p.tensor->shape());
    v_.emplace_back(p.tensor->shape());
  }
}

template <typename T>
void Adam<T>::step(const std::vector<const Tensor<T>*>& grads, double lr) {
  if (grads.size() != params_.size()) {
    throw ContractError("Adam::step: expected " + std::to_string(params_.size()) +
                        " gradients, got " + std::to_string(grads.size()));
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i]) continue;
    if (grads[i]->shape() != params_[i].tensor->shape()) {
      throw ShapeError("gradient of " + params_[i].name + " has shape " +
                       grads[i]->shape().str());
    }
    if (!all_finite(*grads[i])) {
      throw NumericError("non-finite gradient in parameter " + params_[i].name);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    T* p = params_[i].tensor->raw();
    T* m = m_[i].raw();
    T* v = v_[i].raw();
    const T* g = grads[i] ? grads[i]->raw() : nullptr;
    for (std::size_t k = 0; k < m_[i].size(); ++k) {
      const double gk = g ? static_cast<double>(g[k]) : 0.0;
      const double mk = kBeta1 * m[k] + (1.0 - kBeta1) * gk;
      const double vk = kBeta2 * v[k] + (1.0 - kBeta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      p[k] = static_cast<T>(p[k] - lr * (mk / c1) / (std::sqrt(vk / c2) + kEps));
    }
  }
}

template class Adam<float>;
template class Adam<double>;

namespace {

std::string format_loss(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

Tensor<float> stack(const std::vector<ImageSample>& samples, bool masks) {
  std::vector<Tensor<float>> parts;
  parts.reserve(samples.size());
  for (const auto& s : samples) parts.push_back(masks ? s.mask : s.rgb);
  return stack_batch<float>(parts);
}

}  // namespace

std::string loss_log_text(const Config& config, const std::vector<double>& epoch_loss) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config.hash()));
  std::string out = std::string("# config_hash ") + hash + "\n";
  out += "# optimizer adam beta1=0.9 beta2=0.999 eps=1e-8 (substituted for AdaX)\n";
  const std::string& echo = config.source.empty() ? config.canonical_text() : config.source;
  std::size_t pos = 0;
  while (pos < echo.size()) {
    const auto nl = echo.find('\n', pos);
    const auto end = nl == std::string::npos ? echo.size() : nl;
    out += "# config " + echo.substr(pos, end - pos) + "\n";
    pos = end + 1;
  }
  for (std::size_t e = 0; e < epoch_loss.size(); ++e) {
    out += "epoch " + std::to_string(e) + " loss " + format_loss(epoch_loss[e]) + "\n";
  }
  return out;
}

TrainResult train(const DatasetManifest& manifest, const Config& config,
                  const std::filesystem::path& out, const TrainHooks& hooks) {
  config.validate();
  std::vector<ImageSample> samples = load_samples(manifest);
  if (samples.size() < 2) throw DataError("training needs at least 2 samples");
  for (auto& s : samples) s = resize_sample_to(s, config.image_size, config.image_size);

  Rng init_rng(derive_seed(config.seed, 0));
  NetworkParams<float> params(config.network, init_rng);
  Adam<float> adam(params.params());
  Rng rng(derive_seed(config.seed, 1));
  const Schedule schedule{config.lr, config.decay_epoch, 0.1};

  std::filesystem::create_directories(out);
  TrainResult result;
  result.checkpoint = out / "model.ckpt";
  result.loss_log = out / "loss.log";

  std::vector<int> order(samples.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const double lr = schedule.lr_at(epoch);
    double loss_sum = 0;
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      if (end - begin < 2) break;  // batch statistics need two samples
      const double scale =
          config.scales[rng.uniform_int(0, static_cast<int>(config.scales.size()) - 1)];
      const int size = round_to_stride(scale * config.image_size);
      std::vector<ImageSample> batch;
      for (std::size_t i = begin; i < end; ++i) {
        batch.push_back(resize_sample_to(samples[order[i]], size, size));
      }

      params.set_mode(Mode::kTrain);
      Tape<float> tape;
      Var<float> logits = forward(tape.constant(stack(batch, false)), params);
      LossTerms<float> loss = total_loss(logits, stack(batch, true), config.loss);
      const double value = loss.total.value()[0];
      if (!std::isfinite(value)) {
        throw NumericError("loss is not finite at epoch " + std::to_string(epoch) + " step " +
                           std::to_string(adam.steps()));
      }
      tape.backward(loss.total);
      std::vector<const Tensor<float>*> grads;
      for (const auto& p : adam.trainable()) grads.push_back(tape.grad_of(*p.tensor));
      adam.step(grads, lr);
      loss_sum += value;
      ++batches;
    }
    if (batches == 0) throw DataError("no batch of at least 2 samples could be formed");
    result.epoch_loss.push_back(loss_sum / batches);
    save_checkpoint(params, result.checkpoint);
    write_binary_file(result.loss_log, loss_log_text(config, result.epoch_loss));
    if (hooks.on_epoch) hooks.on_epoch(epoch, result.epoch_loss.back());
  }
  result.steps = adam.steps();
  return result;
}

int infer_directory(NetworkParams<float>& params, const std::filesystem::path& images,
                    const std::filesystem::path& out) {
  if (!std::filesystem::is_directory(images)) {
    throw DataError("not a directory: " + images.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(images)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::filesystem::create_directories(out);
  for (const auto& f : files) {
    const Tensor<float> rgb = read_image(f);
    if (rgb.c() != 3) throw DataError(f.string() + " is not an RGB image");
    const int h = rgb.h(), w = rgb.w();
    Tensor<float> input({1, 3, round_to_stride(h), round_to_stride(w)});
    if (input.shape() == rgb.shape()) {
      input = rgb;
    } else {
      kernels::resize_bilinear(rgb, input);
    }
    const Tensor<float> prob = infer_probabilities(params, input, h, w);
    write_image(out / (f.stem().string() + ".pgm"), prob);
  }
  return static_cast<int>(files.size());
}

MetricReport evaluate(const std::filesystem::path& checkpoint, const DatasetManifest& manifest,
                      const std::filesystem::path& pred_dir) {
  NetworkParams<float> params = load_checkpoint(checkpoint);
  std::filesystem::create_directories(pred_dir);
  for (const auto& id : manifest.ids) {
    const ImageSample s = load_sample(manifest, id);
    const ImageSample in =
        resize_sample_to(s, round_to_stride(s.rgb.h()), round_to_stride(s.rgb.w()));
    const Tensor<float> prob = infer_probabilities(params, in.rgb, s.mask.h(), s.mask.w());
    write_image(pred_dir / (id + ".pgm"), prob);
  }
  return evaluate_set(pred_dir, manifest.root / "masks");
}

std::vector<AblationRow> ablate(const Config& config, const std::filesystem::path& data,
                                const std::filesystem::path& out, const TrainHooks& hooks) {
  const DatasetManifest train_set = load_manifest(data / "train");
  const DatasetManifest test_set = load_manifest(data / "test");
  std::vector<AblationRow> rows;
  for (Variant v : kAllVariants) {
    Config cfg = config;
    cfg.network.variant = v;
    const auto dir = out / std::string(variant_name(v));
    const TrainResult r = train(train_set, cfg, dir, hooks);
    const MetricReport report = evaluate(r.checkpoint, test_set, dir / "pred");
    rows.push_back({v, report.mean});
  }
  write_binary_file(out / "ablation.csv", ablation_csv(rows));
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,s_alpha,e_phi_mean,f_w,mae\n";
  for (const auto& r : rows) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f\n",
                  std::string(variant_name(r.variant)).c_str(), r.mean.s_alpha,
                  r.mean.e_phi_mean, r.mean.f_w, r.mean.mae);
    out += buf;
  }
  return out;
}

}  // namespace c2f
