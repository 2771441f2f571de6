#include "c2f/verify/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "c2f/ops.hpp"
#include "c2f/rng.hpp"

namespace c2f::verify {
namespace {

double objective(const Var<double>& out, const Tensor<double>& projection) {
  double s = 0;
  for (std::size_t i = 0; i < projection.size(); ++i) s += out.value()[i] * projection[i];
  return s;
}

}  // namespace

GradcheckReport gradcheck(const std::string& name, const GradInputs& inputs,
                          const GraphBuilder& build, const GradcheckOptions& opts) {
  GradcheckReport report;
  report.name = name;
  Rng rng(opts.seed);

  Tensor<double> projection;
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    Var<double> out = build(tape);
    projection = Tensor<double>(out.shape());
    for (auto& v : projection.data()) v = rng.uniform(-1.0, 1.0);
    Var<double> loss = sum(mul(out, tape.constant(projection)));
    tape.backward(loss);
    for (const auto& [label, t] : inputs) {
      const Tensor<double>* g = tape.grad_of(*t);
      analytic.push_back(g ? *g : Tensor<double>(t->shape()));
    }
  }

  auto eval = [&]() {
    Tape<double> tape;
    tape.set_grad_enabled(false);
    return objective(build(tape), projection);
  };
  auto central = [&](double& slot, double h) {
    const double saved = slot;
    slot = saved + h;
    const double up = eval();
    slot = saved - h;
    const double down = eval();
    slot = saved;
    return (up - down) / (2 * h);
  };

  // Rounding noise of a difference quotient with step h is about
  // eps * |objective| / h; slopes that differ by less are treated as equal.
  const double magnitude = std::fabs(eval()) + 1.0;

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor<double>& t = *inputs[k].second;
    std::vector<std::size_t> idx(t.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(idx);
    if (static_cast<int>(idx.size()) > opts.max_elements) idx.resize(opts.max_elements);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) {
      const double a = analytic[k][i];
      double h = opts.step;
      double numeric = central(t[i], h);
      bool settled = false;
      for (int attempt = 0; attempt < 3; ++attempt) {
        const double finer = central(t[i], h / 10);
        const double scale = std::max({std::fabs(numeric), std::fabs(finer), opts.min_grad});
        const double noise = 1e-14 * magnitude / (h / 10);
        if (std::fabs(numeric - finer) <= 0.1 * opts.tolerance * scale + noise) {
          settled = true;
          break;
        }
        h /= 10;
        numeric = finer;
      }
      auto record = [&](double err) {
        ++report.checked;
        if (err > report.max_rel_error) {
          report.max_rel_error = err;
          report.worst = inputs[k].first + "[" + std::to_string(i) + "] analytic " +
                         std::to_string(a) + " numeric " + std::to_string(numeric);
        }
      };
      if (std::fabs(a) <= opts.min_grad) {
        // Only a clearly non-zero numeric slope counts against a vanished gradient.
        if (settled && std::fabs(numeric) > 100 * opts.min_grad) record(1.0);
        continue;
      }
      if (!settled) {
        ++report.nondifferentiable;
        continue;
      }
      record(std::fabs(a - numeric) / std::max(std::fabs(a), std::fabs(numeric)));
    }
  }
  return report;
}

}  // namespace c2f::verify
