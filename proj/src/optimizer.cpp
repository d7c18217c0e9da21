#include "motionbeat/optimizer.hpp"

#include <cmath>

#include "motionbeat/errors.hpp"

namespace motionbeat {

void AdamWSettings::validate() const {
  if (!(learning_rate > 0.0)) throw DomainError("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw DomainError("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw DomainError("betas must lie in [0, 1)");
  if (!(epsilon >= 0.0)) throw DomainError("epsilon must be >= 0");
}

void adamw_step(std::vector<NamedTensor>& params, std::span<const Matrix> grads, AdamWState& state,
                const AdamWSettings& settings) {
  if (grads.size() != params.size()) throw ShapeError("adamw: one gradient per parameter tensor");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params[i].value.rows() || grads[i].cols() != params[i].value.cols()) {
      throw ShapeError("adamw: gradient shape mismatch for '" + params[i].name + "'");
    }
    if (params[i].trainable && !grads[i].allFinite()) {
      throw NumericError("non-finite gradient in parameter '" + params[i].name + "'");
    }
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      state.second_moment.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(settings.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(settings.beta2, static_cast<double>(state.step));
  const double lr = settings.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    Matrix& p = params[i].value;
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    const Matrix& g = grads[i];
    m = settings.beta1 * m + (1.0 - settings.beta1) * g;
    v = settings.beta2 * v + (1.0 - settings.beta2) * g.cwiseProduct(g);
    p *= 1.0 - lr * settings.weight_decay;
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + settings.epsilon);
  }
}

}  // namespace motionbeat
