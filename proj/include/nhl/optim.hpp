#pragma once

#include "nhl/params.hpp"

namespace nhl {

namespace detail {

template <typename T>
void check_grad_keys(const ParameterStore<T>& params, const GradientStore<T>& grads) {
  for (const auto& [name, grad] : grads) {
    auto it = params.tensors.find(name);
    if (it == params.tensors.end() || it->second.dims != grad.dims) {
      throw ValidationError("KeyMismatch", "gradient \"" + name + "\" has no matching parameter");
    }
  }
}

}  // namespace detail

// buf = momentum*buf + (grad + wd*param); param -= lr*buf.
template <typename T>
void sgd_step(ParameterStore<T>& params, const GradientStore<T>& grads, T lr, T momentum = T(0),
              T weight_decay = T(0)) {
  detail::check_grad_keys(params, grads);
  for (const auto& [name, grad] : grads) {
    Tensor<T>& p = params.tensors.at(name);
    if (momentum != T(0)) {
      auto [it, inserted] = params.opt_state.try_emplace("momentum." + name, Tensor<T>(p.dims));
      Tensor<T>& buf = it->second;
      for (long long i = 0; i < p.size(); ++i) {
        const T g = grad.ptr()[i] + weight_decay * p.ptr()[i];
        buf.ptr()[i] = momentum * buf.ptr()[i] + g;
        p.ptr()[i] -= lr * buf.ptr()[i];
      }
    } else {
      for (long long i = 0; i < p.size(); ++i) {
        p.ptr()[i] -= lr * (grad.ptr()[i] + weight_decay * p.ptr()[i]);
      }
    }
  }
}

template <typename T>
void adam_step(ParameterStore<T>& params, const GradientStore<T>& grads, T lr, T beta1 = T(0.9),
               T beta2 = T(0.999), T eps = T(1e-8), T weight_decay = T(0)) {
  detail::check_grad_keys(params, grads);
  params.step += 1;
  const T bc1 = T(1) - std::pow(beta1, static_cast<T>(params.step));
  const T bc2 = T(1) - std::pow(beta2, static_cast<T>(params.step));
  for (const auto& [name, grad] : grads) {
    Tensor<T>& p = params.tensors.at(name);
    Tensor<T>& m = params.opt_state.try_emplace("adam_m." + name, Tensor<T>(p.dims)).first->second;
    Tensor<T>& v = params.opt_state.try_emplace("adam_v." + name, Tensor<T>(p.dims)).first->second;
    for (long long i = 0; i < p.size(); ++i) {
      const T g = grad.ptr()[i] + weight_decay * p.ptr()[i];
      m.ptr()[i] = beta1 * m.ptr()[i] + (T(1) - beta1) * g;
      v.ptr()[i] = beta2 * v.ptr()[i] + (T(1) - beta2) * g * g;
      const T mhat = m.ptr()[i] / bc1;
      const T vhat = v.ptr()[i] / bc2;
      p.ptr()[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace nhl
