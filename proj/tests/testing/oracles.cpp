/*
 * Copyright 2026 The Varprop Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "testing/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "varprop/errors.hpp"

namespace varprop::testing {

double taylor_erf(double x) {
  // erf(x) = 2/sqrt(pi) * sum_n (-1)^n x^(2n+1) / (n! (2n+1))
  const double kTwoOverSqrtPi = 1.1283791670955125739;
  double term = x;  // n = 0 term before the 1/(2n+1) factor
  double sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= -x * x / n;
    const double contribution = term / (2 * n + 1);
    sum += contribution;
    if (std::abs(contribution) < 1e-18 * std::abs(sum)) break;
  }
  return kTwoOverSqrtPi * sum;
}

namespace {

double normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * 2.5066282746310005024);
}

template <typename Fn>
double simpson(Fn&& f, double a, double b) {
  return (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
}

template <typename Fn>
double adaptive_simpson(Fn&& f, double a, double b, double whole, double tol,
                        int depth) {
  const double m = 0.5 * (a + b);
  const double left = simpson(f, a, m);
  const double right = simpson(f, m, b);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(f, a, m, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, right, 0.5 * tol, depth - 1);
}

template <typename Fn>
double integrate(Fn&& f, double a, double b) {
  if (!(b > a)) return 0.0;
  return adaptive_simpson(f, a, b, simpson(f, a, b), 1e-13, 48);
}

}  // namespace

QuadratureMoments relu_moments_quadrature(double mu, double sigma) {
  QuadratureMoments out;
  if (sigma <= 0.0) {
    out.mean = mu > 0.0 ? mu : 0.0;
    out.var = 0.0;
    return out;
  }
  // Standardized variable t = (x - mu) / sigma keeps the integrand an O(1)
  // bump the adaptive subdivision cannot step over, which an x-space
  // integral does when sigma << |mu|.
  const double lo = std::max(-mu / sigma, -12.0);
  if (lo >= 12.0) return out;  // all mass below zero
  const auto first = [&](double t) {
    return (mu + sigma * t) * normal_pdf(t, 0.0, 1.0);
  };
  const auto second = [&](double t) {
    const double x = mu + sigma * t;
    return x * x * normal_pdf(t, 0.0, 1.0);
  };
  out.mean = integrate(first, lo, 12.0);
  const double e2 = integrate(second, lo, 12.0);
  out.var = e2 - out.mean * out.mean;
  if (out.var < 0.0) out.var = 0.0;
  return out;
}

Tensor cholesky_lower(const Tensor& a) {
  const std::size_t n = a.extent(0);
  Tensor l({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0) {
          throw std::runtime_error("cholesky_lower: matrix not positive "
                                   "definite");
        }
        l(i, j) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

Tensor gaussian_draw(const Tensor& mean, const Tensor& chol, RngStream& rng) {
  const std::size_t n = mean.size();
  Tensor z({n});
  for (std::size_t i = 0; i < n; ++i) z[i] = rng.gaussian();
  Tensor x({n});
  for (std::size_t i = 0; i < n; ++i) {
    double acc = mean[i];
    for (std::size_t j = 0; j <= i; ++j) acc += chol(i, j) * z[j];
    x[i] = acc;
  }
  return x;
}

namespace {

MomentState zero_off_diagonals(MomentState state) {
  const std::size_t n = state.mean.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) state.cov(i, j) = 0.0;
    }
  }
  return state;
}

}  // namespace

MomentState zeroed_full_propagation(const NetworkSpec& net,
                                    const Tensor& input, ReluRule relu_rule) {
  const std::vector<std::vector<std::size_t>> shapes = infer_shapes(net);
  const int start = first_dropout_index(net);
  if (start < 0) {
    throw std::runtime_error("zeroed_full_propagation: no dropout layer");
  }

  Tensor x = input;
  for (int i = 0; i < start; ++i) x = apply_layer(net.layers[i], x);

  const auto& first = std::get<DropoutLayer>(net.layers[start]);
  MomentState state = as_full(
      init_noise_moments(x, dropout_noise(first, x.size())));
  state = zero_off_diagonals(std::move(state));

  for (std::size_t i = static_cast<std::size_t>(start) + 1;
       i < net.layers.size(); ++i) {
    const LayerSpec& layer = net.layers[i];
    if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      state = propagate_affine_full(state, dense->weights, dense->bias);
    } else if (const auto* conv = std::get_if<Conv2dLayer>(&layer)) {
      const Tensor w = conv_as_matrix(*conv, shapes[i]);
      state = propagate_affine_full(state, w, Tensor({w.extent(0)}));
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      if (relu_rule == ReluRule::kExactGaussian) {
        // Exact rule exists only element-wise; apply it on the zeroed
        // diagonal directly, matching diagonal mode by construction.
        const std::size_t n = state.mean.size();
        Tensor mean = state.mean;
        Tensor cov = state.cov;
        for (std::size_t k = 0; k < n; ++k) {
          const ReluMoments m =
              relu_gaussian_moments(state.mean[k], state.cov(k, k));
          mean[k] = m.mean;
          cov(k, k) = m.var;
        }
        state.mean = std::move(mean);
        state.cov = std::move(cov);
      } else {
        state = propagate_activation_full(state, ActivationKind::kRelu);
      }
    } else if (std::holds_alternative<SigmoidLayer>(layer)) {
      state = propagate_activation_full(state, ActivationKind::kSigmoid);
    } else if (std::holds_alternative<SoftmaxLayer>(layer)) {
      throw std::runtime_error("zeroed_full_propagation: softmax has no "
                               "diagonal counterpart");
    } else if (const auto* drop = std::get_if<DropoutLayer>(&layer)) {
      state = propagate_noise_multiplicative_full(
          state, dropout_noise(*drop, state.mean.size()));
    }
    state = zero_off_diagonals(std::move(state));
    state.mean = state.mean.reshaped(shapes[i + 1]);
  }
  return state;
}

Tensor matmul_reference(const Tensor& a, const Tensor& b) {
  const std::size_t rows = a.extent(0);
  const std::size_t inner = a.extent(1);
  const std::size_t cols = b.extent(1);
  Tensor out({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < inner; ++p) acc += a(i, p) * b(p, j);
      out(i, j) = acc;
    }
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::runtime_error("max_abs_diff: shape mismatch");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

double frobenius_rel_error(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::runtime_error("frobenius_rel_error: shape mismatch");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

Tensor random_tensor(const std::vector<std::size_t>& shape, RngStream& rng,
                     double lo, double hi) {
  Tensor out(shape);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = lo + (hi - lo) * rng.uniform();
  }
  return out;
}

Tensor random_spd(std::size_t n, RngStream& rng, double eps) {
  const Tensor a = random_tensor({n, n}, rng);
  Tensor spd({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = i == j ? eps : 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += a(i, k) * a(j, k);
      spd(i, j) = acc;
    }
  }
  return spd;
}

NetworkSpec random_dense_net(RngStream& rng, std::size_t max_layers,
                             std::size_t max_units) {
  const auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.uniform() *
                                         static_cast<double>(hi - lo + 1));
  };
  NetworkSpec net;
  std::size_t width = pick(1, max_units);
  net.input_shape = {width};

  const std::size_t compute_layers = pick(1, max_layers);
  const std::size_t dropout_at = pick(0, compute_layers - 1);
  for (std::size_t i = 0; i < compute_layers; ++i) {
    if (i == dropout_at || rng.uniform() < 0.25) {
      DropoutLayer drop;
      drop.rate = 0.05 + 0.6 * rng.uniform();
      drop.convention = rng.uniform() < 0.5 ? DropoutConvention::kStandard
                                            : DropoutConvention::kInverted;
      net.layers.emplace_back(drop);
    }
    const std::size_t next = pick(1, max_units);
    DenseLayer dense;
    dense.weights = random_tensor({next, width}, rng);
    dense.bias = random_tensor({next}, rng, -0.5, 0.5);
    net.layers.emplace_back(std::move(dense));
    width = next;
    const double act = rng.uniform();
    if (act < 0.45) {
      net.layers.emplace_back(ReluLayer{});
    } else if (act < 0.7) {
      net.layers.emplace_back(SigmoidLayer{});
    }
  }
  return net;
}

NetworkSpec random_conv_net(RngStream& rng, std::size_t max_hw) {
  const auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.uniform() *
                                         static_cast<double>(hi - lo + 1));
  };
  NetworkSpec net;
  std::size_t h = pick(3, max_hw);
  std::size_t w = pick(3, max_hw);
  std::size_t c = pick(1, 2);
  net.input_shape = {h, w, c};

  net.layers.emplace_back(DropoutLayer{0.1 + 0.4 * rng.uniform(),
                                       DropoutConvention::kStandard});
  const std::size_t stages = pick(1, 2);
  for (std::size_t s = 0; s < stages; ++s) {
    Conv2dLayer conv;
    const std::size_t k = pick(1, std::min<std::size_t>(3, std::min(h, w)));
    const std::size_t co = pick(1, 2);
    conv.kernel = random_tensor({k, k, c, co}, rng);
    conv.padding = rng.uniform() < 0.5 ? Padding::kSame : Padding::kValid;
    if (conv.padding == Padding::kValid) {
      h = h - k + 1;
      w = w - k + 1;
    }
    c = co;
    net.layers.emplace_back(std::move(conv));
    if (rng.uniform() < 0.6) net.layers.emplace_back(ReluLayer{});
    if (rng.uniform() < 0.4) {
      net.layers.emplace_back(DropoutLayer{0.1 + 0.3 * rng.uniform(),
                                           DropoutConvention::kInverted});
    }
  }
  return net;
}

}  // namespace varprop::testing
