#include "vicap/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "vicap/errors.hpp"
#include "vicap/model_io.hpp"

namespace vicap {

std::string shape_to_string(const Shape& shape) {
  return fmt::format("[{}]", fmt::join(shape, "x"));
}

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_product(shape_), 0.0f) {}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw DimensionError(fmt::format("shape {} needs {} values, got {}", shape_to_string(shape_),
                                     shape_product(shape_), data_.size()));
  }
}

Tensor Tensor::vector(std::vector<float> data) {
  Shape shape{data.size()};
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_product(shape) != data_.size()) {
    throw DimensionError(
        fmt::format("cannot reshape {} to {}", shape_to_string(shape_), shape_to_string(shape)));
  }
  return Tensor(std::move(shape), data_);
}

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(
        fmt::format("{} must be {}D, got shape {}", what, rank, shape_to_string(t.shape())));
  }
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// z[j] = b[j] + sum_i x[i] * W[i][j], accumulated in double.
std::vector<double> affine(std::span<const float> x, std::span<const float> weights,
                           std::span<const float> bias, std::size_t m) {
  std::vector<double> z(m);
  for (std::size_t j = 0; j < m; ++j) z[j] = bias[j];
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const float* row = weights.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) z[j] += xi * static_cast<double>(row[j]);
  }
  return z;
}

Tensor softmax_double(const std::vector<double>& z) {
  std::vector<float> out(z.size());
  if (z.empty()) return Tensor::vector(std::move(out));
  const double peak = *std::max_element(z.begin(), z.end());
  std::vector<double> e(z.size());
  double total = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    e[j] = std::exp(z[j] - peak);
    total += e[j];
  }
  for (std::size_t j = 0; j < z.size(); ++j) out[j] = static_cast<float>(e[j] / total);
  return Tensor::vector(std::move(out));
}

}  // namespace

Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias, Activation activation) {
  require_rank(x, 1, "dense input");
  require_rank(weights, 2, "dense weights");
  require_rank(bias, 1, "dense bias");
  const std::size_t n = weights.dim(0);
  const std::size_t m = weights.dim(1);
  if (x.size() != n || bias.size() != m) {
    throw DimensionError(fmt::format("dense: input {} and bias {} do not match weights {}",
                                     shape_to_string(x.shape()), shape_to_string(bias.shape()),
                                     shape_to_string(weights.shape())));
  }
  std::vector<double> z = affine(x.data(), weights.data(), bias.data(), m);
  switch (activation) {
    case Activation::softmax:
      return softmax_double(z);
    case Activation::relu:
      for (double& v : z) v = std::max(v, 0.0);
      break;
    case Activation::none:
      break;
  }
  std::vector<float> out(z.begin(), z.end());
  return Tensor::vector(std::move(out));
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (float& v : y.data()) v = std::max(v, 0.0f);
  return y;
}

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 1, "softmax input");
  return softmax_double(std::vector<double>(logits.data().begin(), logits.data().end()));
}

Tensor conv2d(const Tensor& image, const Tensor& kernels, const Tensor& bias, std::size_t stride) {
  require_rank(image, 3, "conv2d image");
  require_rank(kernels, 4, "conv2d kernels");
  require_rank(bias, 1, "conv2d bias");
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const std::size_t k = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  if (kernels.dim(1) != c || bias.size() != k) {
    throw DimensionError(fmt::format("conv2d: kernels {} and bias {} do not match image {}",
                                     shape_to_string(kernels.shape()), shape_to_string(bias.shape()),
                                     shape_to_string(image.shape())));
  }
  if (kh > h || kw > w || kh == 0 || kw == 0) {
    throw DimensionError(fmt::format("conv2d: kernel {} larger than image {}",
                                     shape_to_string(kernels.shape()), shape_to_string(image.shape())));
  }
  const std::size_t oh = (h - kh) / stride + 1;
  const std::size_t ow = (w - kw) / stride + 1;
  Tensor out({k, oh, ow});
  const float* in = image.data().data();
  const float* ker = kernels.data().data();
  float* dst = out.data().data();
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = bias[f];
        for (std::size_t ch = 0; ch < c; ++ch) {
          const float* plane = in + ch * h * w;
          const float* kplane = ker + (f * c + ch) * kh * kw;
          for (std::size_t dy = 0; dy < kh; ++dy) {
            const float* row = plane + (oy * stride + dy) * w + ox * stride;
            const float* krow = kplane + dy * kw;
            for (std::size_t dx = 0; dx < kw; ++dx) {
              acc += static_cast<double>(row[dx]) * static_cast<double>(krow[dx]);
            }
          }
        }
        dst[(f * oh + oy) * ow + ox] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Tensor avg_pool2d(const Tensor& image, std::size_t window, std::size_t stride) {
  require_rank(image, 3, "avg_pool2d image");
  if (window == 0 || stride == 0) throw ContractError("avg_pool2d: window and stride must be positive");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (window > h || window > w) {
    throw DimensionError(
        fmt::format("avg_pool2d: window {} larger than image {}", window, shape_to_string(image.shape())));
  }
  const std::size_t oh = (h - window) / stride + 1;
  const std::size_t ow = (w - window) / stride + 1;
  const double area = static_cast<double>(window * window);
  Tensor out({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* plane = image.data().data() + ch * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (std::size_t dy = 0; dy < window; ++dy) {
          const float* row = plane + (oy * stride + dy) * w + ox * stride;
          for (std::size_t dx = 0; dx < window; ++dx) acc += row[dx];
        }
        out[(ch * oh + oy) * ow + ox] = static_cast<float>(acc / area);
      }
    }
  }
  return out;
}

Tensor flatten(const Tensor& x) { return x.reshaped({x.size()}); }

Tensor concat(const Tensor& a, const Tensor& b) {
  require_rank(a, 1, "concat operand");
  require_rank(b, 1, "concat operand");
  std::vector<float> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  return Tensor::vector(std::move(out));
}

LstmWeights LstmWeights::from_store(const WeightStore& store, const std::string& prefix) {
  LstmWeights w{store.get(prefix + ".kernel"), store.get(prefix + ".recurrent_kernel"),
                store.get(prefix + ".bias")};
  w.validate(prefix);
  return w;
}

void LstmWeights::validate(const std::string& prefix) const {
  if (recurrent_kernel.rank() != 2 || recurrent_kernel.dim(1) != 4 * recurrent_kernel.dim(0)) {
    throw WeightStoreError(prefix + ".recurrent_kernel",
                           fmt::format("{}.recurrent_kernel must be [H x 4H], got {}", prefix,
                                       shape_to_string(recurrent_kernel.shape())));
  }
  const std::size_t gates = recurrent_kernel.dim(1);
  if (kernel.rank() != 2 || kernel.dim(1) != gates) {
    throw WeightStoreError(prefix + ".kernel", fmt::format("{}.kernel must be [in x {}], got {}", prefix,
                                                           gates, shape_to_string(kernel.shape())));
  }
  if (bias.rank() != 1 || bias.size() != gates) {
    throw WeightStoreError(prefix + ".bias", fmt::format("{}.bias must be [{}], got {}", prefix, gates,
                                                         shape_to_string(bias.shape())));
  }
}

LstmState LstmState::zeros(std::size_t hidden) { return {Tensor({hidden}), Tensor({hidden})}; }

LstmState lstm_step(const Tensor& x, const LstmState& prev, const LstmWeights& params) {
  const std::size_t hidden = params.hidden_size();
  if (x.rank() != 1 || x.size() != params.input_size()) {
    throw DimensionError(fmt::format("lstm_step: input {} does not match kernel {}",
                                     shape_to_string(x.shape()), shape_to_string(params.kernel.shape())));
  }
  if (prev.h.size() != hidden || prev.c.size() != hidden) {
    throw DimensionError(fmt::format("lstm_step: state {} / {} does not match hidden size {}",
                                     shape_to_string(prev.h.shape()), shape_to_string(prev.c.shape()),
                                     hidden));
  }
  const std::size_t gates = 4 * hidden;
  std::vector<double> z = affine(x.data(), params.kernel.data(), params.bias.data(), gates);
  for (std::size_t i = 0; i < hidden; ++i) {
    const double hi = prev.h[i];
    if (hi == 0.0) continue;
    const float* row = params.recurrent_kernel.data().data() + i * gates;
    for (std::size_t j = 0; j < gates; ++j) z[j] += hi * static_cast<double>(row[j]);
  }

  LstmState next{Tensor({hidden}), Tensor({hidden})};
  for (std::size_t j = 0; j < hidden; ++j) {
    const double in_gate = sigmoid(z[j]);
    const double forget_gate = sigmoid(z[hidden + j]);
    const double candidate = std::tanh(z[2 * hidden + j]);
    const double out_gate = sigmoid(z[3 * hidden + j]);
    const double cell = forget_gate * static_cast<double>(prev.c[j]) + in_gate * candidate;
    next.c[j] = static_cast<float>(cell);
    next.h[j] = static_cast<float>(out_gate * std::tanh(cell));
  }
  return next;
}

}  // namespace vicap
