#pragma once

// Dense float tensors and the inference kernels the caption and FER models are
// built from. Every kernel is a pure function; dot products accumulate in
// double and round once to float.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vicap {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_product(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  // Zero-filled tensor of the given shape.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor vector(std::vector<float> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  float operator[](std::size_t i) const { return data_[i]; }
  float& operator[](std::size_t i) { return data_[i]; }

  // Same data, new shape with the same element count.
  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

enum class Activation { none, relu, softmax };

// y = activation(x W + b) with x[n], W[n x m], b[m].
Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias, Activation activation);

Tensor relu(const Tensor& x);

// Max-subtracted softmax over a 1D tensor; normalization happens in double.
Tensor softmax(const Tensor& logits);

// Valid-padding cross-correlation: image[c x h x w], kernels[k x c x kh x kw], bias[k].
Tensor conv2d(const Tensor& image, const Tensor& kernels, const Tensor& bias, std::size_t stride);

Tensor avg_pool2d(const Tensor& image, std::size_t window, std::size_t stride);

// Flat 1D view of any tensor (row-major order is kept).
Tensor flatten(const Tensor& x);

// Concatenation of 1D tensors.
Tensor concat(const Tensor& a, const Tensor& b);

class WeightStore;

// Packed LSTM parameters. Gates are laid out along the last axis in the order
// (input, forget, cell, output):
//   kernel            [in x 4H]
//   recurrent_kernel  [H x 4H]
//   bias              [4H]
struct LstmWeights {
  Tensor kernel;
  Tensor recurrent_kernel;
  Tensor bias;

  std::size_t input_size() const { return kernel.dim(0); }
  std::size_t hidden_size() const { return recurrent_kernel.dim(0); }

  // Reads "<prefix>.kernel", "<prefix>.recurrent_kernel" and "<prefix>.bias".
  static LstmWeights from_store(const WeightStore& store, const std::string& prefix);
  // Checks the three tensors agree with each other; throws WeightStoreError.
  void validate(const std::string& prefix = "lstm") const;
};

struct LstmState {
  Tensor h;
  Tensor c;

  static LstmState zeros(std::size_t hidden);
};

// One step of a standard LSTM cell:
//   i = sig(x Wi + h Ui + bi)   f = sig(x Wf + h Uf + bf)
//   g = tanh(x Wc + h Uc + bc)  o = sig(x Wo + h Uo + bo)
//   c' = f*c + i*g              h' = o * tanh(c')
LstmState lstm_step(const Tensor& x, const LstmState& prev, const LstmWeights& params);

}  // namespace vicap
