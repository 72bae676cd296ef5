#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace finsent {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until the first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Propagates this node's grad into its parents' grads.
    std::function<void(Node&)> backward;
};

}  // namespace detail

/**
 * Reference-counted handle to a row-major array of doubles.
 *
 * Every operation below returns a fresh tensor. When any input requires a
 * gradient, the result records its inputs and a backward closure, so the
 * computation graph is built on the fly and freed together with the last
 * handle to its output.
 */
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor filled(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t size() const;
    // Rows/cols of a rank-2 tensor; a rank-1 tensor of length n is 1×n.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> data() const;
    double operator[](std::size_t i) const { return data()[i]; }
    double at(std::size_t row, std::size_t col) const;
    double item() const;

    // Direct write access, for initialization and optimizer updates of leaf
    // parameters. Never call on a tensor that already feeds a recorded graph
    // you still intend to differentiate.
    std::span<double> mutable_data();

    bool requires_grad() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    // Allocates the gradient buffer if needed and fills it with zeros.
    void zero_grad();

    // Pointer identity; two handles to the same storage compare equal.
    bool same(const Tensor& other) const { return node_ == other.node_; }

    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

// Disables graph recording on the current thread while alive. Used for
// inference and for finite-difference probes.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Reverse pass from a scalar loss. Leaf gradients accumulate across calls;
// intermediate buffers are reset on every call.
void backward(const Tensor& loss);

// --- Differentiable operations ---------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

// x [m×n] plus / times a length-n vector applied to every row.
Tensor add_rowwise(const Tensor& x, const Tensor& v);
Tensor mul_rowwise(const Tensor& x, const Tensor& v);

Tensor softmax_rows(const Tensor& x);

inline constexpr double kLayerNormEps = 1e-5;
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

Tensor gelu(const Tensor& x);
Tensor tanh(const Tensor& x);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor row(const Tensor& x, std::size_t index);

// Rows of an embedding table selected by id.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Inverted dropout: zeroes each entry with probability p and rescales the
// survivors by 1/(1-p). Identity when p == 0.
Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng);

}  // namespace finsent
