#include "finsent/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "finsent/errors.hpp"

namespace finsent {

using detail::Node;

namespace {

thread_local bool g_grad_enabled = true;

std::vector<double>& grad_of(Node& node) {
    if (node.grad.empty()) node.grad.assign(node.data.size(), 0.0);
    return node.grad;
}

// Builds the output node. The graph edge is kept only when recording is on
// and some input wants a gradient.
Tensor make_result(Shape shape, std::vector<double> data,
                   std::initializer_list<const Tensor*> inputs,
                   std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    if (g_grad_enabled) {
        for (const Tensor* in : inputs) {
            if (in->requires_grad()) {
                node->requires_grad = true;
                break;
            }
        }
    }
    if (node->requires_grad) {
        for (const Tensor* in : inputs) node->parents.push_back(in->node());
        node->backward = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

Tensor make_result(Shape shape, std::vector<double> data, std::span<const Tensor> inputs,
                   std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    if (g_grad_enabled) {
        node->requires_grad =
            std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    }
    if (node->requires_grad) {
        for (const Tensor& in : inputs) node->parents.push_back(in.node());
        node->backward = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

void require_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw ShapeError(std::string(op) + ": undefined tensor");
}

void require_rank2(const Tensor& t, const char* op) {
    require_defined(t, op);
    if (t.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require_defined(a, op);
    require_defined(b, op);
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    }
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

// --- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return filled(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_size(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
    }
    if (shape_size(shape) != values.size()) {
        throw ShapeError("tensor " + shape_string(shape) + " needs " + std::to_string(shape_size(shape)) +
                         " values, got " + std::to_string(values.size()));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->data.size(); }

std::size_t Tensor::rows() const { return rank() == 1 ? 1 : shape()[0]; }
std::size_t Tensor::cols() const { return rank() == 1 ? shape()[0] : shape()[1]; }

std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }

double Tensor::at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on a tensor of shape " + shape_string(shape()));
    return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

// --- Reverse pass ----------------------------------------------------------

void backward(const Tensor& loss) {
    require_defined(loss, "backward");
    if (loss.size() != 1) {
        throw ShapeError("backward: loss must be a scalar, got " + shape_string(loss.shape()));
    }
    if (!loss.requires_grad()) throw Error("backward: loss is not connected to any tensor requiring grad");

    // Iterative post-order DFS; graphs for deep stacks overflow recursion.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* node : order) {
        if (node->backward) node->grad.assign(node->data.size(), 0.0);
    }
    grad_of(*loss.node())[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward) (*it)->backward(**it);
    }
}

// --- Linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
    }
    std::vector<double> out(m * n, 0.0);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            const double* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    Node* na = a.node().get();
    Node* nb = b.node().get();
    return make_result({m, n}, std::move(out), {&a, &b}, [na, nb, m, k, n](Node& self) {
        const double* g = self.grad.data();
        if (na->requires_grad) {
            auto& ga = grad_of(*na);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * nb->data[p * n + j];
                    ga[i * k + p] += acc;
                }
        }
        if (nb->requires_grad) {
            auto& gb = grad_of(*nb);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = na->data[i * k + p];
                    for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
                }
        }
    });
}

Tensor transpose(const Tensor& x) {
    require_rank2(x, "transpose");
    const std::size_t m = x.rows(), n = x.cols();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x.data()[i * n + j];
    Node* nx = x.node().get();
    return make_result({n, m}, std::move(out), {&x}, [nx, m, n](Node& self) {
        auto& gx = grad_of(*nx);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += self.grad[j * m + i];
    });
}

// --- Elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    Node* na = a.node().get();
    Node* nb = b.node().get();
    return make_result(a.shape(), std::move(out), {&a, &b}, [na, nb](Node& self) {
        for (Node* n : {na, nb}) {
            if (!n->requires_grad) continue;
            auto& g = grad_of(*n);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    Node* na = a.node().get();
    Node* nb = b.node().get();
    return make_result(a.shape(), std::move(out), {&a, &b}, [na, nb](Node& self) {
        if (na->requires_grad) {
            auto& g = grad_of(*na);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (nb->requires_grad) {
            auto& g = grad_of(*nb);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    Node* na = a.node().get();
    Node* nb = b.node().get();
    return make_result(a.shape(), std::move(out), {&a, &b}, [na, nb](Node& self) {
        if (na->requires_grad) {
            auto& g = grad_of(*na);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * nb->data[i];
        }
        if (nb->requires_grad) {
            auto& g = grad_of(*nb);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * na->data[i];
        }
    });
}

Tensor scale(const Tensor& x, double factor) {
    require_defined(x, "scale");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
    Node* nx = x.node().get();
    return make_result(x.shape(), std::move(out), {&x}, [nx, factor](Node& self) {
        auto& g = grad_of(*nx);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

Tensor add_rowwise(const Tensor& x, const Tensor& v) {
    require_rank2(x, "add_rowwise");
    require_defined(v, "add_rowwise");
    const std::size_t m = x.rows(), n = x.cols();
    if (v.size() != n) {
        throw ShapeError("add_rowwise: vector " + shape_string(v.shape()) + " does not match rows of " +
                         shape_string(x.shape()));
    }
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x.data()[i * n + j] + v[j];
    Node* nx = x.node().get();
    Node* nv = v.node().get();
    return make_result(x.shape(), std::move(out), {&x, &v}, [nx, nv, m, n](Node& self) {
        if (nx->requires_grad) {
            auto& g = grad_of(*nx);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (nv->requires_grad) {
            auto& g = grad_of(*nv);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
        }
    });
}

Tensor mul_rowwise(const Tensor& x, const Tensor& v) {
    require_rank2(x, "mul_rowwise");
    require_defined(v, "mul_rowwise");
    const std::size_t m = x.rows(), n = x.cols();
    if (v.size() != n) {
        throw ShapeError("mul_rowwise: vector " + shape_string(v.shape()) + " does not match rows of " +
                         shape_string(x.shape()));
    }
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x.data()[i * n + j] * v[j];
    Node* nx = x.node().get();
    Node* nv = v.node().get();
    return make_result(x.shape(), std::move(out), {&x, &v}, [nx, nv, m, n](Node& self) {
        if (nx->requires_grad) {
            auto& g = grad_of(*nx);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * nv->data[j];
        }
        if (nv->requires_grad) {
            auto& g = grad_of(*nv);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j] * nx->data[i * n + j];
        }
    });
}

// --- Normalizers and activations -------------------------------------------

Tensor softmax_rows(const Tensor& x) {
    require_rank2(x, "softmax_rows");
    const std::size_t m = x.rows(), n = x.cols();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        const double* in = x.data().data() + i * n;
        double* o = out.data() + i * n;
        const double mx = *std::max_element(in, in + n);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            o[j] = std::exp(in[j] - mx);
            total += o[j];
        }
        for (std::size_t j = 0; j < n; ++j) o[j] /= total;
    }
    Node* nx = x.node().get();
    return make_result(x.shape(), std::move(out), {&x}, [nx, m, n](Node& self) {
        auto& g = grad_of(*nx);
        for (std::size_t i = 0; i < m; ++i) {
            const double* y = self.data.data() + i * n;
            const double* dy = self.grad.data() + i * n;
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (dy[j] - dot);
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    require_rank2(x, "layer_norm");
    require_defined(gain, "layer_norm");
    require_defined(bias, "layer_norm");
    const std::size_t m = x.rows(), d = x.cols();
    if (d < 2) throw ShapeError("layer_norm: needs at least 2 columns, got " + shape_string(x.shape()));
    if (gain.size() != d || bias.size() != d) {
        throw ShapeError("layer_norm: gain " + shape_string(gain.shape()) + " / bias " +
                         shape_string(bias.shape()) + " do not match width " + std::to_string(d));
    }
    std::vector<double> out(m * d), xhat(m * d), rstd(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* in = x.data().data() + i * d;
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += in[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
        var /= static_cast<double>(d);
        rstd[i] = 1.0 / std::sqrt(var + kLayerNormEps);
        for (std::size_t j = 0; j < d; ++j) {
            xhat[i * d + j] = (in[j] - mu) * rstd[i];
            out[i * d + j] = gain[j] * xhat[i * d + j] + bias[j];
        }
    }
    Node* nx = x.node().get();
    Node* ng = gain.node().get();
    Node* nb = bias.node().get();
    return make_result(
        x.shape(), std::move(out), {&x, &gain, &bias},
        [nx, ng, nb, m, d, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
            const double* dy = self.grad.data();
            if (ng->requires_grad) {
                auto& g = grad_of(*ng);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < d; ++j) g[j] += dy[i * d + j] * xhat[i * d + j];
            }
            if (nb->requires_grad) {
                auto& g = grad_of(*nb);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < d; ++j) g[j] += dy[i * d + j];
            }
            if (nx->requires_grad) {
                auto& g = grad_of(*nx);
                const double inv_d = 1.0 / static_cast<double>(d);
                for (std::size_t i = 0; i < m; ++i) {
                    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double dxh = dy[i * d + j] * ng->data[j];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xhat[i * d + j];
                    }
                    mean_dxhat *= inv_d;
                    mean_dxhat_xhat *= inv_d;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double dxh = dy[i * d + j] * ng->data[j];
                        g[i * d + j] += rstd[i] * (dxh - mean_dxhat - xhat[i * d + j] * mean_dxhat_xhat);
                    }
                }
            }
        });
}

Tensor gelu(const Tensor& x) {
    require_defined(x, "gelu");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * std::numbers::sqrt2 / 2.0));
    }
    Node* nx = x.node().get();
    return make_result(x.shape(), std::move(out), {&x}, [nx](Node& self) {
        auto& g = grad_of(*nx);
        const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = nx->data[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            g[i] += self.grad[i] * (cdf + v * pdf);
        }
    });
}

Tensor tanh(const Tensor& x) {
    require_defined(x, "tanh");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
    Node* nx = x.node().get();
    return make_result(x.shape(), std::move(out), {&x}, [nx](Node& self) {
        auto& g = grad_of(*nx);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (1.0 - self.data[i] * self.data[i]);
    });
}

// --- Structural ------------------------------------------------------------

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
    const std::size_t m = parts.front().rows();
    std::size_t n = 0;
    std::vector<std::size_t> offsets;
    for (const Tensor& p : parts) {
        require_defined(p, "concat_cols");
        if (p.rows() != m) {
            throw ShapeError("concat_cols: row counts differ, " + shape_string(parts.front().shape()) + " vs " +
                             shape_string(p.shape()));
        }
        offsets.push_back(n);
        n += p.cols();
    }
    std::vector<double> out(m * n);
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const std::size_t w = parts[k].cols();
        for (std::size_t i = 0; i < m; ++i)
            std::copy_n(parts[k].data().data() + i * w, w, out.data() + i * n + offsets[k]);
    }
    std::vector<Node*> nodes;
    for (const Tensor& p : parts) nodes.push_back(p.node().get());
    return make_result({m, n}, std::move(out), parts, [nodes, offsets, m, n](Node& self) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (!nodes[k]->requires_grad) continue;
            auto& g = grad_of(*nodes[k]);
            const std::size_t w = g.size() / m;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < w; ++j) g[i * w + j] += self.grad[i * n + offsets[k] + j];
        }
    });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: nothing to concatenate");
    const std::size_t n = parts.front().cols();
    std::size_t m = 0;
    for (const Tensor& p : parts) {
        require_defined(p, "concat_rows");
        if (p.cols() != n) {
            throw ShapeError("concat_rows: column counts differ, " + shape_string(parts.front().shape()) +
                             " vs " + shape_string(p.shape()));
        }
        m += p.rows();
    }
    std::vector<double> out;
    out.reserve(m * n);
    for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    std::vector<Node*> nodes;
    for (const Tensor& p : parts) nodes.push_back(p.node().get());
    return make_result({m, n}, std::move(out), parts, [nodes](Node& self) {
        std::size_t offset = 0;
        for (Node* node : nodes) {
            if (node->requires_grad) {
                auto& g = grad_of(*node);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offset + i];
            }
            offset += node->data.size();
        }
    });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
    require_rank2(x, "slice_cols");
    const std::size_t m = x.rows(), n = x.cols();
    if (count == 0 || begin + count > n) {
        throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(x.shape()));
    }
    std::vector<double> out(m * count);
    for (std::size_t i = 0; i < m; ++i)
        std::copy_n(x.data().data() + i * n + begin, count, out.data() + i * count);
    Node* nx = x.node().get();
    return make_result({m, count}, std::move(out), {&x}, [nx, m, n, begin, count](Node& self) {
        auto& g = grad_of(*nx);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < count; ++j) g[i * n + begin + j] += self.grad[i * count + j];
    });
}

Tensor row(const Tensor& x, std::size_t index) {
    require_rank2(x, "row");
    const std::size_t n = x.cols();
    if (index >= x.rows()) {
        throw ShapeError("row: index " + std::to_string(index) + " out of range for " + shape_string(x.shape()));
    }
    std::vector<double> out(x.data().begin() + index * n, x.data().begin() + (index + 1) * n);
    Node* nx = x.node().get();
    return make_result({1, n}, std::move(out), {&x}, [nx, index, n](Node& self) {
        auto& g = grad_of(*nx);
        for (std::size_t j = 0; j < n; ++j) g[index * n + j] += self.grad[j];
    });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
    require_rank2(table, "gather_rows");
    if (ids.empty()) throw ShapeError("gather_rows: no ids");
    const std::size_t v = table.rows(), d = table.cols();
    std::vector<double> out(ids.size() * d);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= v) {
            throw DataError("token id " + std::to_string(ids[i]) + " out of range for vocabulary of size " +
                            std::to_string(v));
        }
        std::copy_n(table.data().data() + ids[i] * d, d, out.data() + i * d);
    }
    Node* nt = table.node().get();
    std::vector<std::size_t> idx(ids.begin(), ids.end());
    return make_result({ids.size(), d}, std::move(out), {&table}, [nt, idx = std::move(idx), d](Node& self) {
        auto& g = grad_of(*nt);
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < d; ++j) g[idx[i] * d + j] += self.grad[i * d + j];
    });
}

// --- Reductions ------------------------------------------------------------

Tensor sum(const Tensor& x) {
    require_defined(x, "sum");
    double total = 0.0;
    for (double v : x.data()) total += v;
    Node* nx = x.node().get();
    return make_result({1}, {total}, {&x}, [nx](Node& self) {
        auto& g = grad_of(*nx);
        for (double& gi : g) gi += self.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    require_defined(x, "mean");
    return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng) {
    require_defined(x, "dropout");
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probability must be in [0, 1)");
    if (p == 0.0) return x;
    std::bernoulli_distribution keep(1.0 - p);
    const double factor = 1.0 / (1.0 - p);
    std::vector<double> mask(x.size());
    for (double& m : mask) m = keep(rng) ? factor : 0.0;
    return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

}  // namespace finsent
