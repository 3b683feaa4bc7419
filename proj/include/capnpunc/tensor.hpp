// Copyright 2026 The capnpunc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "capnpunc/error.hpp"
#include "capnpunc/rng.hpp"

namespace capnpunc {

// Dense row-major tensor, rank 1 or 2. Templated on the scalar so the same
// graph code runs in float for training and double for gradient checks.
template <typename Real>
struct Tensor {
    std::vector<int> shape;
    std::vector<Real> values;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<Real> v) : shape(std::move(s)), values(std::move(v)) {}

    static Tensor zeros(std::vector<int> s) {
        size_t n = 1;
        for (int d : s) n *= static_cast<size_t>(d);
        return Tensor(std::move(s), std::vector<Real>(n, Real(0)));
    }

    static Tensor full(std::vector<int> s, Real fill) {
        Tensor t = zeros(std::move(s));
        std::fill(t.values.begin(), t.values.end(), fill);
        return t;
    }

    size_t numel() const { return values.size(); }
    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const { return shape.size() < 2 ? (shape.empty() ? 1 : shape[0]) : shape[1]; }

    Real& at(int i, int j) { return values[static_cast<size_t>(i) * shape[1] + j]; }
    Real at(int i, int j) const { return values[static_cast<size_t>(i) * shape[1] + j]; }
};

template <typename Real>
struct Parameter {
    std::string name;
    Tensor<Real> value;
    Tensor<Real> grad;
    bool decay = true;  // weight-decay eligible (off for biases and CRF transitions)

    Parameter() = default;
    Parameter(std::string n, Tensor<Real> v, bool d = true)
        : name(std::move(n)), value(std::move(v)), decay(d) {
        grad = Tensor<Real>::zeros(value.shape);
    }

    void zero_grad() { std::fill(grad.values.begin(), grad.values.end(), Real(0)); }
};

inline std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

// One recorded operation output. Value and gradient storage may live in the
// node itself (interior results) or in an external Parameter (leaves), so
// backward accumulates parameter gradients in place.
template <typename Real>
struct Node {
    std::vector<int> shape;
    Real* value = nullptr;
    Real* grad = nullptr;  // null when the node does not need gradients
    size_t size = 0;
    bool needs_grad = false;
    const char* op = "leaf";
    std::function<void()> backprop;

    std::vector<Real> value_store;
    std::vector<Real> grad_store;

    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const { return shape.size() < 2 ? (shape.empty() ? 1 : shape[0]) : shape[1]; }
    bool is_matrix() const { return shape.size() == 2; }

    Real v(int i, int j) const { return value[static_cast<size_t>(i) * shape[1] + j]; }
    Tensor<Real> to_tensor() const {
        return Tensor<Real>(shape, std::vector<Real>(value, value + size));
    }
};

namespace detail {
inline void op_shape_error(const char* op, const std::vector<int>& a, const std::vector<int>& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                                shape_str(b));
}
}  // namespace detail

// The computation record. Operations execute eagerly and push a backward
// closure; backward() replays the closures once, in reverse order. A tape is
// built, differentiated and discarded per training example.
template <typename Real>
class Tape {
   public:
    using NodeT = Node<Real>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // ---- leaves -----------------------------------------------------------

    // Registered parameter leaf: value is read from, and gradient accumulated
    // into, the persistent Parameter storage.
    NodeT* param(Parameter<Real>& p) {
        NodeT* n = fresh("param", p.value.shape);
        n->value = p.value.values.data();
        n->grad = p.grad.values.data();
        n->size = p.value.numel();
        n->needs_grad = true;
        params_.emplace_back(p.name, n);
        return n;
    }

    // Constant input: copied, no gradient.
    NodeT* input(const Tensor<Real>& t) {
        NodeT* n = alloc_value("input", t.shape);
        std::copy(t.values.begin(), t.values.end(), n->value);
        return n;
    }

    // Leaf with its own gradient buffer; used by tests and gradient checks.
    NodeT* variable(const Tensor<Real>& t) {
        NodeT* n = alloc_value("variable", t.shape);
        std::copy(t.values.begin(), t.values.end(), n->value);
        n->needs_grad = true;
        n->grad_store.assign(n->size, Real(0));
        n->grad = n->grad_store.data();
        return n;
    }

    // ---- arithmetic --------------------------------------------------------

    NodeT* add(NodeT* a, NodeT* b) {
        if (a->shape != b->shape) detail::op_shape_error("add", a->shape, b->shape);
        NodeT* out = make("add", a->shape, {a, b});
        for (size_t i = 0; i < out->size; ++i) out->value[i] = a->value[i] + b->value[i];
        out->backprop = [out, a, b] {
            if (a->grad)
                for (size_t i = 0; i < out->size; ++i) a->grad[i] += out->grad[i];
            if (b->grad)
                for (size_t i = 0; i < out->size; ++i) b->grad[i] += out->grad[i];
        };
        return out;
    }

    NodeT* mul(NodeT* a, NodeT* b) {
        if (a->shape != b->shape) detail::op_shape_error("mul", a->shape, b->shape);
        NodeT* out = make("mul", a->shape, {a, b});
        for (size_t i = 0; i < out->size; ++i) out->value[i] = a->value[i] * b->value[i];
        out->backprop = [out, a, b] {
            if (a->grad)
                for (size_t i = 0; i < out->size; ++i) a->grad[i] += out->grad[i] * b->value[i];
            if (b->grad)
                for (size_t i = 0; i < out->size; ++i) b->grad[i] += out->grad[i] * a->value[i];
        };
        return out;
    }

    NodeT* scale(NodeT* a, Real k) {
        NodeT* out = make("scale", a->shape, {a});
        for (size_t i = 0; i < out->size; ++i) out->value[i] = a->value[i] * k;
        out->backprop = [out, a, k] {
            if (a->grad)
                for (size_t i = 0; i < out->size; ++i) a->grad[i] += out->grad[i] * k;
        };
        return out;
    }

    // X (n x m) + b (m), broadcast over rows.
    NodeT* add_rowvec(NodeT* x, NodeT* b) {
        if (!x->is_matrix() || x->shape[1] != b->cols() || b->is_matrix())
            detail::op_shape_error("add_rowvec", x->shape, b->shape);
        NodeT* out = make("add_rowvec", x->shape, {x, b});
        int n = x->shape[0], m = x->shape[1];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                out->value[i * m + j] = x->value[i * m + j] + b->value[j];
        out->backprop = [out, x, b, n, m] {
            if (x->grad)
                for (size_t i = 0; i < out->size; ++i) x->grad[i] += out->grad[i];
            if (b->grad)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < m; ++j) b->grad[j] += out->grad[i * m + j];
        };
        return out;
    }

    // X (n x m) + c (n), broadcast over columns.
    NodeT* add_colvec(NodeT* x, NodeT* c) {
        if (!x->is_matrix() || x->shape[0] != c->cols() || c->is_matrix())
            detail::op_shape_error("add_colvec", x->shape, c->shape);
        NodeT* out = make("add_colvec", x->shape, {x, c});
        int n = x->shape[0], m = x->shape[1];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                out->value[i * m + j] = x->value[i * m + j] + c->value[i];
        out->backprop = [out, x, c, n, m] {
            if (x->grad)
                for (size_t i = 0; i < out->size; ++i) x->grad[i] += out->grad[i];
            if (c->grad)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < m; ++j) c->grad[i] += out->grad[i * m + j];
        };
        return out;
    }

    // (n x k) . (k x m)
    NodeT* matmul(NodeT* a, NodeT* b) {
        if (!a->is_matrix() || !b->is_matrix() || a->shape[1] != b->shape[0])
            detail::op_shape_error("matmul", a->shape, b->shape);
        int n = a->shape[0], k = a->shape[1], m = b->shape[1];
        NodeT* out = make("matmul", {n, m}, {a, b});
        gemm(a->value, b->value, out->value, n, k, m);
        out->backprop = [out, a, b, n, k, m] {
            if (a->grad) gemm_nt(out->grad, b->value, a->grad, n, m, k);
            if (b->grad) gemm_tn(a->value, out->grad, b->grad, n, k, m);
        };
        return out;
    }

    // (n x k) . (m x k)^T
    NodeT* matmul_nt(NodeT* a, NodeT* b) {
        if (!a->is_matrix() || !b->is_matrix() || a->shape[1] != b->shape[1])
            detail::op_shape_error("matmul_nt", a->shape, b->shape);
        int n = a->shape[0], k = a->shape[1], m = b->shape[0];
        NodeT* out = make("matmul_nt", {n, m}, {a, b});
        gemm_nt(a->value, b->value, out->value, n, k, m);
        out->backprop = [out, a, b, n, k, m] {
            if (a->grad) gemm(out->grad, b->value, a->grad, n, m, k);
            if (b->grad) gemm_tn(out->grad, a->value, b->grad, n, m, k);
        };
        return out;
    }

    // ---- structure ---------------------------------------------------------

    NodeT* concat_cols(const std::vector<NodeT*>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
        int n = parts[0]->rows(), m = 0;
        for (NodeT* p : parts) {
            if (!p->is_matrix() || p->shape[0] != n)
                detail::op_shape_error("concat_cols", parts[0]->shape, p->shape);
            m += p->shape[1];
        }
        NodeT* out = make("concat_cols", {n, m}, parts);
        int off = 0;
        for (NodeT* p : parts) {
            int pm = p->shape[1];
            for (int i = 0; i < n; ++i)
                std::copy(p->value + i * pm, p->value + (i + 1) * pm, out->value + i * m + off);
            off += pm;
        }
        std::vector<NodeT*> ins(parts);
        out->backprop = [out, ins, n, m] {
            int off = 0;
            for (NodeT* p : ins) {
                int pm = p->shape[1];
                if (p->grad)
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < pm; ++j)
                            p->grad[i * pm + j] += out->grad[i * m + off + j];
                off += pm;
            }
        };
        return out;
    }

    NodeT* concat_cols(NodeT* a, NodeT* b) { return concat_cols(std::vector<NodeT*>{a, b}); }

    NodeT* slice_cols(NodeT* x, int c0, int c1) {
        if (!x->is_matrix() || c0 < 0 || c1 > x->shape[1] || c0 >= c1)
            throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + "," +
                                        std::to_string(c1) + ") for " + shape_str(x->shape));
        int n = x->shape[0], m = x->shape[1], w = c1 - c0;
        NodeT* out = make("slice_cols", {n, w}, {x});
        for (int i = 0; i < n; ++i)
            std::copy(x->value + i * m + c0, x->value + i * m + c1, out->value + i * w);
        out->backprop = [out, x, n, m, w, c0] {
            if (!x->grad) return;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < w; ++j) x->grad[i * m + c0 + j] += out->grad[i * w + j];
        };
        return out;
    }

    // Single row of a matrix as a rank-1 node.
    NodeT* row(NodeT* x, int i) {
        if (!x->is_matrix() || i < 0 || i >= x->shape[0])
            throw std::invalid_argument("row: index " + std::to_string(i) + " out of " +
                                        shape_str(x->shape));
        int m = x->shape[1];
        NodeT* out = make("row", {m}, {x});
        std::copy(x->value + i * m, x->value + (i + 1) * m, out->value);
        out->backprop = [out, x, i, m] {
            if (!x->grad) return;
            for (int j = 0; j < m; ++j) x->grad[i * m + j] += out->grad[j];
        };
        return out;
    }

    // Embedding lookup: rows of `table` selected by index.
    NodeT* gather_rows(NodeT* table, const std::vector<int>& ids) {
        if (!table->is_matrix())
            throw std::invalid_argument("gather_rows: table must be rank 2, got " +
                                        shape_str(table->shape));
        int v = table->shape[0], d = table->shape[1];
        for (int id : ids)
            if (id < 0 || id >= v)
                throw std::invalid_argument("gather_rows: id " + std::to_string(id) +
                                            " out of table " + shape_str(table->shape));
        NodeT* out = make("gather_rows", {static_cast<int>(ids.size()), d}, {table});
        for (size_t i = 0; i < ids.size(); ++i)
            std::copy(table->value + ids[i] * d, table->value + (ids[i] + 1) * d,
                      out->value + i * d);
        std::vector<int> idx(ids);
        out->backprop = [out, table, idx, d] {
            if (!table->grad) return;
            for (size_t i = 0; i < idx.size(); ++i)
                for (int j = 0; j < d; ++j)
                    table->grad[idx[i] * d + j] += out->grad[i * d + j];
        };
        return out;
    }

    // Sums contiguous row ranges: output row r = sum of input rows
    // [spans[r].first, spans[r].second). Recombines subword vectors into
    // word vectors.
    NodeT* sum_rows_segments(NodeT* x, const std::vector<std::pair<int, int>>& spans) {
        if (!x->is_matrix())
            throw std::invalid_argument("sum_rows_segments: input must be rank 2, got " +
                                        shape_str(x->shape));
        int m = x->shape[1];
        for (auto& s : spans)
            if (s.first < 0 || s.second > x->shape[0] || s.first >= s.second)
                throw std::invalid_argument("sum_rows_segments: bad span for " +
                                            shape_str(x->shape));
        NodeT* out = make("sum_rows_segments", {static_cast<int>(spans.size()), m}, {x});
        for (size_t r = 0; r < spans.size(); ++r)
            for (int i = spans[r].first; i < spans[r].second; ++i)
                for (int j = 0; j < m; ++j) out->value[r * m + j] += x->value[i * m + j];
        std::vector<std::pair<int, int>> sp(spans);
        out->backprop = [out, x, sp, m] {
            if (!x->grad) return;
            for (size_t r = 0; r < sp.size(); ++r)
                for (int i = sp[r].first; i < sp[r].second; ++i)
                    for (int j = 0; j < m; ++j) x->grad[i * m + j] += out->grad[r * m + j];
        };
        return out;
    }

    // Element gather from a matrix: out[t] = x[rows[t], cols[t]].
    NodeT* pick(NodeT* x, const std::vector<int>& rows, const std::vector<int>& cols) {
        if (!x->is_matrix() || rows.size() != cols.size())
            throw std::invalid_argument("pick: need rank 2 input and equal index lists, got " +
                                        shape_str(x->shape));
        int n = x->shape[0], m = x->shape[1];
        for (size_t t = 0; t < rows.size(); ++t)
            if (rows[t] < 0 || rows[t] >= n || cols[t] < 0 || cols[t] >= m)
                throw std::invalid_argument("pick: index out of " + shape_str(x->shape));
        NodeT* out = make("pick", {static_cast<int>(rows.size())}, {x});
        for (size_t t = 0; t < rows.size(); ++t) out->value[t] = x->v(rows[t], cols[t]);
        std::vector<int> r(rows), c(cols);
        out->backprop = [out, x, r, c, m] {
            if (!x->grad) return;
            for (size_t t = 0; t < r.size(); ++t) x->grad[r[t] * m + c[t]] += out->grad[t];
        };
        return out;
    }

    // Element gather from a vector: out[t] = x[ids[t]].
    NodeT* pick(NodeT* x, const std::vector<int>& ids) {
        if (x->is_matrix())
            throw std::invalid_argument("pick: expected rank 1 input, got " + shape_str(x->shape));
        int m = x->cols();
        for (int id : ids)
            if (id < 0 || id >= m)
                throw std::invalid_argument("pick: index out of " + shape_str(x->shape));
        NodeT* out = make("pick", {static_cast<int>(ids.size())}, {x});
        for (size_t t = 0; t < ids.size(); ++t) out->value[t] = x->value[ids[t]];
        std::vector<int> idx(ids);
        out->backprop = [out, x, idx] {
            if (!x->grad) return;
            for (size_t t = 0; t < idx.size(); ++t) x->grad[idx[t]] += out->grad[t];
        };
        return out;
    }

    // ---- reductions and nonlinearities --------------------------------------

    NodeT* sum(NodeT* x) {
        NodeT* out = make("sum", {1}, {x});
        Real s = 0;
        for (size_t i = 0; i < x->size; ++i) s += x->value[i];
        out->value[0] = s;
        out->backprop = [out, x] {
            if (!x->grad) return;
            for (size_t i = 0; i < x->size; ++i) x->grad[i] += out->grad[0];
        };
        return out;
    }

    // Row-wise softmax, max-shifted. Rank-1 input is treated as one row.
    NodeT* softmax_rows(NodeT* x) {
        int n = x->is_matrix() ? x->shape[0] : 1;
        int m = x->is_matrix() ? x->shape[1] : x->cols();
        NodeT* out = make("softmax_rows", x->shape, {x});
        for (int i = 0; i < n; ++i) {
            const Real* xi = x->value + static_cast<size_t>(i) * m;
            Real* yi = out->value + static_cast<size_t>(i) * m;
            Real mx = xi[0];
            for (int j = 1; j < m; ++j) mx = std::max(mx, xi[j]);
            Real z = 0;
            for (int j = 0; j < m; ++j) {
                yi[j] = std::exp(xi[j] - mx);
                z += yi[j];
            }
            for (int j = 0; j < m; ++j) yi[j] /= z;
        }
        out->backprop = [out, x, n, m] {
            if (!x->grad) return;
            for (int i = 0; i < n; ++i) {
                const Real* yi = out->value + static_cast<size_t>(i) * m;
                const Real* gi = out->grad + static_cast<size_t>(i) * m;
                Real dot = 0;
                for (int j = 0; j < m; ++j) dot += gi[j] * yi[j];
                for (int j = 0; j < m; ++j)
                    x->grad[static_cast<size_t>(i) * m + j] += yi[j] * (gi[j] - dot);
            }
        };
        return out;
    }

    // log sum exp of a rank-1 node -> scalar. Max-shifted, so inputs with
    // magnitude up to 1e4 stay finite.
    NodeT* logsumexp(NodeT* x) {
        if (x->is_matrix())
            throw std::invalid_argument("logsumexp: expected rank 1, got " + shape_str(x->shape));
        int m = x->cols();
        NodeT* out = make("logsumexp", {1}, {x});
        out->value[0] = lse(x->value, m, 1);
        out->backprop = [out, x, m] {
            if (!x->grad) return;
            for (int j = 0; j < m; ++j)
                x->grad[j] += out->grad[0] * std::exp(x->value[j] - out->value[0]);
        };
        return out;
    }

    // log sum exp over one axis of a matrix. axis 0 reduces rows (output has
    // one entry per column); axis 1 reduces columns.
    NodeT* logsumexp_axis(NodeT* x, int axis) {
        if (!x->is_matrix() || (axis != 0 && axis != 1))
            throw std::invalid_argument("logsumexp_axis: need rank 2 and axis 0/1, got " +
                                        shape_str(x->shape));
        int n = x->shape[0], m = x->shape[1];
        int out_len = axis == 0 ? m : n;
        NodeT* out = make("logsumexp_axis", {out_len}, {x});
        if (axis == 1) {
            for (int i = 0; i < n; ++i) out->value[i] = lse(x->value + i * m, m, 1);
        } else {
            for (int j = 0; j < m; ++j) out->value[j] = lse(x->value + j, n, m);
        }
        out->backprop = [out, x, n, m, axis] {
            if (!x->grad) return;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) {
                    int k = axis == 1 ? i : j;
                    x->grad[i * m + j] +=
                        out->grad[k] * std::exp(x->value[i * m + j] - out->value[k]);
                }
        };
        return out;
    }

    // Smooth activation used everywhere: exact (erf-based) GELU.
    NodeT* gelu(NodeT* x) {
        NodeT* out = make("gelu", x->shape, {x});
        for (size_t i = 0; i < x->size; ++i) {
            Real xi = x->value[i];
            out->value[i] = Real(0.5) * xi * (Real(1) + std::erf(xi * Real(M_SQRT1_2)));
        }
        out->backprop = [out, x] {
            if (!x->grad) return;
            const Real inv_sqrt2pi = Real(0.3989422804014326779);
            for (size_t i = 0; i < x->size; ++i) {
                Real xi = x->value[i];
                Real cdf = Real(0.5) * (Real(1) + std::erf(xi * Real(M_SQRT1_2)));
                Real pdf = inv_sqrt2pi * std::exp(Real(-0.5) * xi * xi);
                x->grad[i] += out->grad[i] * (cdf + xi * pdf);
            }
        };
        return out;
    }

    // Row-wise layer normalization with learned gain and bias.
    NodeT* layer_norm(NodeT* x, NodeT* gain, NodeT* bias) {
        if (!x->is_matrix() || gain->cols() != x->shape[1] || bias->cols() != x->shape[1] ||
            gain->is_matrix() || bias->is_matrix())
            detail::op_shape_error("layer_norm", x->shape, gain->shape);
        int n = x->shape[0], m = x->shape[1];
        const Real eps = Real(1e-5);
        NodeT* out = make("layer_norm", x->shape, {x, gain, bias});
        auto rstd = std::make_shared<std::vector<Real>>(n);
        auto mean = std::make_shared<std::vector<Real>>(n);
        for (int i = 0; i < n; ++i) {
            const Real* xi = x->value + static_cast<size_t>(i) * m;
            Real mu = 0;
            for (int j = 0; j < m; ++j) mu += xi[j];
            mu /= m;
            Real var = 0;
            for (int j = 0; j < m; ++j) var += (xi[j] - mu) * (xi[j] - mu);
            var /= m;
            Real rs = Real(1) / std::sqrt(var + eps);
            (*mean)[i] = mu;
            (*rstd)[i] = rs;
            for (int j = 0; j < m; ++j)
                out->value[i * m + j] = gain->value[j] * (xi[j] - mu) * rs + bias->value[j];
        }
        out->backprop = [out, x, gain, bias, n, m, mean, rstd] {
            for (int i = 0; i < n; ++i) {
                const Real* xi = x->value + static_cast<size_t>(i) * m;
                const Real* gi = out->grad + static_cast<size_t>(i) * m;
                Real mu = (*mean)[i], rs = (*rstd)[i];
                Real mean_u = 0, mean_ux = 0;
                for (int j = 0; j < m; ++j) {
                    Real xhat = (xi[j] - mu) * rs;
                    Real u = gain->value[j] * gi[j];
                    mean_u += u;
                    mean_ux += u * xhat;
                    if (gain->grad) gain->grad[j] += gi[j] * xhat;
                    if (bias->grad) bias->grad[j] += gi[j];
                }
                mean_u /= m;
                mean_ux /= m;
                if (x->grad)
                    for (int j = 0; j < m; ++j) {
                        Real xhat = (xi[j] - mu) * rs;
                        Real u = gain->value[j] * gi[j];
                        x->grad[i * m + j] += rs * (u - mean_u - xhat * mean_ux);
                    }
            }
        };
        return out;
    }

    // Inverted dropout. p == 0 returns the input node unchanged; the mask is
    // recorded so backward reuses it.
    NodeT* dropout(NodeT* x, Real p, Rng& rng) {
        if (p <= Real(0)) return x;
        if (p >= Real(1)) throw std::invalid_argument("dropout: p must be < 1");
        NodeT* out = make("dropout", x->shape, {x});
        auto mask = std::make_shared<std::vector<Real>>(x->size);
        Real keep = Real(1) / (Real(1) - p);
        for (size_t i = 0; i < x->size; ++i) {
            (*mask)[i] = rng.uniform() < static_cast<double>(p) ? Real(0) : keep;
            out->value[i] = x->value[i] * (*mask)[i];
        }
        out->backprop = [out, x, mask] {
            if (!x->grad) return;
            for (size_t i = 0; i < x->size; ++i) x->grad[i] += out->grad[i] * (*mask)[i];
        };
        return out;
    }

    // Masked token-level cross entropy from logits, mean over unmasked rows.
    // An empty mask means every row counts.
    NodeT* cross_entropy(NodeT* logits, const std::vector<int>& labels,
                         const std::vector<uint8_t>& mask = {}) {
        if (!logits->is_matrix() || labels.size() != static_cast<size_t>(logits->shape[0]))
            throw std::invalid_argument("cross_entropy: logits " + shape_str(logits->shape) +
                                        " vs " + std::to_string(labels.size()) + " labels");
        if (!mask.empty() && mask.size() != labels.size())
            throw std::invalid_argument("cross_entropy: mask length mismatch");
        int n = logits->shape[0], m = logits->shape[1];
        for (int i = 0; i < n; ++i)
            if (labels[i] < 0 || labels[i] >= m)
                throw std::invalid_argument("cross_entropy: label out of range");
        NodeT* out = make("cross_entropy", {1}, {logits});
        auto probs = std::make_shared<std::vector<Real>>(static_cast<size_t>(n) * m);
        Real total = 0;
        int counted = 0;
        for (int i = 0; i < n; ++i) {
            const Real* li = logits->value + static_cast<size_t>(i) * m;
            Real* pi = probs->data() + static_cast<size_t>(i) * m;
            Real mx = li[0];
            for (int j = 1; j < m; ++j) mx = std::max(mx, li[j]);
            Real z = 0;
            for (int j = 0; j < m; ++j) {
                pi[j] = std::exp(li[j] - mx);
                z += pi[j];
            }
            Real logz = std::log(z) + mx;
            for (int j = 0; j < m; ++j) pi[j] /= z;
            if (mask.empty() || mask[i]) {
                total += logz - li[labels[i]];
                ++counted;
            }
        }
        if (counted == 0) throw std::invalid_argument("cross_entropy: all rows masked out");
        out->value[0] = total / counted;
        std::vector<int> y(labels);
        std::vector<uint8_t> mk(mask);
        out->backprop = [out, logits, probs, y, mk, n, m, counted] {
            if (!logits->grad) return;
            Real g = out->grad[0] / counted;
            for (int i = 0; i < n; ++i) {
                if (!mk.empty() && !mk[i]) continue;
                for (int j = 0; j < m; ++j)
                    logits->grad[i * m + j] +=
                        g * ((*probs)[static_cast<size_t>(i) * m + j] - (j == y[i] ? 1 : 0));
            }
        };
        return out;
    }

    // ---- backward ------------------------------------------------------------

    // Reverse sweep from a scalar loss. Each recorded operation's closure
    // runs exactly once.
    void backward(NodeT* loss) {
        if (loss->size != 1)
            throw std::invalid_argument("backward: loss must be scalar, got " +
                                        shape_str(loss->shape));
        if (!loss->needs_grad) return;
        loss->grad[0] += Real(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            NodeT* n = it->get();
            if (n->needs_grad && n->backprop) n->backprop();
        }
    }

    const std::vector<std::pair<std::string, NodeT*>>& params() const { return params_; }
    size_t num_ops() const { return nodes_.size(); }

   private:
    NodeT* fresh(const char* op, const std::vector<int>& shape) {
        nodes_.push_back(std::make_unique<NodeT>());
        NodeT* n = nodes_.back().get();
        n->op = op;
        n->shape = shape;
        size_t sz = 1;
        for (int d : shape) sz *= static_cast<size_t>(d);
        n->size = sz;
        return n;
    }

    NodeT* alloc_value(const char* op, const std::vector<int>& shape) {
        NodeT* n = fresh(op, shape);
        n->value_store.assign(n->size, Real(0));
        n->value = n->value_store.data();
        return n;
    }

    NodeT* make(const char* op, const std::vector<int>& shape, const std::vector<NodeT*>& inputs) {
        NodeT* n = alloc_value(op, shape);
        for (NodeT* in : inputs) n->needs_grad = n->needs_grad || in->needs_grad;
        if (n->needs_grad) {
            n->grad_store.assign(n->size, Real(0));
            n->grad = n->grad_store.data();
        }
        return n;
    }

    static Real lse(const Real* x, int count, int stride) {
        Real mx = x[0];
        for (int i = 1; i < count; ++i) mx = std::max(mx, x[i * stride]);
        Real z = 0;
        for (int i = 0; i < count; ++i) z += std::exp(x[i * stride] - mx);
        return mx + std::log(z);
    }

    // C (n x m) += is not needed: outputs are fresh zeroed buffers, gradient
    // targets accumulate.
    static void gemm(const Real* a, const Real* b, Real* c, int n, int k, int m) {
        for (int i = 0; i < n; ++i)
            for (int p = 0; p < k; ++p) {
                Real aip = a[i * k + p];
                if (aip == Real(0)) continue;
                const Real* bp = b + p * m;
                Real* ci = c + i * m;
                for (int j = 0; j < m; ++j) ci[j] += aip * bp[j];
            }
    }

    // C (n x m) += A (n x k) . B (m x k)^T
    static void gemm_nt(const Real* a, const Real* b, Real* c, int n, int k, int m) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                Real s = 0;
                const Real* ai = a + i * k;
                const Real* bj = b + j * k;
                for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
                c[i * m + j] += s;
            }
    }

    // C (k x m) += A (n x k)^T . B (n x m)
    static void gemm_tn(const Real* a, const Real* b, Real* c, int n, int k, int m) {
        for (int i = 0; i < n; ++i) {
            const Real* ai = a + i * k;
            const Real* bi = b + i * m;
            for (int p = 0; p < k; ++p) {
                Real aip = ai[p];
                if (aip == Real(0)) continue;
                Real* cp = c + p * m;
                for (int j = 0; j < m; ++j) cp[j] += aip * bi[j];
            }
        }
    }

    std::vector<std::unique_ptr<NodeT>> nodes_;
    std::vector<std::pair<std::string, NodeT*>> params_;
};

// Central finite-difference check. `loss_fn(true)` must run a fresh forward
// and backward pass, leaving analytic gradients in the parameters;
// `loss_fn(false)` runs forward only. Returns the max relative error
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|) over all entries.
template <typename Real>
double grad_check(const std::vector<Parameter<Real>*>& params,
                  const std::function<Real(bool)>& loss_fn, Real step) {
    if (!(step > Real(0))) throw std::invalid_argument("grad_check: step must be positive");
    for (auto* p : params) p->zero_grad();
    loss_fn(true);
    std::vector<std::vector<Real>> analytic;
    analytic.reserve(params.size());
    for (auto* p : params) analytic.push_back(p->grad.values);

    double worst = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Parameter<Real>& p = *params[pi];
        for (size_t i = 0; i < p.value.numel(); ++i) {
            Real saved = p.value.values[i];
            p.value.values[i] = saved + step;
            Real up = loss_fn(false);
            p.value.values[i] = saved - step;
            Real down = loss_fn(false);
            p.value.values[i] = saved;
            if (!std::isfinite(static_cast<double>(up)) ||
                !std::isfinite(static_cast<double>(down)))
                throw NumericError("grad_check: non-finite loss while perturbing " + p.name);
            double numeric = (static_cast<double>(up) - static_cast<double>(down)) /
                             (2.0 * static_cast<double>(step));
            double a = static_cast<double>(analytic[pi][i]);
            if (!std::isfinite(a))
                throw NumericError("grad_check: non-finite gradient in " + p.name);
            double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace capnpunc
