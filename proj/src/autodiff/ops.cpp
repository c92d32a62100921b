#include "ooc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ooc/error.hpp"
#include "ooc/kernels.hpp"

namespace ooc {
namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

Tensor make_op(Shape shape, std::vector<double> value, std::vector<NodePtr> parents,
               std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    const bool needs = grad_enabled() &&
                       std::any_of(parents.begin(), parents.end(),
                                   [](const NodePtr& p) { return p->requires_grad; });
    if (needs) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
    fail(ErrorKind::Dimension,
         op + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

void require_rank2(const std::string& op, const Tensor& x) {
    if (x.rank() != 2) {
        fail(ErrorKind::Dimension, op + ": expected a rank-2 tensor, got " + shape_string(x.shape()));
    }
}

void require_same_shape(const std::string& op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

template <typename F>
Tensor unary(const Tensor& x, F&& forward, std::function<double(double x, double y)> derivative) {
    std::vector<double> out(x.size());
    const auto in = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(in[i]);
    return make_op(x.shape(), std::move(out), {x.node()}, [derivative](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i] * derivative(p.value[i], self.value[i]);
        }
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return make_op(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
        for (auto& p : self.parents) {
            if (!p->requires_grad) continue;
            kernels::active().axpy(self.grad.size(), 1.0, self.grad.data(), p->ensure_grad().data());
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return make_op(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
        const auto& k = kernels::active();
        if (self.parents[0]->requires_grad) {
            k.axpy(self.grad.size(), 1.0, self.grad.data(), self.parents[0]->ensure_grad().data());
        }
        if (self.parents[1]->requires_grad) {
            k.axpy(self.grad.size(), -1.0, self.grad.data(), self.parents[1]->ensure_grad().data());
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return make_op(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
        }
    });
}

Tensor scale(const Tensor& x, double factor) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
    return make_op(x.shape(), std::move(out), {x.node()}, [factor](Node& self) {
        kernels::active().axpy(self.grad.size(), factor, self.grad.data(),
                               self.parents[0]->ensure_grad().data());
    });
}

Tensor add_scalar(const Tensor& x, double value) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + value;
    return make_op(x.shape(), std::move(out), {x.node()}, [](Node& self) {
        kernels::active().axpy(self.grad.size(), 1.0, self.grad.data(),
                               self.parents[0]->ensure_grad().data());
    });
}

Tensor add_row(const Tensor& x, const Tensor& bias) {
    require_rank2("add_row", x);
    const std::size_t m = x.rows();
    const std::size_t n = x.cols();
    if (bias.size() != n || bias.rank() > 2 || (bias.rank() == 2 && bias.rows() != 1)) {
        shape_error("add_row", x.shape(), bias.shape());
    }
    std::vector<double> out(x.data().begin(), x.data().end());
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) out[r * n + c] += bias[c];
    }
    return make_op(x.shape(), std::move(out), {x.node(), bias.node()}, [m, n](Node& self) {
        const auto& k = kernels::active();
        if (self.parents[0]->requires_grad) {
            k.axpy(self.grad.size(), 1.0, self.grad.data(), self.parents[0]->ensure_grad().data());
        }
        if (self.parents[1]->requires_grad) {
            auto& gb = self.parents[1]->ensure_grad();
            for (std::size_t r = 0; r < m; ++r) k.axpy(n, 1.0, self.grad.data() + r * n, gb.data());
        }
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2("matmul", a);
    require_rank2("matmul", b);
    const std::size_t m = a.rows();
    const std::size_t k = a.cols();
    const std::size_t n = b.cols();
    if (b.rows() != k) shape_error("matmul", a.shape(), b.shape());
    std::vector<double> out(m * n);
    kernels::active().gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data(), false);
    return make_op({m, n}, std::move(out), {a.node(), b.node()}, [m, n, k](Node& self) {
        const auto& kt = kernels::active();
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            kt.gemm_nt(m, k, n, self.grad.data(), pb.value.data(), pa.ensure_grad().data(), true);
        }
        if (pb.requires_grad) {
            kt.gemm_tn_acc(k, n, m, pa.value.data(), self.grad.data(), pb.ensure_grad().data());
        }
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_rank2("matmul_nt", a);
    require_rank2("matmul_nt", b);
    const std::size_t m = a.rows();
    const std::size_t k = a.cols();
    const std::size_t n = b.rows();
    if (b.cols() != k) shape_error("matmul_nt", a.shape(), b.shape());
    std::vector<double> out(m * n);
    kernels::active().gemm_nt(m, n, k, a.data().data(), b.data().data(), out.data(), false);
    return make_op({m, n}, std::move(out), {a.node(), b.node()}, [m, n, k](Node& self) {
        const auto& kt = kernels::active();
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            kt.gemm_nn(m, k, n, self.grad.data(), pb.value.data(), pa.ensure_grad().data(), true);
        }
        if (pb.requires_grad) {
            kt.gemm_tn_acc(n, k, m, self.grad.data(), pa.value.data(), pb.ensure_grad().data());
        }
    });
}

Tensor transpose(const Tensor& x) {
    require_rank2("transpose", x);
    const std::size_t m = x.rows();
    const std::size_t n = x.cols();
    std::vector<double> out(m * n);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) out[c * m + r] = x[r * n + c];
    }
    return make_op({n, m}, std::move(out), {x.node()}, [m, n](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < n; ++c) g[r * n + c] += self.grad[c * m + r];
        }
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_size(shape) != x.size()) shape_error("reshape", x.shape(), shape);
    std::vector<double> out(x.data().begin(), x.data().end());
    return make_op(std::move(shape), std::move(out), {x.node()}, [](Node& self) {
        kernels::active().axpy(self.grad.size(), 1.0, self.grad.data(),
                               self.parents[0]->ensure_grad().data());
    });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
    return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
    std::vector<const Tensor*> used;
    for (const Tensor& t : parts) {
        if (t.size() > 0) used.push_back(&t);
    }
    if (used.empty()) {
        return parts.empty() ? Tensor() : Tensor::zeros(parts.front().shape());
    }
    const Tensor& first = *used.front();
    const std::size_t rank = first.rank();
    if (rank == 0 || rank > 2 || axis >= rank) {
        fail(ErrorKind::Dimension, "concat: axis " + std::to_string(axis) + " invalid for shape " +
                                       shape_string(first.shape()));
    }
    for (const Tensor* t : used) {
        if (t->rank() != rank) shape_error("concat", first.shape(), t->shape());
        for (std::size_t d = 0; d < rank; ++d) {
            if (d != axis && t->shape()[d] != first.shape()[d]) {
                shape_error("concat", first.shape(), t->shape());
            }
        }
    }

    // Rank-1 and row concatenation are contiguous appends; column concat
    // interleaves per row.
    const bool by_cols = rank == 2 && axis == 1;
    const std::size_t rows = by_cols ? first.rows() : 1;
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const Tensor* t : used) {
        widths.push_back(t->size() / rows);
        total += widths.back();
    }
    std::vector<double> out(rows * total);
    std::vector<NodePtr> parents;
    std::size_t offset = 0;
    for (std::size_t p = 0; p < used.size(); ++p) {
        const auto src = used[p]->data();
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(src.begin() + r * widths[p], widths[p], out.begin() + r * total + offset);
        }
        offset += widths[p];
        parents.push_back(used[p]->node());
    }
    Shape shape = first.shape();
    shape[axis] = 0;
    for (const Tensor* t : used) shape[axis] += t->shape()[axis];

    return make_op(std::move(shape), std::move(out), std::move(parents),
                   [rows, total, widths](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t p = 0; p < self.parents.size(); ++p) {
                           Node& parent = *self.parents[p];
                           if (parent.requires_grad) {
                               auto& g = parent.ensure_grad();
                               for (std::size_t r = 0; r < rows; ++r) {
                                   kernels::active().axpy(widths[p], 1.0,
                                                          self.grad.data() + r * total + off,
                                                          g.data() + r * widths[p]);
                               }
                           }
                           off += widths[p];
                       }
                   });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
    require_rank2("slice_rows", x);
    const std::size_t n = x.cols();
    if (begin + count > x.rows()) {
        fail(ErrorKind::Dimension, "slice_rows: [" + std::to_string(begin) + ", " +
                                       std::to_string(begin + count) + ") out of range for " +
                                       shape_string(x.shape()));
    }
    std::vector<double> out(x.data().begin() + begin * n, x.data().begin() + (begin + count) * n);
    return make_op({count, n}, std::move(out), {x.node()}, [begin, n](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        kernels::active().axpy(self.grad.size(), 1.0, self.grad.data(), g.data() + begin * n);
    });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
    require_rank2("slice_cols", x);
    const std::size_t m = x.rows();
    const std::size_t n = x.cols();
    if (begin + count > n) {
        fail(ErrorKind::Dimension, "slice_cols: [" + std::to_string(begin) + ", " +
                                       std::to_string(begin + count) + ") out of range for " +
                                       shape_string(x.shape()));
    }
    std::vector<double> out(m * count);
    for (std::size_t r = 0; r < m; ++r) {
        std::copy_n(x.data().begin() + r * n + begin, count, out.begin() + r * count);
    }
    return make_op({m, count}, std::move(out), {x.node()}, [m, n, begin, count](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < m; ++r) {
            kernels::active().axpy(count, 1.0, self.grad.data() + r * count, g.data() + r * n + begin);
        }
    });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
    require_rank2("gather_rows", table);
    const std::size_t n = table.cols();
    std::vector<std::size_t> index(ids.begin(), ids.end());
    std::vector<double> out(index.size() * n);
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (index[r] >= table.rows()) {
            fail(ErrorKind::Dimension, "gather_rows: row " + std::to_string(index[r]) +
                                           " out of range for " + shape_string(table.shape()));
        }
        std::copy_n(table.data().begin() + index[r] * n, n, out.begin() + r * n);
    }
    Shape shape{index.size(), n};
    return make_op(std::move(shape), std::move(out), {table.node()},
                   [index = std::move(index), n](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t r = 0; r < index.size(); ++r) {
                           kernels::active().axpy(n, 1.0, self.grad.data() + r * n,
                                                  g.data() + index[r] * n);
                       }
                   });
}

Tensor scatter_add_rows(const Tensor& src, std::span<const std::size_t> index, std::size_t n_rows) {
    require_rank2("scatter_add_rows", src);
    if (index.size() != src.rows()) {
        fail(ErrorKind::Dimension, "scatter_add_rows: " + std::to_string(index.size()) +
                                       " indices for " + shape_string(src.shape()));
    }
    const std::size_t n = src.cols();
    std::vector<std::size_t> idx(index.begin(), index.end());
    std::vector<double> out(n_rows * n, 0.0);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= n_rows) {
            fail(ErrorKind::Dimension, "scatter_add_rows: target row " + std::to_string(idx[r]) +
                                           " >= " + std::to_string(n_rows));
        }
        for (std::size_t c = 0; c < n; ++c) out[idx[r] * n + c] += src[r * n + c];
    }
    Shape shape{n_rows, n};
    return make_op(std::move(shape), std::move(out), {src.node()}, [idx = std::move(idx), n](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < idx.size(); ++r) {
            kernels::active().axpy(n, 1.0, self.grad.data() + idx[r] * n, g.data() + r * n);
        }
    });
}

Tensor pick(const Tensor& x, std::span<const std::size_t> cols) {
    require_rank2("pick", x);
    const std::size_t m = x.rows();
    const std::size_t n = x.cols();
    if (cols.size() != m) {
        fail(ErrorKind::Dimension, "pick: " + std::to_string(cols.size()) + " columns for " +
                                       shape_string(x.shape()));
    }
    std::vector<std::size_t> idx(cols.begin(), cols.end());
    std::vector<double> out(m);
    for (std::size_t r = 0; r < m; ++r) {
        if (idx[r] >= n) {
            fail(ErrorKind::Dimension, "pick: column " + std::to_string(idx[r]) + " >= " +
                                           std::to_string(n));
        }
        out[r] = x[r * n + idx[r]];
    }
    Shape shape{m, 1};
    return make_op(std::move(shape), std::move(out), {x.node()}, [idx = std::move(idx), n](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < idx.size(); ++r) g[r * n + idx[r]] += self.grad[r];
    });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    // Groups of `length` values spaced `stride` apart.
    std::size_t groups = 1, length = x.size(), stride = 1, group_step = 0;
    if (x.rank() == 2 && axis == 1) {
        groups = x.rows();
        length = x.cols();
        group_step = length;
    } else if (x.rank() == 2 && axis == 0) {
        groups = x.cols();
        length = x.rows();
        stride = x.cols();
        group_step = 1;
    } else if (!(x.rank() == 1 && axis == 0)) {
        fail(ErrorKind::Dimension, "softmax: axis " + std::to_string(axis) + " invalid for " +
                                       shape_string(x.shape()));
    }
    std::vector<double> out(x.size());
    const auto in = x.data();
    for (std::size_t gidx = 0; gidx < groups; ++gidx) {
        const std::size_t base = gidx * group_step;
        double mx = in[base];
        for (std::size_t t = 1; t < length; ++t) mx = std::max(mx, in[base + t * stride]);
        double total = 0.0;
        for (std::size_t t = 0; t < length; ++t) {
            const double e = std::exp(in[base + t * stride] - mx);
            out[base + t * stride] = e;
            total += e;
        }
        for (std::size_t t = 0; t < length; ++t) out[base + t * stride] /= total;
    }
    return make_op(x.shape(), std::move(out), {x.node()},
                   [groups, length, stride, group_step](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       const auto& y = self.value;
                       const auto& gy = self.grad;
                       for (std::size_t gidx = 0; gidx < groups; ++gidx) {
                           const std::size_t base = gidx * group_step;
                           double dotp = 0.0;
                           for (std::size_t t = 0; t < length; ++t) {
                               dotp += gy[base + t * stride] * y[base + t * stride];
                           }
                           for (std::size_t t = 0; t < length; ++t) {
                               const std::size_t i = base + t * stride;
                               g[i] += y[i] * (gy[i] - dotp);
                           }
                       }
                   });
}

Tensor log_softmax(const Tensor& x) {
    require_rank2("log_softmax", x);
    const std::size_t m = x.rows();
    const std::size_t n = x.cols();
    std::vector<double> out(m * n);
    for (std::size_t r = 0; r < m; ++r) {
        const double* row = x.data().data() + r * n;
        const double mx = *std::max_element(row, row + n);
        double total = 0.0;
        for (std::size_t c = 0; c < n; ++c) total += std::exp(row[c] - mx);
        const double lse = mx + std::log(total);
        for (std::size_t c = 0; c < n; ++c) out[r * n + c] = row[c] - lse;
    }
    return make_op({m, n}, std::move(out), {x.node()}, [m, n](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < m; ++r) {
            double gsum = 0.0;
            for (std::size_t c = 0; c < n; ++c) gsum += self.grad[r * n + c];
            for (std::size_t c = 0; c < n; ++c) {
                const std::size_t i = r * n + c;
                g[i] += self.grad[i] - std::exp(self.value[i]) * gsum;
            }
        }
    });
}

namespace {

struct RowStats {
    std::vector<double> xhat;
    std::vector<double> inv_std;
};

RowStats normalise_rows(const Tensor& x, double eps) {
    const std::size_t m = x.rows();
    const std::size_t n = x.cols();
    RowStats st{std::vector<double>(m * n), std::vector<double>(m)};
    for (std::size_t r = 0; r < m; ++r) {
        const double* row = x.data().data() + r * n;
        double mu = 0.0;
        for (std::size_t c = 0; c < n; ++c) mu += row[c];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t c = 0; c < n; ++c) var += (row[c] - mu) * (row[c] - mu);
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        st.inv_std[r] = inv;
        for (std::size_t c = 0; c < n; ++c) st.xhat[r * n + c] = (row[c] - mu) * inv;
    }
    return st;
}

// dx = inv_std · (g − mean(g) − x̂·mean(g·x̂)), per row.
void layer_norm_input_grad(std::size_t m, std::size_t n, const std::vector<double>& xhat,
                           const std::vector<double>& inv_std, const double* gxhat,
                           std::vector<double>& dx) {
    for (std::size_t r = 0; r < m; ++r) {
        double mg = 0.0, mgx = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            mg += gxhat[r * n + c];
            mgx += gxhat[r * n + c] * xhat[r * n + c];
        }
        mg /= static_cast<double>(n);
        mgx /= static_cast<double>(n);
        for (std::size_t c = 0; c < n; ++c) {
            const std::size_t i = r * n + c;
            dx[i] += inv_std[r] * (gxhat[i] - mg - xhat[i] * mgx);
        }
    }
}

}  // namespace

Tensor layer_norm(const Tensor& x, double eps) {
    require_rank2("layer_norm", x);
    const std::size_t m = x.rows();
    const std::size_t n = x.cols();
    RowStats st = normalise_rows(x, eps);
    std::vector<double> out = st.xhat;
    return make_op({m, n}, std::move(out), {x.node()}, [m, n, st = std::move(st)](Node& self) {
        layer_norm_input_grad(m, n, st.xhat, st.inv_std, self.grad.data(),
                              self.parents[0]->ensure_grad());
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    require_rank2("layer_norm", x);
    const std::size_t m = x.rows();
    const std::size_t n = x.cols();
    if (gamma.size() != n) shape_error("layer_norm", x.shape(), gamma.shape());
    if (beta.size() != n) shape_error("layer_norm", x.shape(), beta.shape());
    RowStats st = normalise_rows(x, eps);
    std::vector<double> out(m * n);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            out[r * n + c] = st.xhat[r * n + c] * gamma[c] + beta[c];
        }
    }
    return make_op({m, n}, std::move(out), {x.node(), gamma.node(), beta.node()},
                   [m, n, st = std::move(st)](Node& self) {
                       Node& px = *self.parents[0];
                       Node& pg = *self.parents[1];
                       Node& pb = *self.parents[2];
                       if (pg.requires_grad) {
                           auto& gg = pg.ensure_grad();
                           for (std::size_t i = 0; i < m * n; ++i) gg[i % n] += self.grad[i] * st.xhat[i];
                       }
                       if (pb.requires_grad) {
                           auto& gb = pb.ensure_grad();
                           for (std::size_t i = 0; i < m * n; ++i) gb[i % n] += self.grad[i];
                       }
                       if (px.requires_grad) {
                           std::vector<double> gxhat(m * n);
                           for (std::size_t i = 0; i < m * n; ++i) gxhat[i] = self.grad[i] * pg.value[i % n];
                           layer_norm_input_grad(m, n, st.xhat, st.inv_std, gxhat.data(), px.ensure_grad());
                       }
                   });
}

Tensor relu(const Tensor& x) {
    return unary(
        x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
    static constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    static constexpr double kA = 0.044715;
    return unary(
        x,
        [](double v) { return 0.5 * v * (1.0 + std::tanh(kC * (v + kA * v * v * v))); },
        [](double v, double) {
            const double t = std::tanh(kC * (v + kA * v * v * v));
            return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kC * (1.0 + 3.0 * kA * v * v);
        });
}

Tensor exp(const Tensor& x) {
    return unary(
        x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
    return unary(
        x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor pow_scalar(const Tensor& x, double p) {
    if (p == 0.0) {
        std::vector<double> ones(x.size(), 1.0);
        return make_op(x.shape(), std::move(ones), {x.node()}, [](Node&) {});
    }
    return unary(
        x, [p](double v) { return std::pow(v, p); },
        [p](double v, double) { return p * std::pow(v, p - 1.0); });
}

Tensor masked_fill(const Tensor& x, const std::vector<bool>& mask, double value) {
    if (mask.size() != x.size()) {
        fail(ErrorKind::Dimension, "masked_fill: mask of " + std::to_string(mask.size()) +
                                       " entries for " + shape_string(x.shape()));
    }
    std::vector<double> out(x.data().begin(), x.data().end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (mask[i]) out[i] = value;
    }
    return make_op(x.shape(), std::move(out), {x.node()}, [mask](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!mask[i]) g[i] += self.grad[i];
        }
    });
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.data()) total += v;
    return make_op({}, {total}, {x.node()}, [](Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (double& v : g) v += self.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    if (x.size() == 0) fail(ErrorKind::Contract, "mean of an empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

}  // namespace ooc
