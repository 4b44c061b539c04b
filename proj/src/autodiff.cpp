#include "eoflow/autodiff.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace eoflow::ad {

namespace {

using EMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMatrix>;
using ECMap = Eigen::Map<const EMatrix>;
using EVMap = Eigen::Map<Eigen::VectorXd>;
using ECVMap = Eigen::Map<const Eigen::VectorXd>;

bool scalar_like(const Tensor& t) { return t.size() == 1; }

[[noreturn]] void shape_fail(Op op, const Tensor& a, const Tensor* b) {
    std::string msg = std::string("primitive '") + op_name(op) + "' cannot combine shape " +
                      a.shape_str();
    if (b) msg += " with shape " + b->shape_str();
    throw shape_error(msg);
}

template <typename F>
Tensor ew_binary(Op op, const Tensor& a, const Tensor& b, F&& f) {
    if (a.same_shape(b)) {
        Tensor out = Tensor::zeros(a.shape());
        for (int64_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
        return out;
    }
    if (scalar_like(a)) {
        Tensor out = Tensor::zeros(b.shape());
        double av = a[0];
        for (int64_t i = 0; i < b.size(); ++i) out[i] = f(av, b[i]);
        return out;
    }
    if (scalar_like(b)) {
        Tensor out = Tensor::zeros(a.shape());
        double bv = b[0];
        for (int64_t i = 0; i < a.size(); ++i) out[i] = f(a[i], bv);
        return out;
    }
    shape_fail(op, a, &b);
}

template <typename F>
Tensor ew_unary(const Tensor& a, F&& f) {
    Tensor out = Tensor::zeros(a.shape());
    for (int64_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    return out;
}

double softplus_scalar(double x) {
    // log(1 + e^x) without overflow for large |x|.
    if (x > 0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

Tensor matmul_forward(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2) shape_fail(Op::matmul, a, &b);
    int64_t m = a.rows(), k = a.cols();
    if (b.rank() == 1) {
        if (b.extent(0) != k) shape_fail(Op::matmul, a, &b);
        Tensor out = Tensor::zeros({m});
        ECMap am(a.data(), m, k);
        ECVMap bv(b.data(), k);
        EVMap(out.data(), m) = am * bv;
        return out;
    }
    if (b.rank() == 2) {
        if (b.rows() != k) shape_fail(Op::matmul, a, &b);
        int64_t n = b.cols();
        Tensor out = Tensor::zeros({m, n});
        ECMap am(a.data(), m, k);
        ECMap bm(b.data(), k, n);
        EMap(out.data(), m, n) = am * bm;
        return out;
    }
    shape_fail(Op::matmul, a, &b);
}

Tensor transpose_forward(const Tensor& a) {
    if (a.rank() != 2) shape_fail(Op::transpose, a, nullptr);
    Tensor out = Tensor::zeros({a.cols(), a.rows()});
    for (int64_t i = 0; i < a.rows(); ++i)
        for (int64_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
    return out;
}

Tensor matinv_forward(const Tensor& a) {
    if (a.rank() != 2 || a.rows() != a.cols()) shape_fail(Op::matinv, a, nullptr);
    int64_t n = a.rows();
    ECMap am(a.data(), n, n);
    Eigen::PartialPivLU<EMatrix> lu(am);
    double det = lu.determinant();
    if (det == 0.0 || !std::isfinite(det)) {
        throw numeric_error("matinv: singular matrix of shape " + a.shape_str());
    }
    Tensor out = Tensor::zeros({n, n});
    EMap(out.data(), n, n) = lu.inverse();
    return out;
}

Tensor logabsdet_forward(const Tensor& a) {
    if (a.rank() != 2 || a.rows() != a.cols()) shape_fail(Op::logabsdet, a, nullptr);
    int64_t n = a.rows();
    ECMap am(a.data(), n, n);
    Eigen::PartialPivLU<EMatrix> lu(am);
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double u = lu.matrixLU()(i, i);
        if (u == 0.0 || !std::isfinite(u)) {
            throw numeric_error("logabsdet: singular matrix of shape " + a.shape_str());
        }
        acc += std::log(std::abs(u));
    }
    return Tensor::scalar(acc);
}

// Forward evaluation of a single node from operand values.
Tensor compute(Op op, const Tensor* a, const Tensor* b, double aux, int64_t lo, int64_t hi) {
    switch (op) {
        case Op::add: return ew_binary(op, *a, *b, [](double x, double y) { return x + y; });
        case Op::sub: return ew_binary(op, *a, *b, [](double x, double y) { return x - y; });
        case Op::mul: return ew_binary(op, *a, *b, [](double x, double y) { return x * y; });
        case Op::div: return ew_binary(op, *a, *b, [](double x, double y) { return x / y; });
        case Op::neg: return ew_unary(*a, [](double x) { return -x; });
        case Op::scale: return ew_unary(*a, [aux](double x) { return aux * x; });
        case Op::matmul: return matmul_forward(*a, *b);
        case Op::transpose: return transpose_forward(*a);
        case Op::exp_op: return ew_unary(*a, [](double x) { return std::exp(x); });
        case Op::log_op: return ew_unary(*a, [](double x) { return std::log(x); });
        case Op::tanh_op: return ew_unary(*a, [](double x) { return std::tanh(x); });
        case Op::softplus_op: return ew_unary(*a, softplus_scalar);
        case Op::sqrt_op: return ew_unary(*a, [](double x) { return std::sqrt(x); });
        case Op::sum: {
            double acc = 0.0;
            for (int64_t i = 0; i < a->size(); ++i) acc += (*a)[i];
            return Tensor::scalar(acc);
        }
        case Op::squared_norm: {
            double acc = 0.0;
            for (int64_t i = 0; i < a->size(); ++i) acc += (*a)[i] * (*a)[i];
            return Tensor::scalar(acc);
        }
        case Op::slice: {
            if (a->rank() != 1 || lo < 0 || hi > a->extent(0) || lo > hi) {
                throw shape_error("slice [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                  ") invalid for shape " + a->shape_str());
            }
            std::vector<double> vals(a->data() + lo, a->data() + hi);
            return Tensor({hi - lo}, std::move(vals));
        }
        case Op::concat: {
            if (a->rank() != 1 || b->rank() != 1) shape_fail(op, *a, b);
            std::vector<double> vals;
            vals.reserve(static_cast<size_t>(a->size() + b->size()));
            vals.insert(vals.end(), a->values().begin(), a->values().end());
            vals.insert(vals.end(), b->values().begin(), b->values().end());
            return Tensor({a->size() + b->size()}, std::move(vals));
        }
        case Op::matinv: return matinv_forward(*a);
        case Op::logabsdet: return logabsdet_forward(*a);
        case Op::leaf:
        case Op::constant: throw error("compute() called on a leaf node");
    }
    throw error("compute(): unknown op");
}

// Reduce an output-shaped gradient back to the shape of one operand,
// summing over broadcast positions.
Tensor reduce_to_operand(const Tensor& grad, const Tensor& operand) {
    if (grad.same_shape(operand)) return grad;
    double acc = 0.0;
    for (int64_t i = 0; i < grad.size(); ++i) acc += grad[i];
    Tensor out = Tensor::zeros(operand.shape());
    out[0] = acc;
    return out;
}

void axpy(Tensor& dst, const Tensor& src, double c = 1.0) {
    for (int64_t i = 0; i < dst.size(); ++i) dst[i] += c * src[i];
}

}  // namespace

const char* op_name(Op op) {
    switch (op) {
        case Op::leaf: return "leaf";
        case Op::constant: return "constant";
        case Op::add: return "add";
        case Op::sub: return "sub";
        case Op::neg: return "neg";
        case Op::mul: return "mul";
        case Op::div: return "div";
        case Op::scale: return "scale";
        case Op::matmul: return "matmul";
        case Op::transpose: return "transpose";
        case Op::exp_op: return "exp";
        case Op::log_op: return "log";
        case Op::tanh_op: return "tanh";
        case Op::softplus_op: return "softplus";
        case Op::sqrt_op: return "sqrt";
        case Op::sum: return "sum";
        case Op::squared_norm: return "squared_norm";
        case Op::slice: return "slice";
        case Op::concat: return "concat";
        case Op::matinv: return "matinv";
        case Op::logabsdet: return "logabsdet";
    }
    return "?";
}

const Tensor& Var::value() const { return tape_->node(id_).value; }

Var Tape::input(Tensor value) {
    Node n;
    n.op = Op::leaf;
    n.value = std::move(value);
    n.requires_grad = true;
    return emit(std::move(n));
}

Var Tape::constant(Tensor value) {
    Node n;
    n.op = Op::constant;
    n.value = std::move(value);
    n.requires_grad = false;
    return emit(std::move(n));
}

Var Tape::emit(Node node) {
    if (node.op != Op::leaf && node.op != Op::constant) {
        const Tensor* a = node.a >= 0 ? &nodes_[static_cast<size_t>(node.a)].value : nullptr;
        const Tensor* b = node.b >= 0 ? &nodes_[static_cast<size_t>(node.b)].value : nullptr;
        node.value = compute(node.op, a, b, node.aux, node.lo, node.hi);
        node.requires_grad = (node.a >= 0 && nodes_[static_cast<size_t>(node.a)].requires_grad) ||
                             (node.b >= 0 && nodes_[static_cast<size_t>(node.b)].requires_grad);
    }
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<int32_t>(nodes_.size() - 1));
}

Tensor Tape::replay(Var output) {
    std::vector<Tensor> values(nodes_.size());
    for (size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        if (n.op == Op::leaf || n.op == Op::constant) {
            values[i] = n.value;
        } else {
            const Tensor* a = n.a >= 0 ? &values[static_cast<size_t>(n.a)] : nullptr;
            const Tensor* b = n.b >= 0 ? &values[static_cast<size_t>(n.b)] : nullptr;
            values[i] = compute(n.op, a, b, n.aux, n.lo, n.hi);
        }
    }
    return values[static_cast<size_t>(output.id())];
}

std::vector<Tensor> Tape::backward(Var output) {
    if (output.tape() != this) throw error("backward: output var belongs to another tape");
    const Node& out_node = node(output.id());
    if (out_node.value.size() != 1) {
        throw shape_error("backward: output has shape " + out_node.value.shape_str() +
                          ", expected a scalar");
    }
    std::vector<Tensor> adj(nodes_.size());
    adj[static_cast<size_t>(output.id())] = [&] {
        Tensor seed = Tensor::zeros(out_node.value.shape());
        seed[0] = 1.0;
        return seed;
    }();

    auto acc = [&](int32_t id, const Tensor& delta) {
        if (id < 0) return;
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.requires_grad) return;
        Tensor& slot = adj[static_cast<size_t>(id)];
        if (slot.size() == 0 && n.value.size() != 0) slot = Tensor::zeros(n.value.shape());
        axpy(slot, delta);
    };

    for (int32_t id = output.id(); id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.requires_grad) continue;
        const Tensor& g = adj[static_cast<size_t>(id)];
        if (g.size() == 0) continue;
        const Tensor* av = n.a >= 0 ? &nodes_[static_cast<size_t>(n.a)].value : nullptr;
        const Tensor* bv = n.b >= 0 ? &nodes_[static_cast<size_t>(n.b)].value : nullptr;
        switch (n.op) {
            case Op::leaf:
            case Op::constant: break;
            case Op::add:
                acc(n.a, reduce_to_operand(g, *av));
                acc(n.b, reduce_to_operand(g, *bv));
                break;
            case Op::sub: {
                acc(n.a, reduce_to_operand(g, *av));
                Tensor gb = ew_unary(g, [](double x) { return -x; });
                acc(n.b, reduce_to_operand(gb, *bv));
                break;
            }
            case Op::neg: {
                acc(n.a, ew_unary(g, [](double x) { return -x; }));
                break;
            }
            case Op::mul: {
                Tensor ga = ew_binary(Op::mul, g, *bv, [](double x, double y) { return x * y; });
                Tensor gb = ew_binary(Op::mul, g, *av, [](double x, double y) { return x * y; });
                acc(n.a, reduce_to_operand(ga, *av));
                acc(n.b, reduce_to_operand(gb, *bv));
                break;
            }
            case Op::div: {
                Tensor ga = ew_binary(Op::div, g, *bv, [](double x, double y) { return x / y; });
                acc(n.a, reduce_to_operand(ga, *av));
                // d/db (a/b) = -a / b^2
                Tensor ab2 = ew_binary(Op::div, *av, *bv,
                                       [](double x, double y) { return -x / (y * y); });
                Tensor gb = ew_binary(Op::mul, g, ab2, [](double x, double y) { return x * y; });
                acc(n.b, reduce_to_operand(gb, *bv));
                break;
            }
            case Op::scale: {
                double c = n.aux;
                acc(n.a, ew_unary(g, [c](double x) { return c * x; }));
                break;
            }
            case Op::matmul: {
                int64_t m = av->rows(), k = av->cols();
                if (bv->rank() == 1) {
                    // out (m) = A (m,k) x (k)
                    Tensor ga = Tensor::zeros({m, k});
                    Tensor gb = Tensor::zeros({k});
                    ECVMap gv(g.data(), m);
                    ECVMap xv(bv->data(), k);
                    ECMap am(av->data(), m, k);
                    EMap(ga.data(), m, k) = gv * xv.transpose();
                    EVMap(gb.data(), k) = am.transpose() * gv;
                    acc(n.a, ga);
                    acc(n.b, gb);
                } else {
                    int64_t ncols = bv->cols();
                    Tensor ga = Tensor::zeros({m, k});
                    Tensor gb = Tensor::zeros({k, ncols});
                    ECMap gm(g.data(), m, ncols);
                    ECMap am(av->data(), m, k);
                    ECMap bm(bv->data(), k, ncols);
                    EMap(ga.data(), m, k) = gm * bm.transpose();
                    EMap(gb.data(), k, ncols) = am.transpose() * gm;
                    acc(n.a, ga);
                    acc(n.b, gb);
                }
                break;
            }
            case Op::transpose: {
                acc(n.a, transpose_forward(g));
                break;
            }
            case Op::exp_op: {
                Tensor ga = ew_binary(Op::mul, g, n.value, [](double x, double y) { return x * y; });
                acc(n.a, ga);
                break;
            }
            case Op::log_op: {
                Tensor ga = ew_binary(Op::div, g, *av, [](double x, double y) { return x / y; });
                acc(n.a, ga);
                break;
            }
            case Op::tanh_op: {
                Tensor ga = Tensor::zeros(av->shape());
                for (int64_t i = 0; i < ga.size(); ++i) {
                    double y = n.value[i];
                    ga[i] = g[i] * (1.0 - y * y);
                }
                acc(n.a, ga);
                break;
            }
            case Op::softplus_op: {
                Tensor ga = Tensor::zeros(av->shape());
                for (int64_t i = 0; i < ga.size(); ++i) {
                    double s = 1.0 / (1.0 + std::exp(-(*av)[i]));
                    ga[i] = g[i] * s;
                }
                acc(n.a, ga);
                break;
            }
            case Op::sqrt_op: {
                Tensor ga = Tensor::zeros(av->shape());
                for (int64_t i = 0; i < ga.size(); ++i) ga[i] = g[i] * 0.5 / n.value[i];
                acc(n.a, ga);
                break;
            }
            case Op::sum: {
                Tensor ga = Tensor::zeros(av->shape());
                double gs = g[0];
                for (int64_t i = 0; i < ga.size(); ++i) ga[i] = gs;
                acc(n.a, ga);
                break;
            }
            case Op::squared_norm: {
                Tensor ga = Tensor::zeros(av->shape());
                double gs = g[0];
                for (int64_t i = 0; i < ga.size(); ++i) ga[i] = 2.0 * gs * (*av)[i];
                acc(n.a, ga);
                break;
            }
            case Op::slice: {
                Tensor ga = Tensor::zeros(av->shape());
                for (int64_t i = n.lo; i < n.hi; ++i) ga[i] = g[i - n.lo];
                acc(n.a, ga);
                break;
            }
            case Op::concat: {
                int64_t na = av->size();
                Tensor ga = Tensor::zeros(av->shape());
                Tensor gb = Tensor::zeros(bv->shape());
                for (int64_t i = 0; i < na; ++i) ga[i] = g[i];
                for (int64_t i = 0; i < bv->size(); ++i) gb[i] = g[na + i];
                acc(n.a, ga);
                acc(n.b, gb);
                break;
            }
            case Op::matinv: {
                // d/dA of C = A^-1: adjoint is -C^T G C^T.
                int64_t dim = n.value.rows();
                ECMap cm(n.value.data(), dim, dim);
                ECMap gm(g.data(), dim, dim);
                Tensor ga = Tensor::zeros({dim, dim});
                EMap(ga.data(), dim, dim) = -(cm.transpose() * gm * cm.transpose());
                acc(n.a, ga);
                break;
            }
            case Op::logabsdet: {
                int64_t dim = av->rows();
                ECMap am(av->data(), dim, dim);
                Eigen::PartialPivLU<EMatrix> lu(am);
                Tensor ga = Tensor::zeros({dim, dim});
                EMap(ga.data(), dim, dim) = g[0] * lu.inverse().transpose();
                acc(n.a, ga);
                break;
            }
        }
    }
    return adj;
}

Tensor Tape::adjoint_or_zeros(const std::vector<Tensor>& adjoints, Var v) {
    const Tensor& slot = adjoints[static_cast<size_t>(v.id())];
    if (slot.size() != 0 || v.value().size() == 0) return slot;
    return Tensor::zeros(v.value().shape());
}

// --- Var primitives -------------------------------------------------------

namespace {

Var emit2(Op op, Var a, Var b) {
    if (a.tape() != b.tape()) throw error("operands recorded on different tapes");
    Node n;
    n.op = op;
    n.a = a.id();
    n.b = b.id();
    return a.tape()->emit(std::move(n));
}

Var emit1(Op op, Var a, double aux = 0.0, int64_t lo = 0, int64_t hi = 0) {
    Node n;
    n.op = op;
    n.a = a.id();
    n.aux = aux;
    n.lo = lo;
    n.hi = hi;
    return a.tape()->emit(std::move(n));
}

}  // namespace

Var add(Var a, Var b) { return emit2(Op::add, a, b); }
Var sub(Var a, Var b) { return emit2(Op::sub, a, b); }
Var neg(Var a) { return emit1(Op::neg, a); }
Var mul(Var a, Var b) { return emit2(Op::mul, a, b); }
Var div(Var a, Var b) { return emit2(Op::div, a, b); }
Var scale(Var a, double c) { return emit1(Op::scale, a, c); }
Var matmul(Var a, Var b) { return emit2(Op::matmul, a, b); }
Var transpose(Var a) { return emit1(Op::transpose, a); }
Var exp(Var a) { return emit1(Op::exp_op, a); }
Var log(Var a) { return emit1(Op::log_op, a); }
Var tanh(Var a) { return emit1(Op::tanh_op, a); }
Var softplus(Var a) { return emit1(Op::softplus_op, a); }
Var sqrt(Var a) { return emit1(Op::sqrt_op, a); }
Var sum(Var a) { return emit1(Op::sum, a); }
Var squared_norm(Var a) { return emit1(Op::squared_norm, a); }
Var slice(Var a, int64_t lo, int64_t hi) { return emit1(Op::slice, a, 0.0, lo, hi); }
Var concat(Var a, Var b) { return emit2(Op::concat, a, b); }
Var matinv(Var a) { return emit1(Op::matinv, a); }
Var logabsdet(Var a) { return emit1(Op::logabsdet, a); }

// --- dual primitives --------------------------------------------------------

namespace {

std::optional<Var> opt_add(std::optional<Var> x, std::optional<Var> y) {
    if (x && y) return add(*x, *y);
    if (x) return x;
    return y;
}

std::optional<Var> opt_sub(std::optional<Var> x, std::optional<Var> y) {
    if (x && y) return sub(*x, *y);
    if (x) return x;
    if (y) return neg(*y);
    return std::nullopt;
}

// Broadcast a (possibly scalar) tangent up to the primal's shape so that
// shape-sensitive consumers (slice, concat, matmul) stay valid.
std::optional<Var> conform(std::optional<Var> t, const Var& primal) {
    if (!t) return t;
    if (t->value().same_shape(primal.value())) return t;
    Var zeros = primal.tape()->constant(Tensor::zeros(primal.value().shape()));
    return add(*t, zeros);
}

}  // namespace

DualVar add(DualVar a, DualVar b) {
    Var p = add(a.primal, b.primal);
    DualVar out(p);
    out.tangent = conform(opt_add(a.tangent, b.tangent), p);
    return out;
}

DualVar sub(DualVar a, DualVar b) {
    Var p = sub(a.primal, b.primal);
    DualVar out(p);
    out.tangent = conform(opt_sub(a.tangent, b.tangent), p);
    return out;
}

DualVar neg(DualVar a) {
    DualVar out(neg(a.primal));
    if (a.tangent) out.tangent = neg(*a.tangent);
    return out;
}

DualVar mul(DualVar a, DualVar b) {
    Var p = mul(a.primal, b.primal);
    DualVar out(p);
    std::optional<Var> t1, t2;
    if (a.tangent) t1 = mul(*a.tangent, b.primal);
    if (b.tangent) t2 = mul(a.primal, *b.tangent);
    out.tangent = conform(opt_add(t1, t2), p);
    return out;
}

DualVar div(DualVar a, DualVar b) {
    Var p = div(a.primal, b.primal);
    DualVar out(p);
    std::optional<Var> t1, t2;
    if (a.tangent) t1 = div(*a.tangent, b.primal);
    if (b.tangent) t2 = mul(p, div(*b.tangent, b.primal));
    out.tangent = conform(opt_sub(t1, t2), p);
    return out;
}

DualVar scale(DualVar a, double c) {
    DualVar out(scale(a.primal, c));
    if (a.tangent) out.tangent = scale(*a.tangent, c);
    return out;
}

DualVar matmul(DualVar a, DualVar b) {
    DualVar out(matmul(a.primal, b.primal));
    std::optional<Var> t1, t2;
    if (a.tangent) t1 = matmul(*a.tangent, b.primal);
    if (b.tangent) t2 = matmul(a.primal, *b.tangent);
    out.tangent = opt_add(t1, t2);
    return out;
}

DualVar transpose(DualVar a) {
    DualVar out(transpose(a.primal));
    if (a.tangent) out.tangent = transpose(*a.tangent);
    return out;
}

DualVar exp(DualVar a) {
    Var p = exp(a.primal);
    DualVar out(p);
    if (a.tangent) out.tangent = mul(p, *a.tangent);
    return out;
}

DualVar log(DualVar a) {
    DualVar out(log(a.primal));
    if (a.tangent) out.tangent = div(*a.tangent, a.primal);
    return out;
}

DualVar tanh(DualVar a) {
    Var p = tanh(a.primal);
    DualVar out(p);
    if (a.tangent) {
        Var one = a.primal.tape()->constant(Tensor::scalar(1.0));
        out.tangent = mul(sub(one, mul(p, p)), *a.tangent);
    }
    return out;
}

DualVar softplus(DualVar a) {
    Var p = softplus(a.primal);
    DualVar out(p);
    if (a.tangent) {
        // sigmoid(x) = exp(x - softplus(x)), stable for both signs of x
        out.tangent = mul(exp(sub(a.primal, p)), *a.tangent);
    }
    return out;
}

DualVar sqrt(DualVar a) {
    Var p = sqrt(a.primal);
    DualVar out(p);
    if (a.tangent) out.tangent = div(*a.tangent, scale(p, 2.0));
    return out;
}

DualVar sum(DualVar a) {
    DualVar out(sum(a.primal));
    if (a.tangent) out.tangent = sum(*a.tangent);
    return out;
}

DualVar squared_norm(DualVar a) {
    DualVar out(squared_norm(a.primal));
    if (a.tangent) out.tangent = scale(sum(mul(a.primal, *a.tangent)), 2.0);
    return out;
}

DualVar slice(DualVar a, int64_t lo, int64_t hi) {
    DualVar out(slice(a.primal, lo, hi));
    if (a.tangent) out.tangent = slice(*a.tangent, lo, hi);
    return out;
}

DualVar concat(DualVar a, DualVar b) {
    DualVar out(concat(a.primal, b.primal));
    if (a.tangent || b.tangent) {
        Tape* tape = a.primal.tape();
        Var ta = a.tangent ? *a.tangent : tape->constant(Tensor::zeros(a.primal.value().shape()));
        Var tb = b.tangent ? *b.tangent : tape->constant(Tensor::zeros(b.primal.value().shape()));
        out.tangent = concat(ta, tb);
    }
    return out;
}

DualVar matinv(DualVar a) {
    Var p = matinv(a.primal);
    DualVar out(p);
    if (a.tangent) out.tangent = neg(matmul(matmul(p, *a.tangent), p));
    return out;
}

DualVar logabsdet(DualVar a) {
    DualVar out(logabsdet(a.primal));
    if (a.tangent) {
        // d log|det A| = tr(A^-1 dA) = <(A^-1)^T, dA>
        Var inv = matinv(a.primal);
        out.tangent = sum(mul(transpose(inv), *a.tangent));
    }
    return out;
}

}  // namespace eoflow::ad
