#ifndef EOFLOW_AUTODIFF_HPP
#define EOFLOW_AUTODIFF_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "eoflow/tensor.hpp"

namespace eoflow::ad {

enum class Op : uint8_t {
    leaf,          // differentiable input
    constant,      // fixed value, no gradient
    add,
    sub,
    neg,
    mul,           // elementwise; either side may be a 1-element scalar
    div,           // elementwise; either side may be a 1-element scalar
    scale,         // value * aux double
    matmul,        // (m,k)x(k,n) -> (m,n) or (m,k)x(k) -> (m)
    transpose,
    exp_op,
    log_op,
    tanh_op,
    softplus_op,
    sqrt_op,
    sum,           // all elements -> scalar
    squared_norm,  // sum of squares -> scalar
    slice,         // contiguous flat range [lo, hi)
    concat,        // flat concatenation of two rank-1 tensors
    matinv,        // square matrix inverse
    logabsdet,     // log |det| of a square matrix -> scalar
};

const char* op_name(Op op);

// One recorded primitive: operands, auxiliary attributes and the eagerly
// computed result. A tape of these is the computation record; replaying the
// nodes in order reproduces the recorded outputs bit-identically.
struct Node {
    Op op = Op::leaf;
    int32_t a = -1;
    int32_t b = -1;
    double aux = 0.0;
    int64_t lo = 0;
    int64_t hi = 0;
    Tensor value;
    bool requires_grad = false;
};

class Tape;

// Lightweight handle to a tape node.
class Var {
  public:
    Var() = default;
    Var(Tape* tape, int32_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    int32_t id() const { return id_; }
    Tape* tape() const { return tape_; }
    bool valid() const { return tape_ != nullptr && id_ >= 0; }

  private:
    Tape* tape_ = nullptr;
    int32_t id_ = -1;
};

// Eagerly-evaluated computation record. Single-threaded per instance;
// distinct tapes may live on distinct threads.
class Tape {
  public:
    Var input(Tensor value);     // differentiable leaf
    Var constant(Tensor value);  // non-differentiable leaf

    size_t size() const { return nodes_.size(); }
    const Node& node(int32_t id) const { return nodes_[static_cast<size_t>(id)]; }

    // Recomputes every non-leaf value from the recorded leaves and returns the
    // value of `output` (used to verify deterministic replay).
    Tensor replay(Var output);

    // Reverse pass from a scalar output. Returns one adjoint per node;
    // nodes never reached (or without requires_grad) carry empty tensors.
    std::vector<Tensor> backward(Var output);

    // Adjoint of a specific leaf after backward(); zeros if untouched.
    static Tensor adjoint_or_zeros(const std::vector<Tensor>& adjoints, Var v);

    Var emit(Node node);

  private:
    friend class Var;
    std::vector<Node> nodes_;
};

// --- primitive surface -------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var neg(Var a);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double c);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var exp(Var a);
Var log(Var a);
Var tanh(Var a);
Var softplus(Var a);
Var sqrt(Var a);
Var sum(Var a);
Var squared_norm(Var a);
Var slice(Var a, int64_t lo, int64_t hi);
Var concat(Var a, Var b);
Var matinv(Var a);
Var logabsdet(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }

// Dot product of two equally-shaped tensors.
inline Var dot(Var a, Var b) { return sum(mul(a, b)); }

// --- forward-mode duals -------------------------------------------------
//
// A DualVar carries a primal node and an optional tangent node. The tangent
// is itself built from tape primitives, so a reverse pass over the tape
// differentiates through any directional derivative (one reverse pass nested
// outside one forward pass). A missing tangent means "structurally zero".
struct DualVar {
    Var primal;
    std::optional<Var> tangent;

    DualVar() = default;
    DualVar(Var p) : primal(p) {}  // implicit: plain Var lifts to zero tangent
    DualVar(Var p, Var t) : primal(p), tangent(t) {}

    const Tensor& value() const { return primal.value(); }
};

DualVar add(DualVar a, DualVar b);
DualVar sub(DualVar a, DualVar b);
DualVar neg(DualVar a);
DualVar mul(DualVar a, DualVar b);
DualVar div(DualVar a, DualVar b);
DualVar scale(DualVar a, double c);
DualVar matmul(DualVar a, DualVar b);
DualVar transpose(DualVar a);
DualVar exp(DualVar a);
DualVar log(DualVar a);
DualVar tanh(DualVar a);
DualVar softplus(DualVar a);
DualVar sqrt(DualVar a);
DualVar sum(DualVar a);
DualVar squared_norm(DualVar a);
DualVar slice(DualVar a, int64_t lo, int64_t hi);
DualVar concat(DualVar a, DualVar b);
DualVar matinv(DualVar a);
DualVar logabsdet(DualVar a);

inline DualVar operator+(DualVar a, DualVar b) { return add(a, b); }
inline DualVar operator-(DualVar a, DualVar b) { return sub(a, b); }
inline DualVar operator-(DualVar a) { return neg(a); }
inline DualVar operator*(DualVar a, DualVar b) { return mul(a, b); }
inline DualVar operator/(DualVar a, DualVar b) { return div(a, b); }
inline DualVar dot(DualVar a, DualVar b) { return sum(mul(a, b)); }

// --- program-level entry points -----------------------------------------

// Runs a program written against the primitive surface on fresh inputs.
// F: (Tape&, const std::vector<Var>&) -> std::vector<Var>
template <typename F>
std::vector<Tensor> evaluate(F&& program, const std::vector<Tensor>& inputs) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (const Tensor& t : inputs) vars.push_back(tape.input(t));
    std::vector<Var> outs = program(tape, vars);
    std::vector<Tensor> result;
    result.reserve(outs.size());
    for (Var v : outs) result.push_back(v.value());
    return result;
}

// Exact reverse-mode gradients of a scalar program for the requested leaves.
// F: (Tape&, const std::vector<Var>&) -> Var (must be scalar).
template <typename F>
std::vector<Tensor> gradient(F&& scalar_program, const std::vector<Tensor>& at,
                             const std::vector<size_t>& wrt) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(at.size());
    for (const Tensor& t : at) vars.push_back(tape.input(t));
    Var out = scalar_program(tape, vars);
    if (out.value().size() != 1) {
        throw shape_error("gradient: program output has shape " + out.value().shape_str() +
                          ", expected a scalar");
    }
    std::vector<Tensor> adjoints = tape.backward(out);
    std::vector<Tensor> grads;
    grads.reserve(wrt.size());
    for (size_t i : wrt) {
        if (i >= vars.size()) throw config_error("gradient: wrt index out of range");
        grads.push_back(Tape::adjoint_or_zeros(adjoints, vars[i]));
    }
    return grads;
}

// Value and directional derivative J(at) . tangent of a one-in/one-out
// program. F: (Tape&, DualVar) -> DualVar.
template <typename F>
std::pair<Tensor, Tensor> jvp(F&& program, const Tensor& at, const Tensor& tangent) {
    if (at.shape() != tangent.shape()) {
        throw shape_error("jvp: tangent shape " + shape_to_string(tangent.shape()) +
                          " does not match input shape " + shape_to_string(at.shape()));
    }
    Tape tape;
    DualVar x(tape.input(at), tape.constant(tangent));
    DualVar y = program(tape, x);
    Tensor dy = y.tangent ? y.tangent->value() : Tensor::zeros(y.primal.value().shape());
    return {y.primal.value(), dy};
}

}  // namespace eoflow::ad

#endif
