#pragma once

#include "denots/tensor.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace denots::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; owns nothing.
struct Var {
    Tape* tape = nullptr;
    std::int32_t id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
};

enum class Op : std::uint8_t {
    Leaf,
    Affine, // n-ary: sum_i c_i * v_i (covers add/sub/neg/scale/RK combinations)
    AddConst,
    Mul,
    Tanh,
    Sigmoid,
    Relu,
    Exp,
    Log,
    Clamp,
    MatVec,
    Sum,
    Pick,
    Concat,
};

// Append-only tape of tensor operations with reverse-mode gradients.
// Topological order equals append order; replay of the same op sequence on
// the same inputs is bit-identical. Single-threaded by construction.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad = false);
    Var constant(double v) { return leaf(Tensor::scalar(v)); }

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var neg(Var a);
    Var scale(Var a, double c);
    Var add_const(Var a, double c);
    Var mul(Var a, Var b);
    Var tanh(Var a);
    Var sigmoid(Var a);
    Var relu(Var a);
    Var exp(Var a);
    Var log(Var a);
    Var clamp(Var a, double lo, double hi);
    Var matvec(Var w, Var v);
    Var sum(Var a);
    Var mean(Var a);
    Var pick(Var a, std::size_t index);
    Var concat(Var a, Var b);
    // out = sum_i coeffs[i] * vars[i]; all vars share one shape.
    Var affine(std::span<const Var> vars, std::span<const double> coeffs);

    const Tensor& value(Var v) const;
    double scalar_value(Var v) const;

    // Reverse sweep from a scalar output. Gradients of all earlier nodes
    // become available through grad(); unreached nodes report zeros.
    void backward(Var output);
    const Tensor& grad(Var v) const;

    std::size_t size() const { return nodes_.size(); }
    void clear();
    // Truncates the tape back to a previous size(); used to bound memory
    // when many independent forward passes share one tape.
    void rewind(std::size_t mark);

    // Number of Relu/Clamp nodes whose input sits within `window` of a
    // non-differentiable point; lets finite-difference checks skip kinks.
    std::size_t kink_events(double window) const;

private:
    struct Node {
        Op op = Op::Leaf;
        std::int32_t a = -1;
        std::int32_t b = -1;
        std::int32_t aux = -1;
        bool requires_grad = false;
        Tensor value;
    };

    struct NarySpec {
        std::uint32_t offset = 0;
        std::uint32_t count = 0;
    };

    Var push(Node node);
    const Node& node(Var v) const;
    void check_same_tape(Var v, const char* op_name) const;

    std::vector<Node> nodes_;
    std::vector<double> dpool_;       // Scale/AddConst: 1 slot, Clamp: 2 slots
    std::vector<std::int64_t> ipool_; // Pick: element index
    std::vector<NarySpec> nary_;
    std::vector<std::int32_t> nary_ids_;
    std::vector<double> nary_w_;

    std::vector<Tensor> grads_;
    bool grads_valid_ = false;
};

inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator-(Var a) { return a.tape->neg(a); }
inline Var operator*(double c, Var a) { return a.tape->scale(a, c); }
inline Var operator*(Var a, double c) { return a.tape->scale(a, c); }

// Named parameter tensors with a stable flat-vector view for optimizers.
class ParamSet {
public:
    struct Entry {
        std::string name;
        Tensor value;
    };

    Tensor& add(std::string name, Tensor init);
    bool contains(std::string_view name) const;
    Tensor& operator[](std::string_view name);
    const Tensor& operator[](std::string_view name) const;

    std::size_t count() const { return entries_.size(); }
    std::size_t total_size() const;
    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }

    std::vector<double> pack() const;
    void unpack(std::span<const double> flat);

    // Leaf Vars in entry order, all marked as gradient roots.
    std::vector<Var> make_leaves(Tape& tape) const;

    double l2_norm() const;

private:
    std::vector<Entry> entries_;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0; // kink-adjacent coordinates, if a window was given
};

using LossFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Compares reverse-mode gradients of f against central finite differences,
// coordinate by coordinate over the flattened ParamSet. `floor` cushions the
// relative comparison for near-zero gradients.
GradCheckReport grad_check(const LossFn& f, ParamSet& params, double epsilon,
                           double kink_window = 0.0, double floor = 1e-6);

} // namespace denots::ad
