#include "denots/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace denots::ad {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

} // namespace

Var Tape::push(Node node) {
    grads_valid_ = false;
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
    check_same_tape(v, "node access");
    return nodes_[static_cast<std::size_t>(v.id)];
}

void Tape::check_same_tape(Var v, const char* op_name) const {
    if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
        throw std::invalid_argument(std::string(op_name) + ": Var does not belong to this tape");
    }
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.requires_grad = requires_grad;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    const Var vars[2] = {a, b};
    const double w[2] = {1.0, 1.0};
    return affine(vars, w);
}

Var Tape::sub(Var a, Var b) {
    const Var vars[2] = {a, b};
    const double w[2] = {1.0, -1.0};
    return affine(vars, w);
}

Var Tape::neg(Var a) { return scale(a, -1.0); }

Var Tape::scale(Var a, double c) {
    const Var vars[1] = {a};
    const double w[1] = {c};
    return affine(vars, w);
}

Var Tape::add_const(Var a, double c) {
    check_same_tape(a, "add_const");
    Node n;
    n.op = Op::AddConst;
    n.a = a.id;
    n.aux = static_cast<std::int32_t>(dpool_.size());
    dpool_.push_back(c);
    n.value = node(a).value;
    for (double& x : n.value.data()) x += c;
    return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
    check_same_tape(a, "mul");
    check_same_tape(b, "mul");
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    require(ta.same_shape(tb),
            "mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Node n;
    n.op = Op::Mul;
    n.a = a.id;
    n.b = b.id;
    n.value = Tensor(ta.shape());
    for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = ta[i] * tb[i];
    return push(std::move(n));
}

#define DENOTS_UNARY(NAME, OP_TAG, EXPR)                      \
    Var Tape::NAME(Var a) {                                   \
        check_same_tape(a, #NAME);                            \
        Node n;                                               \
        n.op = Op::OP_TAG;                                    \
        n.a = a.id;                                           \
        const Tensor& ta = node(a).value;                     \
        n.value = Tensor(ta.shape());                         \
        for (std::size_t i = 0; i < ta.size(); ++i) {         \
            const double x = ta[i];                           \
            n.value[i] = (EXPR);                              \
        }                                                     \
        return push(std::move(n));                            \
    }

DENOTS_UNARY(tanh, Tanh, std::tanh(x))
DENOTS_UNARY(sigmoid, Sigmoid, 1.0 / (1.0 + std::exp(-x)))
DENOTS_UNARY(relu, Relu, x > 0.0 ? x : 0.0)
DENOTS_UNARY(exp, Exp, std::exp(x))
DENOTS_UNARY(log, Log, std::log(x))

#undef DENOTS_UNARY

Var Tape::clamp(Var a, double lo, double hi) {
    check_same_tape(a, "clamp");
    require(lo < hi, "clamp: lo must be below hi");
    Node n;
    n.op = Op::Clamp;
    n.a = a.id;
    n.aux = static_cast<std::int32_t>(dpool_.size());
    dpool_.push_back(lo);
    dpool_.push_back(hi);
    const Tensor& ta = node(a).value;
    n.value = Tensor(ta.shape());
    for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = std::min(hi, std::max(lo, ta[i]));
    return push(std::move(n));
}

Var Tape::matvec(Var w, Var v) {
    check_same_tape(w, "matvec");
    check_same_tape(v, "matvec");
    const Tensor& tw = node(w).value;
    const Tensor& tv = node(v).value;
    require(tw.rank() == 2 && tv.rank() == 1,
            "matvec: expected matrix and vector, got " + tw.shape_str() + " and " + tv.shape_str());
    require(tw.cols() == tv.size(),
            "matvec: dimension mismatch " + tw.shape_str() + " vs " + tv.shape_str());
    Node n;
    n.op = Op::MatVec;
    n.a = w.id;
    n.b = v.id;
    n.value = Tensor({tw.rows()});
    for (std::size_t i = 0; i < tw.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < tw.cols(); ++j) acc += tw.at(i, j) * tv[j];
        n.value[i] = acc;
    }
    return push(std::move(n));
}

Var Tape::sum(Var a) {
    check_same_tape(a, "sum");
    Node n;
    n.op = Op::Sum;
    n.a = a.id;
    double acc = 0.0;
    for (double x : node(a).value.data()) acc += x;
    n.value = Tensor::scalar(acc);
    return push(std::move(n));
}

Var Tape::mean(Var a) {
    check_same_tape(a, "mean");
    const std::size_t n = node(a).value.size();
    require(n > 0, "mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var Tape::pick(Var a, std::size_t index) {
    check_same_tape(a, "pick");
    const Tensor& ta = node(a).value;
    require(index < ta.size(), "pick: index out of range");
    Node n;
    n.op = Op::Pick;
    n.a = a.id;
    n.aux = static_cast<std::int32_t>(ipool_.size());
    ipool_.push_back(static_cast<std::int64_t>(index));
    n.value = Tensor::scalar(ta[index]);
    return push(std::move(n));
}

Var Tape::concat(Var a, Var b) {
    check_same_tape(a, "concat");
    check_same_tape(b, "concat");
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    require(ta.rank() == 1 && tb.rank() == 1, "concat: vectors only");
    Node n;
    n.op = Op::Concat;
    n.a = a.id;
    n.b = b.id;
    std::vector<double> d;
    d.reserve(ta.size() + tb.size());
    d.insert(d.end(), ta.data().begin(), ta.data().end());
    d.insert(d.end(), tb.data().begin(), tb.data().end());
    n.value = Tensor({ta.size() + tb.size()}, std::move(d));
    return push(std::move(n));
}

Var Tape::affine(std::span<const Var> vars, std::span<const double> coeffs) {
    require(!vars.empty() && vars.size() == coeffs.size(), "affine: vars/coeffs size mismatch");
    for (Var v : vars) check_same_tape(v, "affine");
    const Tensor& t0 = node(vars[0]).value;
    for (std::size_t i = 1; i < vars.size(); ++i) {
        require(node(vars[i]).value.same_shape(t0),
                "affine: shape mismatch " + t0.shape_str() + " vs " +
                    node(vars[i]).value.shape_str());
    }
    Node n;
    n.op = Op::Affine;
    n.aux = static_cast<std::int32_t>(nary_.size());
    NarySpec spec;
    spec.offset = static_cast<std::uint32_t>(nary_ids_.size());
    spec.count = static_cast<std::uint32_t>(vars.size());
    for (std::size_t i = 0; i < vars.size(); ++i) {
        nary_ids_.push_back(vars[i].id);
        nary_w_.push_back(coeffs[i]);
    }
    nary_.push_back(spec);
    n.value = Tensor(t0.shape());
    for (std::size_t i = 0; i < vars.size(); ++i) {
        const Tensor& ti = node(vars[i]).value;
        const double c = coeffs[i];
        if (c == 0.0) continue;
        for (std::size_t j = 0; j < ti.size(); ++j) n.value[j] += c * ti[j];
    }
    return push(std::move(n));
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

double Tape::scalar_value(Var v) const {
    const Tensor& t = node(v).value;
    require(t.size() == 1, "scalar_value: tensor has " + std::to_string(t.size()) + " elements");
    return t[0];
}

void Tape::backward(Var output) {
    check_same_tape(output, "backward");
    const Tensor& out = node(output).value;
    require(out.size() == 1,
            "backward: output must be scalar, got shape " + out.shape_str());

    grads_.assign(nodes_.size(), Tensor());
    auto touch = [&](std::int32_t id) -> Tensor& {
        Tensor& g = grads_[static_cast<std::size_t>(id)];
        if (g.size() == 0) g = Tensor(nodes_[static_cast<std::size_t>(id)].value.shape());
        return g;
    };

    touch(output.id)[0] = 1.0;

    for (std::int32_t id = output.id; id >= 0; --id) {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        const Tensor& g = grads_[static_cast<std::size_t>(id)];
        if (g.size() == 0) continue; // not reached from the output

        switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Affine: {
            const NarySpec& spec = nary_[static_cast<std::size_t>(n.aux)];
            for (std::uint32_t k = 0; k < spec.count; ++k) {
                const std::int32_t src = nary_ids_[spec.offset + k];
                const double c = nary_w_[spec.offset + k];
                if (c == 0.0) continue;
                Tensor& gs = touch(src);
                for (std::size_t j = 0; j < g.size(); ++j) gs[j] += c * g[j];
            }
            break;
        }
        case Op::AddConst: {
            Tensor& ga = touch(n.a);
            for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j];
            break;
        }
        case Op::Mul: {
            const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
            const Tensor& vb = nodes_[static_cast<std::size_t>(n.b)].value;
            Tensor& ga = touch(n.a);
            for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] * vb[j];
            Tensor& gb = touch(n.b);
            for (std::size_t j = 0; j < g.size(); ++j) gb[j] += g[j] * va[j];
            break;
        }
        case Op::Tanh: {
            Tensor& ga = touch(n.a);
            for (std::size_t j = 0; j < g.size(); ++j) {
                const double y = n.value[j];
                ga[j] += g[j] * (1.0 - y * y);
            }
            break;
        }
        case Op::Sigmoid: {
            Tensor& ga = touch(n.a);
            for (std::size_t j = 0; j < g.size(); ++j) {
                const double y = n.value[j];
                ga[j] += g[j] * y * (1.0 - y);
            }
            break;
        }
        case Op::Relu: {
            // Subgradient 0 at the kink.
            const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
            Tensor& ga = touch(n.a);
            for (std::size_t j = 0; j < g.size(); ++j) ga[j] += va[j] > 0.0 ? g[j] : 0.0;
            break;
        }
        case Op::Exp: {
            Tensor& ga = touch(n.a);
            for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] * n.value[j];
            break;
        }
        case Op::Log: {
            const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
            Tensor& ga = touch(n.a);
            for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] / va[j];
            break;
        }
        case Op::Clamp: {
            const double lo = dpool_[static_cast<std::size_t>(n.aux)];
            const double hi = dpool_[static_cast<std::size_t>(n.aux) + 1];
            const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
            Tensor& ga = touch(n.a);
            for (std::size_t j = 0; j < g.size(); ++j) {
                ga[j] += (va[j] > lo && va[j] < hi) ? g[j] : 0.0;
            }
            break;
        }
        case Op::MatVec: {
            const Tensor& w = nodes_[static_cast<std::size_t>(n.a)].value;
            const Tensor& v = nodes_[static_cast<std::size_t>(n.b)].value;
            Tensor& gw = touch(n.a);
            for (std::size_t i = 0; i < w.rows(); ++i) {
                const double gi = g[i];
                if (gi == 0.0) continue;
                for (std::size_t j = 0; j < w.cols(); ++j) gw.at(i, j) += gi * v[j];
            }
            Tensor& gv = touch(n.b);
            for (std::size_t i = 0; i < w.rows(); ++i) {
                const double gi = g[i];
                if (gi == 0.0) continue;
                for (std::size_t j = 0; j < w.cols(); ++j) gv[j] += w.at(i, j) * gi;
            }
            break;
        }
        case Op::Sum: {
            Tensor& ga = touch(n.a);
            const double g0 = g[0];
            for (std::size_t j = 0; j < ga.size(); ++j) ga[j] += g0;
            break;
        }
        case Op::Pick: {
            const auto idx = static_cast<std::size_t>(ipool_[static_cast<std::size_t>(n.aux)]);
            touch(n.a)[idx] += g[0];
            break;
        }
        case Op::Concat: {
            Tensor& ga = touch(n.a);
            Tensor& gb = touch(n.b);
            const std::size_t na = ga.size();
            for (std::size_t j = 0; j < na; ++j) ga[j] += g[j];
            for (std::size_t j = 0; j < gb.size(); ++j) gb[j] += g[na + j];
            break;
        }
        }
    }
    grads_valid_ = true;
}

const Tensor& Tape::grad(Var v) const {
    check_same_tape(v, "grad");
    if (!grads_valid_) throw std::logic_error("grad: call backward() first");
    const Tensor& g = grads_[static_cast<std::size_t>(v.id)];
    if (g.size() == 0) {
        // Unreached nodes get a zero gradient of the right shape, cached so
        // repeated queries stay cheap.
        auto& slot = const_cast<Tape*>(this)->grads_[static_cast<std::size_t>(v.id)];
        slot = Tensor(nodes_[static_cast<std::size_t>(v.id)].value.shape());
        return slot;
    }
    return g;
}

void Tape::clear() {
    nodes_.clear();
    dpool_.clear();
    ipool_.clear();
    nary_.clear();
    nary_ids_.clear();
    nary_w_.clear();
    grads_.clear();
    grads_valid_ = false;
}

void Tape::rewind(std::size_t mark) {
    if (mark > nodes_.size()) throw std::invalid_argument("rewind: mark beyond tape end");
    // Pools are only appended to, so truncating to the high-water marks of
    // the surviving nodes keeps ids consistent.
    std::size_t dkeep = 0, ikeep = 0, nkeep = 0, nidkeep = 0;
    for (std::size_t i = 0; i < mark; ++i) {
        const Node& n = nodes_[i];
        switch (n.op) {
        case Op::AddConst:
            dkeep = std::max(dkeep, static_cast<std::size_t>(n.aux) + 1);
            break;
        case Op::Clamp:
            dkeep = std::max(dkeep, static_cast<std::size_t>(n.aux) + 2);
            break;
        case Op::Pick:
            ikeep = std::max(ikeep, static_cast<std::size_t>(n.aux) + 1);
            break;
        case Op::Affine: {
            nkeep = std::max(nkeep, static_cast<std::size_t>(n.aux) + 1);
            const NarySpec& spec = nary_[static_cast<std::size_t>(n.aux)];
            nidkeep = std::max(nidkeep, static_cast<std::size_t>(spec.offset + spec.count));
            break;
        }
        default:
            break;
        }
    }
    nodes_.resize(mark);
    dpool_.resize(dkeep);
    ipool_.resize(ikeep);
    nary_.resize(nkeep);
    nary_ids_.resize(nidkeep);
    nary_w_.resize(nidkeep);
    grads_.clear();
    grads_valid_ = false;
}

std::size_t Tape::kink_events(double window) const {
    std::size_t count = 0;
    for (const Node& n : nodes_) {
        if (n.op == Op::Relu) {
            const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
            for (double x : va.data()) {
                if (std::abs(x) < window) ++count;
            }
        } else if (n.op == Op::Clamp) {
            const double lo = dpool_[static_cast<std::size_t>(n.aux)];
            const double hi = dpool_[static_cast<std::size_t>(n.aux) + 1];
            const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
            for (double x : va.data()) {
                if (std::abs(x - lo) < window || std::abs(x - hi) < window) ++count;
            }
        }
    }
    return count;
}

Tensor& ParamSet::add(std::string name, Tensor init) {
    if (contains(name)) throw std::invalid_argument("ParamSet: duplicate name " + name);
    entries_.push_back({std::move(name), std::move(init)});
    return entries_.back().value;
}

bool ParamSet::contains(std::string_view name) const {
    for (const Entry& e : entries_) {
        if (e.name == name) return true;
    }
    return false;
}

Tensor& ParamSet::operator[](std::string_view name) {
    for (Entry& e : entries_) {
        if (e.name == name) return e.value;
    }
    throw std::out_of_range("ParamSet: no parameter named " + std::string(name));
}

const Tensor& ParamSet::operator[](std::string_view name) const {
    return const_cast<ParamSet*>(this)->operator[](name);
}

std::size_t ParamSet::total_size() const {
    std::size_t n = 0;
    for (const Entry& e : entries_) n += e.value.size();
    return n;
}

std::vector<double> ParamSet::pack() const {
    std::vector<double> flat;
    flat.reserve(total_size());
    for (const Entry& e : entries_) {
        flat.insert(flat.end(), e.value.data().begin(), e.value.data().end());
    }
    return flat;
}

void ParamSet::unpack(std::span<const double> flat) {
    if (flat.size() != total_size()) {
        throw std::invalid_argument("ParamSet::unpack: flat length " + std::to_string(flat.size()) +
                                    " != total size " + std::to_string(total_size()));
    }
    std::size_t off = 0;
    for (Entry& e : entries_) {
        std::copy(flat.begin() + off, flat.begin() + off + e.value.size(), e.value.data().begin());
        off += e.value.size();
    }
}

std::vector<Var> ParamSet::make_leaves(Tape& tape) const {
    std::vector<Var> leaves;
    leaves.reserve(entries_.size());
    for (const Entry& e : entries_) leaves.push_back(tape.leaf(e.value, true));
    return leaves;
}

double ParamSet::l2_norm() const {
    double acc = 0.0;
    for (const Entry& e : entries_) {
        for (double x : e.value.data()) acc += x * x;
    }
    return std::sqrt(acc);
}

GradCheckReport grad_check(const LossFn& f, ParamSet& params, double epsilon,
                           double kink_window, double floor) {
    if (epsilon <= 0.0) throw std::invalid_argument("grad_check: epsilon must be positive");

    Tape tape;
    std::vector<Var> leaves = params.make_leaves(tape);
    Var out = f(tape, leaves);
    tape.backward(out);
    std::vector<double> analytic;
    analytic.reserve(params.total_size());
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        const Tensor& g = tape.grad(leaves[i]);
        analytic.insert(analytic.end(), g.data().begin(), g.data().end());
    }

    std::vector<double> flat = params.pack();
    auto eval_at = [&](std::span<const double> point, bool* kinked) -> double {
        ParamSet local = params;
        local.unpack(point);
        Tape t;
        std::vector<Var> lv = local.make_leaves(t);
        Var o = f(t, lv);
        const double v = t.scalar_value(o);
        if (kinked != nullptr && kink_window > 0.0) {
            *kinked = *kinked || t.kink_events(kink_window) > 0;
        }
        return v;
    };

    GradCheckReport report;
    std::vector<double> probe = flat;
    std::size_t coord = 0;
    for (const auto& entry : params.entries()) {
        for (std::size_t j = 0; j < entry.value.size(); ++j, ++coord) {
            bool kinked = false;
            probe[coord] = flat[coord] + epsilon;
            const double fp = eval_at(probe, &kinked);
            probe[coord] = flat[coord] - epsilon;
            const double fm = eval_at(probe, &kinked);
            probe[coord] = flat[coord];
            if (kinked) {
                ++report.skipped;
                continue;
            }
            const double numeric = (fp - fm) / (2.0 * epsilon);
            const double a = analytic[coord];
            const double denom = std::max({std::abs(a), std::abs(numeric), floor});
            const double rel = std::abs(a - numeric) / denom;
            ++report.checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = entry.name;
                report.worst_index = j;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

} // namespace denots::ad
