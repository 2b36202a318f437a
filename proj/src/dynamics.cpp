#include "denots/dynamics.hpp"

#include "denots/rng.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace denots {

namespace {

const char* kGruNames[] = {"W_ir", "W_iz", "W_in", "W_hr", "W_hz", "W_hn",
                           "b_ir", "b_iz", "b_in", "b_hr", "b_hz", "b_hn"};

Tensor uniform_tensor(std::vector<std::size_t> shape, double bound, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : t.data()) x = dist(rng);
    return t;
}

void matvec_add(const Tensor& w, std::span<const double> v, std::span<double> acc) {
    for (std::size_t i = 0; i < w.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < w.cols(); ++j) s += w.at(i, j) * v[j];
        acc[i] += s;
    }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

std::string_view to_string(FieldKind kind) {
    switch (kind) {
    case FieldKind::NoNF: return "no_nf";
    case FieldKind::SyncNF: return "sync_nf";
    case FieldKind::AntiNF: return "anti_nf";
    case FieldKind::MlpTanh: return "mlp_tanh";
    case FieldKind::MlpRelu: return "mlp_relu";
    }
    return "unknown";
}

FieldKind field_kind_from_string(std::string_view name) {
    if (name == "no_nf") return FieldKind::NoNF;
    if (name == "sync_nf") return FieldKind::SyncNF;
    if (name == "anti_nf") return FieldKind::AntiNF;
    if (name == "mlp_tanh") return FieldKind::MlpTanh;
    if (name == "mlp_relu") return FieldKind::MlpRelu;
    throw std::invalid_argument("unknown field kind: " + std::string(name));
}

bool is_gru_field(FieldKind kind) {
    return kind == FieldKind::NoNF || kind == FieldKind::SyncNF || kind == FieldKind::AntiNF;
}

double ScaleConfig::factor() const {
    if (!(scale_d > 0.0) || !(normalizer > 0.0)) {
        throw std::invalid_argument("ScaleConfig: D and M must be positive");
    }
    return scale_d / normalizer;
}

TimeSeries scale_times(TimeSeries series, const ScaleConfig& cfg) {
    const double f = cfg.factor();
    for (double& t : series.times) t *= f;
    return series;
}

ad::ParamSet init_field_params(FieldKind kind, std::size_t input_dim, std::size_t hidden_dim,
                               std::uint64_t seed) {
    if (input_dim == 0 || hidden_dim == 0) {
        throw std::invalid_argument("init_field_params: dims must be positive");
    }
    auto rng = substream(seed, "field_init");
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    ad::ParamSet p;
    if (is_gru_field(kind)) {
        for (int i = 0; i < 3; ++i) {
            p.add(kGruNames[i], uniform_tensor({hidden_dim, input_dim}, bound, rng));
        }
        for (int i = 3; i < 6; ++i) {
            p.add(kGruNames[i], uniform_tensor({hidden_dim, hidden_dim}, bound, rng));
        }
        for (int i = 6; i < 12; ++i) {
            p.add(kGruNames[i], uniform_tensor({hidden_dim}, bound, rng));
        }
    } else {
        p.add("W1", uniform_tensor({hidden_dim, input_dim + hidden_dim}, bound, rng));
        p.add("b1", uniform_tensor({hidden_dim}, bound, rng));
        p.add("W2", uniform_tensor({hidden_dim, hidden_dim}, bound, rng));
        p.add("b2", uniform_tensor({hidden_dim}, bound, rng));
    }
    return p;
}

FieldDims field_dims(FieldKind kind, const ad::ParamSet& params) {
    FieldDims d;
    if (is_gru_field(kind)) {
        d.hidden = params["W_hr"].rows();
        d.input = params["W_ir"].cols();
    } else {
        d.hidden = params["W2"].rows();
        d.input = params["W1"].cols() - d.hidden;
    }
    return d;
}

FieldView make_field_view(FieldKind kind, const ad::ParamSet& params) {
    FieldView view;
    view.kind = kind;
    if (is_gru_field(kind)) {
        for (const char* name : kGruNames) view.slots.push_back(&params[name]);
    } else {
        for (const char* name : {"W1", "b1", "W2", "b2"}) view.slots.push_back(&params[name]);
    }
    return view;
}

GruGatesOut gru_gates(const FieldView& view, std::span<const double> x,
                      std::span<const double> h) {
    const Tensor& w_ir = *view.slots[0];
    const Tensor& w_iz = *view.slots[1];
    const Tensor& w_in = *view.slots[2];
    const Tensor& w_hr = *view.slots[3];
    const Tensor& w_hz = *view.slots[4];
    const Tensor& w_hn = *view.slots[5];
    const Tensor& b_ir = *view.slots[6];
    const Tensor& b_iz = *view.slots[7];
    const Tensor& b_in = *view.slots[8];
    const Tensor& b_hr = *view.slots[9];
    const Tensor& b_hz = *view.slots[10];
    const Tensor& b_hn = *view.slots[11];

    const std::size_t v = w_hr.rows();
    if (h.size() != v || x.size() != w_ir.cols()) {
        throw std::invalid_argument("gru_gates: input/hidden size mismatch");
    }
    GruGatesOut out;
    out.r.assign(v, 0.0);
    out.z.assign(v, 0.0);
    out.n.assign(v, 0.0);

    std::vector<double> pre(v);

    // r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
    for (std::size_t i = 0; i < v; ++i) pre[i] = b_ir[i] + b_hr[i];
    matvec_add(w_ir, x, pre);
    matvec_add(w_hr, h, pre);
    for (std::size_t i = 0; i < v; ++i) out.r[i] = sigmoid(pre[i]);

    // z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
    for (std::size_t i = 0; i < v; ++i) pre[i] = b_iz[i] + b_hz[i];
    matvec_add(w_iz, x, pre);
    matvec_add(w_hz, h, pre);
    for (std::size_t i = 0; i < v; ++i) out.z[i] = sigmoid(pre[i]);

    // n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
    std::vector<double> hn(v);
    for (std::size_t i = 0; i < v; ++i) hn[i] = b_hn[i];
    matvec_add(w_hn, h, hn);
    for (std::size_t i = 0; i < v; ++i) pre[i] = b_in[i] + out.r[i] * hn[i];
    matvec_add(w_in, x, pre);
    for (std::size_t i = 0; i < v; ++i) out.n[i] = std::tanh(pre[i]);

    return out;
}

GruGatesOut gru_gates(const ad::ParamSet& params, std::span<const double> x,
                      std::span<const double> h) {
    if (!params.contains("W_hr")) throw std::invalid_argument("gru_gates: not a GRU parameter set");
    return gru_gates(make_field_view(FieldKind::NoNF, params), x, h);
}

void eval_field(const FieldView& view, std::span<const double> x, std::span<const double> h,
                std::span<double> out) {
    if (out.size() != h.size()) throw std::invalid_argument("eval_field: output size mismatch");
    const std::size_t v = h.size();
    switch (view.kind) {
    case FieldKind::NoNF: {
        GruGatesOut g = gru_gates(view, x, h);
        for (std::size_t i = 0; i < v; ++i) {
            out[i] = (1.0 - g.z[i]) * g.n[i] + g.z[i] * h[i];
        }
        break;
    }
    case FieldKind::SyncNF: {
        GruGatesOut g = gru_gates(view, x, h);
        for (std::size_t i = 0; i < v; ++i) {
            out[i] = (1.0 - g.z[i]) * (g.n[i] - h[i]);
        }
        break;
    }
    case FieldKind::AntiNF: {
        // Gates see the negated hidden state; the update term keeps the GRU
        // form, which lands on (1 - z) n - z h.
        std::vector<double> neg_h(v);
        for (std::size_t i = 0; i < v; ++i) neg_h[i] = -h[i];
        GruGatesOut g = gru_gates(view, x, neg_h);
        for (std::size_t i = 0; i < v; ++i) {
            out[i] = (1.0 - g.z[i]) * g.n[i] + g.z[i] * neg_h[i];
        }
        break;
    }
    case FieldKind::MlpTanh:
    case FieldKind::MlpRelu: {
        const Tensor& w1 = *view.slots[0];
        const Tensor& b1 = *view.slots[1];
        const Tensor& w2 = *view.slots[2];
        const Tensor& b2 = *view.slots[3];
        if (w1.cols() != x.size() + v) {
            throw std::invalid_argument("eval_field: MLP input size mismatch");
        }
        std::vector<double> joint(x.size() + v);
        std::copy(x.begin(), x.end(), joint.begin());
        std::copy(h.begin(), h.end(), joint.begin() + static_cast<std::ptrdiff_t>(x.size()));
        std::vector<double> hidden(w1.rows());
        for (std::size_t i = 0; i < w1.rows(); ++i) hidden[i] = b1[i];
        matvec_add(w1, joint, hidden);
        if (view.kind == FieldKind::MlpTanh) {
            for (double& s : hidden) s = std::tanh(s);
        } else {
            for (double& s : hidden) s = s > 0.0 ? s : 0.0;
        }
        for (std::size_t i = 0; i < v; ++i) out[i] = b2[i];
        matvec_add(w2, hidden, out);
        if (view.kind == FieldKind::MlpTanh) {
            for (double& s : out) s = std::tanh(s);
        }
        break;
    }
    }
}

void eval_field(FieldKind kind, const ad::ParamSet& params, std::span<const double> x,
                std::span<const double> h, std::span<double> out) {
    eval_field(make_field_view(kind, params), x, h, out);
}

std::vector<double> eval_field(FieldKind kind, const ad::ParamSet& params,
                               std::span<const double> x, std::span<const double> h) {
    std::vector<double> out(h.size());
    eval_field(kind, params, x, h, out);
    return out;
}

FieldLeaves make_field_leaves(FieldKind kind, const ad::ParamSet& params, ad::Tape& tape) {
    return FieldLeaves{kind, params.make_leaves(tape)};
}

namespace {

struct GruLeafView {
    ad::Var w_ir, w_iz, w_in, w_hr, w_hz, w_hn;
    ad::Var b_ir, b_iz, b_in, b_hr, b_hz, b_hn;
};

GruLeafView gru_view(const FieldLeaves& f) {
    const auto& l = f.leaves;
    if (l.size() != 12) throw std::invalid_argument("gru_view: expected 12 GRU parameters");
    return {l[0], l[1], l[2], l[3], l[4], l[5], l[6], l[7], l[8], l[9], l[10], l[11]};
}

} // namespace

GruGatesVar gru_gates(ad::Tape& tape, const FieldLeaves& field, ad::Var x, ad::Var h) {
    GruLeafView g = gru_view(field);
    // Keep the accumulation order identical to the raw path: biases first,
    // then the input product, then the hidden product.
    auto pre_gate = [&](ad::Var w_i, ad::Var w_h, ad::Var b_i, ad::Var b_h) {
        ad::Var bias = tape.add(b_i, b_h);
        ad::Var acc = tape.add(bias, tape.matvec(w_i, x));
        return tape.add(acc, tape.matvec(w_h, h));
    };
    GruGatesVar out;
    out.r = tape.sigmoid(pre_gate(g.w_ir, g.w_hr, g.b_ir, g.b_hr));
    out.z = tape.sigmoid(pre_gate(g.w_iz, g.w_hz, g.b_iz, g.b_hz));
    ad::Var hn = tape.add(g.b_hn, tape.matvec(g.w_hn, h));
    ad::Var pre_n = tape.add(tape.add(g.b_in, tape.mul(out.r, hn)), tape.matvec(g.w_in, x));
    out.n = tape.tanh(pre_n);
    return out;
}

ad::Var eval_field(ad::Tape& tape, const FieldLeaves& field, ad::Var x, ad::Var h) {
    switch (field.kind) {
    case FieldKind::NoNF: {
        GruGatesVar g = gru_gates(tape, field, x, h);
        ad::Var one_minus_z = tape.add_const(tape.neg(g.z), 1.0);
        return tape.add(tape.mul(one_minus_z, g.n), tape.mul(g.z, h));
    }
    case FieldKind::SyncNF: {
        GruGatesVar g = gru_gates(tape, field, x, h);
        ad::Var one_minus_z = tape.add_const(tape.neg(g.z), 1.0);
        return tape.mul(one_minus_z, tape.sub(g.n, h));
    }
    case FieldKind::AntiNF: {
        ad::Var neg_h = tape.neg(h);
        GruGatesVar g = gru_gates(tape, field, x, neg_h);
        ad::Var one_minus_z = tape.add_const(tape.neg(g.z), 1.0);
        return tape.add(tape.mul(one_minus_z, g.n), tape.mul(g.z, neg_h));
    }
    case FieldKind::MlpTanh:
    case FieldKind::MlpRelu: {
        const auto& l = field.leaves;
        if (l.size() != 4) throw std::invalid_argument("eval_field: expected 4 MLP parameters");
        ad::Var joint = tape.concat(x, h);
        ad::Var hidden = tape.add(l[1], tape.matvec(l[0], joint));
        hidden = field.kind == FieldKind::MlpTanh ? tape.tanh(hidden) : tape.relu(hidden);
        ad::Var out = tape.add(l[3], tape.matvec(l[2], hidden));
        return field.kind == FieldKind::MlpTanh ? tape.tanh(out) : out;
    }
    }
    throw std::logic_error("eval_field: unreachable");
}

double lipschitz_budget(double m_x, double m_h, double horizon) {
    if (!(m_x > 0.0) || !(m_h > 0.0) || !(horizon > 0.0)) {
        throw std::invalid_argument("lipschitz_budget: arguments must be positive");
    }
    return m_x / m_h * std::expm1(m_h * horizon);
}

double hidden_lipschitz_for_budget(double budget, double m_x, double horizon) {
    if (!(budget > 0.0) || !(m_x > 0.0) || !(horizon > 0.0)) {
        throw std::invalid_argument("hidden_lipschitz_for_budget: arguments must be positive");
    }
    if (budget <= m_x * horizon) {
        throw std::invalid_argument("hidden_lipschitz_for_budget: budget below the M_h -> 0 limit");
    }
    double lo = 1e-12, hi = 1.0;
    while (lipschitz_budget(m_x, hi, horizon) < budget) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (lipschitz_budget(m_x, mid, horizon) < budget) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace denots
