#include "denots/model.hpp"

#include "denots/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace denots {

namespace {

constexpr double kBceClamp = 1e-7;

Tensor uniform_tensor(std::vector<std::size_t> shape, double bound, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : t.data()) x = dist(rng);
    return t;
}

std::vector<double> feature_row(const TimeSeries& s, std::size_t row, bool fill_zero) {
    std::vector<double> x(s.channels());
    for (std::size_t c = 0; c < x.size(); ++c) {
        const double v = s.features.at(row, c);
        x[c] = (fill_zero && is_missing(v)) ? 0.0 : v;
    }
    return x;
}

void series_checks(const ModelConfig& config, const TimeSeries& series) {
    series.validate();
    const std::size_t expected = config.input_dim - (config.dt_channel ? 1 : 0);
    if (series.channels() != expected) {
        throw std::invalid_argument("Model: series has " + std::to_string(series.channels()) +
                                    " channels, expected " + std::to_string(expected));
    }
}

} // namespace

std::string_view to_string(TaskKind task) {
    switch (task) {
    case TaskKind::Regression: return "regression";
    case TaskKind::Binary: return "binary";
    case TaskKind::Multiclass: return "multiclass";
    case TaskKind::Forecast: return "forecast";
    }
    return "unknown";
}

TaskKind task_kind_from_string(std::string_view name) {
    if (name == "regression") return TaskKind::Regression;
    if (name == "binary") return TaskKind::Binary;
    if (name == "multiclass") return TaskKind::Multiclass;
    if (name == "forecast") return TaskKind::Forecast;
    throw std::invalid_argument("unknown task kind: " + std::string(name));
}

std::string_view to_string(BackboneKind backbone) {
    switch (backbone) {
    case BackboneKind::Sncde: return "sncde";
    case BackboneKind::DiscreteGru: return "gru";
    case BackboneKind::DiscreteRnn: return "rnn";
    }
    return "unknown";
}

BackboneKind backbone_kind_from_string(std::string_view name) {
    if (name == "sncde") return BackboneKind::Sncde;
    if (name == "gru") return BackboneKind::DiscreteGru;
    if (name == "rnn") return BackboneKind::DiscreteRnn;
    throw std::invalid_argument("unknown backbone kind: " + std::string(name));
}

std::vector<std::size_t> forecast_query_rows(const TimeSeries& series) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < series.length(); ++r) {
        bool all_missing = true;
        for (std::size_t c = 0; c < series.channels(); ++c) {
            if (!is_missing(series.features.at(r, c))) {
                all_missing = false;
                break;
            }
        }
        if (all_missing) rows.push_back(r);
    }
    return rows;
}

TimeSeries append_dt_channel(TimeSeries series) {
    const std::size_t n = series.length();
    const std::size_t u = series.channels();
    Tensor wide({n, u + 1});
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < u; ++c) wide.at(r, c) = series.features.at(r, c);
        wide.at(r, u) = r == 0 ? 0.0 : series.times[r] - series.times[r - 1];
    }
    series.features = std::move(wide);
    return series;
}

Model Model::init(ModelConfig config, std::uint64_t seed) {
    if (config.input_dim == 0 || config.hidden_dim == 0 || config.output_dim == 0) {
        throw std::invalid_argument("Model::init: dims must be positive");
    }
    Model m;
    m.config = std::move(config);

    if (m.config.backbone == BackboneKind::Sncde) {
        m.params = init_field_params(m.config.field, m.config.input_dim, m.config.hidden_dim, seed);
    } else if (m.config.backbone == BackboneKind::DiscreteGru) {
        m.params = init_field_params(FieldKind::NoNF, m.config.input_dim, m.config.hidden_dim, seed);
    } else {
        auto rng = substream(seed, "field_init");
        const double bound = 1.0 / std::sqrt(static_cast<double>(m.config.hidden_dim));
        m.params.add("W_ih", uniform_tensor({m.config.hidden_dim, m.config.input_dim}, bound, rng));
        m.params.add("W_hh", uniform_tensor({m.config.hidden_dim, m.config.hidden_dim}, bound, rng));
        m.params.add("b_ih", uniform_tensor({m.config.hidden_dim}, bound, rng));
        m.params.add("b_hh", uniform_tensor({m.config.hidden_dim}, bound, rng));
    }

    auto head_rng = substream(seed, "head_init");
    const double head_bound = 1.0 / std::sqrt(static_cast<double>(m.config.hidden_dim));
    m.params.add("head_W",
                 uniform_tensor({m.config.output_dim, m.config.hidden_dim}, head_bound, head_rng));
    m.params.add("head_b", uniform_tensor({m.config.output_dim}, head_bound, head_rng));
    return m;
}

Model::Output Model::forward(const TimeSeries& input) const {
    series_checks(config, input);
    Output out;

    const Tensor& head_w = params["head_W"];
    const Tensor& head_b = params["head_b"];
    auto apply_head = [&](std::span<const double> h, std::vector<double>& sink) {
        for (std::size_t o = 0; o < head_w.rows(); ++o) {
            double acc = head_b[o];
            for (std::size_t j = 0; j < head_w.cols(); ++j) acc += head_w.at(o, j) * h[j];
            sink.push_back(config.task == TaskKind::Binary ? 1.0 / (1.0 + std::exp(-acc)) : acc);
        }
    };

    if (config.backbone != BackboneKind::Sncde) {
        std::vector<double> h(config.hidden_dim, 0.0);
        if (config.backbone == BackboneKind::DiscreteGru) {
            const FieldView view = make_field_view(FieldKind::NoNF, params);
            for (std::size_t r = 0; r < input.length(); ++r) {
                const std::vector<double> x = feature_row(input, r, true);
                GruGatesOut g = gru_gates(view, x, h);
                for (std::size_t i = 0; i < h.size(); ++i) {
                    h[i] = (1.0 - g.z[i]) * g.n[i] + g.z[i] * h[i];
                }
                ++out.nfe;
            }
        } else {
            const Tensor& w_ih = params["W_ih"];
            const Tensor& w_hh = params["W_hh"];
            const Tensor& b_ih = params["b_ih"];
            const Tensor& b_hh = params["b_hh"];
            std::vector<double> pre(h.size());
            for (std::size_t r = 0; r < input.length(); ++r) {
                const std::vector<double> x = feature_row(input, r, true);
                for (std::size_t i = 0; i < h.size(); ++i) {
                    double acc = b_ih[i] + b_hh[i];
                    for (std::size_t j = 0; j < w_ih.cols(); ++j) acc += w_ih.at(i, j) * x[j];
                    for (std::size_t j = 0; j < w_hh.cols(); ++j) acc += w_hh.at(i, j) * h[j];
                    pre[i] = acc;
                }
                for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::tanh(pre[i]);
                ++out.nfe;
            }
        }
        apply_head(h, out.values);
        return out;
    }

    TimeSeries scaled = scale_times(input, ScaleConfig{config.scale_d, config.time_normalizer});
    if (config.dt_channel) scaled = append_dt_channel(scaled);
    const CubicSplinePath path = fit_natural_spline(scaled);
    const double horizon = scaled.times.back();

    SolverConfig solver = config.solver;
    std::vector<std::size_t> query_rows;
    if (config.task == TaskKind::Forecast) {
        query_rows = forecast_query_rows(scaled);
        solver.output_times.clear();
        for (std::size_t r : query_rows) solver.output_times.push_back(scaled.times[r]);
    }

    const FieldView view = make_field_view(config.field, params);
    std::vector<double> xbuf(config.input_dim);
    auto field = [&](double t, const Vec& h) {
        path.eval(t, xbuf);
        Vec dh(h.size());
        eval_field(view, xbuf, h, dh);
        return dh;
    };

    auto res = integrate_or_throw(field, Vec(config.hidden_dim, 0.0), horizon, solver);
    out.nfe = res.nfe;
    if (config.task == TaskKind::Forecast) {
        for (const Vec& h : res.samples) apply_head(h, out.values);
    } else {
        apply_head(res.final_state, out.values);
    }
    return out;
}

Model::TapeOutput Model::forward(ad::Tape& tape, const std::vector<ad::Var>& leaves,
                                 const TimeSeries& input) const {
    series_checks(config, input);
    if (leaves.size() != params.count()) {
        throw std::invalid_argument("Model::forward: leaves do not match parameter set");
    }
    TapeOutput out;

    const ad::Var head_w = leaves[leaves.size() - 2];
    const ad::Var head_b = leaves[leaves.size() - 1];
    auto apply_head = [&](ad::Var h) {
        ad::Var logits = tape.add(head_b, tape.matvec(head_w, h));
        return config.task == TaskKind::Binary ? tape.sigmoid(logits) : logits;
    };

    if (config.backbone != BackboneKind::Sncde) {
        ad::Var h = tape.leaf(Tensor({config.hidden_dim}));
        const std::vector<ad::Var> cell_leaves(leaves.begin(), leaves.end() - 2);
        const FieldLeaves cell{FieldKind::NoNF, cell_leaves};
        for (std::size_t r = 0; r < input.length(); ++r) {
            ad::Var x = tape.leaf(Tensor({config.input_dim}, feature_row(input, r, true)));
            if (config.backbone == BackboneKind::DiscreteGru) {
                GruGatesVar g = gru_gates(tape, cell, x, h);
                ad::Var one_minus_z = tape.add_const(tape.neg(g.z), 1.0);
                h = tape.add(tape.mul(one_minus_z, g.n), tape.mul(g.z, h));
            } else {
                ad::Var bias = tape.add(cell_leaves[2], cell_leaves[3]);
                ad::Var acc = tape.add(bias, tape.matvec(cell_leaves[0], x));
                h = tape.tanh(tape.add(acc, tape.matvec(cell_leaves[1], h)));
            }
            ++out.nfe;
        }
        out.preds.push_back(apply_head(h));
        return out;
    }

    TimeSeries scaled = scale_times(input, ScaleConfig{config.scale_d, config.time_normalizer});
    if (config.dt_channel) scaled = append_dt_channel(scaled);
    const CubicSplinePath path = fit_natural_spline(scaled);
    const double horizon = scaled.times.back();

    SolverConfig solver = config.solver;
    std::vector<std::size_t> query_rows;
    if (config.task == TaskKind::Forecast) {
        query_rows = forecast_query_rows(scaled);
        solver.output_times.clear();
        for (std::size_t r : query_rows) solver.output_times.push_back(scaled.times[r]);
    }

    const FieldLeaves field_leaves{config.field,
                                   std::vector<ad::Var>(leaves.begin(), leaves.end() - 2)};
    std::vector<double> xbuf(config.input_dim);
    auto field = [&](double t, const ad::Var& h) {
        path.eval(t, xbuf);
        ad::Var x = tape.leaf(Tensor({config.input_dim}, xbuf));
        return eval_field(tape, field_leaves, x, h);
    };

    ad::Var h0 = tape.leaf(Tensor({config.hidden_dim}));
    auto res = integrate_or_throw(field, h0, horizon, solver);
    out.nfe = res.nfe;
    if (config.task == TaskKind::Forecast) {
        for (ad::Var h : res.samples) out.preds.push_back(apply_head(h));
    } else {
        out.preds.push_back(apply_head(res.final_state));
    }
    return out;
}

ad::Var loss_on_tape(ad::Tape& tape, TaskKind task, const Model::TapeOutput& out,
                     const TimeSeries& series) {
    switch (task) {
    case TaskKind::Regression: {
        ad::Var diff = tape.add_const(out.preds.at(0), -series.target.at(0));
        return tape.mean(tape.mul(diff, diff));
    }
    case TaskKind::Binary: {
        const double y = series.target.at(0);
        ad::Var p = tape.clamp(out.preds.at(0), kBceClamp, 1.0 - kBceClamp);
        ad::Var log_p = tape.log(p);
        ad::Var log_1mp = tape.log(tape.add_const(tape.neg(p), 1.0));
        const ad::Var terms[2] = {log_p, log_1mp};
        const double w[2] = {-y, -(1.0 - y)};
        return tape.sum(tape.affine(terms, w));
    }
    case TaskKind::Multiclass: {
        // Cross-entropy from logits, logsumexp(l) - l_y. The max shift is a
        // detached constant; the gradient of logsumexp is softmax either way.
        ad::Var logits = out.preds.at(0);
        const Tensor& lv = tape.value(logits);
        double max_logit = lv[0];
        for (double v : lv.data()) max_logit = std::max(max_logit, v);
        ad::Var shifted = tape.add_const(logits, -max_logit);
        ad::Var lse = tape.add_const(tape.log(tape.sum(tape.exp(shifted))), max_logit);
        const auto cls = static_cast<std::size_t>(series.target.at(0));
        return tape.sub(lse, tape.pick(logits, cls));
    }
    case TaskKind::Forecast: {
        const std::vector<std::size_t> rows = forecast_query_rows(series);
        if (rows.size() * 1 != out.preds.size()) {
            throw std::invalid_argument("loss_on_tape: prediction/query count mismatch");
        }
        const std::size_t u = series.channels();
        std::vector<ad::Var> sq;
        sq.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            Tensor y({u});
            for (std::size_t c = 0; c < u; ++c) y[c] = series.target.at(rows[i] * u + c);
            ad::Var diff = tape.sub(out.preds[i], tape.leaf(std::move(y)));
            sq.push_back(tape.mean(tape.mul(diff, diff)));
        }
        const std::vector<double> w(sq.size(), 1.0 / static_cast<double>(sq.size()));
        return tape.affine(sq, w);
    }
    }
    throw std::logic_error("loss_on_tape: unreachable");
}

std::vector<double> eval_targets(TaskKind task, const TimeSeries& series) {
    if (task == TaskKind::Forecast) {
        const std::vector<std::size_t> rows = forecast_query_rows(series);
        const std::size_t u = series.channels();
        std::vector<double> t;
        t.reserve(rows.size() * u);
        for (std::size_t r : rows) {
            for (std::size_t c = 0; c < u; ++c) t.push_back(series.target.at(r * u + c));
        }
        return t;
    }
    return {series.target.at(0)};
}

double r2_score(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size() || targets.empty()) {
        throw std::invalid_argument("r2_score: size mismatch or empty");
    }
    const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) /
                        static_cast<double>(targets.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        ss_res += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
        ss_tot += (targets[i] - mean) * (targets[i] - mean);
    }
    if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    return 1.0 - ss_res / ss_tot;
}

namespace {

std::vector<double> ranks_with_ties(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> rank(xs.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    return rank;
}

} // namespace

double auroc(std::span<const double> scores, std::span<const double> labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw std::invalid_argument("auroc: size mismatch or empty");
    }
    std::size_t n_pos = 0;
    for (double y : labels) n_pos += y > 0.5 ? 1 : 0;
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw std::invalid_argument("auroc: needs both classes present");
    }
    const std::vector<double> rank = ranks_with_ties(scores);
    double rank_pos = 0.0;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k] > 0.5) rank_pos += rank[k];
    }
    const double np = static_cast<double>(n_pos);
    return (rank_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double accuracy_from_logits(const std::vector<std::vector<double>>& logits,
                            std::span<const double> labels) {
    if (logits.size() != labels.size() || logits.empty()) {
        throw std::invalid_argument("accuracy: size mismatch or empty");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const auto arg = std::max_element(logits[i].begin(), logits[i].end()) - logits[i].begin();
        if (static_cast<std::size_t>(arg) == static_cast<std::size_t>(labels[i])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(logits.size());
}

double metric(TaskKind task, const std::vector<std::vector<double>>& predictions,
              const std::vector<std::vector<double>>& targets) {
    if (predictions.size() != targets.size() || predictions.empty()) {
        throw std::invalid_argument("metric: size mismatch or empty");
    }
    switch (task) {
    case TaskKind::Regression:
    case TaskKind::Forecast: {
        std::vector<double> p, y;
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            p.insert(p.end(), predictions[i].begin(), predictions[i].end());
            y.insert(y.end(), targets[i].begin(), targets[i].end());
        }
        return r2_score(p, y);
    }
    case TaskKind::Binary: {
        std::vector<double> p, y;
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            p.push_back(predictions[i].at(0));
            y.push_back(targets[i].at(0));
        }
        return auroc(p, y);
    }
    case TaskKind::Multiclass: {
        std::vector<double> y;
        y.reserve(targets.size());
        for (const auto& t : targets) y.push_back(t.at(0));
        return accuracy_from_logits(predictions, y);
    }
    }
    throw std::logic_error("metric: unreachable");
}

double correlation(std::span<const double> xs, std::span<const double> ys, CorrelationKind kind) {
    if (xs.size() != ys.size() || xs.size() < 3) {
        throw std::invalid_argument("correlation: need at least 3 paired samples");
    }
    if (kind == CorrelationKind::Spearman) {
        const std::vector<double> rx = ranks_with_ties(xs);
        const std::vector<double> ry = ranks_with_ties(ys);
        return correlation(rx, ry, CorrelationKind::Pearson);
    }
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw std::invalid_argument("correlation: zero variance input");
    }
    return sxy / std::sqrt(sxx * syy);
}

FeatureTransform fit_feature_transform(std::span<const TimeSeries> train, TaskKind) {
    if (train.empty()) throw std::invalid_argument("fit_feature_transform: empty train split");
    const std::size_t u = train.front().channels();
    std::vector<double> sum(u, 0.0), sum_sq(u, 0.0);
    std::vector<std::size_t> count(u, 0);
    for (const TimeSeries& s : train) {
        for (std::size_t r = 0; r < s.length(); ++r) {
            for (std::size_t c = 0; c < u; ++c) {
                const double v = s.features.at(r, c);
                if (is_missing(v)) continue;
                sum[c] += v;
                sum_sq[c] += v * v;
                ++count[c];
            }
        }
    }
    FeatureTransform t;
    t.mean.resize(u);
    t.stddev.resize(u);
    for (std::size_t c = 0; c < u; ++c) {
        t.mean[c] = count[c] > 0 ? sum[c] / static_cast<double>(count[c]) : 0.0;
        double var = count[c] > 0
                         ? sum_sq[c] / static_cast<double>(count[c]) - t.mean[c] * t.mean[c]
                         : 0.0;
        var = std::max(var, 0.0);
        const double sd = std::sqrt(var);
        t.stddev[c] = sd > 1e-12 ? sd : 1.0; // zero-variance channels keep unit scale
    }
    return t;
}

void FeatureTransform::apply(TimeSeries& series) const {
    const std::size_t u = series.channels();
    if (u != mean.size()) throw std::invalid_argument("FeatureTransform: channel mismatch");
    const bool forecast_targets = series.target.size() == series.length() * u;
    for (std::size_t r = 0; r < series.length(); ++r) {
        for (std::size_t c = 0; c < u; ++c) {
            double& v = series.features.at(r, c);
            if (!is_missing(v)) v = (v - mean[c]) / stddev[c];
            if (forecast_targets) {
                double& y = series.target[r * u + c];
                if (!is_missing(y)) y = (y - mean[c]) / stddev[c];
            }
        }
    }
}

void FeatureTransform::apply(std::span<TimeSeries> split) const {
    for (TimeSeries& s : split) apply(s);
}

TargetTransform fit_target_transform(std::span<const TimeSeries> train, TaskKind task) {
    TargetTransform t;
    if (task != TaskKind::Regression) return t;
    if (train.empty()) throw std::invalid_argument("fit_target_transform: empty train split");
    double sum = 0.0, sum_sq = 0.0;
    for (const TimeSeries& s : train) {
        sum += s.target.at(0);
        sum_sq += s.target.at(0) * s.target.at(0);
    }
    const double n = static_cast<double>(train.size());
    t.mean = sum / n;
    const double var = std::max(sum_sq / n - t.mean * t.mean, 0.0);
    t.stddev = var > 1e-24 ? std::sqrt(var) : 1.0;
    t.active = true;
    return t;
}

void TargetTransform::apply(std::span<TimeSeries> split) const {
    if (!active) return;
    for (TimeSeries& s : split) s.target.at(0) = (s.target.at(0) - mean) / stddev;
}

AdamState::AdamState(std::size_t dim, AdamConfig cfg) : m(dim, 0.0), v(dim, 0.0), config(cfg) {}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
    if (params.size() != state.m.size() || grads.size() != state.m.size()) {
        throw std::invalid_argument("adam_step: size mismatch");
    }
    ++state.step;
    const auto& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grads[i];
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
}

EvalResult evaluate(const Model& model, std::span<const TimeSeries> split) {
    if (split.empty()) throw std::invalid_argument("evaluate: empty split");
    EvalResult out;
    double nfe_sum = 0.0;
    for (const TimeSeries& s : split) {
        Model::Output o = model.forward(s);
        nfe_sum += static_cast<double>(o.nfe);
        out.predictions.push_back(std::move(o.values));
        out.targets.push_back(eval_targets(model.config.task, s));
    }
    out.nfe_mean = nfe_sum / static_cast<double>(split.size());
    out.metric_value = metric(model.config.task, out.predictions, out.targets);
    return out;
}

TrainResult train(Model& model, std::span<const TimeSeries> train_split,
                  std::span<const TimeSeries> val_split, const TrainConfig& config) {
    if (train_split.empty() || val_split.empty()) {
        throw std::invalid_argument("train: empty split");
    }
    if (config.patience == 0) throw std::invalid_argument("train: patience must be >= 1");

    const std::size_t n = train_split.size();
    const std::size_t batch = n < 256 ? n : std::min(config.batch_size, n);

    std::vector<double> flat = model.params.pack();
    AdamState adam(flat.size(), config.adam);
    std::vector<double> grad_acc(flat.size(), 0.0);
    std::vector<double> best_flat = flat;

    TrainResult result;
    double best_metric = -std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    ad::Tape tape;
    for (std::size_t epoch = 1; config.max_epochs == 0 || epoch <= config.max_epochs; ++epoch) {
        auto rng = substream(config.seed, "shuffle", epoch);
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        double nfe_sum = 0.0;
        bool diverged = false;

        for (std::size_t start = 0; start < n && !diverged; start += batch) {
            const std::size_t stop = std::min(start + batch, n);
            std::fill(grad_acc.begin(), grad_acc.end(), 0.0);
            const double inv = 1.0 / static_cast<double>(stop - start);
            for (std::size_t k = start; k < stop; ++k) {
                tape.clear();
                std::vector<ad::Var> leaves = model.params.make_leaves(tape);
                Model::TapeOutput out;
                try {
                    out = model.forward(tape, leaves, train_split[order[k]]);
                } catch (const SolverError&) {
                    diverged = true;
                    break;
                }
                ad::Var loss = loss_on_tape(tape, model.config.task, out, train_split[order[k]]);
                const double loss_val = tape.scalar_value(loss);
                if (!std::isfinite(loss_val)) {
                    diverged = true;
                    break;
                }
                loss_sum += loss_val;
                nfe_sum += static_cast<double>(out.nfe);
                tape.backward(loss);
                std::size_t off = 0;
                for (const ad::Var leaf : leaves) {
                    const Tensor& g = tape.grad(leaf);
                    for (std::size_t i = 0; i < g.size(); ++i) grad_acc[off + i] += inv * g[i];
                    off += g.size();
                }
            }
            if (diverged) break;
            adam_step(adam, flat, grad_acc);
            model.params.unpack(flat);
        }

        if (diverged) {
            result.status = TrainStatus::Diverged;
            break;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(n);
        rec.nfe_mean = nfe_sum / static_cast<double>(n);
        rec.val_metric = evaluate(model, val_split).metric_value;
        result.history.push_back(rec);

        if (rec.val_metric > best_metric) {
            best_metric = rec.val_metric;
            best_epoch = epoch;
            best_flat = flat;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best >= config.patience) break;
        }
    }

    model.params.unpack(best_flat);
    result.best_val_metric = best_metric;
    result.best_epoch = best_epoch;
    return result;
}

} // namespace denots
