#include "denots/datagen.hpp"

#include "denots/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace denots {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::vector<double> uniform_grid(std::size_t n, double window) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = window * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return t;
}

// Poisson arrivals pinned at t=0: exponential gaps at the rate matching the
// target mean length over the window. Lengths vary sequence to sequence.
std::vector<double> poisson_times(std::size_t target_length, double window,
                                  std::mt19937_64& rng) {
    const double rate = static_cast<double>(target_length - 1) / window;
    std::exponential_distribution<double> gap(rate);
    std::vector<double> t{0.0};
    while (true) {
        const double next = t.back() + gap(rng);
        if (next > window) break;
        t.push_back(next);
    }
    if (t.size() < 2) t.push_back(window);
    return t;
}

void inject_missing(TimeSeries& s, double fraction, std::mt19937_64& rng) {
    if (fraction <= 0.0) return;
    const std::size_t n = s.length();
    const auto k = static_cast<std::size_t>(fraction * static_cast<double>(n));
    if (k == 0) return;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t c = 0; c < s.channels(); ++c) {
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i = 0; i < k; ++i) s.features.at(idx[i], c) = missing_value();
    }
}

void add_noise(TimeSeries& s, double level, std::mt19937_64& rng) {
    if (level <= 0.0) return;
    std::normal_distribution<double> noise(0.0, level);
    for (std::size_t r = 0; r < s.length(); ++r) {
        for (std::size_t c = 0; c < s.channels(); ++c) {
            double& v = s.features.at(r, c);
            if (!is_missing(v)) v += noise(rng);
        }
    }
}

double bump_psi(double zeta, double x) {
    const double zx = zeta * x;
    if (std::abs(zx) >= 1.0) return 0.0;
    return std::exp(1.0 / (zx * zx - 1.0));
}

TimeSeries gen_bump_sequence(const DatasetSpec& spec, std::size_t index, std::mt19937_64& rng) {
    TimeSeries s;
    s.times = uniform_grid(spec.target_length, spec.window);
    s.features = Tensor({spec.target_length, 1});
    const bool positive = index % 2 == 1;
    if (positive) {
        const double radius = 1.0 / spec.bump_zeta;
        std::uniform_real_distribution<double> center(radius, spec.window - radius);
        const double c = center(rng);
        for (std::size_t k = 0; k < spec.target_length; ++k) {
            s.features.at(k, 0) = bump_psi(spec.bump_zeta, s.times[k] - c);
        }
    }
    s.target = {positive ? 1.0 : 0.0};
    return s;
}

TimeSeries gen_sinemix_sequence(const DatasetSpec& spec, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> freq(spec.freq_min, spec.freq_max);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    const double f1 = freq(rng);
    const double f2 = freq(rng);
    const double phi1 = phase(rng);

    TimeSeries s;
    s.times = uniform_grid(spec.target_length, spec.window);
    s.features = Tensor({spec.target_length, 1});
    for (std::size_t k = 0; k < spec.target_length; ++k) {
        s.features.at(k, 0) = sinemix_signal(f1, f2, phi1, spec.window, s.times[k]);
    }
    s.target = {f1};
    return s;
}

TimeSeries gen_sine2_sequence(const DatasetSpec& spec, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> freq(spec.freq_min, spec.freq_max);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    std::uniform_real_distribution<double> amp(0.5, 1.0);
    const double f1 = freq(rng), f2 = freq(rng);
    const double phi1 = phase(rng), phi2 = phase(rng);
    const double a1 = amp(rng), a2 = amp(rng);

    const std::size_t n = spec.target_length;
    TimeSeries s;
    s.times = uniform_grid(n, spec.window);
    s.features = Tensor({n, 1});
    s.target.resize(n);
    const std::size_t half = n / 2;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = s.times[k];
        const double value =
            a1 * std::sin(kTwoPi * f1 * t + phi1) + a2 * std::sin(kTwoPi * f2 * t + phi2);
        s.target[k] = value;
        // Observed: even indices of the first half. Everything else is the
        // forecasting query set.
        const bool observed = k < half && k % 2 == 0;
        s.features.at(k, 0) = observed ? value : missing_value();
    }
    return s;
}

} // namespace

double sinemix_signal(double f1, double f2, double phi1, double window, double t) {
    const double mid = 0.5 * window;
    if (t <= mid) return std::sin(kTwoPi * f1 * t + phi1);
    // Continue with the new frequency; the phase branch is picked so both the
    // value and the slope direction carry over the midpoint.
    const double left_angle = kTwoPi * f1 * mid + phi1;
    const double value = std::clamp(std::sin(left_angle), -1.0, 1.0);
    const double phi2 =
        std::cos(left_angle) >= 0.0 ? std::asin(value) : 3.14159265358979323846 - std::asin(value);
    return std::sin(kTwoPi * f2 * (t - mid) + phi2);
}

namespace {

struct PendulumState {
    double theta;
    double omega;
};

PendulumState pendulum_rhs(const PendulumState& s, double omega0_sq, double damping) {
    return {s.omega, -omega0_sq * std::sin(s.theta) - damping * s.omega};
}

PendulumState rk4_step(const PendulumState& s, double dt, double omega0_sq, double damping) {
    const PendulumState k1 = pendulum_rhs(s, omega0_sq, damping);
    const PendulumState s2{s.theta + 0.5 * dt * k1.theta, s.omega + 0.5 * dt * k1.omega};
    const PendulumState k2 = pendulum_rhs(s2, omega0_sq, damping);
    const PendulumState s3{s.theta + 0.5 * dt * k2.theta, s.omega + 0.5 * dt * k2.omega};
    const PendulumState k3 = pendulum_rhs(s3, omega0_sq, damping);
    const PendulumState s4{s.theta + dt * k3.theta, s.omega + dt * k3.omega};
    const PendulumState k4 = pendulum_rhs(s4, omega0_sq, damping);
    return {s.theta + dt / 6.0 * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta),
            s.omega + dt / 6.0 * (k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega)};
}

TimeSeries gen_pendulum_sequence(const DatasetSpec& spec, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> omega_dist(spec.pendulum_omega_min,
                                                      spec.pendulum_omega_max);
    std::uniform_real_distribution<double> log_damp(std::log(spec.pendulum_damping_min),
                                                    std::log(spec.pendulum_damping_max));
    std::uniform_real_distribution<double> angle(-spec.pendulum_angle_max,
                                                 spec.pendulum_angle_max);
    const double omega0 = omega_dist(rng);
    const double damping = std::exp(log_damp(rng));

    TimeSeries s;
    s.times = spec.irregularity == IrregularityMode::Poisson
                  ? poisson_times(spec.target_length, spec.window, rng)
                  : uniform_grid(spec.target_length, spec.window);
    s.features = simulate_pendulum(omega0, damping, angle(rng), s.times, spec.window / 10000.0);
    s.target = {damping};
    return s;
}

} // namespace

Tensor simulate_pendulum(double omega0, double damping, double theta0,
                         std::span<const double> times, double fine_step) {
    if (!(fine_step > 0.0)) throw std::invalid_argument("simulate_pendulum: fine_step <= 0");
    const double omega0_sq = omega0 * omega0;
    Tensor out({times.size(), 2});
    PendulumState state{theta0, 0.0};
    double t = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double gap = times[k] - t;
        if (gap > 0.0) {
            const auto substeps = static_cast<std::size_t>(std::ceil(gap / fine_step));
            const double dt = gap / static_cast<double>(substeps);
            for (std::size_t i = 0; i < substeps; ++i) {
                state = rk4_step(state, dt, omega0_sq, damping);
            }
            t = times[k];
        }
        out.at(k, 0) = state.theta;
        out.at(k, 1) = state.omega;
    }
    return out;
}

std::string_view to_string(DatasetKind kind) {
    switch (kind) {
    case DatasetKind::Bump: return "bump";
    case DatasetKind::SineMix: return "sinemix";
    case DatasetKind::Sine2: return "sine2";
    case DatasetKind::Pendulum: return "pendulum";
    }
    return "unknown";
}

DatasetKind dataset_kind_from_string(std::string_view name) {
    if (name == "bump") return DatasetKind::Bump;
    if (name == "sinemix") return DatasetKind::SineMix;
    if (name == "sine2") return DatasetKind::Sine2;
    if (name == "pendulum") return DatasetKind::Pendulum;
    throw std::invalid_argument("unknown dataset kind: " + std::string(name));
}

std::string_view to_string(IrregularityMode mode) {
    return mode == IrregularityMode::UniformGrid ? "uniform" : "poisson";
}

IrregularityMode irregularity_from_string(std::string_view name) {
    if (name == "uniform") return IrregularityMode::UniformGrid;
    if (name == "poisson") return IrregularityMode::Poisson;
    throw std::invalid_argument("unknown irregularity mode: " + std::string(name));
}

void DatasetSpec::validate() const {
    if (n_sequences < 2) throw std::invalid_argument("DatasetSpec: need at least 2 sequences");
    if (target_length < 2) throw std::invalid_argument("DatasetSpec: lengths must be >= 2");
    if (!(window > 0.0)) throw std::invalid_argument("DatasetSpec: window must be positive");
    if (missing_fraction < 0.0 || missing_fraction > 1.0) {
        throw std::invalid_argument("DatasetSpec: missing_fraction must lie in [0, 1]");
    }
    if (noise_level < 0.0) throw std::invalid_argument("DatasetSpec: noise_level must be >= 0");
    if (!(freq_min > 0.0) || freq_max < freq_min) {
        throw std::invalid_argument("DatasetSpec: invalid frequency range");
    }
}

TaskKind task_of(DatasetKind kind) {
    switch (kind) {
    case DatasetKind::Bump: return TaskKind::Binary;
    case DatasetKind::SineMix: return TaskKind::Regression;
    case DatasetKind::Sine2: return TaskKind::Forecast;
    case DatasetKind::Pendulum: return TaskKind::Regression;
    }
    throw std::logic_error("task_of: unreachable");
}

Dataset generate_dataset(const DatasetSpec& spec) {
    spec.validate();
    Dataset data;
    data.spec = spec;
    data.task = task_of(spec.kind);
    data.feature_dim = spec.kind == DatasetKind::Pendulum ? 2 : 1;
    data.n_classes = spec.kind == DatasetKind::Bump ? 2 : 0;
    data.sequences.reserve(spec.n_sequences);

    for (std::size_t i = 0; i < spec.n_sequences; ++i) {
        auto rng = substream(spec.seed, "dataset", i);
        TimeSeries s;
        switch (spec.kind) {
        case DatasetKind::Bump: s = gen_bump_sequence(spec, i, rng); break;
        case DatasetKind::SineMix: s = gen_sinemix_sequence(spec, rng); break;
        case DatasetKind::Sine2: s = gen_sine2_sequence(spec, rng); break;
        case DatasetKind::Pendulum: s = gen_pendulum_sequence(spec, rng); break;
        }
        add_noise(s, spec.noise_level, rng);
        if (spec.kind != DatasetKind::Sine2) {
            // Sine-2 encodes its query set through missing entries already.
            inject_missing(s, spec.missing_fraction, rng);
        }
        s.validate();
        data.sequences.push_back(std::move(s));
    }

    std::vector<double> frames;
    frames.reserve(data.sequences.size());
    for (const TimeSeries& s : data.sequences) frames.push_back(s.timeframe());
    std::sort(frames.begin(), frames.end());
    const std::size_t mid = frames.size() / 2;
    data.median_timeframe = frames.size() % 2 == 1
                                ? frames[mid]
                                : 0.5 * (frames[mid - 1] + frames[mid]);
    return data;
}

std::string_view to_string(AttackKind kind) {
    return kind == AttackKind::Drop ? "drop" : "change";
}

AttackKind attack_kind_from_string(std::string_view name) {
    if (name == "drop") return AttackKind::Drop;
    if (name == "change") return AttackKind::Change;
    throw std::invalid_argument("unknown attack kind: " + std::string(name));
}

TimeSeries attack(const TimeSeries& series, const AttackSpec& spec, std::mt19937_64& rng) {
    if (spec.fraction < 0.0 || spec.fraction > 1.0) {
        throw std::invalid_argument("attack: fraction must lie in [0, 1]");
    }
    TimeSeries out = series;
    const std::size_t n = out.length();
    const auto k = static_cast<std::size_t>(spec.fraction * static_cast<double>(n));
    if (k == 0) return out;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t c = 0; c < out.channels(); ++c) {
            out.features.at(idx[i], c) =
                spec.kind == AttackKind::Drop ? missing_value() : gauss(rng);
        }
    }
    return out;
}

std::vector<TimeSeries> attack_set(std::span<const TimeSeries> series, const AttackSpec& spec) {
    std::vector<TimeSeries> out;
    out.reserve(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        auto rng = substream(spec.seed, "attack", i);
        out.push_back(attack(series[i], spec, rng));
    }
    return out;
}

SplitIndices split_dataset(const Dataset& data, double train_frac, double val_frac,
                           double test_frac, std::uint64_t seed) {
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
        throw std::invalid_argument("split_dataset: fractions must sum to 1");
    }
    const std::size_t n = data.sequences.size();

    // Group indices by stratum (single stratum for non-classification).
    std::vector<std::vector<std::size_t>> strata;
    if (data.task == TaskKind::Binary || data.task == TaskKind::Multiclass) {
        const std::size_t k = std::max<std::size_t>(data.n_classes, 2);
        strata.resize(k);
        for (std::size_t i = 0; i < n; ++i) {
            strata[static_cast<std::size_t>(data.sequences[i].target.at(0))].push_back(i);
        }
    } else {
        strata.emplace_back(n);
        std::iota(strata[0].begin(), strata[0].end(), 0);
    }

    SplitIndices out;
    auto rng = substream(seed, "split");
    for (auto& group : strata) {
        std::shuffle(group.begin(), group.end(), rng);
        const auto g = static_cast<double>(group.size());
        const double want[3] = {train_frac * g, val_frac * g, test_frac * g};
        std::size_t have[3];
        for (int i = 0; i < 3; ++i) have[i] = static_cast<std::size_t>(std::floor(want[i]));
        // Largest remainder takes the leftover items.
        std::size_t left = group.size() - (have[0] + have[1] + have[2]);
        while (left > 0) {
            int best = 0;
            for (int i = 1; i < 3; ++i) {
                if (want[i] - static_cast<double>(have[i]) >
                    want[best] - static_cast<double>(have[best])) {
                    best = i;
                }
            }
            ++have[best];
            --left;
        }
        for (std::size_t i = 0; i < group.size(); ++i) {
            if (i < have[0]) {
                out.train.push_back(group[i]);
            } else if (i < have[0] + have[1]) {
                out.val.push_back(group[i]);
            } else {
                out.test.push_back(group[i]);
            }
        }
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    if (out.train.empty() || out.val.empty() || out.test.empty()) {
        throw std::invalid_argument("split_dataset: a split came out empty");
    }
    return out;
}

std::vector<TimeSeries> gather(const Dataset& data, std::span<const std::size_t> idx) {
    std::vector<TimeSeries> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(data.sequences.at(i));
    return out;
}

void write_split_csv(const std::string& path, std::span<const TimeSeries> sequences,
                     TaskKind task, std::size_t feature_dim) {
    std::ofstream file(path);
    if (!file) throw std::runtime_error("write_split_csv: cannot open " + path);

    file << "t";
    for (std::size_t c = 1; c <= feature_dim; ++c) file << ",x_" << c;
    if (task == TaskKind::Forecast && feature_dim > 1) {
        for (std::size_t c = 1; c <= feature_dim; ++c) file << ",target_" << c;
    } else {
        file << ",target";
    }
    file << "\n";

    char buf[64];
    auto put = [&](double v) {
        if (is_missing(v)) {
            file << "NaN";
        } else {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            file << buf;
        }
    };
    for (const TimeSeries& s : sequences) {
        const std::size_t u = s.channels();
        for (std::size_t r = 0; r < s.length(); ++r) {
            put(s.times[r]);
            for (std::size_t c = 0; c < u; ++c) {
                file << ",";
                put(s.features.at(r, c));
            }
            if (task == TaskKind::Forecast) {
                for (std::size_t c = 0; c < u; ++c) {
                    file << ",";
                    put(s.target.at(r * u + c));
                }
            } else {
                file << ",";
                put(s.target.at(0));
            }
            file << "\n";
        }
    }
}

std::vector<TimeSeries> read_split_csv(const std::string& path, TaskKind task) {
    std::ifstream file(path);
    if (!file) throw std::runtime_error("read_split_csv: cannot open " + path);

    std::string line;
    if (!std::getline(file, line)) throw std::runtime_error("read_split_csv: empty file " + path);
    std::size_t feature_dim = 0;
    {
        std::stringstream header(line);
        std::string col;
        while (std::getline(header, col, ',')) {
            if (col.rfind("x_", 0) == 0) ++feature_dim;
        }
        if (feature_dim == 0) throw std::runtime_error("read_split_csv: no feature columns");
    }
    const std::size_t target_width = task == TaskKind::Forecast ? feature_dim : 1;

    std::vector<std::vector<double>> rows;
    while (std::getline(file, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            if (cell == "NaN") {
                row.push_back(missing_value());
                continue;
            }
            // strtod instead of stod: subnormal magnitudes (bump tails
            // underflow) must parse, not raise out_of_range.
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str()) {
                throw std::runtime_error("read_split_csv: bad cell `" + cell + "` in " + path);
            }
            row.push_back(v);
        }
        if (row.size() != 1 + feature_dim + target_width) {
            throw std::runtime_error("read_split_csv: malformed row in " + path);
        }
        rows.push_back(std::move(row));
    }

    std::vector<TimeSeries> out;
    std::size_t start = 0;
    for (std::size_t r = 0; r <= rows.size(); ++r) {
        const bool boundary = r == rows.size() || (r > start && rows[r][0] == 0.0);
        if (!boundary) continue;
        if (r > start) {
            const std::size_t n = r - start;
            TimeSeries s;
            s.times.resize(n);
            s.features = Tensor({n, feature_dim});
            if (task == TaskKind::Forecast) s.target.resize(n * feature_dim);
            for (std::size_t i = 0; i < n; ++i) {
                const auto& row = rows[start + i];
                s.times[i] = row[0];
                for (std::size_t c = 0; c < feature_dim; ++c) s.features.at(i, c) = row[1 + c];
                if (task == TaskKind::Forecast) {
                    for (std::size_t c = 0; c < feature_dim; ++c) {
                        s.target[i * feature_dim + c] = row[1 + feature_dim + c];
                    }
                }
            }
            if (task != TaskKind::Forecast) s.target = {rows[start][1 + feature_dim]};
            s.validate();
            out.push_back(std::move(s));
        }
        start = r;
    }
    return out;
}

} // namespace denots
