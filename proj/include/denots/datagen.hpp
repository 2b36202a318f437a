#pragma once

#include "denots/interpolation.hpp"
#include "denots/model.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace denots {

enum class DatasetKind { Bump, SineMix, Sine2, Pendulum };
enum class IrregularityMode { UniformGrid, Poisson };

std::string_view to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(std::string_view name);
std::string_view to_string(IrregularityMode mode);
IrregularityMode irregularity_from_string(std::string_view name);

struct DatasetSpec {
    DatasetKind kind = DatasetKind::Bump;
    std::size_t n_sequences = 256;
    std::size_t target_length = 100; // exact on a uniform grid, mean under Poisson arrivals
    IrregularityMode irregularity = IrregularityMode::UniformGrid;
    double window = 1.0; // time span of one sequence
    double missing_fraction = 0.0;
    double noise_level = 0.0;
    std::uint64_t seed = 1;

    // Bump classification, psi_zeta on a zero background.
    double bump_zeta = 20.0;

    // Sine frequency range (cycles per window) for SineMix / Sine-2.
    double freq_min = 1.0;
    double freq_max = 5.0;

    // Pendulum physics; an explicit reconstruction, the source benchmark
    // does not pin these.
    double pendulum_omega_min = 0.5;
    double pendulum_omega_max = 2.0;
    double pendulum_damping_min = 0.05;
    double pendulum_damping_max = 1.0;
    double pendulum_angle_max = 1.5707963267948966; // pi/2

    void validate() const;
};

struct Dataset {
    DatasetSpec spec;
    TaskKind task = TaskKind::Regression;
    std::size_t feature_dim = 1;
    std::size_t n_classes = 0;       // multiclass only
    double median_timeframe = 1.0;   // the scale normalizer M
    std::vector<TimeSeries> sequences;
};

TaskKind task_of(DatasetKind kind);

// Pure function of spec (all randomness from spec.seed, one substream per
// sequence index), so regeneration is bit-identical.
Dataset generate_dataset(const DatasetSpec& spec);

// Two sines joined at the window midpoint, value- and slope-continuous; the
// degenerate case f1 == f2 is a single unbroken sine.
double sinemix_signal(double f1, double f2, double phi1, double window, double t);

// Damped pendulum integrated with fixed-step RK4 refined to `fine_step`,
// sampled exactly at `times`; returns (angle, velocity) rows.
Tensor simulate_pendulum(double omega0, double damping, double theta0,
                         std::span<const double> times, double fine_step);

// ----- adversarial perturbations -----------------------------------------

enum class AttackKind { Drop, Change };

std::string_view to_string(AttackKind kind);
AttackKind attack_kind_from_string(std::string_view name);

struct AttackSpec {
    AttackKind kind = AttackKind::Drop;
    double fraction = 0.0;
    std::uint64_t seed = 1;
};

TimeSeries attack(const TimeSeries& series, const AttackSpec& spec, std::mt19937_64& rng);
std::vector<TimeSeries> attack_set(std::span<const TimeSeries> series, const AttackSpec& spec);

// ----- splits --------------------------------------------------------------

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

// Seeded, disjoint, stratified by label for classification tasks.
SplitIndices split_dataset(const Dataset& data, double train_frac, double val_frac,
                           double test_frac, std::uint64_t seed);

std::vector<TimeSeries> gather(const Dataset& data, std::span<const std::size_t> idx);

// ----- CSV on disk ----------------------------------------------------------

// One file per split, header `t,x_1,...,x_u,target[_c]`; missing values are
// the literal token NaN; a new sequence starts wherever t == 0.
void write_split_csv(const std::string& path, std::span<const TimeSeries> sequences,
                     TaskKind task, std::size_t feature_dim);
std::vector<TimeSeries> read_split_csv(const std::string& path, TaskKind task);

} // namespace denots
