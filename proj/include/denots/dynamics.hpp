#pragma once

#include "denots/autodiff.hpp"
#include "denots/interpolation.hpp"
#include "denots/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace denots {

enum class FieldKind { NoNF, SyncNF, AntiNF, MlpTanh, MlpRelu };

std::string_view to_string(FieldKind kind);
FieldKind field_kind_from_string(std::string_view name);
bool is_gru_field(FieldKind kind);

// Time scaling t <- (D / M) t. D is the scale hyperparameter, M the
// dataset's median timeframe so values of D compare across datasets.
struct ScaleConfig {
    double scale_d = 1.0;
    double normalizer = 1.0;

    double factor() const;
};

TimeSeries scale_times(TimeSeries series, const ScaleConfig& cfg);

// Parameter construction. GRU uses the six-matrix gate layout; the MLP
// fields are two linear layers over the concatenated (x, h).
ad::ParamSet init_field_params(FieldKind kind, std::size_t input_dim, std::size_t hidden_dim,
                               std::uint64_t seed);

struct FieldDims {
    std::size_t input = 0;
    std::size_t hidden = 0;
};

FieldDims field_dims(FieldKind kind, const ad::ParamSet& params);

// ----- raw (value-only) evaluation ------------------------------------
// Mirrors the tape path op for op so both produce identical floats.

struct GruGatesOut {
    std::vector<double> r, z, n;
};

// Pre-resolved parameter pointers; build once per integration, not per call.
struct FieldView {
    FieldKind kind;
    std::vector<const Tensor*> slots; // init_field_params entry order
};

FieldView make_field_view(FieldKind kind, const ad::ParamSet& params);

GruGatesOut gru_gates(const ad::ParamSet& params, std::span<const double> x,
                      std::span<const double> h);
GruGatesOut gru_gates(const FieldView& view, std::span<const double> x,
                      std::span<const double> h);

void eval_field(const FieldView& view, std::span<const double> x, std::span<const double> h,
                std::span<double> out);
void eval_field(FieldKind kind, const ad::ParamSet& params, std::span<const double> x,
                std::span<const double> h, std::span<double> out);
std::vector<double> eval_field(FieldKind kind, const ad::ParamSet& params,
                               std::span<const double> x, std::span<const double> h);

// ----- tape evaluation -------------------------------------------------

// Leaf handles for the field parameters, in init_field_params order.
struct FieldLeaves {
    FieldKind kind;
    std::vector<ad::Var> leaves;
};

FieldLeaves make_field_leaves(FieldKind kind, const ad::ParamSet& params, ad::Tape& tape);

struct GruGatesVar {
    ad::Var r, z, n;
};

GruGatesVar gru_gates(ad::Tape& tape, const FieldLeaves& field, ad::Var x, ad::Var h);

ad::Var eval_field(ad::Tape& tape, const FieldLeaves& field, ad::Var x, ad::Var h);

// ----- expressiveness budget (Theorem-style Lipschitz bound) -----------

// L_F = (M_x / M_h) (e^{M_h T} - 1).
double lipschitz_budget(double m_x, double m_h, double horizon);

// Inverse solve: the hidden-state Lipschitz constant M_h that realizes a
// given budget at horizon T, by bisection. Shows how growing T lets the
// weights shrink.
double hidden_lipschitz_for_budget(double budget, double m_x, double horizon);

} // namespace denots
