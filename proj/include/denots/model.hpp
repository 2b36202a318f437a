#pragma once

#include "denots/autodiff.hpp"
#include "denots/dynamics.hpp"
#include "denots/interpolation.hpp"
#include "denots/solver.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace denots {

enum class TaskKind { Regression, Binary, Multiclass, Forecast };

std::string_view to_string(TaskKind task);
TaskKind task_kind_from_string(std::string_view name);

// Continuous SNCDE backbone plus two discrete recurrent baselines used by
// the memory benchmark at toy scale.
enum class BackboneKind { Sncde, DiscreteGru, DiscreteRnn };

std::string_view to_string(BackboneKind backbone);
BackboneKind backbone_kind_from_string(std::string_view name);

struct ModelConfig {
    BackboneKind backbone = BackboneKind::Sncde;
    FieldKind field = FieldKind::AntiNF;
    TaskKind task = TaskKind::Regression;
    std::size_t input_dim = 0;  // u' = feature channels (+1 with dt_channel)
    std::size_t hidden_dim = 32;
    std::size_t output_dim = 1; // 1 / 1 / #classes / u
    double scale_d = 1.0;
    double time_normalizer = 1.0; // M, the dataset's median timeframe
    bool dt_channel = false;
    SolverConfig solver;
};

// Rows whose features are all missing; these carry forecast targets.
std::vector<std::size_t> forecast_query_rows(const TimeSeries& series);

// Appends the time-gap channel dt_k = t_k - t_{k-1} as an extra feature.
TimeSeries append_dt_channel(TimeSeries series);

class Model {
public:
    static Model init(ModelConfig config, std::uint64_t seed);

    struct Output {
        std::vector<double> values; // head outputs; forecast rows concatenated
        std::size_t nfe = 0;
    };

    // Value-only forward pass for evaluation; throws SolverError on failure.
    Output forward(const TimeSeries& series) const;

    struct TapeOutput {
        std::vector<ad::Var> preds; // one entry, or one per forecast query row
        std::size_t nfe = 0;
    };

    // Forward pass recorded on a tape for training; `leaves` must come from
    // params.make_leaves(tape) in entry order.
    TapeOutput forward(ad::Tape& tape, const std::vector<ad::Var>& leaves,
                       const TimeSeries& series) const;

    ModelConfig config;
    ad::ParamSet params;
};

// ----- losses, metrics, correlation -------------------------------------

ad::Var loss_on_tape(ad::Tape& tape, TaskKind task, const Model::TapeOutput& out,
                     const TimeSeries& series);

// Evaluation-side target extraction mirroring the loss conventions.
std::vector<double> eval_targets(TaskKind task, const TimeSeries& series);

double r2_score(std::span<const double> predictions, std::span<const double> targets);
double auroc(std::span<const double> scores, std::span<const double> labels);
double accuracy_from_logits(const std::vector<std::vector<double>>& logits,
                            std::span<const double> labels);

// Dispatch on the task's metric: R^2 / AUROC / accuracy / R^2 over queries.
double metric(TaskKind task, const std::vector<std::vector<double>>& predictions,
              const std::vector<std::vector<double>>& targets);

enum class CorrelationKind { Pearson, Spearman };
double correlation(std::span<const double> xs, std::span<const double> ys, CorrelationKind kind);

// ----- standardization ---------------------------------------------------

struct FeatureTransform {
    std::vector<double> mean;
    std::vector<double> stddev;

    void apply(TimeSeries& series) const; // features, and forecast targets alongside
    void apply(std::span<TimeSeries> split) const;
};

// Per-channel moments over observed train entries; zero-variance channels
// keep a unit scale.
FeatureTransform fit_feature_transform(std::span<const TimeSeries> train, TaskKind task);

struct TargetTransform {
    double mean = 0.0;
    double stddev = 1.0;
    bool active = false;

    void apply(std::span<TimeSeries> split) const;
};

TargetTransform fit_target_transform(std::span<const TimeSeries> train, TaskKind task);

// ----- optimizer and training loop ---------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    explicit AdamState(std::size_t dim, AdamConfig config = {});
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;
    AdamConfig config;
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

struct TrainConfig {
    std::size_t batch_size = 64; // full batch when the train split is < 256
    std::size_t patience = 10;
    std::size_t max_epochs = 0; // 0 = unbounded, early stopping decides
    std::uint64_t seed = 1;
    AdamConfig adam;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_metric = 0.0;
    double nfe_mean = 0.0;
};

enum class TrainStatus { Converged, Diverged };

struct TrainResult {
    TrainStatus status = TrainStatus::Converged;
    std::vector<EpochRecord> history;
    double best_val_metric = 0.0;
    std::size_t best_epoch = 0;
};

// Mini-batch Adam with early stopping on the validation metric; the model
// keeps its best-validation weights on return.
TrainResult train(Model& model, std::span<const TimeSeries> train_split,
                  std::span<const TimeSeries> val_split, const TrainConfig& config);

struct EvalResult {
    double metric_value = 0.0;
    double nfe_mean = 0.0;
    std::vector<std::vector<double>> predictions;
    std::vector<std::vector<double>> targets;
};

EvalResult evaluate(const Model& model, std::span<const TimeSeries> split);

} // namespace denots
