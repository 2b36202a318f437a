#pragma once

#include "denots/datagen.hpp"
#include "denots/model.hpp"
#include "denots/serialize.hpp"

#include <json.hpp>

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <queue>
#include <string>
#include <thread>
#include <vector>

namespace denots {

using json = nlohmann::ordered_json;

// One experiment = dataset spec + model spec + solver spec + training spec.
// Flags override file keys; precedence is flags > file > defaults.
struct ExperimentConfig {
    DatasetSpec dataset;
    BackboneKind backbone = BackboneKind::Sncde;
    FieldKind field = FieldKind::AntiNF;
    std::size_t hidden_dim = 32;
    bool dt_channel = false;
    double scale_d = 1.0;
    SolverConfig solver;
    TrainConfig train_cfg;
    double train_frac = 0.7;
    double val_frac = 0.15;
    double test_frac = 0.15;
    std::uint64_t seed = 1;
    std::string out_dir = "runs/experiment";

    static ExperimentConfig from_json(const json& j);
    json to_json() const;
    static ExperimentConfig load(const std::string& path);
    void save(const std::string& path) const;

    // Hash of the experiment identity (out_dir excluded); embedded in every
    // artifact this run writes.
    std::uint64_t hash() const;
    void validate() const;
};

struct PreparedData {
    TaskKind task = TaskKind::Regression;
    std::size_t feature_dim = 1;
    std::size_t n_classes = 0;
    double median_timeframe = 1.0;
    std::vector<TimeSeries> train, val, test;
    FeatureTransform feature_transform;
    TargetTransform target_transform;
};

// Generate in memory, split, standardize on the train split.
PreparedData prepare_data(const ExperimentConfig& config);
// Same, but sequences come from the CSV files under <out_dir>/dataset.
PreparedData prepare_data_from_disk(const ExperimentConfig& config);

Model build_model(const ExperimentConfig& config, const PreparedData& data, std::uint64_t seed);

struct RunResult {
    TrainResult training;
    EvalResult test;
    Model model;
};

// Full pipeline on in-memory data; the workhorse behind cmd_train, sweeps
// and the acceptance experiments.
RunResult run_training(const ExperimentConfig& config, const PreparedData& data);

// ----- CLI-facing commands (return process exit codes) --------------------

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitDivergence = 2;
inline constexpr int kExitStudyFailure = 3;

int cmd_generate(const ExperimentConfig& config);
int cmd_train(const ExperimentConfig& config);

struct AttackCommand {
    AttackKind kind = AttackKind::Drop;
    std::vector<double> fractions{0.0, 0.25, 0.5, 0.85};
    std::size_t n_seeds = 5;
    std::string model_path; // defaults to <out_dir>/model.bin
    bool emit_svg = false;
};

int cmd_attack(const ExperimentConfig& config, const AttackCommand& attack_cmd);

struct SweepCommand {
    std::string axis = "scale"; // "scale" | "tolerance"
    std::vector<double> grid;
    std::size_t n_seeds = 1;
    bool emit_svg = false;
};

int cmd_sweep(const ExperimentConfig& config, const SweepCommand& sweep_cmd);

// ----- shared plumbing ------------------------------------------------------

class WorkerPool {
public:
    explicit WorkerPool(std::size_t workers);
    ~WorkerPool();
    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    void submit(std::function<void()> job);
    void wait();

private:
    void worker_loop();

    std::vector<std::thread> threads_;
    std::queue<std::function<void()>> queue_;
    std::mutex mutex_;
    std::condition_variable cv_job_;
    std::condition_variable cv_done_;
    std::size_t in_flight_ = 0;
    bool stop_ = false;
};

// DENOTS_WORKERS, else hardware concurrency.
std::size_t default_workers();

void write_json_file(const std::string& path, const json& j);
json read_json_file(const std::string& path);

} // namespace denots
