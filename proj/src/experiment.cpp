#include "denots/experiment.hpp"

#include "denots/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace denots {

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const std::string& section) {
    for (const auto& item : j.items()) {
        if (std::find_if(known.begin(), known.end(), [&](const char* k) {
                return item.key() == k;
            }) == known.end()) {
            throw std::invalid_argument("config: unknown key `" + item.key() + "` in " + section);
        }
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

} // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    reject_unknown_keys(
        j, {"dataset", "model", "solver", "train", "split", "seed", "out_dir"}, "root");
    ExperimentConfig c;

    if (!j.contains("dataset")) throw std::invalid_argument("config: missing `dataset` section");
    const json& d = j.at("dataset");
    reject_unknown_keys(d,
                        {"kind", "n_sequences", "target_length", "irregularity", "window",
                         "missing_fraction", "noise_level", "bump_zeta", "freq_min", "freq_max"},
                        "dataset");
    if (!d.contains("kind")) throw std::invalid_argument("config: missing `kind` in dataset");
    c.dataset.kind = dataset_kind_from_string(d.at("kind").get<std::string>());
    c.dataset.n_sequences = get_or<std::size_t>(d, "n_sequences", c.dataset.n_sequences);
    c.dataset.target_length = get_or<std::size_t>(d, "target_length", c.dataset.target_length);
    c.dataset.irregularity = irregularity_from_string(
        get_or<std::string>(d, "irregularity", std::string(to_string(c.dataset.irregularity))));
    c.dataset.window = get_or<double>(d, "window", c.dataset.window);
    c.dataset.missing_fraction = get_or<double>(d, "missing_fraction", c.dataset.missing_fraction);
    c.dataset.noise_level = get_or<double>(d, "noise_level", c.dataset.noise_level);
    c.dataset.bump_zeta = get_or<double>(d, "bump_zeta", c.dataset.bump_zeta);
    c.dataset.freq_min = get_or<double>(d, "freq_min", c.dataset.freq_min);
    c.dataset.freq_max = get_or<double>(d, "freq_max", c.dataset.freq_max);

    if (j.contains("model")) {
        const json& m = j.at("model");
        reject_unknown_keys(m, {"backbone", "field", "hidden_dim", "dt_channel", "scale_d"},
                            "model");
        c.backbone = backbone_kind_from_string(
            get_or<std::string>(m, "backbone", std::string(to_string(c.backbone))));
        c.field =
            field_kind_from_string(get_or<std::string>(m, "field", std::string(to_string(c.field))));
        c.hidden_dim = get_or<std::size_t>(m, "hidden_dim", c.hidden_dim);
        c.dt_channel = get_or<bool>(m, "dt_channel", c.dt_channel);
        c.scale_d = get_or<double>(m, "scale_d", c.scale_d);
    }

    if (j.contains("solver")) {
        const json& s = j.at("solver");
        reject_unknown_keys(s, {"rtol", "atol", "max_steps"}, "solver");
        c.solver.rtol = get_or<double>(s, "rtol", c.solver.rtol);
        c.solver.atol = get_or<double>(s, "atol", c.solver.atol);
        c.solver.max_steps = get_or<std::size_t>(s, "max_steps", c.solver.max_steps);
    }

    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown_keys(t, {"batch_size", "patience", "max_epochs", "lr"}, "train");
        c.train_cfg.batch_size = get_or<std::size_t>(t, "batch_size", c.train_cfg.batch_size);
        c.train_cfg.patience = get_or<std::size_t>(t, "patience", c.train_cfg.patience);
        c.train_cfg.max_epochs = get_or<std::size_t>(t, "max_epochs", c.train_cfg.max_epochs);
        c.train_cfg.adam.lr = get_or<double>(t, "lr", c.train_cfg.adam.lr);
    }

    if (j.contains("split")) {
        const json& s = j.at("split");
        reject_unknown_keys(s, {"train", "val", "test"}, "split");
        c.train_frac = get_or<double>(s, "train", c.train_frac);
        c.val_frac = get_or<double>(s, "val", c.val_frac);
        c.test_frac = get_or<double>(s, "test", c.test_frac);
    }

    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    c.out_dir = get_or<std::string>(j, "out_dir", c.out_dir);

    // Dataset randomness is a named substream of the root seed.
    c.dataset.seed = splitmix64(c.seed ^ fnv1a64("dataset"));
    c.validate();
    return c;
}

json ExperimentConfig::to_json() const {
    json j;
    j["dataset"] = {{"kind", std::string(to_string(dataset.kind))},
                    {"n_sequences", dataset.n_sequences},
                    {"target_length", dataset.target_length},
                    {"irregularity", std::string(to_string(dataset.irregularity))},
                    {"window", dataset.window},
                    {"missing_fraction", dataset.missing_fraction},
                    {"noise_level", dataset.noise_level},
                    {"bump_zeta", dataset.bump_zeta},
                    {"freq_min", dataset.freq_min},
                    {"freq_max", dataset.freq_max}};
    j["model"] = {{"backbone", std::string(to_string(backbone))},
                  {"field", std::string(to_string(field))},
                  {"hidden_dim", hidden_dim},
                  {"dt_channel", dt_channel},
                  {"scale_d", scale_d}};
    j["solver"] = {{"rtol", solver.rtol}, {"atol", solver.atol}, {"max_steps", solver.max_steps}};
    j["train"] = {{"batch_size", train_cfg.batch_size},
                  {"patience", train_cfg.patience},
                  {"max_epochs", train_cfg.max_epochs},
                  {"lr", train_cfg.adam.lr}};
    j["split"] = {{"train", train_frac}, {"val", val_frac}, {"test", test_frac}};
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    return j;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    return from_json(read_json_file(path));
}

void ExperimentConfig::save(const std::string& path) const { write_json_file(path, to_json()); }

std::uint64_t ExperimentConfig::hash() const {
    json j = to_json();
    j.erase("out_dir");
    return fnv1a64(j.dump());
}

void ExperimentConfig::validate() const {
    dataset.validate();
    if (hidden_dim == 0) throw std::invalid_argument("config: hidden_dim must be positive");
    if (!(scale_d > 0.0)) throw std::invalid_argument("config: scale_d must be positive");
    if (!(solver.rtol > 0.0) || !(solver.atol > 0.0)) {
        throw std::invalid_argument("config: solver tolerances must be positive");
    }
    if (train_cfg.patience == 0) throw std::invalid_argument("config: patience must be >= 1");
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
        throw std::invalid_argument("config: split fractions must sum to 1");
    }
}

namespace {

PreparedData prepare_from_dataset(const ExperimentConfig& config, const Dataset& data,
                                  std::vector<TimeSeries> train, std::vector<TimeSeries> val,
                                  std::vector<TimeSeries> test) {
    PreparedData out;
    out.task = data.task;
    out.feature_dim = data.feature_dim;
    out.n_classes = data.n_classes;
    out.median_timeframe = data.median_timeframe;
    out.train = std::move(train);
    out.val = std::move(val);
    out.test = std::move(test);

    out.feature_transform = fit_feature_transform(out.train, out.task);
    out.feature_transform.apply(std::span<TimeSeries>(out.train));
    out.feature_transform.apply(std::span<TimeSeries>(out.val));
    out.feature_transform.apply(std::span<TimeSeries>(out.test));
    out.target_transform = fit_target_transform(out.train, out.task);
    out.target_transform.apply(std::span<TimeSeries>(out.train));
    out.target_transform.apply(std::span<TimeSeries>(out.val));
    out.target_transform.apply(std::span<TimeSeries>(out.test));
    (void)config;
    return out;
}

} // namespace

PreparedData prepare_data(const ExperimentConfig& config) {
    Dataset data = generate_dataset(config.dataset);
    SplitIndices idx = split_dataset(data, config.train_frac, config.val_frac, config.test_frac,
                                     splitmix64(config.seed ^ fnv1a64("split")));
    return prepare_from_dataset(config, data, gather(data, idx.train), gather(data, idx.val),
                                gather(data, idx.test));
}

PreparedData prepare_data_from_disk(const ExperimentConfig& config) {
    const fs::path dir = fs::path(config.out_dir) / "dataset";
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) {
        throw std::runtime_error("dataset not found under " + dir.string() +
                                 "; run `denots generate` first");
    }
    const json manifest = read_json_file(manifest_path.string());
    const TaskKind task = task_kind_from_string(manifest.at("task").get<std::string>());

    Dataset meta;
    meta.spec = config.dataset;
    meta.task = task;
    meta.feature_dim = manifest.at("feature_dim").get<std::size_t>();
    meta.n_classes = manifest.at("n_classes").get<std::size_t>();
    meta.median_timeframe = manifest.at("median_timeframe").get<double>();

    return prepare_from_dataset(
        config, meta, read_split_csv((dir / "train.csv").string(), task),
        read_split_csv((dir / "val.csv").string(), task),
        read_split_csv((dir / "test.csv").string(), task));
}

Model build_model(const ExperimentConfig& config, const PreparedData& data, std::uint64_t seed) {
    ModelConfig mc;
    mc.backbone = config.backbone;
    mc.field = config.field;
    mc.task = data.task;
    mc.input_dim = data.feature_dim + (config.dt_channel ? 1 : 0);
    mc.hidden_dim = config.hidden_dim;
    switch (data.task) {
    case TaskKind::Regression:
    case TaskKind::Binary: mc.output_dim = 1; break;
    case TaskKind::Multiclass: mc.output_dim = data.n_classes; break;
    case TaskKind::Forecast: mc.output_dim = data.feature_dim; break;
    }
    mc.scale_d = config.scale_d;
    mc.time_normalizer = data.median_timeframe;
    mc.dt_channel = config.dt_channel;
    mc.solver = config.solver;
    return Model::init(std::move(mc), seed);
}

RunResult run_training(const ExperimentConfig& config, const PreparedData& data) {
    RunResult out{.training = {}, .test = {}, .model = build_model(config, data, config.seed)};
    TrainConfig tc = config.train_cfg;
    tc.seed = config.seed;
    out.training = train(out.model, data.train, data.val, tc);
    out.test = evaluate(out.model, data.test);
    return out;
}

int cmd_generate(const ExperimentConfig& config) {
    const fs::path dir = fs::path(config.out_dir) / "dataset";
    const fs::path manifest_path = dir / "manifest.json";
    const std::string expected_hash = hex64(config.hash());
    if (fs::exists(manifest_path)) {
        const json existing = read_json_file(manifest_path.string());
        if (existing.value("config_hash", "") == expected_hash) {
            std::cout << "dataset up to date at " << dir.string() << "\n";
            return kExitOk;
        }
    }
    fs::create_directories(dir);

    Dataset data = generate_dataset(config.dataset);
    SplitIndices idx = split_dataset(data, config.train_frac, config.val_frac, config.test_frac,
                                     splitmix64(config.seed ^ fnv1a64("split")));

    json manifest;
    manifest["config_hash"] = expected_hash;
    manifest["kind"] = std::string(to_string(config.dataset.kind));
    manifest["task"] = std::string(to_string(data.task));
    manifest["seed"] = config.seed;
    manifest["feature_dim"] = data.feature_dim;
    manifest["n_classes"] = data.n_classes;
    manifest["median_timeframe"] = data.median_timeframe;
    manifest["split_sizes"] = {{"train", idx.train.size()},
                               {"val", idx.val.size()},
                               {"test", idx.test.size()}};
    json checksums;
    const std::pair<const char*, const std::vector<std::size_t>*> splits[] = {
        {"train", &idx.train}, {"val", &idx.val}, {"test", &idx.test}};
    for (const auto& [name, rows] : splits) {
        const std::string path = (dir / (std::string(name) + ".csv")).string();
        write_split_csv(path, gather(data, *rows), data.task, data.feature_dim);
        checksums[name] = hex64(file_checksum(path));
    }
    manifest["checksums"] = checksums;
    write_json_file(manifest_path.string(), manifest);
    std::cout << "wrote dataset (" << data.sequences.size() << " sequences) to " << dir.string()
              << "\n";
    return kExitOk;
}

int cmd_train(const ExperimentConfig& config) {
    const PreparedData data = prepare_data_from_disk(config);
    const std::string run_hash = hex64(config.hash());
    fs::create_directories(config.out_dir);

    Model model = build_model(config, data, config.seed);
    TrainConfig tc = config.train_cfg;
    tc.seed = config.seed;
    const TrainResult result = train(model, data.train, data.val, tc);

    {
        std::ofstream history(fs::path(config.out_dir) / "history.jsonl");
        history << json{{"config_hash", run_hash}, {"seed", config.seed}}.dump() << "\n";
        for (const EpochRecord& r : result.history) {
            history << json{{"epoch", r.epoch},
                            {"train_loss", r.train_loss},
                            {"val_metric", r.val_metric},
                            {"nfe_mean", r.nfe_mean}}
                            .dump()
                    << "\n";
        }
    }
    save_params((fs::path(config.out_dir) / "model.bin").string(), model.params, config.hash());

    if (result.status == TrainStatus::Diverged) {
        std::cerr << "training diverged after " << result.history.size() << " epochs\n";
        return kExitDivergence;
    }

    const EvalResult test = evaluate(model, data.test);
    json metrics;
    metrics["config_hash"] = run_hash;
    metrics["seed"] = config.seed;
    metrics["task"] = std::string(to_string(data.task));
    metrics["metric_name"] = data.task == TaskKind::Binary
                                 ? "auroc"
                                 : (data.task == TaskKind::Multiclass ? "accuracy" : "r2");
    metrics[metrics["metric_name"].get<std::string>()] = test.metric_value;
    metrics["nfe_mean"] = test.nfe_mean;
    metrics["best_epoch"] = result.best_epoch;
    metrics["best_val_metric"] = result.best_val_metric;
    metrics["epochs_run"] = result.history.size();
    write_json_file((fs::path(config.out_dir) / "metrics.json").string(), metrics);
    std::cout << "test " << metrics["metric_name"].get<std::string>() << " = " << test.metric_value
              << ", mean NFE = " << test.nfe_mean << "\n";
    return kExitOk;
}

int cmd_attack(const ExperimentConfig& config, const AttackCommand& attack_cmd) {
    const PreparedData data = prepare_data_from_disk(config);
    if (data.task != TaskKind::Regression && data.task != TaskKind::Binary &&
        data.task != TaskKind::Multiclass) {
        throw std::invalid_argument("attack: forecasting targets live on input rows; "
                                    "attacks support sequence-level tasks only");
    }
    const std::string model_path = attack_cmd.model_path.empty()
                                       ? (fs::path(config.out_dir) / "model.bin").string()
                                       : attack_cmd.model_path;
    LoadedParams loaded = load_params(model_path);
    if (loaded.config_hash != config.hash()) {
        throw std::invalid_argument("attack: model " + model_path +
                                    " was trained under a different config");
    }
    Model model = build_model(config, data, config.seed);
    model.params = std::move(loaded.params);

    const std::uint64_t attack_root = splitmix64(config.seed ^ fnv1a64("attack"));
    json rows = json::array();
    std::vector<SvgSeries> curves(1);
    curves[0].label = std::string(to_string(attack_cmd.kind));
    std::ostringstream csv;
    csv << "fraction,metric_mean,metric_std,n_seeds\n";
    for (double fraction : attack_cmd.fractions) {
        std::vector<double> metrics;
        for (std::size_t s = 0; s < attack_cmd.n_seeds; ++s) {
            AttackSpec spec{attack_cmd.kind, fraction, splitmix64(attack_root + s)};
            const std::vector<TimeSeries> perturbed = attack_set(data.test, spec);
            metrics.push_back(evaluate(model, perturbed).metric_value);
        }
        double mean = 0.0;
        for (double m : metrics) mean += m;
        mean /= static_cast<double>(metrics.size());
        double var = 0.0;
        for (double m : metrics) var += (m - mean) * (m - mean);
        const double stddev =
            metrics.size() > 1 ? std::sqrt(var / static_cast<double>(metrics.size() - 1)) : 0.0;
        csv << fraction << "," << mean << "," << stddev << "," << metrics.size() << "\n";
        rows.push_back({{"fraction", fraction}, {"metric_mean", mean}, {"metric_std", stddev}});
        curves[0].xs.push_back(fraction);
        curves[0].ys.push_back(mean);
    }

    fs::create_directories(config.out_dir);
    const std::string stem = "attack_" + std::string(to_string(attack_cmd.kind));
    {
        std::ofstream file(fs::path(config.out_dir) / (stem + ".csv"));
        file << "# config_hash=" << hex64(config.hash()) << "\n" << csv.str();
    }
    write_json_file((fs::path(config.out_dir) / (stem + ".json")).string(),
                    json{{"config_hash", hex64(config.hash())},
                         {"attack", std::string(to_string(attack_cmd.kind))},
                         {"rows", rows}});
    if (attack_cmd.emit_svg) {
        write_svg_chart((fs::path(config.out_dir) / (stem + ".svg")).string(),
                        "metric vs attacked fraction", curves);
    }
    return kExitOk;
}

int cmd_sweep(const ExperimentConfig& config, const SweepCommand& sweep_cmd) {
    if (sweep_cmd.grid.empty()) throw std::invalid_argument("sweep: empty grid");
    if (sweep_cmd.axis != "scale" && sweep_cmd.axis != "tolerance") {
        throw std::invalid_argument("sweep: axis must be `scale` or `tolerance`");
    }
    fs::create_directories(fs::path(config.out_dir) / "sweep");

    struct Point {
        double value = 0.0;
        std::uint64_t seed = 0;
        double nfe = 0.0;
        double metric_value = 0.0;
        bool diverged = false;
        bool done = false;
    };
    std::vector<Point> points;
    for (double value : sweep_cmd.grid) {
        for (std::size_t s = 0; s < sweep_cmd.n_seeds; ++s) {
            points.push_back({value, config.seed + s, 0.0, 0.0, false, false});
        }
    }

    auto point_config = [&](const Point& p) {
        ExperimentConfig pc = config;
        pc.seed = p.seed;
        if (sweep_cmd.axis == "scale") {
            pc.scale_d = p.value;
        } else {
            pc.solver.rtol = p.value;
            pc.solver.atol = p.value;
        }
        return pc;
    };
    auto point_path = [&](const Point& p) {
        std::ostringstream name;
        name << "sweep/" << sweep_cmd.axis << "_" << p.value << "_s" << p.seed << ".json";
        return (fs::path(config.out_dir) / name.str()).string();
    };

    // Resume: completed points are keyed by their own config hash.
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const std::string path = point_path(points[i]);
        const std::string want = hex64(point_config(points[i]).hash());
        if (fs::exists(path)) {
            const json j = read_json_file(path);
            if (j.value("config_hash", "") == want) {
                points[i].nfe = j.at("nfe_mean").get<double>();
                points[i].metric_value = j.at("metric").get<double>();
                points[i].diverged = j.at("diverged").get<bool>();
                points[i].done = true;
                continue;
            }
        }
        todo.push_back(i);
    }

    {
        WorkerPool pool(default_workers());
        std::mutex io_mutex;
        for (std::size_t i : todo) {
            pool.submit([&, i] {
                const ExperimentConfig pc = point_config(points[i]);
                Point& p = points[i];
                try {
                    const PreparedData data = prepare_data(pc);
                    const RunResult run = run_training(pc, data);
                    p.diverged = run.training.status == TrainStatus::Diverged;
                    p.nfe = run.test.nfe_mean;
                    p.metric_value = run.test.metric_value;
                } catch (const std::exception& e) {
                    const std::lock_guard<std::mutex> lock(io_mutex);
                    std::cerr << "sweep point failed: " << e.what() << "\n";
                    p.diverged = true;
                }
                p.done = true;
                write_json_file(point_path(p), json{{"config_hash", hex64(pc.hash())},
                                                    {"value", p.value},
                                                    {"seed", p.seed},
                                                    {"nfe_mean", p.nfe},
                                                    {"metric", p.metric_value},
                                                    {"diverged", p.diverged}});
                const std::lock_guard<std::mutex> lock(io_mutex);
                std::cout << "sweep point " << sweep_cmd.axis << "=" << p.value << " seed=" << p.seed
                          << (p.diverged ? " diverged" : "") << "\n";
            });
        }
        pool.wait();
    }

    // Aggregation is single-threaded and ordered.
    std::vector<double> log_nfe, metrics;
    std::ostringstream csv;
    csv << "axis_value,seed,nfe_mean,metric,diverged\n";
    for (const Point& p : points) {
        csv << p.value << "," << p.seed << "," << p.nfe << "," << p.metric_value << ","
            << (p.diverged ? 1 : 0) << "\n";
        if (!p.diverged && p.nfe > 0.0) {
            log_nfe.push_back(std::log(p.nfe));
            metrics.push_back(p.metric_value);
        }
    }
    if (log_nfe.empty()) {
        std::cerr << "sweep: every point diverged\n";
        return kExitDivergence;
    }

    json summary;
    summary["config_hash"] = hex64(config.hash());
    summary["axis"] = sweep_cmd.axis;
    summary["n_points"] = points.size();
    summary["n_diverged"] = points.size() - log_nfe.size();
    if (log_nfe.size() >= 3) {
        summary["pearson_lognfe_metric"] =
            correlation(log_nfe, metrics, CorrelationKind::Pearson);
        summary["spearman_lognfe_metric"] =
            correlation(log_nfe, metrics, CorrelationKind::Spearman);
    }
    {
        std::ofstream file(fs::path(config.out_dir) / "sweep_results.csv");
        file << "# config_hash=" << hex64(config.hash()) << "\n" << csv.str();
    }
    write_json_file((fs::path(config.out_dir) / "sweep_summary.json").string(), summary);
    if (sweep_cmd.emit_svg) {
        SvgSeries curve;
        curve.label = sweep_cmd.axis;
        for (std::size_t i = 0; i < log_nfe.size(); ++i) {
            curve.xs.push_back(log_nfe[i]);
            curve.ys.push_back(metrics[i]);
        }
        write_svg_chart((fs::path(config.out_dir) / "sweep_metric_vs_lognfe.svg").string(),
                        "metric vs log NFE", {curve});
    }
    std::cout << summary.dump(2) << "\n";
    return kExitOk;
}

WorkerPool::WorkerPool(std::size_t workers) {
    workers = std::max<std::size_t>(1, workers);
    threads_.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) {
        threads_.emplace_back([this] { worker_loop(); });
    }
}

WorkerPool::~WorkerPool() {
    {
        const std::lock_guard<std::mutex> lock(mutex_);
        stop_ = true;
    }
    cv_job_.notify_all();
    for (std::thread& t : threads_) t.join();
}

void WorkerPool::submit(std::function<void()> job) {
    {
        const std::lock_guard<std::mutex> lock(mutex_);
        queue_.push(std::move(job));
        ++in_flight_;
    }
    cv_job_.notify_one();
}

void WorkerPool::wait() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_done_.wait(lock, [this] { return in_flight_ == 0; });
}

void WorkerPool::worker_loop() {
    while (true) {
        std::function<void()> job;
        {
            std::unique_lock<std::mutex> lock(mutex_);
            cv_job_.wait(lock, [this] { return stop_ || !queue_.empty(); });
            if (stop_ && queue_.empty()) return;
            job = std::move(queue_.front());
            queue_.pop();
        }
        job();
        {
            const std::lock_guard<std::mutex> lock(mutex_);
            --in_flight_;
        }
        cv_done_.notify_all();
    }
}

std::size_t default_workers() {
    if (const char* env = std::getenv("DENOTS_WORKERS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n > 0) return static_cast<std::size_t>(n);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? hc : 2;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream file(path);
    if (!file) throw std::runtime_error("write_json_file: cannot open " + path);
    file << j.dump(2) << "\n";
}

json read_json_file(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw std::runtime_error("read_json_file: cannot open " + path);
    return json::parse(file);
}

} // namespace denots
