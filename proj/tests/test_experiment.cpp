#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "denots/experiment.hpp"
#include "denots/serialize.hpp"

#include <atomic>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using namespace denots;

namespace {

json small_bump_config(const std::string& out_dir) {
    return json{{"dataset", {{"kind", "bump"}, {"n_sequences", 48}, {"target_length", 40}}},
                {"model", {{"field", "anti_nf"}, {"hidden_dim", 8}, {"scale_d", 2.0}}},
                {"train", {{"patience", 2}, {"max_epochs", 3}}},
                {"seed", 5},
                {"out_dir", out_dir}};
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("config round trip and validation") {
    SUBCASE("serialization is lossless") {
        const json j = small_bump_config("/tmp/x");
        const ExperimentConfig c = ExperimentConfig::from_json(j);
        const ExperimentConfig c2 = ExperimentConfig::from_json(c.to_json());
        CHECK(c.to_json() == c2.to_json());
        CHECK(c.hash() == c2.hash());
    }
    SUBCASE("missing dataset kind names the key") {
        json j = small_bump_config("/tmp/x");
        j["dataset"].erase("kind");
        CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(j), doctest::Contains("kind"),
                             std::invalid_argument);
    }
    SUBCASE("unknown keys name themselves") {
        json j = small_bump_config("/tmp/x");
        j["model"]["hiden_dim"] = 32;
        CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(j), doctest::Contains("hiden_dim"),
                             std::invalid_argument);
    }
    SUBCASE("the hash ignores out_dir but tracks the seed") {
        ExperimentConfig a = ExperimentConfig::from_json(small_bump_config("/tmp/a"));
        ExperimentConfig b = ExperimentConfig::from_json(small_bump_config("/tmp/b"));
        CHECK(a.hash() == b.hash());
        b.seed = 6;
        CHECK(a.hash() != b.hash());
    }
    SUBCASE("invalid values are rejected") {
        json j = small_bump_config("/tmp/x");
        j["split"] = {{"train", 0.9}, {"val", 0.3}, {"test", 0.1}};
        CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);
    }
}

TEST_CASE("weights container round trip") {
    TempDir dir("denots_weights_test");
    const std::string path = (dir.path / "w.bin").string();
    ad::ParamSet params;
    params.add("alpha", Tensor({2, 3}, {1.0, -2.0, 3.5, 0.25, -0.125, 9.0}));
    params.add("beta", Tensor({4}, {0.1, 0.2, 0.3, 0.4}));
    save_params(path, params, 0xabcdef1234ull);

    auto loaded = load_params(path);
    CHECK(loaded.config_hash == 0xabcdef1234ull);
    CHECK(loaded.params.count() == 2);
    CHECK(loaded.params["alpha"].shape() == std::vector<std::size_t>{2, 3});
    CHECK(loaded.params.pack() == params.pack());

    SUBCASE("corruption is detected by the checksum") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(40);
        const char junk = 0x5a;
        f.write(&junk, 1);
        f.close();
        CHECK_THROWS_AS(load_params(path), std::runtime_error);
    }
}

TEST_CASE("generate / train / attack pipeline on disk") {
    TempDir dir("denots_pipeline_test");
    ExperimentConfig cfg =
        ExperimentConfig::from_json(small_bump_config((dir.path / "run").string()));

    REQUIRE(cmd_generate(cfg) == kExitOk);
    const fs::path dataset_dir = fs::path(cfg.out_dir) / "dataset";
    CHECK(fs::exists(dataset_dir / "train.csv"));
    CHECK(fs::exists(dataset_dir / "val.csv"));
    CHECK(fs::exists(dataset_dir / "test.csv"));
    const json manifest = read_json_file((dataset_dir / "manifest.json").string());
    CHECK(manifest.at("task") == "binary");
    CHECK(manifest.at("split_sizes").at("train").get<std::size_t>() >= 30);

    SUBCASE("regenerating is a no-op with identical checksums") {
        const auto before = file_checksum((dataset_dir / "train.csv").string());
        REQUIRE(cmd_generate(cfg) == kExitOk);
        CHECK(file_checksum((dataset_dir / "train.csv").string()) == before);
    }

    SUBCASE("training writes artifacts and is seed-deterministic") {
        REQUIRE(cmd_train(cfg) == kExitOk);
        CHECK(fs::exists(fs::path(cfg.out_dir) / "model.bin"));
        CHECK(fs::exists(fs::path(cfg.out_dir) / "history.jsonl"));
        const json metrics = read_json_file((fs::path(cfg.out_dir) / "metrics.json").string());
        CHECK(metrics.contains("auroc"));
        CHECK(metrics.at("config_hash") == hex64(cfg.hash()));
        const double first = metrics.at("auroc").get<double>();

        REQUIRE(cmd_train(cfg) == kExitOk);
        const json again = read_json_file((fs::path(cfg.out_dir) / "metrics.json").string());
        CHECK(again.at("auroc").get<double>() == first);

        SUBCASE("attack at fraction zero reproduces the clean metric") {
            AttackCommand atk;
            atk.kind = AttackKind::Drop;
            atk.fractions = {0.0, 0.5};
            atk.n_seeds = 2;
            REQUIRE(cmd_attack(cfg, atk) == kExitOk);
            const json report =
                read_json_file((fs::path(cfg.out_dir) / "attack_drop.json").string());
            const auto& rows = report.at("rows");
            CHECK(rows.at(0).at("fraction").get<double>() == 0.0);
            CHECK(rows.at(0).at("metric_mean").get<double>() == doctest::Approx(first));
            CHECK(rows.at(0).at("metric_std").get<double>() == 0.0);
            CHECK(rows.size() == 2);
        }
    }

    SUBCASE("training without a dataset fails cleanly") {
        ExperimentConfig other = cfg;
        other.out_dir = (dir.path / "nowhere").string();
        CHECK_THROWS_WITH_AS(cmd_train(other), doctest::Contains("generate"), std::runtime_error);
    }
}

TEST_CASE("sweep aggregates points and resumes") {
    TempDir dir("denots_sweep_test");
    json j = small_bump_config((dir.path / "run").string());
    j["dataset"]["n_sequences"] = 36;
    j["dataset"]["target_length"] = 24;
    j["train"]["max_epochs"] = 2;
    j["train"]["patience"] = 1;
    ExperimentConfig cfg = ExperimentConfig::from_json(j);

    SweepCommand sweep;
    sweep.axis = "scale";
    sweep.grid = {1.0, 2.0, 4.0};
    REQUIRE(cmd_sweep(cfg, sweep) == kExitOk);
    CHECK(fs::exists(fs::path(cfg.out_dir) / "sweep_results.csv"));
    const json summary = read_json_file((fs::path(cfg.out_dir) / "sweep_summary.json").string());
    CHECK(summary.at("n_points").get<std::size_t>() == 3);

    // The per-point files make a rerun a pure cache hit; contents stay put.
    const auto stamp =
        file_checksum((fs::path(cfg.out_dir) / "sweep/scale_2_s5.json").string());
    REQUIRE(cmd_sweep(cfg, sweep) == kExitOk);
    CHECK(file_checksum((fs::path(cfg.out_dir) / "sweep/scale_2_s5.json").string()) == stamp);

    // Correlation in the summary matches a recomputation from the rows.
    if (summary.contains("pearson_lognfe_metric")) {
        std::vector<double> log_nfe, metric;
        for (const auto& f : fs::directory_iterator(fs::path(cfg.out_dir) / "sweep")) {
            const json p = read_json_file(f.path().string());
            if (!p.at("diverged").get<bool>()) {
                log_nfe.push_back(std::log(p.at("nfe_mean").get<double>()));
                metric.push_back(p.at("metric").get<double>());
            }
        }
        CHECK(correlation(log_nfe, metric, CorrelationKind::Pearson) ==
              doctest::Approx(summary.at("pearson_lognfe_metric").get<double>()));
    }
}

TEST_CASE("worker pool") {
    WorkerPool pool(4);
    std::atomic<int> counter{0};
    for (int i = 0; i < 64; ++i) {
        pool.submit([&] { counter.fetch_add(1); });
    }
    pool.wait();
    CHECK(counter.load() == 64);
    // A second batch reuses the same pool.
    for (int i = 0; i < 8; ++i) {
        pool.submit([&] { counter.fetch_add(1); });
    }
    pool.wait();
    CHECK(counter.load() == 72);
}

TEST_CASE("svg chart writer emits polylines") {
    TempDir dir("denots_svg_test");
    const std::string path = (dir.path / "chart.svg").string();
    SvgSeries s;
    s.label = "demo";
    s.xs = {1.0, 2.0, 3.0};
    s.ys = {0.5, 0.8, 0.3};
    write_svg_chart(path, "demo chart", {s});
    std::ifstream f(path);
    std::string body((std::istreambuf_iterator<char>(f)), {});
    CHECK(body.find("<svg") != std::string::npos);
    CHECK(body.find("polyline") != std::string::npos);
    CHECK(body.find("demo") != std::string::npos);
}

TEST_CASE("prepared data standardizes and preserves split structure") {
    json j = small_bump_config("/tmp/unused");
    j["dataset"]["n_sequences"] = 60;
    const ExperimentConfig cfg = ExperimentConfig::from_json(j);
    const PreparedData data = prepare_data(cfg);
    CHECK(data.task == TaskKind::Binary);
    CHECK(data.train.size() + data.val.size() + data.test.size() == 60);
    CHECK(data.feature_dim == 1);
    // Same config builds the same data, bit for bit.
    const PreparedData again = prepare_data(cfg);
    CHECK(again.train[0].features.data()[3] == data.train[0].features.data()[3]);
    CHECK(again.median_timeframe == data.median_timeframe);
}
