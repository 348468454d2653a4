#include <catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "maeq_cli/cli.hpp"
#include "support/genes.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using maeq::cli::run;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("maeq_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_group(const fs::path& p, const maeq::GroupData& g) {
    std::ofstream f(p);
    f.precision(17);
    f << "dose,response\n";
    for (std::size_t i = 0; i < g.size(); ++i) f << g.doses[i] << ',' << g.responses[i] << '\n';
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

struct Run {
    int code;
    std::string out, err;
};

Run call(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

void two_groups(const fs::path& dir) {
    const auto f = [](double x) { return 0.2 + 1.4 * x / (0.9 + x); };
    write_group(dir / "g1.csv", oracle::noisy_group(f, {0, 1, 2, 3, 4}, 6, 0.3, 1));
    write_group(dir / "g2.csv", oracle::noisy_group(f, {0, 1, 2, 3, 4}, 6, 0.3, 2));
}

std::vector<std::string> test_args(const fs::path& dir, const fs::path& out) {
    return {"test", (dir / "g1.csv").string(), (dir / "g2.csv").string(), "--epsilon", "1",
            "--n-boot", "50", "--seed", "7", "--candidates", "emax,linear,exp", "--out-dir", out.string()};
}

bool has_partial(const fs::path& dir) {
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".partial") return true;
    return false;
}

}  // namespace

TEST_CASE("test command writes results and a manifest", "[cli]") {
    TempDir tmp("test");
    two_groups(tmp.path);
    const Run r = call(test_args(tmp.path, tmp.path / "a"));
    INFO(r.err);
    REQUIRE(r.code == 0);
    REQUIRE(fs::exists(tmp.path / "a" / "test.json"));
    REQUIRE(fs::exists(tmp.path / "a" / "test.manifest.json"));
    CHECK_FALSE(has_partial(tmp.path / "a"));

    const auto j = nlohmann::json::parse(slurp(tmp.path / "a" / "test.json"));
    CHECK(j.at("u_hat").get<double>() >= j.at("d_hat").get<double>());
    CHECK(j.at("reject_h0").get<bool>() == (j.at("u_hat").get<double>() < 1.0));
    CHECK(j.at("seed").get<std::uint64_t>() == 7);
    const auto m = nlohmann::json::parse(slurp(tmp.path / "a" / "test.manifest.json"));
    CHECK(m.at("seed").get<std::uint64_t>() == 7);
    CHECK(m.at("inputs").size() == 2);
    CHECK(m.contains("resolved_options"));

    CHECK(call(test_args(tmp.path, tmp.path / "b")).code == 0);
    CHECK(slurp(tmp.path / "a" / "test.json") == slurp(tmp.path / "b" / "test.json"));

    auto threaded = test_args(tmp.path, tmp.path / "c");
    threaded.insert(threaded.end(), {"--threads", "2"});
    CHECK(call(threaded).code == 0);
    CHECK(slurp(tmp.path / "a" / "test.json") == slurp(tmp.path / "c" / "test.json"));
}

TEST_CASE("config files and exit codes", "[cli]") {
    TempDir tmp("config");
    two_groups(tmp.path);
    {
        std::ofstream cfg(tmp.path / "run.cfg");
        cfg << "# test settings\nepsilon = 0.5\nn-boot = 40\nseed = 3\n";
    }
    std::vector<std::string> args{"test", (tmp.path / "g1.csv").string(), (tmp.path / "g2.csv").string(),
                                  "--config", (tmp.path / "run.cfg").string(), "--seed", "9",
                                  "--candidates", "linear", "--out-dir", tmp.path.string()};
    REQUIRE(call(args).code == 0);
    const auto j = nlohmann::json::parse(slurp(tmp.path / "test.json"));
    CHECK(j.at("epsilon").get<double>() == 0.5);
    CHECK(j.at("n_boot").get<std::size_t>() == 40);
    CHECK(j.at("seed").get<std::uint64_t>() == 9);

    {
        std::ofstream cfg(tmp.path / "bad.cfg");
        cfg << "no-such-key = 1\n";
    }
    args[4] = (tmp.path / "bad.cfg").string();
    CHECK(call(args).code == maeq::cli::kConfig);

    CHECK(call({"test", "--bogus"}).code == maeq::cli::kUsage);
    CHECK(call({"test", (tmp.path / "g1.csv").string(), (tmp.path / "g2.csv").string()}).code == maeq::cli::kUsage);
    CHECK(call({"test", (tmp.path / "nope.csv").string(), (tmp.path / "g2.csv").string(), "--epsilon", "1",
                "--out-dir", tmp.path.string()})
              .code == maeq::cli::kIo);
    CHECK(call({"test", (tmp.path / "g1.csv").string(), (tmp.path / "g2.csv").string(), "--epsilon", "1",
                "--alpha", "2", "--out-dir", tmp.path.string()})
              .code == maeq::cli::kConfig);
    CHECK(call({"simulate", "--scenario", "s1", "--arms", "misspec_both", "--seed", "1"}).code ==
          maeq::cli::kConfig);
    CHECK(call({"--version"}).code == 0);
}

TEST_CASE("output directory from the environment", "[cli]") {
    TempDir tmp("env");
    two_groups(tmp.path);
    const fs::path dir = tmp.path / "from_env";
    ::setenv(maeq::cli::kOutDirEnv, dir.string().c_str(), 1);
    const Run r = call({"fit", (tmp.path / "g1.csv").string(), "--candidates", "emax,linear"});
    ::unsetenv(maeq::cli::kOutDirEnv);
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "fit.json"));
    CHECK(j.dump().find("emax") != std::string::npos);
}

TEST_CASE("simulate writes one row per cell and arm", "[cli]") {
    TempDir tmp("sim");
    const Run r = call({"simulate", "--scenario", "s1", "--arms", "true,ma", "--n-sim", "3", "--n-boot", "20",
                        "--d", "1.5", "--seed", "5", "--out-dir", tmp.path.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    std::istringstream csv(slurp(tmp.path / "simulate_s1.csv"));
    std::string line;
    std::size_t rows = 0;
    std::getline(csv, line);
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 12 * 2);
    CHECK(fs::exists(tmp.path / "simulate_s1.manifest.json"));

    CHECK(call({"simulate", "--scenario", "s2", "--arms", "true", "--n-sim", "2", "--n-boot", "10", "--d", "0",
                "--seed", "5", "--max-reports", "1", "--out-dir", tmp.path.string()})
              .code == 0);
    CHECK(fs::exists(tmp.path / "simulate_s2.csv.partial"));
    CHECK_FALSE(fs::exists(tmp.path / "simulate_s2.csv"));
}

TEST_CASE("batch command", "[cli]") {
    TempDir tmp("batch");
    {
        std::ofstream f(tmp.path / "genes.csv");
        f << synth::to_csv(synth::genes(4, 2));
    }
    const Run r = call({"batch", (tmp.path / "genes.csv").string(), "--seed", "4", "--n-boot", "20",
                        "--eps-tilde", "0.1,0.3", "--out-dir", tmp.path.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    for (const char* name : {"batch_results.csv", "batch_weights.csv", "batch_max_weight.csv"})
        CHECK(fs::exists(tmp.path / name));
    std::istringstream csv(slurp(tmp.path / "batch_results.csv"));
    std::string line;
    std::size_t rows = 0;
    std::getline(csv, line);
    CHECK(line.find("reject_0.3") != std::string::npos);
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 4);
}
