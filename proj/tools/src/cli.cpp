#include "maeq_cli/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <boost/version.hpp>
#include <chrono>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <map>
#include <sstream>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "maeq/errors.hpp"
#include "maeq/pipeline.hpp"
#include "maeq/simharness.hpp"

#ifndef MAEQ_VERSION
#define MAEQ_VERSION "unknown"
#endif

namespace maeq::cli {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Common {
    std::string out_dir;
    std::size_t threads = 0;
    std::string log_level = "warn";
    std::size_t grid_points = 501;
    std::string criterion = "aic";
    std::string variance = "weighted";
};

struct FitArgs {
    std::string data;
    std::string label = "group";
    std::vector<std::string> candidates{"all"};
    std::optional<double> beta_scale;
};

struct TestArgs {
    std::vector<std::string> data;
    double epsilon = 0.0;
    double alpha = 0.05;
    std::string method = "hybrid";
    std::size_t n_boot = 1000;
    std::uint64_t seed = 1;
    std::vector<std::string> candidates{"all"};
    std::vector<std::string> candidates2;
    std::optional<double> beta_scale;
    std::vector<double> range;
    double max_drop = 0.10;
    bool keep_boot = false;
};

struct SimulateArgs {
    std::string scenario;
    std::vector<std::string> arms{"all"};
    std::string preset = "desk";
    std::optional<std::size_t> n_sim;
    std::optional<std::size_t> n_boot;
    std::vector<double> d;
    std::optional<double> epsilon;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    std::optional<std::size_t> max_reports;
    std::optional<double> max_seconds;
};

struct BatchArgs {
    std::string data;
    std::uint64_t seed = 0;
    std::vector<double> eps_tilde{0.05, 0.075, 0.1, 0.15, 0.2, 0.25, 0.3};
    double alpha = 0.05;
    std::size_t n_boot = 1000;
    std::vector<std::string> candidates{"all"};
    std::optional<double> beta_scale;
    std::string range_source = "fitted";
    std::string group1;
    std::string group2;
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.emplace_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

void configure_logging(const std::string& level) {
    auto logger = spdlog::get("maeq");
    if (!logger) logger = spdlog::stderr_color_mt("maeq");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(level));
}

fs::path output_dir(const Common& c) {
    fs::path dir = ".";
    if (!c.out_dir.empty()) {
        dir = c.out_dir;
    } else if (const char* env = std::getenv(kOutDirEnv); env && *env) {
        dir = env;
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir;
}

fs::path partial_path(const fs::path& p) { return fs::path(p.string() + ".partial"); }

// Writes to `<path>.partial`; renames onto `path` only if `finish` is set.
void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body, bool finish = true) {
    const fs::path tmp = partial_path(path);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        body(out);
        out.flush();
        if (!out) throw IoError("write to '" + tmp.string() + "' failed");
    }
    if (!finish) return;
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
}

std::vector<Family> parse_families(const std::vector<std::string>& names) {
    if (names.size() == 1 && names[0] == "all") return {kAllFamilies.begin(), kAllFamilies.end()};
    std::vector<Family> out;
    for (const std::string& n : names) {
        const Family f = parse_family(n);
        if (std::find(out.begin(), out.end(), f) != out.end())
            throw ConfigError("candidate '" + n + "' listed twice");
        out.push_back(f);
    }
    if (out.empty()) throw ConfigError("candidate list is empty");
    return out;
}

AverageOptions average_options(const Common& c) {
    AverageOptions a;
    a.criterion = c.criterion == "bic" ? Criterion::BIC : Criterion::AIC;
    if (c.variance == "best") a.variance = VarianceSource::BestModel;
    else if (c.variance == "pooled") a.variance = VarianceSource::PooledResidual;
    else a.variance = VarianceSource::WeightedAverage;
    return a;
}

json to_json(const ParamVector& p) {
    json a = json::array();
    for (double v : p.values()) a.push_back(v);
    return a;
}

json to_json(const AveragedCurve& curve, const GroupData& data) {
    json fits = json::array();
    for (std::size_t k = 0; k < curve.size(); ++k) {
        const FitResult& f = curve.fits()[k];
        json j;
        j["family"] = family_name(f.spec.family);
        if (f.spec.family == Family::Beta) j["scale_s"] = f.spec.scale_s;
        j["theta"] = to_json(f.theta_hat);
        j["sigma2_hat"] = f.sigma2_hat;
        j["loglik"] = f.loglik;
        j["aic"] = f.aic;
        j["bic"] = f.bic;
        j["rss"] = f.rss;
        j["weight"] = curve.weights()[k];
        j["converged"] = f.converged;
        j["iterations"] = f.iterations;
        fits.push_back(std::move(j));
    }
    json g;
    g["label"] = data.group_label;
    g["n"] = data.size();
    g["levels"] = distinct_levels(data);
    g["criterion"] = curve.criterion() == Criterion::AIC ? "aic" : "bic";
    g["sigma2_group"] = curve.sigma2_group();
    g["fits"] = std::move(fits);
    return g;
}

double max_dose_of(const std::vector<GroupData>& groups) {
    double m = 0.0;
    for (const GroupData& g : groups) m = std::max(m, g.max_dose());
    return m;
}

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct Manifest {
    json j;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    Manifest(const std::string& command, const std::vector<std::string>& args, const CLI::App& sub) {
        j["tool"] = "maeq";
        j["version"] = MAEQ_VERSION;
        j["command"] = command;
        j["argv"] = args;
        j["resolved_options"] = sub.config_to_str(true, false);
        json build;
        build["compiler"] = __VERSION__;
        build["cplusplus"] = __cplusplus;
        build["boost"] = BOOST_LIB_VERSION;
        build["spdlog"] = fmt::format("{}.{}.{}", SPDLOG_VER_MAJOR, SPDLOG_VER_MINOR, SPDLOG_VER_PATCH);
        j["build"] = std::move(build);
        j["started_at"] = iso_now();
    }

    void input(const std::string& path) {
        json in;
        in["path"] = path;
        std::error_code ec;
        const auto size = fs::file_size(path, ec);
        if (!ec) in["bytes"] = size;
        j["inputs"].push_back(std::move(in));
    }

    void write(const fs::path& dir, const std::string& stem) {
        j["elapsed_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_file(dir / (stem + ".manifest.json"), [&](std::ostream& o) { o << j.dump(2) << '\n'; });
    }
};

void cmd_fit(const FitArgs& a, const Common& c, Manifest& m, std::ostream& out) {
    const fs::path dir = output_dir(c);
    GroupData data = read_group_csv(a.data, a.label);
    m.input(a.data);
    const double scale = a.beta_scale.value_or(1.2 * data.max_dose());
    const auto candidates = make_candidates(parse_families(a.candidates), scale);
    const AveragedCurve curve = fit_averaged(data, candidates, average_options(c));
    json j = to_json(curve, data);
    const fs::path path = dir / "fit.json";
    write_file(path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
    m.j["outputs"] = {path.string()};
    m.write(dir, "fit");
    for (std::size_t k = 0; k < curve.size(); ++k)
        out << fmt::format("{:<10} weight {:.6f}  aic {:.6f}\n", family_name(curve.fits()[k].spec.family),
                           curve.weights()[k], curve.fits()[k].aic);
}

void cmd_test(const TestArgs& a, const Common& c, Manifest& m, std::ostream& out) {
    const fs::path dir = output_dir(c);
    if (a.data.size() != 2) throw ConfigError("test needs exactly two group files");
    const GroupData g1 = read_group_csv(a.data[0], "group1");
    const GroupData g2 = read_group_csv(a.data[1], "group2");
    m.input(a.data[0]);
    m.input(a.data[1]);
    const double scale = a.beta_scale.value_or(1.2 * max_dose_of({g1, g2}));
    const auto cand1 = make_candidates(parse_families(a.candidates), scale);
    const auto cand2 =
        a.candidates2.empty() ? cand1 : make_candidates(parse_families(a.candidates2), scale);

    TestOptions t;
    t.epsilon = a.epsilon;
    t.alpha = a.alpha;
    t.method = parse_method(a.method);
    t.n_boot = a.n_boot;
    t.grid_points = c.grid_points;
    if (!a.range.empty()) {
        if (a.range.size() != 2 || !(a.range[0] < a.range[1]))
            throw ConfigError("--range needs two increasing values");
        t.range = std::pair{a.range[0], a.range[1]};
    }
    t.seed = a.seed;
    t.average = average_options(c);
    t.max_drop_fraction = a.max_drop;
    t.threads = c.threads;
    t.keep_boot_sample = a.keep_boot;
    const TestResult r = run_equivalence_test(g1, g2, cand1, cand2, t);

    json j;
    j["d_hat"] = r.d_hat;
    j["x_at_max"] = r.x_at_max;
    j["u_hat"] = r.u_hat;
    j["se"] = r.se;
    j["method"] = method_name(r.method);
    j["alpha"] = r.alpha;
    j["epsilon"] = r.epsilon;
    j["reject_h0"] = r.reject_h0;
    j["n_boot"] = r.n_boot;
    j["n_boot_effective"] = r.n_boot_effective;
    j["n_dropped"] = r.n_dropped;
    j["seed"] = r.seed;
    j["boot_stats"] = {{"mean", r.boot_stats.mean}, {"sd", r.boot_stats.sd}, {"q05", r.boot_stats.q05},
                       {"q50", r.boot_stats.q50}, {"q95", r.boot_stats.q95}};
    j["groups"] = {to_json(r.curves[0], g1), to_json(r.curves[1], g2)};
    if (a.keep_boot) j["boot_sample"] = r.boot_sample;

    const fs::path path = dir / "test.json";
    write_file(path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
    m.j["seed"] = a.seed;
    m.j["outputs"] = {path.string()};
    m.write(dir, "test");
    out << fmt::format("d_hat {:.6f}  u_hat {:.6f}  epsilon {}  -> {}\n", r.d_hat, r.u_hat, r.epsilon,
                       r.reject_h0 ? "equivalent (H0 rejected)" : "not shown equivalent");
}

void cmd_simulate(const SimulateArgs& a, const Common& c, Manifest& m, std::ostream& out) {
    const fs::path dir = output_dir(c);
    const ScenarioId id = parse_scenario(a.scenario);
    std::vector<Arm> arms;
    if (a.arms.size() == 1 && a.arms[0] == "all") {
        arms = legal_arms(id);
    } else {
        for (const std::string& s : a.arms) arms.push_back(parse_arm(s));
    }
    const auto [preset_sim, preset_boot] = preset_sizes(parse_preset(a.preset));
    GridOptions g;
    g.n_sim = a.n_sim.value_or(preset_sim);
    g.n_boot = a.n_boot.value_or(preset_boot);
    g.alpha = a.alpha;
    g.epsilon = a.epsilon;
    g.seed = a.seed;
    g.grid_points = c.grid_points;
    g.threads = c.threads;
    g.average = average_options(c);
    Budget budget;
    budget.max_reports = a.max_reports;
    if (a.max_seconds) budget.max_wall_time = std::chrono::duration<double>(*a.max_seconds);

    const auto cells = scenario_cells(id, a.d);
    // reject bad arms and d values before any simulation starts
    for (const Cell& cell : cells)
        for (Arm arm : arms) {
            ScenarioConfig cfg;
            cfg.scenario_id = id;
            cfg.d_true = cell.d;
            cfg.epsilon = g.epsilon.value_or(default_epsilon(id));
            cfg.sigma2_pair = cell.sigma2_pair;
            cfg.n_pair = cell.n_pair;
            cfg.arm = arm;
            cfg.n_sim = g.n_sim;
            cfg.n_boot = g.n_boot;
            cfg.alpha = g.alpha;
            validate(cfg);
        }

    const GridReport rep = run_grid(id, arms, cells, g, budget);
    const fs::path path = dir / fmt::format("simulate_{}.csv", scenario_name(id));
    write_file(path, [&](std::ostream& o) { write_reports_csv(o, rep.reports); }, rep.complete);
    m.j["seed"] = a.seed;
    m.j["n_sim"] = g.n_sim;
    m.j["n_boot"] = g.n_boot;
    m.j["complete"] = rep.complete;
    m.j["reports"] = rep.reports.size();
    m.j["planned"] = rep.n_planned;
    m.j["outputs"] = {(rep.complete ? path : partial_path(path)).string()};
    m.write(dir, fmt::format("simulate_{}", scenario_name(id)));
    for (const ScenarioReport& r : rep.reports)
        out << fmt::format("{} {:<13} d={:<5} s2=({},{}) n=({},{})  rate {:.4f} (se {:.4f})\n",
                           scenario_name(id), arm_name(r.config.arm), r.config.d_true, r.config.sigma2_pair.first,
                           r.config.sigma2_pair.second, r.config.n_pair.first, r.config.n_pair.second,
                           r.rejection_rate, r.mc_stderr);
    if (!rep.complete)
        out << fmt::format("budget exhausted after {} of {} reports; results left in {}\n", rep.reports.size(),
                           rep.n_planned, partial_path(path).string());
}

void cmd_batch(const BatchArgs& a, const Common& c, Manifest& m, std::ostream& out) {
    const fs::path dir = output_dir(c);
    IngestOptions io;
    io.group1_label = a.group1;
    io.group2_label = a.group2;
    std::ifstream in(a.data);
    if (!in) throw IoError("cannot open '" + a.data + "'");
    const IngestResult data = ingest(in, io);
    m.input(a.data);

    BatchOptions b;
    b.families = parse_families(a.candidates);
    b.beta_scale = a.beta_scale;
    b.eps_tilde_grid = a.eps_tilde;
    b.alpha = a.alpha;
    b.n_boot = a.n_boot;
    b.grid_points = c.grid_points;
    b.seed = a.seed;
    b.threads = c.threads;
    b.range_source = a.range_source == "observed" ? RangeSource::Observed : RangeSource::Fitted;
    b.average = average_options(c);
    validate(b);

    std::vector<GeneResult> results = run_batch(data.records, b);
    sort_by_u_tilde(results);
    const fs::path res_path = dir / "batch_results.csv";
    write_file(res_path, [&](std::ostream& o) { write_results_csv(o, results, b.eps_tilde_grid); });
    std::vector<std::string> outputs{res_path.string()};
    const bool any_tested = std::any_of(results.begin(), results.end(),
                                        [](const GeneResult& r) { return r.status == GeneStatus::Tested; });
    if (any_tested) {
        const WeightSummary ws = summarize_weights(results);
        const fs::path w_path = dir / "batch_weights.csv";
        const fs::path h_path = dir / "batch_max_weight.csv";
        write_file(w_path, [&](std::ostream& o) { write_weight_summary_csv(o, ws); });
        write_file(h_path, [&](std::ostream& o) { write_max_weight_histogram_csv(o, ws); });
        outputs.push_back(w_path.string());
        outputs.push_back(h_path.string());
    }
    std::map<std::string, std::size_t> status_counts;
    for (const GeneResult& r : results) ++status_counts[std::string(status_name(r.status))];
    m.j["seed"] = a.seed;
    m.j["genes"] = data.records.size();
    m.j["skipped"] = data.skipped;
    m.j["status_counts"] = status_counts;
    m.j["outputs"] = outputs;
    m.write(dir, "batch");

    out << fmt::format("{} genes ({} skipped at ingestion)", data.records.size(), data.skipped.size());
    for (const auto& [k, v] : status_counts) out << fmt::format(", {} {}", v, k);
    out << '\n';
    const auto counts = rejection_counts(results, b.eps_tilde_grid);
    for (std::size_t j = 0; j < counts.size(); ++j)
        out << fmt::format("eps_tilde {:<6} rejections {}\n", b.eps_tilde_grid[j], counts[j]);
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", "key = value file; command-line flags take precedence");
    sub->add_option("--out-dir", c.out_dir, fmt::format("Output directory (default ${} or .)", kOutDirEnv));
    sub->add_option("--threads", c.threads, "Worker threads, 0 = all cores")->capture_default_str();
    sub->add_option("--log-level", c.log_level, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}))
        ->capture_default_str();
    sub->add_option("--grid-points", c.grid_points, "Grid points for the maximal deviation")
        ->check(CLI::Range(std::size_t{2}, std::size_t{10000000}))
        ->capture_default_str();
    sub->add_option("--criterion", c.criterion, "Information criterion for weights")
        ->check(CLI::IsMember({"aic", "bic"}))
        ->capture_default_str();
    sub->add_option("--variance", c.variance, "Bootstrap variance: weighted, best or pooled")
        ->check(CLI::IsMember({"weighted", "best", "pooled"}))
        ->capture_default_str();
}

// Appends `--key=value` for every `key = value` line of the --config file
// whose flag is not already on the command line.
std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App& app) {
    auto sub_it = std::find_if(args.begin(), args.end(), [](const std::string& a) { return a.empty() || a[0] != '-'; });
    if (sub_it == args.end()) return args;
    CLI::App* sub = nullptr;
    try {
        sub = app.get_subcommand(*sub_it);
    } catch (const CLI::OptionNotFound&) {
        return args;
    }
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;

    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::vector<std::string> out = args;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const std::string_view body = trim(std::string_view(line).substr(0, line.find('#')));
        if (body.empty()) continue;
        const std::size_t eq = body.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(fmt::format("{}:{}: expected key = value", path, row));
        std::string key(trim(body.substr(0, eq)));
        std::string value(trim(body.substr(eq + 1)));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        const std::string flag = "--" + key;
        if (key.empty() || key == "config" || sub->get_option_no_throw(flag) == nullptr)
            throw ConfigError(fmt::format("{}:{}: unknown key '{}' for command {}", path, row, key, sub->get_name()));
        const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
            return a == flag || a.rfind(flag + "=", 0) == 0;
        });
        if (!given) out.push_back(flag + "=" + value);
    }
    return out;
}

int map_parse_error(const CLI::ParseError& e) {
    if (dynamic_cast<const CLI::FileError*>(&e)) return kIo;
    if (dynamic_cast<const CLI::ConversionError*>(&e) || dynamic_cast<const CLI::ValidationError*>(&e) ||
        dynamic_cast<const CLI::ConfigError*>(&e))
        return kConfig;
    return kUsage;
}

}  // namespace

GroupData read_group_csv(const fs::path& path, const std::string& label) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    GroupData g;
    g.group_label = label;
    std::string line;
    std::size_t row = 0;
    std::size_t dose_col = 0, resp_col = 0, n_cols = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto fields = split(line);
        if (!header) {
            auto find = [&](std::initializer_list<const char*> names) {
                for (const char* n : names) {
                    auto it = std::find(fields.begin(), fields.end(), n);
                    if (it != fields.end()) return static_cast<std::size_t>(it - fields.begin());
                }
                throw ParseError(row, "header needs columns dose and response");
            };
            dose_col = find({"dose", "time", "x"});
            resp_col = find({"response", "value", "y"});
            n_cols = std::max(dose_col, resp_col) + 1;
            header = true;
            continue;
        }
        if (fields.size() < n_cols) throw ParseError(row, "too few fields");
        auto num = [&](const std::string& s) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(s, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (s.empty() || used != s.size() || !std::isfinite(v))
                throw ParseError(row, "cannot parse '" + s + "' as a finite number");
            return v;
        };
        g.doses.push_back(num(fields[dose_col]));
        g.responses.push_back(num(fields[resp_col]));
    }
    if (!header) throw ParseError(row, "missing header");
    if (g.empty()) throw ParseError(row, "no observations in '" + path.string() + "'");
    return g;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Model-averaged equivalence tests for two regression curves", "maeq"};
    app.set_version_flag("--version", MAEQ_VERSION);
    app.require_subcommand(1);

    Common common;
    FitArgs fa;
    TestArgs ta;
    SimulateArgs sa;
    BatchArgs ba;

    CLI::App* fit = app.add_subcommand("fit", "Fit and average candidate models on one group");
    add_common(fit, common);
    fit->add_option("data", fa.data, "Group CSV (dose,response)")->required();
    fit->add_option("--label", fa.label, "Group label")->capture_default_str();
    fit->add_option("--candidates", fa.candidates, "Families, comma separated, or all")
        ->delimiter(',')
        ->capture_default_str();
    fit->add_option("--beta-scale", fa.beta_scale, "Beta model scale (default 1.2 x max dose)");

    CLI::App* test = app.add_subcommand("test", "Equivalence test of two groups");
    add_common(test, common);
    test->add_option("data", ta.data, "Group 1 and group 2 CSV files")->expected(2)->required();
    test->add_option("--epsilon", ta.epsilon, "Equivalence threshold")->required();
    test->add_option("--alpha", ta.alpha, "Significance level")->capture_default_str();
    test->add_option("--method", ta.method, "hybrid or percentile")
        ->check(CLI::IsMember({"hybrid", "percentile"}))
        ->capture_default_str();
    test->add_option("--n-boot", ta.n_boot, "Bootstrap replicates")->capture_default_str();
    test->add_option("--seed", ta.seed, "Master seed")->capture_default_str();
    test->add_option("--candidates", ta.candidates, "Families for both groups, or all")
        ->delimiter(',')
        ->capture_default_str();
    test->add_option("--candidates2", ta.candidates2, "Families for group 2 if different")->delimiter(',');
    test->add_option("--beta-scale", ta.beta_scale, "Beta model scale (default 1.2 x max dose)");
    test->add_option("--range", ta.range, "Covariate range lo,hi (default: observed doses)")->delimiter(',');
    test->add_option("--max-drop", ta.max_drop, "Largest tolerated fraction of failed replicates")
        ->capture_default_str();
    test->add_flag("--keep-boot", ta.keep_boot, "Include the bootstrap sample in the output");

    CLI::App* sim = app.add_subcommand("simulate", "Rejection rates over a scenario grid");
    add_common(sim, common);
    sim->add_option("--scenario", sa.scenario, "s1, s2 or s3")->required();
    sim->add_option("--arms", sa.arms, "Arms, comma separated, or all")->delimiter(',')->capture_default_str();
    sim->add_option("--preset", sa.preset, "desk (500 runs, 300 replicates) or full (1000, 500)")
        ->check(CLI::IsMember({"desk", "full"}))
        ->capture_default_str();
    sim->add_option("--n-sim", sa.n_sim, "Simulation runs per cell (overrides preset)");
    sim->add_option("--n-boot", sa.n_boot, "Bootstrap replicates per run (overrides preset)");
    sim->add_option("--d", sa.d, "Restrict to these true deviations")->delimiter(',');
    sim->add_option("--epsilon", sa.epsilon, "Threshold (default: scenario value)");
    sim->add_option("--alpha", sa.alpha, "Significance level")->capture_default_str();
    sim->add_option("--seed", sa.seed, "Master seed")->required();
    sim->add_option("--max-reports", sa.max_reports, "Stop after this many cell x arm reports");
    sim->add_option("--max-seconds", sa.max_seconds, "Stop starting new cells after this wall time");

    CLI::App* batch = app.add_subcommand("batch", "Per-gene tests on a long-format CSV");
    add_common(batch, common);
    batch->add_option("data", ba.data, "CSV with gene_id,group,time,value")->required();
    batch->add_option("--seed", ba.seed, "Master seed")->required();
    batch->add_option("--eps-tilde", ba.eps_tilde, "Normalised thresholds")->delimiter(',')->capture_default_str();
    batch->add_option("--alpha", ba.alpha, "Significance level")->capture_default_str();
    batch->add_option("--n-boot", ba.n_boot, "Bootstrap replicates per gene")->capture_default_str();
    batch->add_option("--candidates", ba.candidates, "Families, comma separated, or all")
        ->delimiter(',')
        ->capture_default_str();
    batch->add_option("--beta-scale", ba.beta_scale, "Beta model scale (default 1.2 x max time)");
    batch->add_option("--range-source", ba.range_source, "fitted or observed response range")
        ->check(CLI::IsMember({"fitted", "observed"}))
        ->capture_default_str();
    batch->add_option("--group1", ba.group1, "Label of group 1 (default: first seen)");
    batch->add_option("--group2", ba.group2, "Label of group 2 (default: second seen)");

    std::vector<std::string> expanded;
    try {
        expanded = expand_config(args, app);
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kConfig;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << '\n';
        return kIo;
    }

    try {
        std::vector<std::string> rev(expanded.rbegin(), expanded.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        app.exit(e, out, err);
        return map_parse_error(e);
    }

    try {
        configure_logging(common.log_level);
        if (fit->parsed()) {
            Manifest m("fit", expanded, *fit);
            cmd_fit(fa, common, m, out);
        } else if (test->parsed()) {
            Manifest m("test", expanded, *test);
            cmd_test(ta, common, m, out);
        } else if (sim->parsed()) {
            Manifest m("simulate", expanded, *sim);
            cmd_simulate(sa, common, m, out);
        } else if (batch->parsed()) {
            Manifest m("batch", expanded, *batch);
            cmd_batch(ba, common, m, out);
        }
        return kOk;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kConfig;
    } catch (const ParseError& e) {
        err << "input error: " << e.what() << '\n';
        return kIo;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const fs::filesystem_error& e) {
        err << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const FitFailure& e) {
        err << "fit failed: " << e.what() << '\n';
        return kCompute;
    } catch (const BootstrapFailure& e) {
        err << "bootstrap failed: " << e.what() << '\n';
        return kCompute;
    } catch (const DomainError& e) {
        err << "domain error: " << e.what() << '\n';
        return kCompute;
    } catch (const InsufficientDesign& e) {
        err << "design error: " << e.what() << '\n';
        return kCompute;
    } catch (const std::runtime_error& e) {
        err << "error: " << e.what() << '\n';
        return kCompute;
    } catch (const std::exception& e) {
        err << "unexpected error: " << e.what() << '\n';
        return kUnexpected;
    }
}

}  // namespace maeq::cli
