#include "maeq/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <spdlog/spdlog.h>

#include "maeq/errors.hpp"
#include "maeq/parallel.hpp"

namespace maeq {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_number(std::string_view field, std::size_t row, std::string_view column) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v))
        throw ParseError(row, fmt::format("cannot parse {} '{}' as a finite number", column, field));
    return v;
}

double max_time(const GeneRecord& r) { return std::max(r.group1.max_dose(), r.group2.max_dose()); }

// Linear interpolation between order statistics.
double quantile(const std::vector<double>& sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

GroupWeightSummary summarize_group(const std::vector<const GeneResult*>& tested, bool first,
                                   std::size_t n_bins) {
    GroupWeightSummary g;
    for (std::size_t k = 0; k < kAllFamilies.size(); ++k) {
        std::vector<double> w;
        w.reserve(tested.size());
        for (const GeneResult* r : tested) w.push_back(first ? r->weights1[k] : r->weights2[k]);
        std::sort(w.begin(), w.end());
        FamilyWeightStats s;
        s.family = kAllFamilies[k];
        s.min = w.front();
        s.q25 = quantile(w, 0.25);
        s.median = quantile(w, 0.5);
        s.q75 = quantile(w, 0.75);
        s.max = w.back();
        double sum = 0.0;
        for (double v : w) sum += v;
        s.mean = sum / static_cast<double>(w.size());
        g.families.push_back(s);
    }
    for (std::size_t b = 0; b <= n_bins; ++b)
        g.bin_edges.push_back(static_cast<double>(b) / static_cast<double>(n_bins));
    g.max_weight_counts.assign(n_bins, 0);
    for (const GeneResult* r : tested) {
        const auto& w = first ? r->weights1 : r->weights2;
        const double m = *std::max_element(w.begin(), w.end());
        auto bin = static_cast<std::size_t>(std::floor(m * static_cast<double>(n_bins)));
        ++g.max_weight_counts[std::min(bin, n_bins - 1)];
    }
    return g;
}

}  // namespace

IngestResult ingest(std::istream& in, const IngestOptions& opts) {
    std::string line;
    std::size_t row = 0;
    std::array<std::size_t, 4> col{};
    bool have_header = false;
    while (!have_header && std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto fields = split(line);
        const char* names[] = {"gene_id", "group", "time", "value"};
        for (std::size_t c = 0; c < 4; ++c) {
            const auto it = std::find(fields.begin(), fields.end(), names[c]);
            if (it == fields.end())
                throw ParseError(row, fmt::format("header lacks column '{}'", names[c]));
            col[c] = static_cast<std::size_t>(it - fields.begin());
        }
        have_header = true;
    }
    if (!have_header) throw ParseError(row, "missing header");
    const std::size_t n_cols = *std::max_element(col.begin(), col.end()) + 1;

    std::vector<std::string> labels;
    if (!opts.group1_label.empty()) labels.push_back(opts.group1_label);
    if (!opts.group2_label.empty()) labels.push_back(opts.group2_label);
    if (labels.size() == 2 && labels[0] == labels[1])
        throw ConfigError("group labels must differ");

    IngestResult out;
    std::map<std::string, std::size_t, std::less<>> index;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto fields = split(line);
        if (fields.size() < n_cols)
            throw ParseError(row, fmt::format("expected at least {} fields, found {}", n_cols, fields.size()));
        const std::string_view gene = fields[col[0]];
        const std::string_view group = fields[col[1]];
        if (gene.empty()) throw ParseError(row, "empty gene_id");
        if (group.empty()) throw ParseError(row, "empty group");
        const double t = parse_number(fields[col[2]], row, "time");
        const double y = parse_number(fields[col[3]], row, "value");

        auto lab = std::find(labels.begin(), labels.end(), group);
        if (lab == labels.end()) {
            if (labels.size() == 2)
                throw ParseError(row, fmt::format("unexpected third group '{}'", group));
            labels.emplace_back(group);
            lab = labels.end() - 1;
        }
        const bool first = lab == labels.begin();

        auto it = index.find(gene);
        if (it == index.end()) {
            it = index.emplace(std::string(gene), out.records.size()).first;
            GeneRecord rec;
            rec.gene_id = std::string(gene);
            out.records.push_back(std::move(rec));
        }
        GroupData& g = first ? out.records[it->second].group1 : out.records[it->second].group2;
        g.doses.push_back(t);
        g.responses.push_back(y);
        ++out.n_rows;
    }

    std::vector<GeneRecord> kept;
    kept.reserve(out.records.size());
    for (GeneRecord& r : out.records) {
        r.group1.group_label = labels.empty() ? "" : labels[0];
        r.group2.group_label = labels.size() < 2 ? "" : labels[1];
        if (distinct_levels(r.group1) < 2 || distinct_levels(r.group2) < 2) {
            spdlog::warn("gene '{}' skipped: a group has fewer than 2 distinct times", r.gene_id);
            out.skipped.push_back(r.gene_id);
            continue;
        }
        kept.push_back(std::move(r));
    }
    out.records = std::move(kept);
    return out;
}

IngestResult ingest(const std::filesystem::path& path, const IngestOptions& opts) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    return ingest(in, opts);
}

double observed_range(const GeneRecord& record) {
    double lo = INFINITY, hi = -INFINITY;
    for (const GroupData* g : {&record.group1, &record.group2})
        for (double y : g->responses) {
            lo = std::min(lo, y);
            hi = std::max(hi, y);
        }
    if (lo > hi) throw std::invalid_argument("observed_range: gene has no observations");
    return hi - lo;
}

double fitted_range(const GeneRecord& record, const AveragedCurve& curve1,
                    const AveragedCurve& curve2) {
    double lo = INFINITY, hi = -INFINITY;
    auto scan = [&](const GroupData& g, const AveragedCurve& c) {
        for (double t : summarize_levels(g).levels) {
            const double v = eval_averaged(c, t);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    };
    scan(record.group1, curve1);
    scan(record.group2, curve2);
    return hi - lo;
}

double epsilon_for_range(double range, double eps_tilde) {
    if (!(eps_tilde > 0.0 && eps_tilde < 1.0)) throw ConfigError("eps_tilde must lie in (0, 1)");
    if (!(range > 0.0) || !std::isfinite(range)) throw DomainError("response range must be positive");
    return eps_tilde * range;
}

double epsilon_for_gene(const GeneRecord& record, double eps_tilde) {
    return epsilon_for_range(observed_range(record), eps_tilde);
}

std::string_view status_name(GeneStatus s) noexcept {
    switch (s) {
        case GeneStatus::Tested: return "tested";
        case GeneStatus::Untested: return "untested";
        case GeneStatus::Failed: return "failed";
    }
    return "?";
}

void validate(const BatchOptions& opts) {
    if (opts.multiplicity_adjustment) throw ConfigError("multiplicity adjustment is not implemented");
    if (opts.families.empty()) throw ConfigError("candidate family list is empty");
    if (opts.eps_tilde_grid.empty()) throw ConfigError("eps_tilde grid is empty");
    for (double e : opts.eps_tilde_grid)
        if (!(e > 0.0 && e < 1.0)) throw ConfigError("eps_tilde values must lie in (0, 1)");
    if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (opts.n_boot < 2) throw ConfigError("the hybrid test needs n_boot >= 2");
    if (opts.grid_points < 2) throw ConfigError("grid needs at least 2 points");
    if (opts.beta_scale && !(*opts.beta_scale > 0.0)) throw ConfigError("beta scale must be positive");
}

std::vector<ModelSpec> batch_candidates(const std::vector<GeneRecord>& records,
                                        const BatchOptions& opts) {
    double scale = 0.0;
    if (opts.beta_scale) {
        scale = *opts.beta_scale;
    } else {
        double t_max = 0.0;
        for (const GeneRecord& r : records) t_max = std::max(t_max, max_time(r));
        scale = 1.2 * (t_max > 0.0 ? t_max : 1.0);
    }
    return make_candidates(opts.families, scale);
}

GeneResult analyse_gene(const GeneRecord& record, std::span<const ModelSpec> candidates,
                        const BatchOptions& opts) {
    GeneResult res;
    res.gene_id = record.gene_id;
    try {
        if (observed_range(record) <= 0.0) {
            res.status = GeneStatus::Untested;
            res.message = "constant responses";
            return res;
        }
        TestOptions t;
        t.epsilon = 0.0;  // decisions are taken per eps_tilde below
        t.alpha = opts.alpha;
        t.method = CiMethod::Hybrid;
        t.n_boot = opts.n_boot;
        t.grid_points = opts.grid_points;
        t.range = std::pair{0.0, max_time(record)};
        t.seed = derive_seed(opts.seed, stable_hash(record.gene_id));
        t.average = opts.average;
        t.threads = 1;
        const TestResult tr = run_equivalence_test(record.group1, record.group2, candidates, candidates, t);

        res.d_hat = tr.d_hat;
        res.u_hat = tr.u_hat;
        res.n_boot_effective = tr.n_boot_effective;
        res.range = opts.range_source == RangeSource::Fitted
                        ? fitted_range(record, tr.curves[0], tr.curves[1])
                        : observed_range(record);
        for (std::size_t k = 0; k < kAllFamilies.size(); ++k) {
            res.weights1[k] = tr.curves[0].weight_of(kAllFamilies[k]);
            res.weights2[k] = tr.curves[1].weight_of(kAllFamilies[k]);
        }
        if (!(res.range > 0.0)) {
            res.status = GeneStatus::Untested;
            res.message = "fitted curves are constant";
            return res;
        }
        res.u_tilde = res.u_hat / res.range;
        for (double e : opts.eps_tilde_grid)
            res.reject_at.emplace_back(e, epsilon_for_range(res.range, e) > res.u_hat);
        res.status = GeneStatus::Tested;
    } catch (const std::exception& e) {
        res.status = GeneStatus::Failed;
        res.message = e.what();
        spdlog::warn("gene '{}' failed: {}", record.gene_id, e.what());
    }
    return res;
}

std::vector<GeneResult> run_batch(const std::vector<GeneRecord>& records, const BatchOptions& opts) {
    validate(opts);
    const std::vector<ModelSpec> candidates = batch_candidates(records, opts);
    std::vector<GeneResult> out(records.size());
    parallel_for(records.size(), opts.threads,
                 [&](std::size_t i) { out[i] = analyse_gene(records[i], candidates, opts); });
    return out;
}

void sort_by_u_tilde(std::vector<GeneResult>& results) {
    std::stable_sort(results.begin(), results.end(), [](const GeneResult& a, const GeneResult& b) {
        const bool ta = a.status == GeneStatus::Tested;
        const bool tb = b.status == GeneStatus::Tested;
        if (ta != tb) return ta;
        if (ta && a.u_tilde != b.u_tilde) return a.u_tilde < b.u_tilde;
        return a.gene_id < b.gene_id;
    });
}

std::vector<std::size_t> rejection_counts(const std::vector<GeneResult>& results,
                                          std::span<const double> eps_tilde_grid) {
    std::vector<std::size_t> counts(eps_tilde_grid.size(), 0);
    for (const GeneResult& r : results) {
        if (r.status != GeneStatus::Tested) continue;
        for (std::size_t j = 0; j < eps_tilde_grid.size(); ++j)
            if (eps_tilde_grid[j] * r.range > r.u_hat) ++counts[j];
    }
    return counts;
}

WeightSummary summarize_weights(const std::vector<GeneResult>& results, std::size_t n_bins) {
    if (n_bins < 1) throw std::invalid_argument("summarize_weights: n_bins must be positive");
    std::vector<const GeneResult*> tested;
    for (const GeneResult& r : results)
        if (r.status == GeneStatus::Tested) tested.push_back(&r);
    if (tested.empty()) throw std::invalid_argument("summarize_weights: no tested genes");
    WeightSummary s;
    s.n_genes = tested.size();
    s.group1 = summarize_group(tested, true, n_bins);
    s.group2 = summarize_group(tested, false, n_bins);
    return s;
}

void write_results_csv(std::ostream& out, const std::vector<GeneResult>& results,
                       std::span<const double> eps_tilde_grid) {
    out << "gene_id,status,d_hat,u_hat,u_tilde,range";
    for (int g = 1; g <= 2; ++g)
        for (Family f : kAllFamilies) out << ",w" << g << '_' << family_name(f);
    for (double e : eps_tilde_grid) out << fmt::format(",reject_{}", e);
    out << ",message\n";
    for (const GeneResult& r : results) {
        out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g}", r.gene_id, status_name(r.status), r.d_hat,
                           r.u_hat, r.u_tilde, r.range);
        for (double w : r.weights1) out << fmt::format(",{:.17g}", w);
        for (double w : r.weights2) out << fmt::format(",{:.17g}", w);
        for (double e : eps_tilde_grid) {
            const auto it = std::find_if(r.reject_at.begin(), r.reject_at.end(),
                                         [&](const auto& p) { return p.first == e; });
            out << ',' << (it == r.reject_at.end() ? "" : it->second ? "1" : "0");
        }
        std::string msg = r.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        out << ',' << msg << '\n';
    }
}

void write_weight_summary_csv(std::ostream& out, const WeightSummary& summary) {
    out << "group,family,min,q25,median,q75,max,mean\n";
    int g = 1;
    for (const GroupWeightSummary* gs : {&summary.group1, &summary.group2}) {
        for (const FamilyWeightStats& s : gs->families)
            out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", g,
                               family_name(s.family), s.min, s.q25, s.median, s.q75, s.max, s.mean);
        ++g;
    }
}

void write_max_weight_histogram_csv(std::ostream& out, const WeightSummary& summary) {
    out << "group,lower,upper,count\n";
    int g = 1;
    for (const GroupWeightSummary* gs : {&summary.group1, &summary.group2}) {
        for (std::size_t b = 0; b < gs->max_weight_counts.size(); ++b)
            out << fmt::format("{},{:.17g},{:.17g},{}\n", g, gs->bin_edges[b], gs->bin_edges[b + 1],
                               gs->max_weight_counts[b]);
        ++g;
    }
}

}  // namespace maeq
