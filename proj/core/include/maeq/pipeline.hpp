#pragma once

// Per-gene equivalence analysis of two time-course groups: long-format CSV
// ingestion, range-scaled thresholds, batch testing and weight summaries.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "maeq/eqtest.hpp"

namespace maeq {

struct GeneRecord {
    std::string gene_id;
    GroupData group1;
    GroupData group2;
};

struct IngestOptions {
    /// Group labels mapped to group 1 and 2. Empty: order of first appearance.
    std::string group1_label;
    std::string group2_label;
};

struct IngestResult {
    std::vector<GeneRecord> records;  ///< in order of first appearance
    std::vector<std::string> skipped; ///< genes with a group on < 2 distinct times
    std::size_t n_rows = 0;
};

/// Reads CSV with header `gene_id,group,time,value` (columns in any order).
/// Throws ParseError with the 1-based line number on malformed rows.
IngestResult ingest(std::istream& in, const IngestOptions& opts = {});
IngestResult ingest(const std::filesystem::path& path, const IngestOptions& opts = {});

/// Largest minus smallest observed response over both groups.
double observed_range(const GeneRecord& record);

/// Largest minus smallest fitted value of the averaged curves at the design
/// times of their groups.
double fitted_range(const GeneRecord& record, const AveragedCurve& curve1,
                    const AveragedCurve& curve2);

/// eps_tilde * range; throws ConfigError unless 0 < eps_tilde < 1 and
/// DomainError unless range > 0.
double epsilon_for_range(double range, double eps_tilde);
double epsilon_for_gene(const GeneRecord& record, double eps_tilde);

enum class RangeSource { Fitted, Observed };

enum class GeneStatus { Tested, Untested, Failed };
std::string_view status_name(GeneStatus s) noexcept;

struct GeneResult {
    std::string gene_id;
    GeneStatus status = GeneStatus::Failed;
    std::string message;  ///< reason when not tested
    double d_hat = 0.0;
    double u_hat = 0.0;
    double u_tilde = 0.0;
    double range = 0.0;
    std::size_t n_boot_effective = 0;
    /// Indexed like kAllFamilies; zero for families not in the ensemble.
    std::array<double, kAllFamilies.size()> weights1{};
    std::array<double, kAllFamilies.size()> weights2{};
    /// (eps_tilde, eps_tilde * range > u_hat) for each grid value.
    std::vector<std::pair<double, bool>> reject_at;
};

struct BatchOptions {
    std::vector<Family> families{kAllFamilies.begin(), kAllFamilies.end()};
    /// Beta scale; defaults to 1.2 x the largest time over all records.
    std::optional<double> beta_scale;
    std::vector<double> eps_tilde_grid{0.05, 0.075, 0.1, 0.15, 0.2, 0.25, 0.3};
    double alpha = 0.05;
    std::size_t n_boot = 1000;
    std::size_t grid_points = 501;
    std::uint64_t seed = 1;
    std::size_t threads = 1;  ///< workers over genes; 0 = all cores
    RangeSource range_source = RangeSource::Fitted;
    AverageOptions average;
    /// Reserved. No adjustment is implemented; true is rejected.
    bool multiplicity_adjustment = false;
};

void validate(const BatchOptions& opts);

/// Candidate set used for every gene of `records`.
std::vector<ModelSpec> batch_candidates(const std::vector<GeneRecord>& records,
                                        const BatchOptions& opts);

/// Tests one gene on [0, largest time of both groups] with the hybrid bound.
/// The seed is derived from opts.seed and the gene id. Never throws for
/// data-dependent failures; they yield a Failed or Untested result.
GeneResult analyse_gene(const GeneRecord& record, std::span<const ModelSpec> candidates,
                        const BatchOptions& opts);

/// One result per record, in input order.
std::vector<GeneResult> run_batch(const std::vector<GeneRecord>& records,
                                  const BatchOptions& opts);

/// Tested genes first by ascending u_tilde, then the rest by gene id.
void sort_by_u_tilde(std::vector<GeneResult>& results);

/// Number of tested genes rejected at each eps_tilde of the grid.
std::vector<std::size_t> rejection_counts(const std::vector<GeneResult>& results,
                                          std::span<const double> eps_tilde_grid);

struct FamilyWeightStats {
    Family family = Family::Linear;
    double min = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, max = 0.0, mean = 0.0;
};

struct GroupWeightSummary {
    std::vector<FamilyWeightStats> families;
    /// Per-gene maximum weight, counted in equal-width bins over [0, 1].
    std::vector<double> bin_edges;
    std::vector<std::size_t> max_weight_counts;
};

struct WeightSummary {
    std::size_t n_genes = 0;  ///< tested genes summarised
    GroupWeightSummary group1;
    GroupWeightSummary group2;
};

/// Throws std::invalid_argument if no result is a tested gene.
WeightSummary summarize_weights(const std::vector<GeneResult>& results, std::size_t n_bins = 10);

void write_results_csv(std::ostream& out, const std::vector<GeneResult>& results,
                       std::span<const double> eps_tilde_grid);
/// Columns: group, family, min, q25, median, q75, max, mean.
void write_weight_summary_csv(std::ostream& out, const WeightSummary& summary);
/// Columns: group, lower, upper, count.
void write_max_weight_histogram_csv(std::ostream& out, const WeightSummary& summary);

}  // namespace maeq
