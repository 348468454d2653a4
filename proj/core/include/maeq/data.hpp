#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace maeq {

/// Observations of one group: one dose entry per response, replicates kept.
struct GroupData {
    std::vector<double> doses;
    std::vector<double> responses;
    std::string group_label;

    std::size_t size() const noexcept { return doses.size(); }
    bool empty() const noexcept { return doses.empty(); }

    /// Throws std::invalid_argument on length mismatch, emptiness or
    /// non-finite entries.
    void validate() const;

    double max_dose() const;
    double min_dose() const;
};

/// Per-level sufficient statistics. The residual sum of squares of any curve
/// m decomposes as within_ss + sum_i count_i * (mean_i - m(level_i))^2.
struct LevelSummary {
    std::vector<double> levels;  ///< distinct doses, ascending
    std::vector<double> counts;
    std::vector<double> means;
    double within_ss = 0.0;
    std::size_t n_obs = 0;

    std::size_t n_levels() const noexcept { return levels.size(); }
};

LevelSummary summarize_levels(const GroupData& data);

std::size_t distinct_levels(const GroupData& data);

/// Design with `per_level` replicates at each listed dose; responses zero.
GroupData balanced_design(const std::vector<double>& doses, std::size_t per_level,
                          std::string label = {});

}  // namespace maeq
