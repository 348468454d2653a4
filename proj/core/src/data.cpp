#include "maeq/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace maeq {

void GroupData::validate() const {
    if (doses.size() != responses.size())
        throw std::invalid_argument("GroupData '" + group_label + "': doses and responses differ in length");
    if (doses.empty()) throw std::invalid_argument("GroupData '" + group_label + "': no observations");
    for (std::size_t i = 0; i < doses.size(); ++i)
        if (!std::isfinite(doses[i]) || !std::isfinite(responses[i]))
            throw std::invalid_argument("GroupData '" + group_label + "': non-finite observation");
}

double GroupData::max_dose() const {
    if (doses.empty()) throw std::invalid_argument("GroupData: no observations");
    return *std::max_element(doses.begin(), doses.end());
}

double GroupData::min_dose() const {
    if (doses.empty()) throw std::invalid_argument("GroupData: no observations");
    return *std::min_element(doses.begin(), doses.end());
}

LevelSummary summarize_levels(const GroupData& data) {
    data.validate();
    struct Acc {
        double n = 0.0;
        double sum = 0.0;
    };
    std::map<double, Acc> acc;
    for (std::size_t i = 0; i < data.size(); ++i) {
        Acc& a = acc[data.doses[i]];
        a.n += 1.0;
        a.sum += data.responses[i];
    }
    LevelSummary s;
    s.n_obs = data.size();
    s.levels.reserve(acc.size());
    for (const auto& [x, a] : acc) {
        s.levels.push_back(x);
        s.counts.push_back(a.n);
        s.means.push_back(a.sum / a.n);
    }
    // two-pass within-level sum of squares
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto it = std::lower_bound(s.levels.begin(), s.levels.end(), data.doses[i]);
        const double dev = data.responses[i] - s.means[static_cast<std::size_t>(it - s.levels.begin())];
        s.within_ss += dev * dev;
    }
    return s;
}

std::size_t distinct_levels(const GroupData& data) {
    std::vector<double> d = data.doses;
    std::sort(d.begin(), d.end());
    return static_cast<std::size_t>(std::unique(d.begin(), d.end()) - d.begin());
}

GroupData balanced_design(const std::vector<double>& doses, std::size_t per_level,
                          std::string label) {
    GroupData g;
    g.group_label = std::move(label);
    for (double x : doses)
        for (std::size_t r = 0; r < per_level; ++r) {
            g.doses.push_back(x);
            g.responses.push_back(0.0);
        }
    return g;
}

}  // namespace maeq
