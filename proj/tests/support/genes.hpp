#pragma once

// Synthetic time-course genes on a two-diet design with ragged replicates.

#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "maeq/pipeline.hpp"

namespace synth {

struct Design {
    std::vector<double> times;
    std::vector<std::size_t> reps;
};

inline const Design kWestern{{0, 3, 9, 15, 21, 27, 33, 39, 45}, {5, 5, 5, 5, 5, 5, 5, 4, 8}};
inline const Design kStandard{{0, 3, 27, 33, 39, 45}, {7, 5, 5, 7, 3, 5}};

inline maeq::GroupData draw(const Design& d, const std::function<double(double)>& mean, double sd,
                            std::mt19937_64& eng, const std::string& label) {
    std::normal_distribution<double> z(0.0, 1.0);
    maeq::GroupData g;
    g.group_label = label;
    for (std::size_t l = 0; l < d.times.size(); ++l)
        for (std::size_t r = 0; r < d.reps[l]; ++r) {
            g.doses.push_back(d.times[l]);
            g.responses.push_back(mean(d.times[l]) + (sd > 0.0 ? sd * z(eng) : 0.0));
        }
    return g;
}

// Genes with a mix of shapes: some identical between diets, some shifted.
inline std::vector<maeq::GeneRecord> genes(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<maeq::GeneRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double base = 6.0 + 4.0 * u(eng);
        const double amp = 0.5 + 2.0 * u(eng);
        const double ed = 3.0 + 20.0 * u(eng);
        const double shift = (i % 3 == 0) ? 0.0 : 0.6 * amp * u(eng);
        const double sd = 0.1 + 0.3 * u(eng);
        std::function<double(double)> f1, f2;
        switch (i % 4) {
            case 0: f1 = [=](double t) { return base + amp * t / (ed + t); }; break;
            case 1: f1 = [=](double t) { return base + amp * t / 45.0; }; break;
            case 2: f1 = [=](double t) { return base + amp * (std::exp(t / 40.0) - 1.0); }; break;
            default: f1 = [=](double t) { return base + amp * std::sin(t / 45.0 * 3.0); }; break;
        }
        f2 = [=](double t) { return f1(t) + shift; };
        maeq::GeneRecord r;
        r.gene_id = "gene" + std::to_string(i);
        r.group1 = draw(kWestern, f1, sd, eng, "WD");
        r.group2 = draw(kStandard, f2, sd, eng, "SD");
        out.push_back(std::move(r));
    }
    return out;
}

inline std::string to_csv(const std::vector<maeq::GeneRecord>& genes) {
    std::ostringstream os;
    os.precision(17);
    os << "gene_id,group,time,value\n";
    for (const auto& g : genes)
        for (const maeq::GroupData* grp : {&g.group1, &g.group2})
            for (std::size_t i = 0; i < grp->size(); ++i)
                os << g.gene_id << ',' << grp->group_label << ',' << grp->doses[i] << ',' << grp->responses[i] << '\n';
    return os.str();
}

}  // namespace synth
