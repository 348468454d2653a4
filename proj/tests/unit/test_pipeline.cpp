#include <catch_amalgamated.hpp>
#include <algorithm>
#include <sstream>

#include "maeq/errors.hpp"
#include "maeq/pipeline.hpp"
#include "support/genes.hpp"
#include "support/oracles.hpp"

using namespace maeq;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

BatchOptions quick(std::size_t n_boot = 60) {
    BatchOptions o;
    o.n_boot = n_boot;
    o.grid_points = 201;
    o.seed = 11;
    return o;
}

GeneRecord make_gene(std::string id, const std::function<double(double)>& f1,
                     const std::function<double(double)>& f2, double sd, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    GeneRecord r;
    r.gene_id = std::move(id);
    r.group1 = synth::draw(synth::kWestern, f1, sd, eng, "WD");
    r.group2 = synth::draw(synth::kStandard, f2, sd, eng, "SD");
    return r;
}

}  // namespace

TEST_CASE("ingest reads long-format records", "[pipeline]") {
    std::istringstream in(
        "time,value,gene_id,group\n"
        "0,1.5,a,WD\n3,1.7,a,WD\n0,1.4,a,SD\n3,1.9,a,SD\n"
        "0,2.0,b,WD\n0,2.1,b,SD\n3,2.2,b,SD\n");
    const IngestResult r = ingest(in);
    CHECK(r.n_rows == 7);
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].gene_id == "a");
    CHECK(r.records[0].group1.group_label == "WD");
    CHECK(r.records[0].group1.responses == std::vector<double>{1.5, 1.7});
    CHECK(r.records[0].group2.doses == std::vector<double>{0.0, 3.0});
    CHECK(r.skipped == std::vector<std::string>{"b"});

    std::istringstream swapped("gene_id,group,time,value\na,WD,0,1\na,SD,0,2\n");
    IngestOptions o{"SD", "WD"};
    const IngestResult s = ingest(swapped, o);
    CHECK(s.records.empty());
    CHECK(s.skipped.size() == 1);
}

TEST_CASE("ingest reports malformed rows by line", "[pipeline]") {
    std::istringstream bad("gene_id,group,time,value\na,WD,0,1\na,WD,zero,1\n");
    try {
        ingest(bad);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.row() == 3);
    }
    std::istringstream third("gene_id,group,time,value\na,WD,0,1\na,SD,0,1\na,HF,0,1\n");
    CHECK_THROWS_AS(ingest(third), ParseError);
    std::istringstream header("gene,group,time,value\n");
    CHECK_THROWS_AS(ingest(header), ParseError);
}

TEST_CASE("ingest round-trips the ragged design", "[pipeline]") {
    const auto genes = synth::genes(6, 3);
    std::istringstream in(synth::to_csv(genes));
    const IngestResult r = ingest(in);
    REQUIRE(r.records.size() == genes.size());
    for (std::size_t i = 0; i < genes.size(); ++i) {
        CHECK(r.records[i].gene_id == genes[i].gene_id);
        CHECK(r.records[i].group1.size() == 47);
        CHECK(r.records[i].group2.size() == 32);
        CHECK(r.records[i].group1.responses == genes[i].group1.responses);
        CHECK(r.records[i].group2.doses == genes[i].group2.doses);
    }
}

TEST_CASE("equivalence thresholds scale with the range", "[pipeline]") {
    CHECK_THAT(epsilon_for_range(10.0, 0.2), WithinAbs(2.0, 1e-15));
    CHECK_THAT(epsilon_for_range(11.0 - 3.0, 0.25), WithinAbs(2.0, 1e-15));
    CHECK_THROWS_AS(epsilon_for_range(0.0, 0.2), DomainError);
    CHECK_THROWS_AS(epsilon_for_range(1.0, 0.0), ConfigError);
    CHECK_THROWS_AS(epsilon_for_range(1.0, 1.0), ConfigError);

    GeneRecord r;
    r.group1.doses = {0, 1};
    r.group1.responses = {3.0, 7.0};
    r.group2.doses = {0, 1};
    r.group2.responses = {11.0, 5.0};
    CHECK(observed_range(r) == 8.0);
    CHECK_THAT(epsilon_for_gene(r, 0.25), WithinAbs(2.0, 1e-15));
}

TEST_CASE("decisions agree with the unscaled test", "[pipeline][property]") {
    const GeneRecord g = make_gene(
        "g", [](double t) { return 5.0 + 2.0 * t / (10.0 + t); }, [](double t) { return 5.2 + 2.0 * t / (10.0 + t); },
        0.2, 8);
    BatchOptions o = quick();
    o.range_source = RangeSource::Observed;
    const auto cands = batch_candidates({g}, o);
    const GeneResult res = analyse_gene(g, cands, o);
    REQUIRE(res.status == GeneStatus::Tested);
    CHECK(res.range == observed_range(g));
    CHECK_THAT(res.u_tilde, WithinRel(res.u_hat / res.range, 1e-15));
    for (const auto& [e, rej] : res.reject_at) {
        TestOptions t;
        t.epsilon = e * res.range;
        t.n_boot = o.n_boot;
        t.grid_points = o.grid_points;
        t.range = std::pair{0.0, 45.0};
        t.seed = derive_seed(o.seed, stable_hash("g"));
        const TestResult direct = run_equivalence_test(g.group1, g.group2, cands, cands, t);
        CHECK(direct.u_hat == res.u_hat);
        CHECK(direct.reject_h0 == rej);
        CHECK((e > res.u_tilde) == rej);
    }
}

TEST_CASE("batch outcomes on constructed genes", "[pipeline]") {
    const auto same = [](double t) { return 4.0 + 3.0 * t / (8.0 + t); };
    const auto far = [](double t) { return 4.0 + 3.0 * t / (8.0 + t) + 0.9 * 3.0 * 45.0 / 53.0; };
    std::vector<GeneRecord> genes{make_gene("same", same, same, 0.0, 1), make_gene("far", same, far, 0.05, 2)};
    genes[0].group1.responses[0] += 1e-9;  // not exactly constant
    const BatchOptions o = quick();
    const auto res = run_batch(genes, o);
    REQUIRE(res.size() == 2);
    REQUIRE(res[0].status == GeneStatus::Tested);
    CHECK(res[0].u_hat < 1e-6);
    for (const auto& [e, rej] : res[0].reject_at) CHECK(rej);
    REQUIRE(res[1].status == GeneStatus::Tested);
    for (const auto& [e, rej] : res[1].reject_at) CHECK_FALSE(rej);

    const auto more = run_batch(synth::genes(12, 5), o);
    const auto counts = rejection_counts(more, o.eps_tilde_grid);
    REQUIRE(counts.size() == o.eps_tilde_grid.size());
    CHECK(std::is_sorted(counts.begin(), counts.end()));
}

TEST_CASE("weights per gene sum to one and follow the penalty", "[pipeline][property]") {
    const BatchOptions o = quick(20);
    const auto res = run_batch(synth::genes(8, 9), o);
    for (const GeneResult& r : res) {
        REQUIRE(r.status == GeneStatus::Tested);
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t k = 0; k < kAllFamilies.size(); ++k) {
            s1 += r.weights1[k];
            s2 += r.weights2[k];
        }
        CHECK_THAT(s1, WithinAbs(1.0, 1e-12));
        CHECK_THAT(s2, WithinAbs(1.0, 1e-12));
    }

    // level means identical at every time: linear and quadratic both fit the
    // flat mean exactly, so their weights differ only through the penalty
    GroupData flat;
    for (double t : synth::kWestern.times)
        for (double off : {-0.3, 0.3, -0.1, 0.1}) {
            flat.doses.push_back(t);
            flat.responses.push_back(2.0 + off);
        }
    const AveragedCurve c =
        fit_averaged(flat, make_candidates(std::vector<Family>{Family::Linear, Family::Quadratic}, 54.0));
    CHECK_THAT(c.fits()[1].rss, WithinRel(c.fits()[0].rss, 1e-9));
    CHECK_THAT(c.weights()[1] / c.weights()[0], WithinRel(std::exp(-1.0), 1e-6));

    const WeightSummary ws = summarize_weights(res);
    CHECK(ws.n_genes == res.size());
    REQUIRE(ws.group1.families.size() == kAllFamilies.size());
    for (std::size_t k = 0; k < kAllFamilies.size(); ++k) {
        std::vector<double> w;
        for (const GeneResult& r : res) w.push_back(r.weights1[k]);
        std::sort(w.begin(), w.end());
        const FamilyWeightStats& st = ws.group1.families[k];
        CHECK(st.family == kAllFamilies[k]);
        CHECK(st.min == w.front());
        CHECK(st.max == w.back());
        CHECK(st.min <= st.q25);
        CHECK(st.q25 <= st.median);
        CHECK(st.median <= st.q75);
        CHECK(st.q75 <= st.max);
    }
    std::size_t total = 0;
    for (std::size_t n : ws.group2.max_weight_counts) total += n;
    CHECK(total == res.size());
    CHECK(ws.group2.bin_edges.size() == 11);
    CHECK_THROWS(summarize_weights({}));
}

TEST_CASE("batch robustness", "[pipeline]") {
    auto genes = synth::genes(5, 21);
    GeneRecord bad;
    bad.gene_id = "bad";
    bad.group1 = genes[0].group1;
    bad.group2 = genes[0].group2;
    bad.group2.responses[3] = std::numeric_limits<double>::infinity();
    GeneRecord flat = genes[1];
    flat.gene_id = "flat";
    std::fill(flat.group1.responses.begin(), flat.group1.responses.end(), 1.0);
    std::fill(flat.group2.responses.begin(), flat.group2.responses.end(), 1.0);
    genes.insert(genes.begin() + 2, bad);
    genes.push_back(flat);

    BatchOptions o = quick(30);
    o.beta_scale = 54.0;
    const auto res = run_batch(genes, o);
    CHECK(res[2].status == GeneStatus::Failed);
    CHECK_FALSE(res[2].message.empty());
    CHECK(res.back().status == GeneStatus::Untested);
    for (std::size_t i : {0, 1, 3, 4, 5}) CHECK(res[i].status == GeneStatus::Tested);

    auto reversed = genes;
    std::reverse(reversed.begin(), reversed.end());
    o.threads = 2;
    const auto rev = run_batch(reversed, o);
    for (std::size_t i = 0; i < genes.size(); ++i) {
        const GeneResult& a = res[i];
        const GeneResult& b = rev[genes.size() - 1 - i];
        CHECK(a.gene_id == b.gene_id);
        CHECK(a.u_hat == b.u_hat);
        CHECK(a.status == b.status);
    }

    auto sorted = res;
    sort_by_u_tilde(sorted);
    CHECK(sorted.back().gene_id == "flat");
    for (std::size_t i = 1; i < 5; ++i) CHECK(sorted[i - 1].u_tilde <= sorted[i].u_tilde);

    o.multiplicity_adjustment = true;
    CHECK_THROWS_AS(run_batch(genes, o), ConfigError);

    std::ostringstream os;
    write_results_csv(os, sorted, quick().eps_tilde_grid);
    const std::string head = os.str().substr(0, os.str().find('\n'));
    CHECK(head.rfind("gene_id,status,d_hat,u_hat,u_tilde,range,w1_linear,", 0) == 0);
    CHECK(head.find(",reject_0.05,") != std::string::npos);
    CHECK(head.substr(head.size() - 8) == ",message");
}
