#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <array>
#include <cmath>

#include "fedauth/anomaly_metrics.hpp"
#include "fedauth/rng.hpp"
#include "oracles.hpp"

using namespace fedauth;

namespace {

std::vector<Vec> sample_cluster(const Vec& center, double spread, int n, uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec> pts;
    for (int i = 0; i < n; ++i) {
        Vec v(center.size());
        for (size_t j = 0; j < v.size(); ++j) v[j] = center[j] + spread * rng.normal();
        pts.push_back(std::move(v));
    }
    return pts;
}

// two well-separated classes in d=2 with integer reference coordinates, so
// translation tests stay exact in floating point
std::vector<LabeledEmbedding> grid_reference() {
    std::vector<LabeledEmbedding> data;
    for (double x : {0.0, 2.0})
        for (double y : {0.0, 2.0}) data.push_back({{x, y}, 0});
    for (double x : {10.0, 12.0})
        for (double y : {10.0, 12.0}) data.push_back({{x, y}, 1});
    return data;
}

std::vector<LabeledEmbedding> gaussian_reference(int per_class, double spread, uint64_t seed) {
    std::vector<LabeledEmbedding> data;
    for (const Vec& v : sample_cluster({0, 0, 0, 0}, spread, per_class, derive_seed(seed, "r0")))
        data.push_back({v, 0});
    for (const Vec& v : sample_cluster({8, 8, 0, 0}, spread, per_class, derive_seed(seed, "r1")))
        data.push_back({v, 1});
    return data;
}

ClientSubmission clean_client(const std::string& id, int per_class, uint64_t seed) {
    ClientSubmission sub{id, {}};
    for (const Vec& v : sample_cluster({0, 0, 0, 0}, 1.0, per_class, derive_seed(seed, "s0")))
        sub.samples.push_back({v, 0});
    for (const Vec& v : sample_cluster({8, 8, 0, 0}, 1.0, per_class, derive_seed(seed, "s1")))
        sub.samples.push_back({v, 1});
    return sub;
}

}  // namespace

TEST_CASE("outlier_fraction on an i.i.d. client approaches the percentile tail") {
    Rng rng(derive_seed(21, "iid"));
    std::vector<LabeledEmbedding> ref_data;
    for (int i = 0; i < 10000; ++i) {
        Vec v(4);
        for (double& x : v) x = rng.normal();
        ref_data.push_back({v, 0});
    }
    ReferenceModel model = build_reference_model(ref_data, 1, 99.0, 0.05);

    ClientSubmission sub{"iid_client", {}};
    for (int i = 0; i < 10000; ++i) {
        Vec v(4);
        for (double& x : v) x = rng.normal();
        sub.samples.push_back({v, 0});
    }
    OutlierResult res = outlier_fraction(sub, model);
    CHECK(std::abs(res.F - 0.01) <= 0.01);
}

TEST_CASE("outlier_fraction extremes") {
    ReferenceModel model = build_reference_model(gaussian_reference(50, 1.0, 31), 2, 99.0, 0.05);

    ClientSubmission far{"far", {}};
    for (int i = 0; i < 20; ++i) {
        Vec v = model.classes.at(0).mu;
        v[0] += 100.0;
        far.samples.push_back({v, 0});
    }
    CHECK(outlier_fraction(far, model).F == 1.0);

    ClientSubmission at_mean{"at_mean", {}};
    for (int i = 0; i < 20; ++i) at_mean.samples.push_back({model.classes.at(1).mu, 1});
    CHECK(outlier_fraction(at_mean, model).F == 0.0);
}

TEST_CASE("outlier_fraction bookkeeping and invariances") {
    ReferenceModel model = build_reference_model(gaussian_reference(50, 1.0, 37), 2, 99.0, 0.05);
    ClientSubmission sub = clean_client("c", 25, 41);
    // push one sample far out so the counts are nontrivial
    sub.samples.push_back({{100, 100, 0, 0}, 0});

    OutlierResult res = outlier_fraction(sub, model);
    int total = 0, outliers = 0;
    for (const auto& [label, pc] : res.per_class) {
        total += pc.n_samples;
        outliers += pc.n_outliers;
    }
    CHECK(total == static_cast<int>(sub.samples.size()));
    CHECK(res.F == static_cast<double>(outliers) / static_cast<double>(total));

    ClientSubmission shuffled = sub;
    std::reverse(shuffled.samples.begin(), shuffled.samples.end());
    CHECK(outlier_fraction(shuffled, model).F == res.F);

    ClientSubmission doubled = sub;
    doubled.samples.insert(doubled.samples.end(), sub.samples.begin(), sub.samples.end());
    CHECK(outlier_fraction(doubled, model).F == res.F);
}

TEST_CASE("outlier_fraction error paths") {
    ReferenceModel model = build_reference_model(grid_reference(), 2, 99.0, 0.5);
    CHECK_THROWS_AS(outlier_fraction({"empty", {}}, model), EmptySubmission);
    ClientSubmission bad_label{"bad", {{{1, 1}, 7}}};
    CHECK_THROWS_AS(outlier_fraction(bad_label, model), UnknownClass);
    ClientSubmission bad_dim{"bad", {{{1, 1, 1}, 0}}};
    CHECK_THROWS_AS(outlier_fraction(bad_dim, model), DimMismatch);
}

TEST_CASE("mean_shift translation identities are exact") {
    std::vector<LabeledEmbedding> ref_data = grid_reference();
    ReferenceModel model = build_reference_model(ref_data, 2, 99.0, 0.5);

    // client presenting the reference means themselves
    ClientSubmission at_means{"m", {{model.classes.at(0).mu, 0},
                                    {model.classes.at(0).mu, 0},
                                    {model.classes.at(1).mu, 1},
                                    {model.classes.at(1).mu, 1}}};
    CHECK(mean_shift(at_means, model).M == 0.0);

    // whole dataset translated by v=(3,4): every class mean moves by exactly v
    ClientSubmission translated{"t", {}};
    for (const LabeledEmbedding& e : ref_data)
        translated.samples.push_back({{e.vector[0] + 3.0, e.vector[1] + 4.0}, e.label});
    MeanShiftResult res = mean_shift(translated, model);
    CHECK(res.M == 5.0);
    CHECK(res.per_class.at(0) == 5.0);
    CHECK(res.per_class.at(1) == 5.0);

    // only class 0 shifted: average over both presented classes
    ClientSubmission half{"h", {}};
    for (const LabeledEmbedding& e : ref_data) {
        Vec v = e.vector;
        if (e.label == 0) {
            v[0] += 3.0;
            v[1] += 4.0;
        }
        half.samples.push_back({v, e.label});
    }
    CHECK(mean_shift(half, model).M == 2.5);

    // absent classes are excluded from the average, not counted as zero
    ClientSubmission only0{"o", {}};
    for (const LabeledEmbedding& e : ref_data)
        if (e.label == 0) only0.samples.push_back({{e.vector[0] + 3.0, e.vector[1] + 4.0}, 0});
    CHECK(mean_shift(only0, model).M == 5.0);
}

TEST_CASE("micro_cluster_score flags a planted pocket and matches brute-force 2-means") {
    uint64_t seed = 47;
    std::vector<Vec> ref0 = sample_cluster({0, 0}, 0.1, 8, derive_seed(seed, "p0"));
    std::vector<Vec> ref1 = sample_cluster({5, 5}, 0.1, 8, derive_seed(seed, "p1"));
    std::vector<LabeledEmbedding> ref_data;
    for (const Vec& v : ref0) ref_data.push_back({v, 0});
    for (const Vec& v : ref1) ref_data.push_back({v, 1});
    ReferenceModel model = build_reference_model(ref_data, 2, 99.0, 0.05);
    ClassDataMap by_class = group_reference_by_class(ref_data);

    // class-0 samples sit in a tight pocket 50 units out; class-1 samples are clean
    std::vector<Vec> pocket = sample_cluster({50, 0}, 0.01, 6, derive_seed(seed, "pocket"));
    ClientSubmission sub{"p", {}};
    for (const Vec& v : pocket) sub.samples.push_back({v, 0});
    for (const Vec& v : sample_cluster({5, 5}, 0.1, 6, derive_seed(seed, "cl1")))
        sub.samples.push_back({v, 1});

    MicroClusterParams params;
    MicroClusterResult res = micro_cluster_score(sub, by_class, model, params, seed);
    CHECK(res.C == 0.5);

    const PerClassDiag& diag0 = res.per_class.at(0);
    CHECK(diag0.suspicious_cluster_found);
    bool found_pocket = false;
    double inertia = 0.0;
    for (const ClusterDiag& cd : diag0.clusters) {
        inertia += static_cast<double>(cd.size) * cd.rms_radius * cd.rms_radius;
        if (!cd.suspicious) continue;
        found_pocket = true;
        CHECK(cd.size == 6);
        CHECK(cd.client_count == 6);
        CHECK(cd.purity == 1.0);
        CHECK(cd.purity_ok);
        CHECK(cd.compact_ok);
        CHECK(cd.far_ok);
    }
    CHECK(found_pocket);
    CHECK_FALSE(res.per_class.at(1).suspicious_cluster_found);

    // the split kmeans2 found is globally optimal on the pooled class-0 set
    std::vector<Vec> pooled = ref0;
    pooled.insert(pooled.end(), pocket.begin(), pocket.end());
    CHECK(inertia == doctest::Approx(oracle::brute_kmeans2_inertia(pooled)).epsilon(1e-9));
}

TEST_CASE("micro_cluster_score stays zero for a distribution-matched client") {
    std::vector<LabeledEmbedding> ref_data = gaussian_reference(100, 1.0, 53);
    ReferenceModel model = build_reference_model(ref_data, 2, 99.0, 0.05);
    ClassDataMap by_class = group_reference_by_class(ref_data);
    ClientSubmission sub = clean_client("clean", 30, 59);

    MicroClusterResult res = micro_cluster_score(sub, by_class, model, MicroClusterParams{}, 61);
    CHECK(res.C == 0.0);
    for (const auto& [label, diag] : res.per_class) CHECK_FALSE(diag.suspicious_cluster_found);
}

TEST_CASE("micro_cluster_score skips classes with too few pooled points") {
    std::vector<LabeledEmbedding> ref_data = grid_reference();
    ReferenceModel model = build_reference_model(ref_data, 2, 99.0, 0.5);
    ClassDataMap by_class = group_reference_by_class(ref_data);
    by_class.erase(1);  // no retained reference embeddings for class 1

    ClientSubmission sub{"s", {{{1, 1}, 0}, {{11, 11}, 1}}};
    MicroClusterResult res = micro_cluster_score(sub, by_class, model, MicroClusterParams{}, 1);
    CHECK(res.per_class.at(1).skipped);
    CHECK_FALSE(res.per_class.at(0).skipped);
    CHECK(res.C == 0.0);
}

TEST_CASE("micro-cluster and weight parameter validation") {
    MicroClusterParams p;
    p.purity_min = 0.5;
    CHECK_THROWS_AS(p.validate(), InvalidConfig);
    p = {};
    p.centroid_factor = 0.9;
    CHECK_THROWS_AS(p.validate(), InvalidConfig);
    p = {};
    p.compact_ratio = 1.5;
    CHECK_THROWS_AS(p.validate(), InvalidConfig);
    p = {};
    p.restarts = 0;
    CHECK_THROWS_AS(p.validate(), InvalidConfig);
    CHECK_NOTHROW(MicroClusterParams{}.validate());

    MetricWeights w;
    w.w_m = -0.1;
    CHECK_THROWS_AS(w.validate(), InvalidConfig);
    w = {};
    w.w_f = w.w_m = w.w_c = 0.0;
    CHECK_THROWS_AS(w.validate(), InvalidConfig);
    w = {};
    w.p = 0.5;
    CHECK_THROWS_AS(w.validate(), InvalidConfig);
    CHECK_NOTHROW(MetricWeights{}.validate());
}

TEST_CASE("suspicion_score arithmetic") {
    MetricWeights only_f;
    only_f.w_f = 1.0;
    only_f.w_m = 0.0;
    only_f.w_c = 0.0;
    only_f.p = 1.0;
    CHECK(suspicion_score(0.5, 9.0, 1.0, only_f) == 0.5);

    MetricWeights defaults;
    CHECK(suspicion_score(1.0, 5.0, 1.0, defaults) == doctest::Approx(1.75).epsilon(1e-12));
    CHECK(suspicion_score(0.0, 0.0, 0.0, defaults) == 0.0);
}

TEST_CASE("suspicion_score is monotone and weight-scaling preserves ranking") {
    Rng rng(derive_seed(67, "mono"));
    for (int trial = 0; trial < 50; ++trial) {
        MetricWeights w;
        w.w_f = rng.uniform() * 2;
        w.w_m = rng.uniform();
        w.w_c = rng.uniform();
        if (w.w_f + w.w_m + w.w_c == 0.0) w.w_f = 1.0;
        w.p = 1.0 + rng.uniform() * 3;
        double f = rng.uniform(), m = rng.uniform() * 10, c = rng.uniform();
        double base = suspicion_score(f, m, c, w);
        CHECK(suspicion_score(std::min(1.0, f + 0.1), m, c, w) >= base);
        CHECK(suspicion_score(f, m + 0.5, c, w) >= base);
        CHECK(suspicion_score(f, m, std::min(1.0, c + 0.1), w) >= base);
    }

    // alpha-scaled weights rescale S by alpha, so orderings cannot change
    MetricWeights w;
    MetricWeights scaled = w;
    double alpha = 3.7;
    scaled.w_f *= alpha;
    scaled.w_m *= alpha;
    scaled.w_c *= alpha;
    std::vector<std::array<double, 3>> triples = {
        {0.9, 4.0, 0.8}, {0.1, 0.2, 0.0}, {0.5, 1.0, 0.5}, {0.0, 6.0, 0.1}};
    std::vector<size_t> order_a(triples.size()), order_b(triples.size());
    for (size_t i = 0; i < triples.size(); ++i) order_a[i] = order_b[i] = i;
    auto by_score = [&](const MetricWeights& mw) {
        return [&, mw](size_t a, size_t b) {
            return suspicion_score(triples[a][0], triples[a][1], triples[a][2], mw) >
                   suspicion_score(triples[b][0], triples[b][1], triples[b][2], mw);
        };
    };
    std::sort(order_a.begin(), order_a.end(), by_score(w));
    std::sort(order_b.begin(), order_b.end(), by_score(scaled));
    CHECK(order_a == order_b);
    for (const auto& t : triples)
        CHECK(suspicion_score(t[0], t[1], t[2], scaled) ==
              doctest::Approx(alpha * suspicion_score(t[0], t[1], t[2], w)).epsilon(1e-12));
}

TEST_CASE("evaluate_client composes the metrics and separates a poisoned client") {
    std::vector<LabeledEmbedding> ref_data = gaussian_reference(200, 1.0, 71);
    ReferenceModel model = build_reference_model(ref_data, 2, 99.0, 0.05);
    ClassDataMap by_class = group_reference_by_class(ref_data);
    MetricWeights weights;
    MicroClusterParams params;

    std::vector<double> clean_scores;
    for (int i = 0; i < 6; ++i) {
        ClientSubmission sub = clean_client("clean_" + std::to_string(i), 20,
                                            derive_seed(73, "cohort", static_cast<uint64_t>(i)));
        AnomalyReport rep = evaluate_client(sub, model, by_class, weights, params,
                                            derive_seed(73, "eval", static_cast<uint64_t>(i)));
        CHECK(rep.S == doctest::Approx(weights.w_f * std::pow(rep.F, weights.p) +
                                       weights.w_m * rep.M + weights.w_c * rep.C)
                           .epsilon(1e-12));
        CHECK(rep.C >= 0.0);
        CHECK(rep.C <= 1.0);
        clean_scores.push_back(rep.S);
    }

    ClientSubmission poisoned = clean_client("poisoned", 20, derive_seed(73, "cohort", 99));
    for (LabeledEmbedding& e : poisoned.samples) e.vector[0] += 100.0;
    AnomalyReport bad = evaluate_client(poisoned, model, by_class, weights, params, 77);
    for (double s : clean_scores) CHECK(bad.S > s);

    // pure function of inputs: identical seed, identical report
    AnomalyReport again = evaluate_client(poisoned, model, by_class, weights, params, 77);
    CHECK(again.F == bad.F);
    CHECK(again.M == bad.M);
    CHECK(again.C == bad.C);
    CHECK(again.S == bad.S);

    CHECK_THROWS_AS(evaluate_client({"e", {}}, model, by_class, weights, params, 1),
                    EmptySubmission);
}
