#include "fedauth/anomaly_metrics.hpp"

#include <algorithm>
#include <cmath>

#include "fedauth/rng.hpp"

namespace fedauth {

void MetricWeights::validate() const {
    if (w_f < 0.0 || w_m < 0.0 || w_c < 0.0)
        throw InvalidConfig("metric weights must be nonnegative");
    if (w_f == 0.0 && w_m == 0.0 && w_c == 0.0)
        throw InvalidConfig("at least one metric weight must be positive");
    if (p < 1.0) throw InvalidConfig("outlier exponent p must be >= 1");
}

void MicroClusterParams::validate() const {
    if (!(purity_min > 0.5 && purity_min <= 1.0))
        throw InvalidConfig("purity_min must lie in (0.5, 1]");
    if (centroid_factor < 1.0) throw InvalidConfig("centroid_factor must be >= 1");
    if (!(compact_ratio > 0.0 && compact_ratio <= 1.0))
        throw InvalidConfig("compact_ratio must lie in (0, 1]");
    if (restarts < 1) throw InvalidConfig("micro-cluster restarts must be >= 1");
}

ClassDataMap group_reference_by_class(const std::vector<LabeledEmbedding>& reference) {
    ClassDataMap out;
    for (const LabeledEmbedding& e : reference) out[e.label].push_back(e.vector);
    return out;
}

static const ClassStats& class_stats_for(const ReferenceModel& ref, int label) {
    auto it = ref.classes.find(label);
    if (it == ref.classes.end()) throw UnknownClass(label);
    return it->second;
}

static void check_submission_dim(const ClientSubmission& sub, const ReferenceModel& ref) {
    for (const LabeledEmbedding& e : sub.samples) {
        if (static_cast<int>(e.vector.size()) != ref.dim)
            throw DimMismatch("client " + sub.client_id + " submitted dim " +
                              std::to_string(e.vector.size()) + ", model has dim " +
                              std::to_string(ref.dim));
    }
}

OutlierResult outlier_fraction(const ClientSubmission& sub, const ReferenceModel& ref) {
    if (sub.samples.empty()) throw EmptySubmission("client " + sub.client_id);
    check_submission_dim(sub, ref);

    OutlierResult res;
    for (const LabeledEmbedding& e : sub.samples) {
        const ClassStats& stats = class_stats_for(ref, e.label);
        double d = mahalanobis(e.vector, stats.mu, stats.sigma);
        auto& pc = res.per_class[e.label];
        ++pc.n_samples;
        pc.mean_distance += d;
        if (d > stats.tau) ++pc.n_outliers;
    }
    int total = 0, outliers = 0;
    for (auto& [label, pc] : res.per_class) {
        pc.mean_distance /= pc.n_samples;
        total += pc.n_samples;
        outliers += pc.n_outliers;
    }
    res.F = static_cast<double>(outliers) / static_cast<double>(total);
    return res;
}

MeanShiftResult mean_shift(const ClientSubmission& sub, const ReferenceModel& ref) {
    if (sub.samples.empty()) throw EmptySubmission("client " + sub.client_id);
    check_submission_dim(sub, ref);

    std::map<int, std::vector<Vec>> by_class;
    for (const LabeledEmbedding& e : sub.samples) {
        class_stats_for(ref, e.label);
        by_class[e.label].push_back(e.vector);
    }

    MeanShiftResult res;
    for (const auto& [label, points] : by_class) {
        Vec mu_hat = mean_vector(points);
        const Vec& mu = ref.classes.at(label).mu;
        double s = 0.0;
        for (size_t i = 0; i < mu_hat.size(); ++i) {
            double d = mu_hat[i] - mu[i];
            s += d * d;
        }
        double shift = std::sqrt(s);
        res.per_class[label] = shift;
        res.M += shift;
    }
    res.M /= static_cast<double>(by_class.size());
    return res;
}

MicroClusterResult micro_cluster_score(const ClientSubmission& sub, const ClassDataMap& ref_data,
                                       const ReferenceModel& ref, const MicroClusterParams& params,
                                       uint64_t seed) {
    if (sub.samples.empty()) throw EmptySubmission("client " + sub.client_id);
    params.validate();
    check_submission_dim(sub, ref);

    std::map<int, std::vector<Vec>> client_by_class;
    for (const LabeledEmbedding& e : sub.samples) {
        class_stats_for(ref, e.label);
        client_by_class[e.label].push_back(e.vector);
    }

    MicroClusterResult res;
    int suspicious_samples = 0;
    for (const auto& [label, client_points] : client_by_class) {
        PerClassDiag& diag = res.per_class[label];
        diag.n_samples = static_cast<int>(client_points.size());

        auto ref_it = ref_data.find(label);
        const std::vector<Vec> empty;
        const std::vector<Vec>& ref_points = (ref_it != ref_data.end()) ? ref_it->second : empty;

        // pooled set: reference first, client after, so index >= n_ref marks
        // a client point
        std::vector<Vec> pooled;
        pooled.reserve(ref_points.size() + client_points.size());
        pooled.insert(pooled.end(), ref_points.begin(), ref_points.end());
        pooled.insert(pooled.end(), client_points.begin(), client_points.end());
        if (pooled.size() < 2) {
            diag.skipped = true;
            continue;
        }

        // spread of the clean class around its own mean, the compactness yardstick
        double ref_rms = 0.0;
        if (!ref_points.empty()) {
            Vec ref_mu = mean_vector(ref_points);
            double s = 0.0;
            for (const Vec& p : ref_points) s += squared_distance(p, ref_mu);
            ref_rms = std::sqrt(s / static_cast<double>(ref_points.size()));
        }

        ClusterResult clusters = kmeans2(
            pooled, derive_seed(seed, "micro_cluster", static_cast<uint64_t>(label)),
            params.restarts);

        const ClassStats& stats = ref.classes.at(label);
        const size_t n_ref = ref_points.size();
        for (int c = 0; c < 2; ++c) {
            ClusterDiag cd;
            cd.cluster = c;
            double sq_sum = 0.0;
            for (size_t i = 0; i < pooled.size(); ++i) {
                if (clusters.assignments[i] != c) continue;
                ++cd.size;
                if (i >= n_ref) ++cd.client_count;
                sq_sum += squared_distance(pooled[i], clusters.centroids[c]);
            }
            if (cd.size == 0) {
                diag.clusters.push_back(cd);
                continue;
            }
            cd.purity = static_cast<double>(cd.client_count) / static_cast<double>(cd.size);
            cd.rms_radius = std::sqrt(sq_sum / static_cast<double>(cd.size));
            cd.rms_ratio = ref_rms > 0.0 ? cd.rms_radius / ref_rms : 0.0;
            cd.centroid_distance = mahalanobis(clusters.centroids[c], stats.mu, stats.sigma);
            cd.purity_ok = cd.purity >= params.purity_min;
            cd.compact_ok = ref_rms > 0.0 && cd.rms_radius <= params.compact_ratio * ref_rms;
            cd.far_ok = cd.centroid_distance > params.centroid_factor * stats.tau;
            cd.suspicious = cd.purity_ok && cd.compact_ok && cd.far_ok;
            if (cd.suspicious) {
                diag.suspicious_cluster_found = true;
                suspicious_samples += cd.client_count;
            }
            diag.clusters.push_back(cd);
        }
    }

    res.C = static_cast<double>(suspicious_samples) / static_cast<double>(sub.samples.size());
    return res;
}

double suspicion_score(double F, double M, double C, const MetricWeights& weights) {
    weights.validate();
    return weights.w_f * std::pow(F, weights.p) + weights.w_m * M + weights.w_c * C;
}

AnomalyReport evaluate_client(const ClientSubmission& sub, const ReferenceModel& ref,
                              const ClassDataMap& ref_data, const MetricWeights& weights,
                              const MicroClusterParams& params, uint64_t seed) {
    if (sub.samples.empty()) throw EmptySubmission("client " + sub.client_id);
    weights.validate();

    AnomalyReport report;
    report.client_id = sub.client_id;

    OutlierResult out = outlier_fraction(sub, ref);
    MeanShiftResult shift = mean_shift(sub, ref);
    MicroClusterResult micro = micro_cluster_score(sub, ref_data, ref, params, seed);

    report.F = out.F;
    report.M = shift.M;
    report.C = micro.C;
    report.S = suspicion_score(report.F, report.M, report.C, weights);

    for (const auto& [label, pc] : out.per_class) {
        PerClassDiag& diag = report.per_class[label];
        diag.n_samples = pc.n_samples;
        diag.n_outliers = pc.n_outliers;
        diag.mean_distance = pc.mean_distance;
    }
    for (const auto& [label, s] : shift.per_class) report.per_class[label].client_mean_shift = s;
    for (const auto& [label, mc] : micro.per_class) {
        PerClassDiag& diag = report.per_class[label];
        diag.suspicious_cluster_found = mc.suspicious_cluster_found;
        diag.skipped = mc.skipped;
        diag.clusters = mc.clusters;
    }
    return report;
}

}  // namespace fedauth
