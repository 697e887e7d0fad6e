#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedauth/reference_model.hpp"

namespace fedauth {

// Everything a client reveals to the authentication server: embedding-label
// pairs, never raw data or gradients.
struct ClientSubmission {
    std::string client_id;
    std::vector<LabeledEmbedding> samples;
};

struct MetricWeights {
    double w_f = 1.0;
    double w_m = 0.1;
    double w_c = 0.25;
    double p = 2.0;  // exponent on the outlier fraction

    void validate() const;
};

// Thresholds for calling a 2-means cluster suspicious. All three conditions
// must hold at once: client purity, compactness relative to the reference
// class spread, and centroid distance beyond the class threshold.
struct MicroClusterParams {
    double purity_min = 0.9;      // in (0.5, 1]
    double centroid_factor = 1.0; // centroid is far if dist > factor * tau_c
    double compact_ratio = 1.0;   // cluster RMS radius <= ratio * reference RMS radius
    int restarts = 16;            // kmeans2 restarts

    void validate() const;
};

struct ClusterDiag {
    int cluster = 0;
    int size = 0;
    int client_count = 0;
    double purity = 0.0;
    double rms_radius = 0.0;
    double rms_ratio = 0.0;         // rms_radius / reference class RMS radius
    double centroid_distance = 0.0; // Mahalanobis distance of the centroid
    bool purity_ok = false;
    bool compact_ok = false;
    bool far_ok = false;
    bool suspicious = false;
};

struct PerClassDiag {
    int n_samples = 0;
    int n_outliers = 0;
    double mean_distance = 0.0;
    double client_mean_shift = 0.0;
    bool suspicious_cluster_found = false;
    bool skipped = false;  // micro-cluster analysis skipped (too few points)
    std::vector<ClusterDiag> clusters;
};

struct AnomalyReport {
    std::string client_id;
    double F = 0.0;  // outlier fraction
    double M = 0.0;  // mean shift
    double C = 0.0;  // micro-cluster score
    double S = 0.0;  // suspicion score
    std::map<int, PerClassDiag> per_class;
};

// Raw reference embeddings grouped by class; the micro-cluster metric pools
// these with the client's points, so summary stats alone are not enough.
using ClassDataMap = std::map<int, std::vector<Vec>>;

ClassDataMap group_reference_by_class(const std::vector<LabeledEmbedding>& reference);

struct OutlierResult {
    double F = 0.0;
    // class id -> (n_samples, n_outliers, mean Mahalanobis distance)
    struct PerClass {
        int n_samples = 0;
        int n_outliers = 0;
        double mean_distance = 0.0;
    };
    std::map<int, PerClass> per_class;
};

// Fraction of samples with d(x) > tau_c against their own class baseline
// (strict inequality).
OutlierResult outlier_fraction(const ClientSubmission& sub, const ReferenceModel& ref);

struct MeanShiftResult {
    double M = 0.0;
    std::map<int, double> per_class;  // ||mu_hat_c - mu_c|| for presented classes
};

// Average Euclidean displacement of the client's class means from the
// reference means. Classes the client does not present are excluded.
MeanShiftResult mean_shift(const ClientSubmission& sub, const ReferenceModel& ref);

struct MicroClusterResult {
    double C = 0.0;
    std::map<int, PerClassDiag> per_class;  // cluster fields only
};

// Per class, pool reference + client points and split with 2-means; C is the
// fraction of the client's samples that land in suspicious clusters.
MicroClusterResult micro_cluster_score(const ClientSubmission& sub, const ClassDataMap& ref_data,
                                       const ReferenceModel& ref, const MicroClusterParams& params,
                                       uint64_t seed);

// S = w_F * F^p + w_M * M + w_C * C
double suspicion_score(double F, double M, double C, const MetricWeights& weights);

// Composes the three metrics into one report. Deterministic given `seed`;
// safe to run for many clients concurrently.
AnomalyReport evaluate_client(const ClientSubmission& sub, const ReferenceModel& ref,
                              const ClassDataMap& ref_data, const MetricWeights& weights,
                              const MicroClusterParams& params, uint64_t seed);

}  // namespace fedauth
