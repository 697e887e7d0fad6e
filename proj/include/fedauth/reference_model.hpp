#pragma once

#include <map>
#include <string>
#include <vector>

#include "fedauth/core_stats.hpp"

namespace fedauth {

struct LabeledEmbedding {
    Vec vector;
    int label = 0;
};

// Golden per-class baseline: mean, shrunk covariance and the Mahalanobis
// threshold tau at `percentile_used` of the class's own reference distances.
struct ClassStats {
    int class_id = 0;
    Vec mu;
    CovMatrix sigma;
    double tau = 0.0;
    double percentile_used = 99.0;
    int n_ref = 0;
};

struct ReferenceModel {
    int dim = 0;
    std::map<int, ClassStats> classes;
    double percentile = 99.0;
    double shrinkage = 0.05;
    std::string created_from;  // fingerprint of the source embedding set
};

bool operator==(const CovMatrix& a, const CovMatrix& b);
bool operator==(const ClassStats& a, const ClassStats& b);
bool operator==(const ReferenceModel& a, const ReferenceModel& b);

// Canonical FNV-1a fingerprint of an embedding set: classes ascending,
// points in lexicographic order, raw double bits. Invariant under input
// permutation.
std::string dataset_fingerprint(const std::vector<LabeledEmbedding>& data);

// mu/sigma/tau for one class. Points are canonicalized (sorted
// lexicographically) before accumulation so the result is exactly
// permutation-invariant.
ClassStats build_class_stats(int class_id, std::vector<Vec> points, double q, double shrinkage);

// One ClassStats per class id in [0, n_classes). A class with no samples is
// MissingClass; a label outside the declared set is UnknownClass.
ReferenceModel build_reference_model(const std::vector<LabeledEmbedding>& data, int n_classes,
                                     double q, double shrinkage);

// Versioned JSON document (schema version 1). Floats are written in
// shortest round-trip decimal form, so load(save(m)) == m bit-for-bit.
void save_reference_model(const ReferenceModel& model, const std::string& path);
ReferenceModel load_reference_model(const std::string& path);

}  // namespace fedauth
