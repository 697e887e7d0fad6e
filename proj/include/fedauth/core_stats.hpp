#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fedauth/errors.hpp"

namespace fedauth {

// Embedding vector. All components must stay finite; dimension is constant
// within one experiment.
using Vec = std::vector<double>;

// Shrinkage-regularized covariance with its cached Cholesky factor.
// `entries` is symmetric positive definite once construction succeeds;
// queries solve against `chol` instead of forming an explicit inverse.
struct CovMatrix {
    int dim = 0;
    std::vector<double> entries;  // row-major dim*dim
    double shrinkage = 0.0;
    std::vector<double> chol;  // lower-triangular factor L, entries = L*L^T

    double at(int r, int c) const { return entries[static_cast<size_t>(r) * dim + c]; }
};

struct ClusterResult {
    std::vector<int> assignments;  // 0 or 1 per point, ties go to cluster 0
    std::array<Vec, 2> centroids;
    double inertia = 0.0;  // sum of squared distances to assigned centroid
};

// Component-wise arithmetic mean. Throws EmptyClass on empty input.
Vec mean_vector(const std::vector<Vec>& points);

// (1-lambda)*S + lambda*(tr(S)/d)*I with S the n-1 divisor sample covariance.
// Factorizes the result; a factorization failure (lambda = 0 with
// rank-deficient S) surfaces as SingularCovariance.
CovMatrix covariance_shrunk(const std::vector<Vec>& points, double shrinkage);

// sqrt((x-mu)^T Sigma^-1 (x-mu)) via triangular solve against sigma.chol.
double mahalanobis(const Vec& x, const Vec& mu, const CovMatrix& sigma);

// Linear-interpolation percentile: rank r = q/100*(n-1), interpolate between
// floor and ceil of r. q in (0,100]; q = 100 clamps to the maximum.
double percentile(std::vector<double> values, double q);

// Lloyd's algorithm with k-means++ seeding, k = 2. Runs `restarts`
// independent attempts with seeds derived from `seed` and keeps the
// (inertia, restart index) lexicographic minimum, so a parallel driver
// would select the same winner.
ClusterResult kmeans2(const std::vector<Vec>& points, uint64_t seed, int restarts);

double squared_distance(const Vec& a, const Vec& b);
double euclidean_norm(const Vec& v);

// Lower-triangular Cholesky factorization of a symmetric matrix; returns
// false when the matrix is not positive definite.
bool cholesky_factor(int dim, const std::vector<double>& matrix, std::vector<double>& lower);

}  // namespace fedauth
