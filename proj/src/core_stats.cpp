#include "fedauth/core_stats.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

#include "fedauth/rng.hpp"

namespace fedauth {

double squared_distance(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double euclidean_norm(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

static void check_same_dim(const std::vector<Vec>& points) {
    size_t d = points.front().size();
    for (const Vec& p : points) {
        if (p.size() != d)
            throw DimMismatch("points of dimension " + std::to_string(p.size()) +
                              " and " + std::to_string(d) + " mixed in one set");
    }
}

Vec mean_vector(const std::vector<Vec>& points) {
    if (points.empty()) throw EmptyClass("mean of zero points");
    check_same_dim(points);
    size_t d = points.front().size();
    Vec mu(d, 0.0);
    for (const Vec& p : points)
        for (size_t i = 0; i < d; ++i) mu[i] += p[i];
    for (size_t i = 0; i < d; ++i) mu[i] /= static_cast<double>(points.size());
    return mu;
}

bool cholesky_factor(int d, const std::vector<double>& a, std::vector<double>& lower) {
    lower.assign(static_cast<size_t>(d) * d, 0.0);
    for (int j = 0; j < d; ++j) {
        double diag = a[static_cast<size_t>(j) * d + j];
        for (int k = 0; k < j; ++k) diag -= lower[static_cast<size_t>(j) * d + k] * lower[static_cast<size_t>(j) * d + k];
        if (!(diag > 0.0)) return false;
        double lj = std::sqrt(diag);
        lower[static_cast<size_t>(j) * d + j] = lj;
        for (int i = j + 1; i < d; ++i) {
            double s = a[static_cast<size_t>(i) * d + j];
            for (int k = 0; k < j; ++k)
                s -= lower[static_cast<size_t>(i) * d + k] * lower[static_cast<size_t>(j) * d + k];
            lower[static_cast<size_t>(i) * d + j] = s / lj;
        }
    }
    return true;
}

CovMatrix covariance_shrunk(const std::vector<Vec>& points, double shrinkage) {
    if (points.size() < 2)
        throw InsufficientSamples("covariance needs >= 2 points, got " +
                                  std::to_string(points.size()));
    if (!(shrinkage >= 0.0 && shrinkage <= 1.0))
        throw InvalidConfig("shrinkage must lie in [0,1]");
    check_same_dim(points);

    const int d = static_cast<int>(points.front().size());
    const double n = static_cast<double>(points.size());
    Vec mu = mean_vector(points);

    CovMatrix cov;
    cov.dim = d;
    cov.shrinkage = shrinkage;
    cov.entries.assign(static_cast<size_t>(d) * d, 0.0);
    for (const Vec& p : points) {
        for (int i = 0; i < d; ++i) {
            double di = p[i] - mu[i];
            for (int j = i; j < d; ++j)
                cov.entries[static_cast<size_t>(i) * d + j] += di * (p[j] - mu[j]);
        }
    }
    double trace = 0.0;
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            double s = cov.entries[static_cast<size_t>(i) * d + j] / (n - 1.0);
            double v = (1.0 - shrinkage) * s;
            if (i == j) trace += s;
            cov.entries[static_cast<size_t>(i) * d + j] = v;
            cov.entries[static_cast<size_t>(j) * d + i] = v;
        }
    }
    double ridge = shrinkage * trace / d;
    for (int i = 0; i < d; ++i) cov.entries[static_cast<size_t>(i) * d + i] += ridge;

    if (!cholesky_factor(d, cov.entries, cov.chol))
        throw SingularCovariance("shrunk covariance is not positive definite (shrinkage=" +
                                 std::to_string(shrinkage) + ")");
    return cov;
}

double mahalanobis(const Vec& x, const Vec& mu, const CovMatrix& sigma) {
    if (static_cast<int>(x.size()) != sigma.dim || x.size() != mu.size())
        throw DimMismatch("mahalanobis: x has dim " + std::to_string(x.size()) +
                          ", mu " + std::to_string(mu.size()) + ", sigma " +
                          std::to_string(sigma.dim));
    if (sigma.chol.empty()) throw SingularCovariance("covariance has no factorization");

    const int d = sigma.dim;
    // forward solve L z = (x - mu); distance^2 = |z|^2
    Vec z(d);
    for (int i = 0; i < d; ++i) {
        double s = x[i] - mu[i];
        for (int k = 0; k < i; ++k) s -= sigma.chol[static_cast<size_t>(i) * d + k] * z[k];
        z[i] = s / sigma.chol[static_cast<size_t>(i) * d + i];
    }
    double q = 0.0;
    for (int i = 0; i < d; ++i) q += z[i] * z[i];
    return std::sqrt(q);
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw EmptyInput("percentile of empty sequence");
    if (!(q > 0.0 && q <= 100.0)) throw InvalidConfig("percentile q must lie in (0,100]");
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    double r = q / 100.0 * static_cast<double>(n - 1);
    r = std::min(r, static_cast<double>(n - 1));
    size_t lo = static_cast<size_t>(r);
    size_t hi = std::min(lo + 1, n - 1);
    double frac = r - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

struct LloydRun {
    ClusterResult result;
    bool valid = false;
};

void assign_points(const std::vector<Vec>& points, const std::array<Vec, 2>& centroids,
                   std::vector<int>& assignments) {
    for (size_t i = 0; i < points.size(); ++i) {
        double d0 = squared_distance(points[i], centroids[0]);
        double d1 = squared_distance(points[i], centroids[1]);
        assignments[i] = (d1 < d0) ? 1 : 0;  // ties go to cluster 0
    }
}

double compute_inertia(const std::vector<Vec>& points, const std::array<Vec, 2>& centroids,
                       const std::vector<int>& assignments) {
    double s = 0.0;
    for (size_t i = 0; i < points.size(); ++i)
        s += squared_distance(points[i], centroids[assignments[i]]);
    return s;
}

LloydRun lloyd_once(const std::vector<Vec>& points, uint64_t seed) {
    const size_t n = points.size();
    const size_t d = points.front().size();
    Rng rng(seed);

    // k-means++ seeding for k = 2: first centroid uniform, second weighted by
    // squared distance to the first. All-identical inputs degenerate to a
    // uniform pick.
    std::array<Vec, 2> centroids;
    centroids[0] = points[rng.bounded(n)];
    std::vector<double> w(n);
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        w[i] = squared_distance(points[i], centroids[0]);
        total += w[i];
    }
    if (total > 0.0) {
        double u = rng.uniform() * total;
        size_t pick = n - 1;
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i) {
            acc += w[i];
            if (u < acc) {
                pick = i;
                break;
            }
        }
        centroids[1] = points[pick];
    } else {
        centroids[1] = points[rng.bounded(n)];
    }

    std::vector<int> assignments(n);
    assign_points(points, centroids, assignments);
    double inertia = compute_inertia(points, centroids, assignments);

    std::vector<int> next(n);
    for (int iter = 0; iter < 100; ++iter) {
        // centroid update; an emptied cluster keeps its previous centroid
        std::array<Vec, 2> sums = {Vec(d, 0.0), Vec(d, 0.0)};
        std::array<size_t, 2> counts = {0, 0};
        for (size_t i = 0; i < n; ++i) {
            int a = assignments[i];
            ++counts[a];
            for (size_t j = 0; j < d; ++j) sums[a][j] += points[i][j];
        }
        for (int c = 0; c < 2; ++c) {
            if (counts[c] == 0) continue;
            for (size_t j = 0; j < d; ++j)
                centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
        }

        assign_points(points, centroids, next);
        double next_inertia = compute_inertia(points, centroids, next);
        assert(next_inertia <= inertia * (1.0 + 1e-9) + 1e-12);
        inertia = next_inertia;
        if (next == assignments) break;
        assignments.swap(next);
    }

    LloydRun run;
    run.valid = true;
    run.result.assignments = std::move(assignments);
    run.result.centroids = std::move(centroids);
    run.result.inertia = inertia;
    return run;
}

}  // namespace

ClusterResult kmeans2(const std::vector<Vec>& points, uint64_t seed, int restarts) {
    if (points.size() < 2)
        throw InsufficientSamples("kmeans2 needs >= 2 points, got " +
                                  std::to_string(points.size()));
    if (restarts < 1) throw InvalidConfig("kmeans2 restarts must be >= 1");
    check_same_dim(points);

    LloydRun best;
    for (int r = 0; r < restarts; ++r) {
        LloydRun run = lloyd_once(points, derive_seed(seed, "kmeans_restart", static_cast<uint64_t>(r)));
        if (!best.valid || run.result.inertia < best.result.inertia) best = std::move(run);
    }
    return best.result;
}

}  // namespace fedauth
