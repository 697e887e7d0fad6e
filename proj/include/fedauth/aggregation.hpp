#pragma once

#include <string>
#include <vector>

#include "fedauth/core_stats.hpp"

namespace fedauth {

struct ModelUpdate {
    std::string client_id;
    Vec params;  // flat parameter vector; same length for all updates in a round
    int n_samples = 1;
};

struct AggregationRule {
    enum class Kind { FedAvg, TrimmedMean, Krum };
    Kind kind = Kind::FedAvg;
    double beta = 0.1;  // TrimmedMean: trim floor(beta*n) from each tail
    int f = 0;          // Krum: tolerated byzantine count

    static AggregationRule fedavg();
    static AggregationRule trimmed_mean(double beta);
    static AggregationRule krum(int f);
    static AggregationRule parse(const std::string& spec);  // "fedavg" | "trimmed_mean:0.1" | "krum:5"
    std::string name() const;
};

// Dataset-size-weighted average: sum_i (n_i / sum_j n_j) * params_i.
Vec fedavg(const std::vector<ModelUpdate>& updates);

// Per coordinate, drop the m = floor(beta*n) largest and smallest values and
// average the survivors unweighted. Requires n > 2m.
Vec trimmed_mean(const std::vector<ModelUpdate>& updates, double beta);

// Returns the params of the update with minimal sum of squared distances to
// its n-f-2 nearest peers; score ties break by ascending client_id.
// Requires n >= 2f+3.
Vec krum(const std::vector<ModelUpdate>& updates, int f);

Vec aggregate(const std::vector<ModelUpdate>& updates, const AggregationRule& rule);

}  // namespace fedauth
