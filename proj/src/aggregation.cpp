#include "fedauth/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace fedauth {

AggregationRule AggregationRule::fedavg() { return {}; }

AggregationRule AggregationRule::trimmed_mean(double beta) {
    if (!(beta >= 0.0 && beta < 0.5)) throw InvalidConfig("trimmed mean beta must lie in [0, 0.5)");
    AggregationRule r;
    r.kind = Kind::TrimmedMean;
    r.beta = beta;
    return r;
}

AggregationRule AggregationRule::krum(int f) {
    if (f < 0) throw InvalidConfig("krum f must be >= 0");
    AggregationRule r;
    r.kind = Kind::Krum;
    r.f = f;
    return r;
}

AggregationRule AggregationRule::parse(const std::string& spec) {
    auto colon = spec.find(':');
    std::string head = spec.substr(0, colon);
    std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    try {
        if (head == "fedavg") {
            if (!arg.empty()) throw InvalidConfig("fedavg takes no argument");
            return fedavg();
        }
        if (head == "trimmed_mean") return trimmed_mean(arg.empty() ? 0.1 : std::stod(arg));
        if (head == "krum") return krum(arg.empty() ? 5 : std::stoi(arg));
    } catch (const std::logic_error&) {
        throw InvalidConfig("bad rule argument in '" + spec + "'");
    }
    throw InvalidConfig("unknown aggregation rule '" + spec +
                        "' (expected fedavg, trimmed_mean:<beta>, krum:<f>)");
}

std::string AggregationRule::name() const {
    switch (kind) {
        case Kind::FedAvg: return "fedavg";
        case Kind::TrimmedMean: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "trimmed_mean:%g", beta);
            return buf;
        }
        case Kind::Krum: return "krum:" + std::to_string(f);
    }
    return "?";
}

namespace {

// Canonical order makes every rule exactly permutation-invariant: float sums
// run over ascending client_id no matter how the caller ordered the round.
std::vector<const ModelUpdate*> sorted_by_id(const std::vector<ModelUpdate>& updates) {
    std::vector<const ModelUpdate*> out;
    out.reserve(updates.size());
    for (const ModelUpdate& u : updates) out.push_back(&u);
    std::sort(out.begin(), out.end(),
              [](const ModelUpdate* a, const ModelUpdate* b) { return a->client_id < b->client_id; });
    return out;
}

void check_round(const std::vector<ModelUpdate>& updates) {
    if (updates.empty()) throw EmptyRound("no updates to aggregate");
    size_t dim = updates.front().params.size();
    for (const ModelUpdate& u : updates) {
        if (u.params.size() != dim)
            throw DimMismatch("update from " + u.client_id + " has " +
                              std::to_string(u.params.size()) + " params, expected " +
                              std::to_string(dim));
        if (u.n_samples < 1)
            throw InvalidConfig("update from " + u.client_id + " has n_samples < 1");
    }
}

}  // namespace

Vec fedavg(const std::vector<ModelUpdate>& updates) {
    check_round(updates);
    auto ordered = sorted_by_id(updates);
    const size_t dim = ordered.front()->params.size();

    double total = 0.0;
    for (const ModelUpdate* u : ordered) total += static_cast<double>(u->n_samples);

    Vec avg(dim, 0.0);
    for (const ModelUpdate* u : ordered) {
        double w = static_cast<double>(u->n_samples) / total;
        for (size_t i = 0; i < dim; ++i) avg[i] += w * u->params[i];
    }
    return avg;
}

Vec trimmed_mean(const std::vector<ModelUpdate>& updates, double beta) {
    check_round(updates);
    if (!(beta >= 0.0 && beta < 0.5)) throw InvalidConfig("trimmed mean beta must lie in [0, 0.5)");
    auto ordered = sorted_by_id(updates);
    const size_t n = ordered.size();
    const size_t m = static_cast<size_t>(std::floor(beta * static_cast<double>(n)));
    if (n <= 2 * m)
        throw TooFewClients("trimmed mean with beta=" + std::to_string(beta) + " needs n > " +
                            std::to_string(2 * m) + ", got " + std::to_string(n));

    const size_t dim = ordered.front()->params.size();
    Vec result(dim, 0.0);
    std::vector<double> column(n);
    for (size_t i = 0; i < dim; ++i) {
        for (size_t j = 0; j < n; ++j) column[j] = ordered[j]->params[i];
        std::sort(column.begin(), column.end());
        double sum = 0.0;
        for (size_t j = m; j < n - m; ++j) sum += column[j];
        result[i] = sum / static_cast<double>(n - 2 * m);
    }
    return result;
}

Vec krum(const std::vector<ModelUpdate>& updates, int f) {
    check_round(updates);
    if (f < 0) throw InvalidConfig("krum f must be >= 0");
    auto ordered = sorted_by_id(updates);
    const int n = static_cast<int>(ordered.size());
    if (n < 2 * f + 3)
        throw TooFewClients("krum with f=" + std::to_string(f) + " needs n >= " +
                            std::to_string(2 * f + 3) + ", got " + std::to_string(n));

    const int neighbors = n - f - 2;
    int best = 0;
    double best_score = 0.0;
    std::vector<double> dists;
    for (int i = 0; i < n; ++i) {
        dists.clear();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            dists.push_back(squared_distance(ordered[i]->params, ordered[j]->params));
        }
        std::sort(dists.begin(), dists.end());
        double score = 0.0;
        for (int k = 0; k < neighbors; ++k) score += dists[k];
        if (i == 0 || score < best_score) {  // ties keep the lower client_id
            best = i;
            best_score = score;
        }
    }
    return ordered[best]->params;
}

Vec aggregate(const std::vector<ModelUpdate>& updates, const AggregationRule& rule) {
    switch (rule.kind) {
        case AggregationRule::Kind::FedAvg: return fedavg(updates);
        case AggregationRule::Kind::TrimmedMean: return trimmed_mean(updates, rule.beta);
        case AggregationRule::Kind::Krum: return krum(updates, rule.f);
    }
    throw InvalidConfig("unhandled aggregation rule");
}

}  // namespace fedauth
