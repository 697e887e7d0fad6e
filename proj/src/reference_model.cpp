#include "fedauth/reference_model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace fedauth {

bool operator==(const CovMatrix& a, const CovMatrix& b) {
    return a.dim == b.dim && a.entries == b.entries && a.shrinkage == b.shrinkage;
}

bool operator==(const ClassStats& a, const ClassStats& b) {
    return a.class_id == b.class_id && a.mu == b.mu && a.sigma == b.sigma && a.tau == b.tau &&
           a.percentile_used == b.percentile_used && a.n_ref == b.n_ref;
}

bool operator==(const ReferenceModel& a, const ReferenceModel& b) {
    return a.dim == b.dim && a.classes == b.classes && a.percentile == b.percentile &&
           a.shrinkage == b.shrinkage && a.created_from == b.created_from;
}

namespace {

uint64_t fnv1a_init() { return 0xcbf29ce484222325ULL; }

void fnv1a_bytes(uint64_t& h, const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
}

void fnv1a_u64(uint64_t& h, uint64_t v) { fnv1a_bytes(h, &v, sizeof v); }

void fnv1a_double(uint64_t& h, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    fnv1a_u64(h, bits);
}

std::string to_hex(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

}  // namespace

std::string dataset_fingerprint(const std::vector<LabeledEmbedding>& data) {
    std::map<int, std::vector<const Vec*>> by_class;
    for (const LabeledEmbedding& e : data) by_class[e.label].push_back(&e.vector);

    uint64_t h = fnv1a_init();
    fnv1a_u64(h, data.size());
    for (auto& [label, points] : by_class) {
        std::sort(points.begin(), points.end(),
                  [](const Vec* a, const Vec* b) { return *a < *b; });
        fnv1a_u64(h, static_cast<uint64_t>(label));
        fnv1a_u64(h, points.size());
        for (const Vec* p : points)
            for (double x : *p) fnv1a_double(h, x);
    }
    return to_hex(h);
}

ClassStats build_class_stats(int class_id, std::vector<Vec> points, double q, double shrinkage) {
    if (points.empty()) throw EmptyClass("class " + std::to_string(class_id) + " has no samples");
    if (points.size() < 2)
        throw InsufficientSamples("class " + std::to_string(class_id) + " has " +
                                  std::to_string(points.size()) + " sample (need >= 2)");

    // Canonical accumulation order: float sums commute only if the order is
    // fixed, so sort points before any statistics.
    std::sort(points.begin(), points.end());

    ClassStats stats;
    stats.class_id = class_id;
    stats.percentile_used = q;
    stats.n_ref = static_cast<int>(points.size());
    stats.mu = mean_vector(points);
    stats.sigma = covariance_shrunk(points, shrinkage);

    std::vector<double> dists;
    dists.reserve(points.size());
    for (const Vec& p : points) dists.push_back(mahalanobis(p, stats.mu, stats.sigma));
    stats.tau = percentile(std::move(dists), q);
    return stats;
}

ReferenceModel build_reference_model(const std::vector<LabeledEmbedding>& data, int n_classes,
                                     double q, double shrinkage) {
    if (n_classes < 1) throw InvalidConfig("reference model needs >= 1 class");

    std::map<int, std::vector<Vec>> by_class;
    int dim = -1;
    for (const LabeledEmbedding& e : data) {
        if (e.label < 0 || e.label >= n_classes) throw UnknownClass(e.label);
        if (dim < 0) dim = static_cast<int>(e.vector.size());
        by_class[e.label].push_back(e.vector);
    }

    ReferenceModel model;
    model.dim = dim;
    model.percentile = q;
    model.shrinkage = shrinkage;
    model.created_from = dataset_fingerprint(data);
    for (int c = 0; c < n_classes; ++c) {
        auto it = by_class.find(c);
        if (it == by_class.end()) throw MissingClass(c);
        model.classes.emplace(c, build_class_stats(c, std::move(it->second), q, shrinkage));
    }
    return model;
}

void save_reference_model(const ReferenceModel& model, const std::string& path) {
    nlohmann::ordered_json doc;
    doc["version"] = 1;
    doc["dim"] = model.dim;
    doc["percentile"] = model.percentile;
    doc["shrinkage"] = model.shrinkage;
    doc["fingerprint"] = model.created_from;
    doc["classes"] = nlohmann::ordered_json::array();
    for (const auto& [id, stats] : model.classes) {
        nlohmann::ordered_json c;
        c["class_id"] = id;
        c["n_ref"] = stats.n_ref;
        c["tau"] = stats.tau;
        c["percentile_used"] = stats.percentile_used;
        c["mu"] = stats.mu;
        c["sigma_shrinkage"] = stats.sigma.shrinkage;
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (int r = 0; r < stats.sigma.dim; ++r) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (int col = 0; col < stats.sigma.dim; ++col) row.push_back(stats.sigma.at(r, col));
            rows.push_back(std::move(row));
        }
        c["sigma"] = std::move(rows);
        doc["classes"].push_back(std::move(c));
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + path);
}

ReferenceModel load_reference_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }

    try {
        if (!doc.contains("version")) throw ParseError(path + ": missing version field");
        if (doc["version"] != 1)
            throw UnsupportedVersion(path + ": schema version " + doc["version"].dump() +
                                     " (supported: 1)");
        ReferenceModel model;
        model.dim = doc.at("dim").get<int>();
        model.percentile = doc.at("percentile").get<double>();
        model.shrinkage = doc.at("shrinkage").get<double>();
        model.created_from = doc.at("fingerprint").get<std::string>();
        for (const auto& c : doc.at("classes")) {
            ClassStats stats;
            stats.class_id = c.at("class_id").get<int>();
            stats.n_ref = c.at("n_ref").get<int>();
            stats.tau = c.at("tau").get<double>();
            stats.percentile_used = c.at("percentile_used").get<double>();
            stats.mu = c.at("mu").get<Vec>();
            stats.sigma.dim = model.dim;
            stats.sigma.shrinkage = c.at("sigma_shrinkage").get<double>();
            const auto& rows = c.at("sigma");
            if (static_cast<int>(rows.size()) != model.dim)
                throw ParseError(path + ": sigma row count != dim");
            stats.sigma.entries.reserve(static_cast<size_t>(model.dim) * model.dim);
            for (const auto& row : rows) {
                if (static_cast<int>(row.size()) != model.dim)
                    throw ParseError(path + ": sigma column count != dim");
                for (const auto& v : row) stats.sigma.entries.push_back(v.get<double>());
            }
            if (static_cast<int>(stats.mu.size()) != model.dim)
                throw ParseError(path + ": mu length != dim");
            // refactorize; the factor is derived state, not part of the schema
            if (!cholesky_factor(stats.sigma.dim, stats.sigma.entries, stats.sigma.chol))
                throw SingularCovariance(path + ": stored covariance for class " +
                                         std::to_string(stats.class_id) +
                                         " is not positive definite");
            model.classes.emplace(stats.class_id, std::move(stats));
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

}  // namespace fedauth
