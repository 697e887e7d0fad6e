#include "fedauth/auth_server.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "fedauth/parallel.hpp"
#include "fedauth/rng.hpp"

namespace fedauth {

std::string nonce_hex(const std::array<uint64_t, 2>& nonce) {
    static const char* digits = "0123456789abcdef";
    std::string s(32, '0');
    for (int half = 0; half < 2; ++half) {
        uint64_t v = nonce[half];
        for (int i = 15; i >= 0; --i) {
            s[16 * half + i] = digits[v & 0xf];
            v >>= 4;
        }
    }
    return s;
}

FlagPolicy FlagPolicy::fixed_threshold(double theta) {
    if (theta < 0.0) throw InvalidConfig("fixed threshold must be >= 0");
    FlagPolicy p;
    p.mode = Mode::FixedThreshold;
    p.threshold = theta;
    return p;
}

FlagPolicy FlagPolicy::largest_gap() {
    FlagPolicy p;
    p.mode = Mode::LargestGap;
    return p;
}

FlagPolicy FlagPolicy::top_k(int k) {
    if (k < 0) throw InvalidConfig("top_k count must be >= 0");
    FlagPolicy p;
    p.mode = Mode::TopK;
    p.k = k;
    return p;
}

FlagPolicy FlagPolicy::parse(const std::string& spec) {
    auto colon = spec.find(':');
    std::string head = spec.substr(0, colon);
    std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    try {
        if (head == "largest_gap") {
            if (!arg.empty()) throw InvalidConfig("largest_gap takes no argument");
            return largest_gap();
        }
        if (head == "top_k") return top_k(std::stoi(arg));
        if (head == "fixed_threshold") return fixed_threshold(std::stod(arg));
    } catch (const std::logic_error&) {
        throw InvalidConfig("bad policy argument in '" + spec + "'");
    }
    throw InvalidConfig("unknown policy '" + spec +
                        "' (expected largest_gap, top_k:<k>, fixed_threshold:<theta>)");
}

std::string FlagPolicy::name() const {
    switch (mode) {
        case Mode::FixedThreshold: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "fixed_threshold:%g", threshold);
            return buf;
        }
        case Mode::LargestGap: return "largest_gap";
        case Mode::TopK: return "top_k:" + std::to_string(k);
    }
    return "?";
}

std::vector<Verdict> rank_clients(const std::vector<AnomalyReport>& reports) {
    if (reports.empty()) throw EmptyInput("rank_clients on zero reports");
    std::set<std::string> seen;
    for (const AnomalyReport& r : reports)
        if (!seen.insert(r.client_id).second)
            throw DuplicateClient("client " + r.client_id + " reported twice");

    std::vector<Verdict> verdicts;
    verdicts.reserve(reports.size());
    for (const AnomalyReport& r : reports)
        verdicts.push_back({r.client_id, Status::Authentic, r.S, 0});
    std::stable_sort(verdicts.begin(), verdicts.end(), [](const Verdict& a, const Verdict& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.client_id < b.client_id;
    });
    for (size_t i = 0; i < verdicts.size(); ++i) verdicts[i].rank = static_cast<int>(i) + 1;
    return verdicts;
}

std::vector<Verdict> decide_verdicts(std::vector<Verdict> ranked, const FlagPolicy& policy) {
    const size_t n = ranked.size();
    switch (policy.mode) {
        case FlagPolicy::Mode::FixedThreshold:
            for (Verdict& v : ranked)
                v.status = v.score > policy.threshold ? Status::Suspicious : Status::Authentic;
            break;
        case FlagPolicy::Mode::TopK: {
            for (size_t i = 0; i < n; ++i)
                ranked[i].status =
                    static_cast<int>(i) < policy.k ? Status::Suspicious : Status::Authentic;
            break;
        }
        case FlagPolicy::Mode::LargestGap: {
            for (Verdict& v : ranked) v.status = Status::Authentic;
            if (n < 2) break;
            size_t cut = 0;
            double best_gap = -1.0;
            for (size_t i = 0; i + 1 < n; ++i) {
                double gap = ranked[i].score - ranked[i + 1].score;
                if (gap > best_gap) {
                    best_gap = gap;
                    cut = i;
                }
            }
            // relative floor: a gap that is not clearly larger than the score
            // scale flags nobody
            if (best_gap > FlagPolicy::kGapFloor * ranked.front().score) {
                for (size_t i = 0; i <= cut; ++i) ranked[i].status = Status::Suspicious;
            }
            break;
        }
    }
    return ranked;
}

std::vector<VerificationTag> issue_tags(const std::vector<Verdict>& verdicts, int round,
                                        uint64_t seed) {
    std::vector<VerificationTag> tags;
    for (const Verdict& v : verdicts) {
        if (v.status != Status::Authentic) continue;
        Rng rng(derive_seed(derive_seed(seed, "tag", static_cast<uint64_t>(round)), v.client_id));
        VerificationTag tag;
        tag.client_id = v.client_id;
        tag.round = round;
        tag.nonce = {rng.u64(), rng.u64()};
        tag.valid = true;
        tags.push_back(std::move(tag));
    }
    return tags;
}

AuthServer::RoundResult AuthServer::authenticate_round(
    const std::vector<ClientSubmission>& submissions, int round, int threads) const {
    RoundResult result;
    if (submissions.empty()) throw EmptyInput("no submissions in round " + std::to_string(round));

    std::vector<const ClientSubmission*> ordered;
    ordered.reserve(submissions.size());
    for (const ClientSubmission& s : submissions) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const ClientSubmission* a, const ClientSubmission* b) {
                  return a->client_id < b->client_id;
              });

    result.reports.resize(ordered.size());
    parallel_for(ordered.size(), threads, [&](size_t i) {
        const ClientSubmission& sub = *ordered[i];
        result.reports[i] = evaluate_client(sub, model, ref_data, weights, micro,
                                            derive_seed(seed, sub.client_id));
    });

    result.verdicts = decide_verdicts(rank_clients(result.reports), policy);
    result.tags = issue_tags(result.verdicts, round, seed);
    return result;
}

}  // namespace fedauth
