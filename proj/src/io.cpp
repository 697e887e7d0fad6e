#include "fedauth/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "json.hpp"

namespace fedauth {

std::string format_double(double value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

static std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

static ParseError row_error(const std::string& path, int line_no, const std::string& detail) {
    return ParseError(path + ":" + std::to_string(line_no) + ": " + detail);
}

static int parse_int(const std::string& token, const std::string& path, int line_no) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size())
        throw row_error(path, line_no, "bad integer '" + token + "'");
    return value;
}

static double parse_double(const std::string& token, const std::string& path, int line_no) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value))
        throw row_error(path, line_no, "bad number '" + token + "'");
    return value;
}

std::vector<EmbeddingRow> read_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file, header expected");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split_csv(line);
    if (header.size() < 3 || header[0] != "client_id" || header[1] != "label")
        throw row_error(path, 1, "header must start with client_id,label and list components");
    const size_t dim = header.size() - 2;

    std::vector<EmbeddingRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = split_csv(line);
        if (fields.size() != dim + 2)
            throw row_error(path, line_no,
                            "expected " + std::to_string(dim + 2) + " columns, got " +
                                std::to_string(fields.size()));
        EmbeddingRow row;
        row.client_id = fields[0];
        if (row.client_id.empty()) throw row_error(path, line_no, "empty client_id");
        row.label = parse_int(fields[1], path, line_no);
        row.vector.reserve(dim);
        for (size_t i = 0; i < dim; ++i)
            row.vector.push_back(parse_double(fields[i + 2], path, line_no));
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_embeddings(const std::string& path, const std::vector<EmbeddingRow>& rows) {
    if (rows.empty()) throw EmptyInput("no embedding rows to write");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    const size_t dim = rows.front().vector.size();
    out << "client_id,label";
    for (size_t i = 0; i < dim; ++i) out << ",x" << i;
    out << "\n";
    for (const EmbeddingRow& row : rows) {
        if (row.vector.size() != dim)
            throw DimMismatch("embedding rows disagree on dimension");
        out << row.client_id << "," << row.label;
        for (double v : row.vector) out << "," << format_double(v);
        out << "\n";
    }
    if (!out) throw IoError("write failed for " + path);
}

std::vector<LabeledEmbedding> to_labeled(const std::vector<EmbeddingRow>& rows) {
    std::vector<LabeledEmbedding> out;
    out.reserve(rows.size());
    for (const EmbeddingRow& row : rows) out.push_back({row.vector, row.label});
    return out;
}

std::vector<ClientSubmission> group_submissions(const std::vector<EmbeddingRow>& rows) {
    std::map<std::string, std::vector<LabeledEmbedding>> by_client;
    for (const EmbeddingRow& row : rows)
        by_client[row.client_id].push_back({row.vector, row.label});
    std::vector<ClientSubmission> subs;
    subs.reserve(by_client.size());
    for (auto& [id, samples] : by_client) subs.push_back({id, std::move(samples)});
    return subs;
}

void write_verdict_report(std::ostream& out, int round, const std::vector<Verdict>& verdicts,
                          const std::vector<AnomalyReport>& reports) {
    std::map<std::string, const AnomalyReport*> by_id;
    for (const AnomalyReport& r : reports) by_id[r.client_id] = &r;

    std::vector<const Verdict*> ordered;
    ordered.reserve(verdicts.size());
    for (const Verdict& v : verdicts) ordered.push_back(&v);
    std::sort(ordered.begin(), ordered.end(),
              [](const Verdict* a, const Verdict* b) { return a->rank < b->rank; });

    out << "round,client_id,F,M,C,S,rank,status\n";
    for (const Verdict* v : ordered) {
        auto it = by_id.find(v->client_id);
        if (it == by_id.end()) throw UnknownClient("no report for " + v->client_id);
        const AnomalyReport& r = *it->second;
        out << round << "," << v->client_id << "," << format_double(r.F) << ","
            << format_double(r.M) << "," << format_double(r.C) << "," << format_double(r.S)
            << "," << v->rank << "," << status_name(v->status) << "\n";
    }
}

void write_verdict_report(const std::string& path, int round, const std::vector<Verdict>& verdicts,
                          const std::vector<AnomalyReport>& reports) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    write_verdict_report(out, round, verdicts, reports);
    if (!out) throw IoError("write failed for " + path);
}

void write_scatter_csv(const std::string& path, const std::vector<AnomalyReport>& reports,
                       const std::vector<std::string>& poisoned_ids) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    std::vector<const AnomalyReport*> ordered;
    ordered.reserve(reports.size());
    for (const AnomalyReport& r : reports) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](const AnomalyReport* a, const AnomalyReport* b) {
        return a->client_id < b->client_id;
    });
    out << "client_id,S,is_poisoned\n";
    for (const AnomalyReport* r : ordered) {
        bool poisoned =
            std::find(poisoned_ids.begin(), poisoned_ids.end(), r->client_id) != poisoned_ids.end();
        out << r->client_id << "," << format_double(r->S) << "," << (poisoned ? 1 : 0) << "\n";
    }
    if (!out) throw IoError("write failed for " + path);
}

EventLog::EventLog(const std::string& path) : out_(path) {
    if (!out_) throw IoError("cannot write " + path);
}

void EventLog::write(const std::string& type, const std::map<std::string, std::string>& fields) {
    nlohmann::ordered_json record;
    record["type"] = type;
    for (const auto& [key, value] : fields) record[key] = value;
    out_ << record.dump() << "\n";
    if (!out_) throw IoError("event log write failed");
}

}  // namespace fedauth
