#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fedauth {

// Base error. `kind()` is a stable identifier that appears verbatim in CLI
// diagnostics ("error: <kind>: <detail>") so callers can match on it.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& detail)
        : std::runtime_error(kind + ": " + detail), kind_(std::move(kind)) {}
    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

struct EmptyClass : Error {
    explicit EmptyClass(const std::string& d) : Error("EmptyClass", d) {}
};
struct EmptyInput : Error {
    explicit EmptyInput(const std::string& d) : Error("EmptyInput", d) {}
};
struct InsufficientSamples : Error {
    explicit InsufficientSamples(const std::string& d) : Error("InsufficientSamples", d) {}
};
struct SingularCovariance : Error {
    explicit SingularCovariance(const std::string& d) : Error("SingularCovariance", d) {}
};
struct MissingClass : Error {
    explicit MissingClass(int class_id)
        : Error("MissingClass", "class " + std::to_string(class_id) + " absent from data") {}
};
struct UnknownClass : Error {
    explicit UnknownClass(int label)
        : Error("UnknownClass", "label " + std::to_string(label) + " not in reference model") {}
};
struct EmptySubmission : Error {
    explicit EmptySubmission(const std::string& d) : Error("EmptySubmission", d) {}
};
struct DuplicateClient : Error {
    explicit DuplicateClient(const std::string& d) : Error("DuplicateClient", d) {}
};
struct TooFewClients : Error {
    explicit TooFewClients(const std::string& d) : Error("TooFewClients", d) {}
};
struct EmptyRound : Error {
    explicit EmptyRound(const std::string& d) : Error("EmptyRound", d) {}
};
struct UnknownClient : Error {
    explicit UnknownClient(const std::string& d) : Error("UnknownClient", d) {}
};
struct EmptyDataset : Error {
    explicit EmptyDataset(const std::string& d) : Error("EmptyDataset", d) {}
};
struct ParseError : Error {
    explicit ParseError(const std::string& d) : Error("ParseError", d) {}
};
struct UnsupportedVersion : Error {
    explicit UnsupportedVersion(const std::string& d) : Error("UnsupportedVersion", d) {}
};
struct DimMismatch : Error {
    explicit DimMismatch(const std::string& d) : Error("DimMismatch", d) {}
};
struct InvalidConfig : Error {
    explicit InvalidConfig(const std::string& d) : Error("InvalidConfig", d) {}
};
struct IoError : Error {
    explicit IoError(const std::string& d) : Error("IoError", d) {}
};

}  // namespace fedauth
