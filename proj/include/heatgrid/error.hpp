#pragma once

#include <stdexcept>
#include <string>

namespace heatgrid {

// Error categories surfaced by the CLI as machine-parseable records.
enum class ErrorCode {
    shape,       // tensor/grid extent mismatch
    contract,    // precondition or invariant violation
    ingest,      // malformed input file
    parse,       // unparseable value or JSON
    schema,      // response/config missing a required field
    transport,   // HTTP failure
    io,          // filesystem failure
    degenerate,  // zero-spread channel or layer
    config,      // invalid run configuration
    not_found,   // missing artifact, date, or checkpoint
};

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::shape: return "shape";
        case ErrorCode::contract: return "contract";
        case ErrorCode::ingest: return "ingest";
        case ErrorCode::parse: return "parse";
        case ErrorCode::schema: return "schema";
        case ErrorCode::transport: return "transport";
        case ErrorCode::io: return "io";
        case ErrorCode::degenerate: return "degenerate";
        case ErrorCode::config: return "config";
        case ErrorCode::not_found: return "not_found";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& message) : Error(ErrorCode::shape, message) {}
};

struct ContractError : Error {
    explicit ContractError(const std::string& message) : Error(ErrorCode::contract, message) {}
};

struct IngestError : Error {
    explicit IngestError(const std::string& message) : Error(ErrorCode::ingest, message) {}
};

struct IoError : Error {
    explicit IoError(const std::string& message) : Error(ErrorCode::io, message) {}
};

}  // namespace heatgrid
