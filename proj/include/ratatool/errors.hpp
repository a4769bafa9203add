#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ratatool {

/// Coarse failure category. The CLI maps it to an exit status.
enum class ErrorCategory {
    Config,  // usage or configuration problem
    Data,    // malformed or inconsistent input data
    Remote,  // a remote service failed or misbehaved
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::Config, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

class RemoteError : public Error {
public:
    explicit RemoteError(const std::string& what) : Error(ErrorCategory::Remote, what) {}
};

// tooldesc

/// Schema violation. `key()` names the offending key.
class SchemaError : public DataError {
public:
    SchemaError(std::string key, const std::string& problem)
        : DataError(problem + " \"" + key + "\""), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class MixedModalityError : public DataError {
public:
    explicit MixedModalityError(const std::string& query_id)
        : DataError("query \"" + query_id + "\" mixes image and audio attachments") {}
};

// corpus

class EmptyModalityError : public DataError {
public:
    explicit EmptyModalityError(const std::string& modality)
        : DataError("modality " + modality + " has fewer than 2 tools; cannot populate both splits") {}
};

class NotFound : public RemoteError {
public:
    explicit NotFound(const std::string& what) : RemoteError("not found: " + what) {}
};

class NetworkError : public RemoteError {
public:
    using RemoteError::RemoteError;
};

// embed

class ApiError : public RemoteError {
public:
    ApiError(int status, const std::string& body_excerpt)
        : RemoteError("api error " + std::to_string(status) + ": " + body_excerpt), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

class DimensionMismatch : public DataError {
public:
    DimensionMismatch(std::size_t expected, std::size_t got)
        : DataError("dimension mismatch: expected " + std::to_string(expected) + ", got " +
                    std::to_string(got)) {}
};

class CacheCorruption : public DataError {
public:
    CacheCorruption(std::size_t line, const std::string& detail)
        : DataError("cache corruption at line " + std::to_string(line) + ": " + detail), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// retrieve

class EmptyCorpus : public DataError {
public:
    EmptyCorpus() : DataError("empty tool index") {}
};

class UnknownTool : public DataError {
public:
    explicit UnknownTool(const std::string& tool_id)
        : DataError("unknown tool \"" + tool_id + "\""), tool_id_(tool_id) {}
    const std::string& tool_id() const noexcept { return tool_id_; }

private:
    std::string tool_id_;
};

class ProvenanceMismatch : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// llmclient

class MissingPlaceholder : public ConfigError {
public:
    explicit MissingPlaceholder(const std::string& name)
        : ConfigError("missing placeholder argument {" + name + "}"), name_(name) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

class GenerationError : public RemoteError {
public:
    using RemoteError::RemoteError;
};

/// No usable description could be extracted. Carries every raw output seen.
class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::vector<std::string> raw_outputs)
        : DataError(what), raw_outputs_(std::move(raw_outputs)) {}
    const std::vector<std::string>& raw_outputs() const noexcept { return raw_outputs_; }

private:
    std::vector<std::string> raw_outputs_;
};

// prefgen

class TooFewCandidates : public DataError {
public:
    TooFewCandidates(const std::string& query_id, std::size_t parsed)
        : DataError("query \"" + query_id + "\" has " + std::to_string(parsed) +
                    " parsed candidates; need at least 2") {}
};

// align / eval

class InvalidLogProb : public DataError {
public:
    using DataError::DataError;
};

class EmptyBatch : public DataError {
public:
    EmptyBatch() : DataError("empty batch") {}
};

class EmptyEval : public DataError {
public:
    EmptyEval() : DataError("no evaluation items") {}
};

}  // namespace ratatool
