#pragma once

#include <stdexcept>
#include <string>

namespace vnn {

// Base class for every error raised by the toolkit. The kind lets the CLI map
// failures to exit codes without string matching.
class Error : public std::runtime_error {
public:
    enum class Kind {
        Shape,
        Parse,
        Validation,
        Format,
        Config,
        Data,
        SolverStalled,
        TrainingDiverged,
        InternalConsistency,
        Io,
    };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& what) : Error(Kind::Shape, what) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& what) : Error(Kind::Parse, what) {}
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& what) : Error(Kind::Validation, what) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& what) : Error(Kind::Format, what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(Kind::Config, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(Kind::Data, what) {}
};

struct SolverStalledError : Error {
    explicit SolverStalledError(const std::string& what) : Error(Kind::SolverStalled, what) {}
};

struct TrainingDivergedError : Error {
    explicit TrainingDivergedError(const std::string& what) : Error(Kind::TrainingDiverged, what) {}
};

struct InternalConsistencyError : Error {
    explicit InternalConsistencyError(const std::string& what)
        : Error(Kind::InternalConsistency, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(Kind::Io, what) {}
};

}  // namespace vnn
