#pragma once

#include <stdexcept>
#include <string>

namespace windfield {

// Exit-code families used by the CLI.
enum class ErrorKind { Config = 1, Data = 2, Numerical = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define WINDFIELD_DEFINE_ERROR(Name, Kind)                                      \
    class Name : public Error {                                                 \
    public:                                                                     \
        explicit Name(const std::string &what) : Error(ErrorKind::Kind, what) {} \
    }

WINDFIELD_DEFINE_ERROR(ConfigError, Config);
WINDFIELD_DEFINE_ERROR(FormatError, Data);
WINDFIELD_DEFINE_ERROR(SequenceError, Data);
WINDFIELD_DEFINE_ERROR(ShapeError, Data);
WINDFIELD_DEFINE_ERROR(DegenerateRangeError, Data);
WINDFIELD_DEFINE_ERROR(ExtrapolationError, Data);
WINDFIELD_DEFINE_ERROR(ZeroDiffError, Data);
WINDFIELD_DEFINE_ERROR(EmptyDatasetError, Data);
WINDFIELD_DEFINE_ERROR(GeometryError, Data);
WINDFIELD_DEFINE_ERROR(DomainError, Numerical);
WINDFIELD_DEFINE_ERROR(NumericalError, Numerical);
WINDFIELD_DEFINE_ERROR(EmptyLayerError, Numerical);
WINDFIELD_DEFINE_ERROR(SolverError, Numerical);

#undef WINDFIELD_DEFINE_ERROR

}  // namespace windfield
