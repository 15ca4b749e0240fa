#pragma once

#include <stdexcept>
#include <string>

namespace dropin {

/// Base of every error raised by the toolkit. `kind()` is the stable class
/// label written to run reports when an iteration fails.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* kind() const noexcept { return "Error"; }
};

#define DROPIN_DEFINE_ERROR(Name)                                              \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(what) {}                \
        const char* kind() const noexcept override { return #Name; }           \
    }

DROPIN_DEFINE_ERROR(ConfigError);
DROPIN_DEFINE_ERROR(SchemaError);
DROPIN_DEFINE_ERROR(SeparationError);
DROPIN_DEFINE_ERROR(RankError);
DROPIN_DEFINE_ERROR(DegenerateOutcomeError);
DROPIN_DEFINE_ERROR(ConvergenceError);
DROPIN_DEFINE_ERROR(PositivityError);
DROPIN_DEFINE_ERROR(UnsupportedEstimandError);
DROPIN_DEFINE_ERROR(EvaluationError);
DROPIN_DEFINE_ERROR(IoError);

#undef DROPIN_DEFINE_ERROR

}  // namespace dropin
