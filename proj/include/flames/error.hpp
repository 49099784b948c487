#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flames {

enum class Errc {
    MalformedLine,
    FieldParse,
    DuplicateBuilding,
    DanglingRule,
    DuplicateOui,
    UnsortedInput,
    EmptyGroup,
    EmptyInput,
    InsufficientRanks,
    SupportViolation,
    NonConvergence,
    TooFewSamples,
    SingleClassInput,
    KExceedsN,
    DegenerateComponent,
    ModelFeatureMismatch,
    SpecInvalid,
    BadFormat,
    Io,
};

std::string_view errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what, int column = -1)
        : std::runtime_error(what), code_(code), column_(column) {}

    Errc code() const noexcept { return code_; }
    // Zero-based field index for FieldParse errors, -1 otherwise.
    int column() const noexcept { return column_; }

private:
    Errc code_;
    int column_;
};

}  // namespace flames
