#pragma once

#include <stdexcept>
#include <string>

namespace grapetrack {

/// Base for all toolkit errors. The CLI maps every subclass except
/// ContractError to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed text input (bad field count, non-numeric token, ...).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Binary container problems: bad magic, unsupported dtype, corrupt zip.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Input parsed but violates a data invariant (empty mask, missing id, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Cross-reference failures inside a sparse model.
class IntegrityError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

/// A caller broke a documented precondition. Treated as an internal error.
class ContractError : public Error {
public:
    using Error::Error;
};

}  // namespace grapetrack
