#pragma once

#include <stdexcept>
#include <string>

namespace tessera {

// Library errors are exceptions; the CLI maps categories onto exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input files (bad OBJ line, bad token file header, bad JSON).
struct ParseError : Error {
    using Error::Error;
};

// Filesystem failures (missing path, unwritable output).
struct IoError : Error {
    using Error::Error;
};

// A documented precondition was violated by the caller.
struct PreconditionError : Error {
    using Error::Error;
};

}  // namespace tessera
