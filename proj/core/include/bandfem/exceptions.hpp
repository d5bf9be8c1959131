#ifndef BANDFEM_EXCEPTIONS_HPP
#define BANDFEM_EXCEPTIONS_HPP

#include <stdexcept>
#include <string>

namespace bandfem {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// levelset
struct DegeneratePoint : Error {
    using Error::Error;
};
struct NonConvergence : Error {
    using Error::Error;
};

// mesh
struct BandTouchesBoundary : Error {
    using Error::Error;
};
struct PointNotCovered : Error {
    using Error::Error;
};

// band
struct EmptyBand : Error {
    using Error::Error;
};
struct GridMismatch : Error {
    using Error::Error;
};

// fem
struct DegenerateElement : Error {
    using Error::Error;
};
struct MissingTransferDof : Error {
    using Error::Error;
};

// linalg
struct IndexOutOfRange : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};
struct ZeroDiagonal : Error {
    using Error::Error;
};

// errors module
struct NonpositiveError : Error {
    using Error::Error;
};

// cli / config
struct ConfigError : Error {
    ConfigError(const std::string& msg, std::string key_, int line_ = -1)
        : Error(msg), key(std::move(key_)), line(line_) {}
    std::string key;
    int line;
};

}  // namespace bandfem

#endif
