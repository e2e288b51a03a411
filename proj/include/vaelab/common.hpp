#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace vaelab {

// Error taxonomy. Every throwing path in the library uses one of these so
// callers (and the CLI) can map failures to stable classes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};
struct ContractError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct FormatError : Error {
    using Error::Error;
};
struct IntegrityError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

struct DivergenceError : Error {
    DivergenceError(const std::string& msg, int epoch_, int batch_)
        : Error(msg), epoch(epoch_), batch(batch_) {}
    int epoch = -1;
    int batch = -1;
};

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    out += "]";
    return out;
}

}  // namespace vaelab
