#pragma once

#include <stdexcept>
#include <string>

namespace nodulecad {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range input data (bad file, bad manifest, empty mask).
/// The CLI maps this to exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

/// A caller broke an operation's precondition (wrong dimensions, single-class
/// data, unknown schema version). The CLI maps this to exit code 3.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Binary class labels. Benign is the negative class.
inline constexpr int kBenign = -1;
inline constexpr int kMalignant = +1;

inline bool is_valid_label(int y) { return y == kBenign || y == kMalignant; }

}  // namespace nodulecad
