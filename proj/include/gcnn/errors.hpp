#pragma once

#include <stdexcept>
#include <string>

namespace gcnn {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotFoundError : Error { using Error::Error; };
struct UnsupportedFormatError : Error { using Error::Error; };
struct SilentAudioError : Error { using Error::Error; };
struct InvalidSpanError : Error { using Error::Error; };
struct LengthMismatchError : Error { using Error::Error; };
struct RateMismatchError : Error { using Error::Error; };
struct ShapeMismatchError : Error { using Error::Error; };
struct EmptyInputError : Error { using Error::Error; };
struct OutOfRangeError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace gcnn
