#pragma once

#include <stdexcept>
#include <string>

namespace glar {

// Error taxonomy. The CLI maps these onto process exit codes:
//   ConfigError / UsageError            -> 1
//   ParseError / DataError / IoError    -> 2  (includes shape/index contract violations,
//   ShapeError / IndexError                    which are always induced by bad inputs)
//   NumericError                        -> 3
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct IndexError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };

}  // namespace glar
