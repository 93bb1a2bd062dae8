#ifndef RODRECON_ERRORS_HPP
#define RODRECON_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rodrecon {

struct NonFiniteStrain : std::runtime_error {
  explicit NonFiniteStrain(const std::string& msg) : std::runtime_error(msg) {}
};

struct OutOfRange : std::runtime_error {
  explicit OutOfRange(const std::string& msg) : std::runtime_error(msg) {}
};

struct LengthMismatch : std::runtime_error {
  explicit LengthMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateData : std::runtime_error {
  explicit DegenerateData(const std::string& msg) : std::runtime_error(msg) {}
};

struct MarkerLayoutMismatch : std::runtime_error {
  explicit MarkerLayoutMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct Diverged : std::runtime_error {
  explicit Diverged(const std::string& msg) : std::runtime_error(msg) {}
};

struct FormatVersionMismatch : std::runtime_error {
  explicit FormatVersionMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct ChecksumMismatch : std::runtime_error {
  explicit ChecksumMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rodrecon

#endif
