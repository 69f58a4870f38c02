#pragma once

#include <stdexcept>
#include <string>

namespace sgmatch {

struct EmptyCaption : std::runtime_error {
  explicit EmptyCaption(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct IndexOutOfRange : std::out_of_range {
  explicit IndexOutOfRange(const std::string& msg) : std::out_of_range(msg) {}
};

struct NoSwapAvailable : std::runtime_error {
  explicit NoSwapAvailable(const std::string& msg) : std::runtime_error(msg) {}
};

struct ZeroVector : std::runtime_error {
  explicit ZeroVector(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonFiniteLoss : std::runtime_error {
  explicit NonFiniteLoss(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sgmatch
