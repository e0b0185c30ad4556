#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace infoprio {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or batch dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, overflow, or other numeric breakdown.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Input outside an operation's domain (bad probability table, empty set, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration. Carries the offending field name.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error("config field '" + field + "': " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A named, mutable view over one contiguous block of trainable parameters.
struct ParamBlock {
  std::string name;
  std::span<double> values;
};

/// Read-only counterpart of ParamBlock, used for gradients.
using GradBlock = std::span<const double>;

inline std::span<double> as_span(Mat& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
inline std::span<double> as_span(Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
inline std::span<const double> as_span(const Mat& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
inline std::span<const double> as_span(const Vec& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace infoprio
