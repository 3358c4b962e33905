#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace hsidef {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntMatrix = Eigen::MatrixXi;
using Index = Eigen::Index;

// Error categories map onto CLI exit codes: config=2, data=3, numeric=4.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-fatal diagnostics (dropped bands, zero-norm spectra, ...). Printed to
// stderr unless silenced; tests silence them globally.
void warn(const std::string& msg);
void set_warnings_enabled(bool enabled);

enum class Activation { Rectifier, Identity, Tanh };

inline double apply_activation(Activation act, double x) {
  switch (act) {
    case Activation::Rectifier: return x > 0.0 ? x : 0.0;
    case Activation::Identity: return x;
    case Activation::Tanh: return std::tanh(x);
  }
  return x;
}

inline double activation_grad(Activation act, double pre) {
  switch (act) {
    case Activation::Rectifier: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::Identity: return 1.0;
    case Activation::Tanh: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

}  // namespace hsidef
