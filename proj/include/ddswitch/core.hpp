#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ddswitch {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Channel cannot be represented on the configured grid (e.g. delay longer than the burst).
class InvalidChannel : public Error {
public:
    using Error::Error;
};

class SingularMatrix : public Error {
public:
    using Error::Error;
};

/// Dataset / model file problems. Each failure mode has its own type.
class FormatError : public Error {
public:
    using Error::Error;
};

class VersionMismatch : public FormatError {
public:
    using FormatError::FormatError;
};

class TruncatedFile : public FormatError {
public:
    using FormatError::FormatError;
};

class ChecksumMismatch : public FormatError {
public:
    using FormatError::FormatError;
};

/// exp(j * phase)
inline cplx unit_phasor(double phase) { return {std::cos(phase), std::sin(phase)}; }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace ddswitch
