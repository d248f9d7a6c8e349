// types.hpp: shared numeric aliases and error types for the pcs library.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace pcs {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

// Failure modes of the steady-state and spectral solvers. Callers that sweep
// parameters catch these per point and keep going.
enum class SolverErrorKind {
    singular,          // central block has no unique null vector
    not_converged,     // harmonic truncation not converged under doubling
    ill_conditioned,   // a continued-fraction inversion exceeded the condition limit
    unstable,          // time integration drifted in trace
    defective_spectrum // eigen-expansion could not reproduce direct propagation
};

inline const char* to_string(SolverErrorKind kind) noexcept {
    switch (kind) {
    case SolverErrorKind::singular: return "singular";
    case SolverErrorKind::not_converged: return "not_converged";
    case SolverErrorKind::ill_conditioned: return "ill_conditioned";
    case SolverErrorKind::unstable: return "unstable";
    case SolverErrorKind::defective_spectrum: return "defective_spectrum";
    }
    return "unknown";
}

class SolverError : public std::runtime_error {
public:
    SolverError(SolverErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    SolverErrorKind kind() const noexcept { return kind_; }

private:
    SolverErrorKind kind_;
};

} // namespace pcs
