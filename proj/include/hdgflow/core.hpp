/** \file core.hpp
 * \brief Common types, constants and error taxonomy of the hdgflow library.
 */
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace hdgflow {

/// Spatial dimension of the solver (triangular meshes in the plane).
inline constexpr int nsd = 2;
/// Number of conserved variables: (rho, rho*v, rho*E).
inline constexpr int nvar = nsd + 2;
/// Non-redundant entries of a symmetric nsd x nsd tensor (Voigt storage).
inline constexpr int msd = nsd * (nsd + 1) / 2;

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;
/// Flux tensor: one row per conservation equation, one column per direction.
using Flux = Eigen::Matrix<double, nvar, nsd>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Shorthand for quiet "not available" sentinel.
inline constexpr double inf = std::numeric_limits<double>::infinity();

/// Base class of all recoverable hdgflow errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// rho <= 0 handed to a primitive-variable conversion.
struct NonPositiveDensity : Error { using Error::Error; };
/// T <= 0 handed to the viscosity law.
struct NonPositiveTemperature : Error { using Error::Error; };
/// Viscous kernel invoked on an inviscid (Re = inf) gas model.
struct InviscidModel : Error { using Error::Error; };
/// Speed of sound not strictly positive in an eigendecomposition.
struct DegenerateState : Error { using Error::Error; };
/// A mesh face referenced by more than two elements.
struct NonConforming : Error { using Error::Error; };
/// A boundary face without a tag.
struct UntaggedBoundary : Error { using Error::Error; };
/// local_dimension requested for a shape outside the supported set.
struct UnsupportedShape : Error { using Error::Error; };
/// Element mapping with non-positive Jacobian determinant.
struct InvertedElement : Error { using Error::Error; };
/// Element matrix A_ZZ numerically singular.
struct SingularLocalMatrix : Error { using Error::Error; };
/// Assembled trace matrix singular (e.g. vanishing stabilisation).
struct SingularGlobalMatrix : Error { using Error::Error; };
/// Boundary tag present in the mesh but not bound in the configuration.
struct MissingSpec : Error { using Error::Error; };
/// Root bracketing failed in an exact-solution evaluation.
struct NoRoot : Error { using Error::Error; };
/// More than one root inside the bracketing interval.
struct AmbiguousBranch : Error { using Error::Error; };
/// Convergence table with fewer than two rows.
struct DegenerateTable : Error { using Error::Error; };
/// Identically-zero field handed to the smoothness sensor.
struct ZeroField : Error { using Error::Error; };
/// Malformed configuration or mesh file.
struct ParseError : Error { using Error::Error; };
/// Viscosity-ramp window collapses (degree 1: both thresholds are zero).
struct DegenerateThresholds : Error { using Error::Error; };
/// Surface friction/drag requested on a run without viscous fields.
struct MissingViscousData : Error { using Error::Error; };
/// Pseudo-time budget exhausted before the steady tolerance was met.
struct MaxIterations : Error { using Error::Error; };

/// Admissibility lost during the march (negative density or pressure).
struct NonPhysicalState : Error {
    NonPhysicalState(int step_, double min_rho_, double min_p_)
        : Error("non-physical state at step " + std::to_string(step_) +
                ": min rho = " + std::to_string(min_rho_) +
                ", min p = " + std::to_string(min_p_)),
          step(step_), min_rho(min_rho_), min_p(min_p_) {}
    int step;
    double min_rho;
    double min_p;
};

}  // namespace hdgflow
