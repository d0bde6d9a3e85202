/** \file shock.hpp
 * \brief Artificial-viscosity machinery: the modal smoothness sensor with the
 *        sine viscosity ramp, the dilatation-based bulk-viscosity model, and
 *        the vertex-max C0 smoothing shared by both.
 */
#pragma once

#include <vector>

#include "hdgflow/gas.hpp"
#include "hdgflow/mesh.hpp"
#include "hdgflow/reference_element.hpp"

namespace hdgflow {

/// Which artificial-viscosity scheme a run uses.
enum class ShockMode { off, laplacian, bulk };

inline ShockMode parse_shock_mode(const std::string& text) {
    if (text == "off") return ShockMode::off;
    if (text == "laplacian") return ShockMode::laplacian;
    if (text == "bulk") return ShockMode::bulk;
    throw ParseError("unknown shock mode '" + text + "'");
}

/// Tunable constants of both schemes.  The smoothness-ramp window spans
/// [-(4+delta_window) log10 k, -4 log10 k] in s_e = log10 S_e; the default
/// delta_window of 7 places the lower edge at -11 log10 k.
struct SensorConfig {
    ShockMode mode = ShockMode::off;
    double eps0_multiplier = 1.0;  ///< Laplacian scale: eps0 = multiplier * h/k
    double delta_window = 7.0;     ///< ramp window width coefficient
    double bulk_eps0 = 1.5;        ///< bulk-viscosity magnitude constant
    double bulk_s0 = 0.01;         ///< dilatation sensor shift
    double bulk_smin = 0.0;        ///< dilatation clamp floor
    double pr_beta = 0.9;          ///< artificial Prandtl number
};

/// Modal smoothness sensor: fraction of the density's modal energy carried by
/// the top-degree modes.  `rho` holds the nodal density values of one element.
inline double persson_sensor(const Eigen::VectorXd& rho,
                             const ReferenceElement& ref) {
    const Eigen::VectorXd modes = ref.inv_vandermonde() * rho;
    const double den = modes.squaredNorm();
    if (den == 0.0) throw ZeroField("persson_sensor: zero density field");
    double num = 0.0;
    for (int i = 0; i < modes.size(); ++i)
        if (ref.mode_degree(i) == ref.degree()) num += modes[i] * modes[i];
    return num / den;
}

/// Sine ramp mapping the log-sensor s_e = log10 S_e to a viscosity in
/// [0, eps0].  Throws DegenerateThresholds for degree 1, where both window
/// edges collapse to zero.
inline double viscosity_ramp(double s_e, int degree, double eps0,
                             const SensorConfig& cfg = {}) {
    if (degree < 2)
        throw DegenerateThresholds(
            "viscosity_ramp: smoothness window collapses at degree 1");
    const double log_k = std::log10(static_cast<double>(degree));
    const double s_hi = -4.0 * log_k;
    const double s_lo = -(4.0 + cfg.delta_window) * log_k;
    const double s0 = 0.5 * (s_hi + s_lo);
    const double xi = 0.5 * (s_hi - s_lo);
    if (s_e <= s_lo) return 0.0;
    if (s_e >= s_hi) return eps0;
    return 0.5 * eps0 * (1.0 + std::sin(0.5 * M_PI * (s_e - s0) / xi));
}

/// Dilatation sensor: positive in compression regions.
inline double dilatation_sensor(double div_v, double h, int degree,
                                double c_ref) {
    return -(h / degree) * div_v / c_ref;
}

/// Unsmoothed elemental bulk viscosity from the dilatation sensor value; the
/// C0 reconstruction is applied afterwards at field level.
inline double bulk_viscosity(double s_beta, double h, int degree,
                             const GasModel& gas, const SensorConfig& cfg = {}) {
    const double s_max = 2.0 / std::sqrt(gas.gamma * gas.gamma - 1.0);
    const double f = std::min(s_max, std::max(cfg.bulk_smin, s_beta - cfg.bulk_s0));
    const double v2 = 1.0;                       // free-stream speed, squared
    const double c2 = gas.c_inf() * gas.c_inf();
    return cfg.bulk_eps0 * (h / degree) * std::sqrt(v2 + c2) * f;
}

/// Bulk-viscosity correction to the diffusive flux:
/// rows (0; (div v) I; ((div v) v + phi / Pr_beta)^T) scaled by beta_star.
inline Flux bulk_viscous_flux(const Vec4& U, const Vec2& phi, double beta_star,
                              double div_v, const SensorConfig& cfg,
                              const GasModel& gas) {
    const Primitives q = primitives(U, gas);
    Flux G = Flux::Zero();
    G(1, 0) = div_v;
    G(2, 1) = div_v;
    G.row(3) = (div_v * q.v + phi / cfg.pr_beta).transpose();
    return beta_star * G;
}

/// C0-smoothed piecewise-linear field: one value per element corner, obtained
/// by a vertex max-reduction of elemental values followed by hat-function
/// interpolation.
class SmoothedField {
public:
    SmoothedField() = default;
    explicit SmoothedField(Eigen::MatrixX3d corners)
        : corners_(std::move(corners)) {}

    /// Value inside element e at reference coordinates (xi, eta).
    double at(int e, double xi, double eta) const {
        if (corners_.rows() == 0) return 0.0;
        return corners_(e, 0) * (1.0 - xi - eta) + corners_(e, 1) * xi +
               corners_(e, 2) * eta;
    }
    /// Corner values of element e in local vertex order.
    Vec3 corners(int e) const {
        if (corners_.rows() == 0) return Vec3::Zero();
        return corners_.row(e).transpose();
    }
    bool empty() const { return corners_.rows() == 0; }
    double max_value() const {
        return corners_.rows() == 0 ? 0.0 : corners_.maxCoeff();
    }

private:
    Eigen::MatrixX3d corners_;
};

/// Reconstruct a continuous field from elemental values: each mesh vertex
/// takes the maximum over its incident elements, and elements interpolate
/// their corner values linearly.
inline SmoothedField c0_smooth(const Mesh& mesh,
                               const Eigen::VectorXd& elemental) {
    std::vector<double> vertex(static_cast<size_t>(mesh.num_nodes()), 0.0);
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto& conn = mesh.element_nodes(e);
        for (int v = 0; v < 3; ++v) {
            auto& slot = vertex[static_cast<size_t>(conn[static_cast<size_t>(v)])];
            slot = std::max(slot, elemental[e]);
        }
    }
    Eigen::MatrixX3d corners(mesh.num_elements(), 3);
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto& conn = mesh.element_nodes(e);
        for (int v = 0; v < 3; ++v)
            corners(e, v) = vertex[static_cast<size_t>(conn[static_cast<size_t>(v)])];
    }
    return SmoothedField(std::move(corners));
}

/// Laplacian-mode viscosity field from per-element nodal densities (one row
/// per element).  Degree 1 disables the ramp (collapsed window) and returns
/// the zero field; `warned`, when given, is set in that case.
inline SmoothedField laplacian_viscosity_field(
    const Mesh& mesh, const ReferenceElement& ref,
    const Eigen::MatrixXd& rho_nodal, const SensorConfig& cfg,
    bool* warned = nullptr) {
    Eigen::VectorXd elemental = Eigen::VectorXd::Zero(mesh.num_elements());
    if (ref.degree() < 2) {
        if (warned) *warned = true;
        return c0_smooth(mesh, elemental);
    }
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const double s = persson_sensor(rho_nodal.row(e).transpose(), ref);
        const double s_e = s > 0.0 ? std::log10(s) : -inf;
        const double h = mesh.element_circumdiameter(e);
        const double eps0 = cfg.eps0_multiplier * h / ref.degree();
        elemental[e] = viscosity_ramp(s_e, ref.degree(), eps0, cfg);
    }
    return c0_smooth(mesh, elemental);
}

/// Bulk-mode viscosity field from per-element dilatation samples (one row per
/// element, one column per volume quadrature point): the elemental value is
/// the largest pointwise bulk viscosity over the samples.
inline SmoothedField bulk_viscosity_field(const Mesh& mesh,
                                          const Eigen::MatrixXd& div_v,
                                          int degree, const GasModel& gas,
                                          const SensorConfig& cfg) {
    Eigen::VectorXd elemental = Eigen::VectorXd::Zero(mesh.num_elements());
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const double h = mesh.element_circumdiameter(e);
        double worst = 0.0;
        for (int q = 0; q < div_v.cols(); ++q) {
            const double s = dilatation_sensor(div_v(e, q), h, degree, gas.c_inf());
            worst = std::max(worst, bulk_viscosity(s, h, degree, gas, cfg));
        }
        elemental[e] = worst;
    }
    return c0_smooth(mesh, elemental);
}

}  // namespace hdgflow
