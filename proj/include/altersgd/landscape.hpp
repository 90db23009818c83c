#pragma once

#include "altersgd/losses.hpp"
#include "altersgd/param_vector.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace altersgd {

/// |grad L(point)|^2
[[nodiscard]] double grad_norm_flatness(const LossOracle &loss, const ParamVector &point, const BatchRef &batch);

struct EigenEstimate {
    double value = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

inline constexpr std::uint64_t kPowerIterationSeed = 0x5eed5eedULL;

/// Dominant (by magnitude) Hessian eigenvalue by power iteration on
/// Hessian-vector products, started from a fixed-seed random unit vector.
/// Stops once successive Rayleigh quotients differ by less than `tol`.
[[nodiscard]] EigenEstimate hessian_top_eigenvalue(const LossOracle &loss, const ParamVector &point,
                                                   const BatchRef &batch, std::size_t max_iters = 1000,
                                                   double tol = 1e-10);

/// Mean of L(point + rho u) - L(point) over `draws` directions u uniform on the
/// unit sphere. Directions come from one seeded stream; the loss evaluations run
/// in parallel and are summed in draw order.
[[nodiscard]] double perturbation_sharpness(const LossOracle &loss, const ParamVector &point, double rho,
                                            std::size_t draws, std::uint64_t seed, const BatchRef &batch);

namespace reference {
[[nodiscard]] double perturbation_sharpness(const LossOracle &loss, const ParamVector &point, double rho,
                                            std::size_t draws, std::uint64_t seed, const BatchRef &batch);
}  // namespace reference

/// `draws` unit directions from the stream perturbation_sharpness uses.
[[nodiscard]] std::vector<ParamVector> sphere_directions(std::size_t dim, std::size_t draws, std::uint64_t seed);

struct FlatnessReport {
    double grad_norm_sq = 0.0;
    double top_hessian_eigenvalue = 0.0;
    double perturbation_sharpness = 0.0;
    ParamVector point;
    double rho = 0.05;
};

inline constexpr double kDefaultSharpnessRho = 0.05;
inline constexpr std::size_t kDefaultSharpnessDraws = 128;
inline constexpr std::size_t kMinSharpnessDraws = 32;

[[nodiscard]] FlatnessReport flatness_report(const LossOracle &loss, const ParamVector &point, const BatchRef &batch,
                                             double rho = kDefaultSharpnessRho,
                                             std::size_t draws = kDefaultSharpnessDraws, std::uint64_t seed = 0);

struct Theorem1Report {
    std::vector<double> eta_values;
    std::vector<ParamVector> composite_points;
    std::vector<ParamVector> surrogate_points;
    std::vector<double> errors;
    std::optional<double> fitted_order;
    bool exact_match = false;
};

/// Errors at or below this (times max(1, |point|)) count as an exact match.
inline constexpr double kExactMatchTolerance = 1e-10;

/// Compares one descent/ascent pair with one gradient step of length eta^2/2 on
/// |grad L|^2 (whose gradient is 2 H grad L) for every eta. The log-log slope of
/// the discrepancy against eta is reported when it is well defined.
[[nodiscard]] Theorem1Report theorem1_check(const LossOracle &loss, const ParamVector &point,
                                            std::span<const double> eta_values, const BatchRef &batch);

/// Least-squares slope of log(error) against log(eta).
[[nodiscard]] double log_log_slope(std::span<const double> etas, std::span<const double> errors);

void to_json(nlohmann::json &j, const FlatnessReport &r);
void to_json(nlohmann::json &j, const Theorem1Report &r);
void to_json(nlohmann::json &j, const EigenEstimate &e);

}  // namespace altersgd
