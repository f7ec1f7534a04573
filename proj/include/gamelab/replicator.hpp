#pragma once

// Replicator dynamics for finite normal-form games, with the closed-form
// analysis of n-player two-action games: interior equilibria (n = 3),
// linearization, instability classification and relative-entropy integrals.

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gamelab/numerics.hpp"

namespace gamelab::replicator {

/// Pure profiles are indexed row-major: the first player's strategy is the
/// most significant digit and strategy 0 comes first.
struct GeneralGame {
  std::vector<int> counts;                     // strategies per player
  std::vector<std::vector<double>> payoffs;    // payoffs[j][profile]

  void validate() const;
  std::size_t profiles() const;
};

using MixedStrategies = std::vector<Eigen::VectorXd>;

Eigen::VectorXd mixed_payoff(const GeneralGame& game, const MixedStrategies& sigma);

/// x'_i^j = (payoff of pure i against the others - payoff of sigma) * x_i^j.
MixedStrategies rd_field(const GeneralGame& game, const MixedStrategies& sigma);

inline constexpr int kMaxTwoActionPlayers = 12;

/// n players with two actions each; A[i][profile] with the same indexing as
/// GeneralGame (action 1 = digit 0).
struct TwoActionGame {
  int n = 0;
  std::vector<std::vector<double>> A;

  void validate() const;
  GeneralGame to_general() const;
};

struct ReducedCoeffs3 {
  double a = 0, A2 = 0, A3 = 0, A = 0;
  double b = 0, B1 = 0, B3 = 0, B = 0;
  double c = 0, C1 = 0, C2 = 0, C = 0;
};

/// tilde[i][I]: payoff difference of player i between its two actions when
/// the players in bitmask I play action 1 and the rest action 2 (bit i unused).
struct Reduced {
  int n = 0;
  std::vector<std::vector<double>> tilde;

  ReducedCoeffs3 coeffs3() const;
};

Reduced reduced_coeffs(const TwoActionGame& game);

/// A 3-player game whose reduced coefficients are exactly `rc`.
TwoActionGame game_from_coeffs(const ReducedCoeffs3& rc);

/// Right-hand side of the two-action replicator system at x in [0,1]^n.
Eigen::VectorXd two_action_field(const Reduced& red, const Eigen::VectorXd& x);
Eigen::Vector3d field3(const ReducedCoeffs3& rc, const Eigen::Vector3d& x);

/// Linearization at an interior equilibrium (zero diagonal by construction).
Eigen::MatrixXd jacobian(const Reduced& red, const Eigen::VectorXd& x_star);
Eigen::Matrix3d jacobian3(const ReducedCoeffs3& rc, const Eigen::Vector3d& x_star);

struct InteriorEquilibria {
  std::vector<Eigen::Vector3d> points;
  // v = u = w = 0: the equilibria form a curve. `points` then holds one
  // representative (midpoint of the first admissible x-interval), if any.
  bool continuum = false;
  std::vector<std::string> notes;
};

/// Quadratic coefficients (v, u, w) of v x^2 + u x + w = 0.
Eigen::Vector3d quadratic3(const ReducedCoeffs3& rc);

InteriorEquilibria interior_equilibria_3(const ReducedCoeffs3& rc);

enum class Stability { Unstable, DegenerateInconclusive };

const char* to_string(Stability s);

struct StabilityReport {
  Stability verdict = Stability::DegenerateInconclusive;
  std::vector<std::complex<double>> eigenvalues;
  std::optional<double> det;  // reported for odd n
};

inline constexpr double kRealPartTol = 1e-9;

StabilityReport classify_stability(const Eigen::MatrixXd& j);

struct DegeneracyInvariants {
  double det_condition = 0.0;
  double discriminant = 0.0;
};

DegeneracyInvariants degeneracy_invariants(const ReducedCoeffs3& rc,
                                           const Eigen::Vector3d& x_star);

enum class IntegralVerdict { NeutrallyStable, ConservedInconclusive };

const char* to_string(IntegralVerdict v);

struct FirstIntegral {
  Eigen::Vector3d coef = Eigen::Vector3d::Zero();  // (alpha, beta, gamma)
  Eigen::Vector3d x_star = Eigen::Vector3d::Zero();
  IntegralVerdict verdict = IntegralVerdict::ConservedInconclusive;

  double operator()(const Eigen::Vector3d& x) const;
};

inline constexpr double kIntegralTol = 1e-9;

std::optional<FirstIntegral> first_integral_3(const ReducedCoeffs3& rc,
                                              const Eigen::Vector3d& x_star);

numerics::Trajectory<double> simulate(const Reduced& red, const Eigen::VectorXd& x0,
                                      double t_end, double dt, std::size_t record_every = 1);

}  // namespace gamelab::replicator
