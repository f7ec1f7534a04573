#pragma once

// Robust hedging of European rainbow options when each price multiplier is
// only known to lie in an interval [d_i, u_i]. The reduced Bellman operator
// is evaluated as a maximum of expectations over the extreme risk-neutral
// laws on the vertices of the box, and iterated exactly on a recombining
// lattice.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace gamelab::rainbow {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr int kMaxAssets = 3;

/// Vertex I (a bitmask over assets) takes d_i where bit i is set and u_i elsewhere.
struct Model {
  int J = 1;
  double rho = 1.0;
  VectorXd d;
  VectorXd u;

  void validate() const;
  int vertex_count() const { return 1 << J; }
  VectorXd vertex(unsigned mask) const;
};

enum class PayoffKind { BestOf, CallOnMax, MultiStrike, Portfolio, Spread, Custom };

const char* to_string(PayoffKind k);

struct Payoff {
  PayoffKind kind = PayoffKind::Custom;
  int J = 0;  // 0: any number of assets
  bool convex = false;
  std::function<double(const VectorXd&)> eval;

  double operator()(const VectorXd& s) const;
};

struct PayoffSpec {
  std::string kind;             // best-of, call-on-max, multi-strike, portfolio, spread
  double K = 0.0;               // strike
  std::vector<double> strikes;  // multi-strike
  std::vector<double> weights;  // portfolio
};

Payoff make_payoff(const PayoffSpec& desc);

/// Wraps a user evaluator. A convex claim is spot-checked with the midpoint
/// test on `draws` random segments in [lo, hi]^J; a violation throws
/// Error(NonConvex).
Payoff custom_payoff(int J, std::function<double(const VectorXd&)> eval, bool convex,
                     double lo = 1.0, double hi = 200.0, int draws = 1000,
                     std::uint64_t seed = 0);

/// X = sum_j gamma_j xi_j S_j + rho (X_prev - sum_j gamma_j S_j).
double wealth_update(const Model& model, double X_prev, const VectorXd& gamma,
                     const VectorXd& S_prev, const VectorXd& xi);

inline constexpr double kGeneralPositionTol = 1e-10;

/// Unique law with barycenter 0 on the d + 1 columns of `xis` (d x (d+1)),
/// by the cofactor formula p_i = (-1)^(i-1) det(xis without column i) / C.
VectorXd simplex_law(const MatrixXd& xis);

struct RiskNeutralLaw {
  std::vector<unsigned> support;  // vertex masks
  VectorXd probs;
};

struct ExtremeLaws {
  std::vector<RiskNeutralLaw> laws;
  std::vector<std::string> warnings;
  int excluded_degenerate = 0;  // (J+1)-subsets skipped because |C| is tiny
};

/// Laws risk-neutral with respect to rho*1 supported on (J+1)-subsets of the
/// vertices whose convex hull contains rho*1 in its interior. Positive
/// rescaling by z does not change barycentric weights, so the laws serve
/// every price vector z.
ExtremeLaws extreme_laws(const Model& model);

/// (Bf)(z) = rho^-1 max over extreme laws of E f(xi o z). Requires a convex payoff.
double reduced_bellman(const Model& model, const Payoff& f, const VectorXd& z);

/// Same, with the laws precomputed.
double reduced_bellman(const Model& model, const ExtremeLaws& laws, const Payoff& f,
                       const VectorXd& z);

struct HedgeStrategy {
  VectorXd gamma;
  double value = 0.0;       // (Bf)(z)
  double max_excess = 0.0;  // max over vertices of f(xi o z) - (gamma, xi o z - rho z)
  bool tie = false;         // several laws attain the maximum
};

HedgeStrategy hedging_strategy(const Model& model, const Payoff& f, const VectorXd& z);

inline constexpr std::size_t kDefaultLatticeBudget = 169;  // (12 + 1)^2

struct LatticeNode {
  int step = 0;
  std::vector<int> downs;  // number of d-moves per asset
  VectorXd price;
  double value = 0.0;      // (B^{n-step} f)(price)
  VectorXd gamma;          // empty at maturity
  bool tie = false;
};

struct HedgeResult {
  double price = 0.0;  // H^n = (B^n f)(S0)
  int eligible_laws = 0;
  std::vector<LatticeNode> nodes;  // filled when requested, step-major
  std::vector<std::string> warnings;
};

/// Backward induction of B on the recombining lattice; throws Error(Size)
/// when (n+1)^J exceeds `max_nodes`.
HedgeResult hedge(const Model& model, const Payoff& f, const VectorXd& S0, int n,
                  bool record_nodes = false, std::size_t max_nodes = kDefaultLatticeBudget);

double hedge_price(const Model& model, const Payoff& f, const VectorXd& S0, int n,
                   std::size_t max_nodes = kDefaultLatticeBudget);

struct PowerApprox {
  double alpha = 0.0;
  double beta = 0.0;       // f ~ alpha + beta * f_p with beta > 0
  std::vector<int> exponents;
  double lambda = 0.0;     // (B f_p)(1)
  double eps = 0.0;        // max fit error on the domain

  double power(const VectorXd& z) const;
  /// alpha rho^-n + beta lambda^n f_p(z).
  double predict(const Model& model, int n, const VectorXd& z) const;
};

/// Least-squares fit of f by alpha + beta * prod z_i^{k_i}, k_i in 0..max_exponent,
/// choosing the exponent vector with the smallest max error.
PowerApprox power_approx(const Payoff& f, const std::vector<VectorXd>& domain, const Model& model,
                         int max_exponent = 3);

}  // namespace gamelab::rainbow
