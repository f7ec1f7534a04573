#pragma once

// Finite-state nonlinear Markov chains (transition matrices depending on the
// current distribution) and the two-player Bellman operator on the simplex of
// distributions.

#include <cstdint>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gamelab/numerics.hpp"

namespace gamelab::nlmarkov {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kSimplexTol = 1e-12;
inline constexpr double kStochasticTol = 1e-10;

/// Throws Error(Domain) unless mu is a probability vector of length n.
void check_simplex(const VectorXd& mu, int n);

/// mu -> P(mu), each P(mu) a stochastic matrix.
struct StochasticRep {
  int n = 0;
  std::function<MatrixXd(const VectorXd&)> P;
};

/// mu -> Q(mu), each Q(mu) with nonnegative off-diagonal entries and zero row sums.
struct GeneratorRep {
  int n = 0;
  std::function<MatrixXd(const VectorXd&)> Q;
};

/// mu'_j = sum_i mu_i P_ij(mu).
VectorXd step_distribution(const StochasticRep& rep, const VectorXd& mu);

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit Mersenne twister.
double uniform01(std::mt19937_64& rng);

/// Index drawn from the probability vector p by inversion.
int draw(const VectorXd& p, std::mt19937_64& rng);

/// States i_0..i_horizon: i_0 ~ mu0, i_{k+1} ~ P_{i_k .}(mu^k).
std::vector<int> sample_path(const StochasticRep& rep, const VectorXd& mu0, int horizon,
                             std::uint64_t seed);

/// Laws mu^0..mu^horizon of the chain.
std::vector<VectorXd> marginals(const StochasticRep& rep, const VectorXd& mu0, int horizon);

struct FlowResult {
  numerics::Trajectory<double> trajectory;
  double max_drift = 0.0;  // largest renormalization correction in one step
};

inline constexpr double kMaxDrift = 1e-6;

/// RK4 for mu' = mu Q(mu), renormalized onto the simplex after every step.
FlowResult generator_flow(const GeneratorRep& gen, const VectorXd& mu0, double t_end, double dt,
                          std::size_t record_every = 1);

/// Grid indices and barycentric weights of an interpolation.
using Stencil = std::vector<std::pair<std::size_t, double>>;

/// Uniform grid {k / N : k in Z^n_+, |k| = N} on the simplex, with
/// piecewise-linear interpolation over the Freudenthal triangulation of the
/// cumulative coordinates y_j = N (mu_1 + ... + mu_j).
class SimplexGrid {
 public:
  SimplexGrid(int n, int N);

  int n() const { return n_; }
  int resolution() const { return N_; }
  std::size_t size() const { return points_.size(); }
  VectorXd point(std::size_t i) const;
  const std::vector<int>& counts(std::size_t i) const { return points_[i]; }

  Stencil stencil(const VectorXd& mu) const;
  double interpolate(const VectorXd& values, const VectorXd& mu) const;

 private:
  // Grid index of the point with cumulative coordinates y (length n - 1).
  std::size_t index_of_cumulative(const std::vector<int>& y) const;

  int n_;
  int N_;
  std::vector<std::vector<int>> points_;
  std::vector<std::int64_t> table_;  // dense (N+1)^(n-1) lookup, -1 off-grid
};

struct ControlledModel {
  int n = 0;
  int n_u = 1;
  int n_v = 1;
  std::function<VectorXd(int u, int v, const VectorXd& mu)> nu;
  std::function<double(int u, int v, const VectorXd& mu)> g;
};

/// Transitions given by tables: P[u][v] holds either one n x n stochastic
/// matrix (no dependence on mu) or n of them, mixed as sum_k mu_k P^k.
/// Stage cost g(u, v, mu) = sum_ij mu_i P_ij(u, v, mu) gij(i, j).
struct TabulatedModel {
  int n = 0;
  std::vector<std::vector<std::vector<MatrixXd>>> P;
  MatrixXd gij;

  void validate() const;
  int n_u() const { return static_cast<int>(P.size()); }
  int n_v() const { return P.empty() ? 0 : static_cast<int>(P[0].size()); }
  MatrixXd transition(int u, int v, const VectorXd& mu) const;
  ControlledModel model() const;
};

/// B for a fixed model and grid. Transition laws, costs and interpolation
/// stencils do not depend on S, so they are evaluated once.
class BellmanOperator {
 public:
  BellmanOperator(const ControlledModel& model, const SimplexGrid& grid, int threads = 1);
  VectorXd operator()(const VectorXd& S) const;

 private:
  int n_u_, n_v_;
  std::size_t size_;
  int threads_;
  std::vector<double> cost_;       // [point][u][v]
  std::vector<Stencil> stencils_;  // same layout
};

/// (BS)(mu) = min_u max_v [g(u,v,mu) + S(nu(u,v,mu))] at every grid point.
VectorXd bellman(const ControlledModel& model, const SimplexGrid& grid, const VectorXd& S,
                 int threads = 1);

/// Bellman operator of the ordinary stochastic game on states 1..n:
/// (B S)_i = min_u max_v sum_j P_ij(u, v)(gij + S_j), P taken at mu = e_i.
VectorXd classical_bellman(const TabulatedModel& tab, const VectorXd& S);

/// Largest ||nu(mu1) - nu(mu2)||_1 / ||mu1 - mu2||_1 over random pairs and all controls.
double contraction_estimate(const ControlledModel& model, int pairs, std::uint64_t seed);

struct GainOptions {
  double tol = 1e-6;
  int max_iterations = 10000;          // increment estimator
  long long max_ratio_iterations = 10000000;  // B^m g / m estimator
  int contraction_pairs = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
  VectorXd terminal;  // starting grid function g; empty means g = 0
};

struct GainResult {
  double lambda = 0.0;        // from the stabilized increments
  double lambda_ratio = 0.0;  // from B^m g / m
  VectorXd bias;              // B^m g - m lambda at the stopping step
  double delta_estimate = 0.0;
  int iterations = 0;
  long long ratio_iterations = 0;
  double residual = 0.0;      // || B(bias) - lambda - bias ||_inf
};

GainResult average_gain(const ControlledModel& model, const SimplexGrid& grid,
                        const GainOptions& opts = {});

}  // namespace gamelab::nlmarkov
