#pragma once

// Exact equilibrium analysis of 2x2 bimatrix games. Row 1 / column 1 are the
// "first" actions; x and y are the probabilities of playing them.

#include <optional>
#include <vector>

#include <Eigen/Core>

namespace gamelab::bimatrix {

struct BimatrixGame2x2 {
  Eigen::Matrix2d a = Eigen::Matrix2d::Zero();  // row player
  Eigen::Matrix2d b = Eigen::Matrix2d::Zero();  // column player

  static BimatrixGame2x2 from_cells(double a11, double b11, double a12, double b12, double a21,
                                    double b21, double a22, double b22);
};

struct PayoffPair {
  double u = 0.0;
  double v = 0.0;
};

enum class EquilibriumKind { Pure, Mixed, Component };

const char* to_string(EquilibriumKind kind);

/// Axis-aligned closed rectangle [x_lo, x_hi] x [y_lo, y_hi] of mixed profiles.
struct StrategyBox {
  double x_lo = 0.0, x_hi = 0.0;
  double y_lo = 0.0, y_hi = 0.0;
};

struct Equilibrium2x2 {
  double x = 0.0;
  double y = 0.0;
  PayoffPair payoffs;
  EquilibriumKind kind = EquilibriumKind::Pure;
  // Only meaningful for components: the boxes whose union is the component
  // and the payoff ranges attained on it.
  std::vector<StrategyBox> boxes;
  PayoffPair payoff_min;
  PayoffPair payoff_max;
};

PayoffPair expected_payoffs(const BimatrixGame2x2& g, double x, double y);

/// Largest gain either player obtains by switching to a pure action.
double max_deviation_gain(const BimatrixGame2x2& g, double x, double y);

/// All Nash equilibria. Isolated points are Pure/Mixed; continua are merged
/// into connected Component entries.
std::vector<Equilibrium2x2> enumerate_equilibria(const BimatrixGame2x2& g);

/// Common equilibrium payoff pair, if every equilibrium shares it.
std::optional<PayoffPair> game_value(const BimatrixGame2x2& g);

}  // namespace gamelab::bimatrix
