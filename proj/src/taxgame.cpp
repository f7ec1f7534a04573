#include "gamelab/taxgame.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gamelab/error.hpp"

namespace gamelab::taxgame {

using bimatrix::BimatrixGame2x2;

namespace {

// |p(n+1) - 1| below this counts as the boundary case p = 1/(n+1).
constexpr double kBoundaryTol = 1e-12;
constexpr double kTieRel = 1e-12;

// a >= b, with relative rounding slack so that l = l1 lands on the boundary.
bool geq(double a, double b) { return a >= b - kTieRel * std::max(std::abs(a), std::abs(b)); }
bool tied(double a, double b) { return geq(a, b) && geq(b, a); }

}  // namespace

void TaxParams::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!(positive(p) && positive(n) && positive(c) && positive(r) && positive(lM))) {
    throw Error(ErrorKind::Domain, "tax: p, n, c, r, lM must be positive and finite");
  }
  if (p >= 1.0) throw Error(ErrorKind::Domain, "tax: p must lie in (0, 1)");
}

BimatrixGame2x2 stage_matrix(double p, double f, double c, double l, double r) {
  const double q = 1.0 - p;
  return BimatrixGame2x2::from_cells(r + q * l - p * f, -c + p * f - q * l, r + l, -l, r, -c, r,
                                     0.0);
}

const char* to_string(StageRegime regime) {
  switch (regime) {
    case StageRegime::HideRest: return "hide-rest";
    case StageRegime::HideCheck: return "hide-check";
    case StageRegime::Mixed: return "mixed";
  }
  return "unknown";
}

StageResult stage_equilibrium(double p, double f, double c, double l, double r) {
  const BimatrixGame2x2 game = stage_matrix(p, f, c, l, r);
  StageResult out;
  auto pure = [&](double x, double y) {
    bimatrix::Equilibrium2x2 eq;
    eq.x = x;
    eq.y = y;
    eq.kind = bimatrix::EquilibriumKind::Pure;
    eq.payoffs = eq.payoff_min = eq.payoff_max = bimatrix::expected_payoffs(game, x, y);
    return eq;
  };
  const double q = 1.0 - p;
  if (geq(c, p * (f + l))) {
    out.regime = StageRegime::HideRest;
    out.strict_dominance = !tied(c, p * (f + l));
    out.equilibrium = pure(1.0, 0.0);
  } else if (geq(q * l, f * p)) {
    out.regime = StageRegime::HideCheck;
    out.strict_dominance = !tied(q * l, f * p);
    out.equilibrium = pure(1.0, 1.0);
  } else {
    out.regime = StageRegime::Mixed;
    bimatrix::Equilibrium2x2 eq;
    eq.kind = bimatrix::EquilibriumKind::Mixed;
    eq.y = l / (p * (l + f));  // alpha
    eq.x = c / (p * (l + f));  // beta
    eq.payoffs = eq.payoff_min = eq.payoff_max = bimatrix::expected_payoffs(game, eq.x, eq.y);
    out.equilibrium = eq;
  }
  return out;
}

double l1_threshold(double c, double p, double n) { return c / (p * (n + 1.0)); }

double l1_threshold(const TaxParams& params) {
  return l1_threshold(params.c, params.p, params.n);
}

std::optional<PInterval> full_evasion_p_range(double c, double lM, double n) {
  const double disc = 1.0 - 4.0 * c / lM;
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  const double scale = 2.0 * (n + 1.0);
  PInterval range{(1.0 - root) / scale, (1.0 + root) / scale};
  range.hi = std::min(range.hi, 1.0 / (n + 1.0));
  range.lo = std::max(range.lo, 0.0);
  return range;
}

const char* to_string(EvasionRegime regime) {
  switch (regime) {
    case EvasionRegime::Mixed: return "mixed-regime";
    case EvasionRegime::FullEvasion: return "full-evasion";
    case EvasionRegime::L1: return "l1-regime";
    case EvasionRegime::Boundary: return "boundary";
  }
  return "unknown";
}

double evasion_payoff(const TaxParams& params, double l) {
  return stage_equilibrium(params.p, params.n * l, params.c, l, params.r).equilibrium.payoffs.u;
}

EvasionReport optimal_evasion(const TaxParams& params) {
  params.validate();
  EvasionReport report;
  report.l1 = l1_threshold(params);
  report.p_range = full_evasion_p_range(params.c, params.lM, params.n);
  const double x = params.p * (params.n + 1.0);

  if (std::abs(x - 1.0) <= kBoundaryTol) {
    report.regime = EvasionRegime::Boundary;
    report.l_star = std::numeric_limits<double>::quiet_NaN();
    report.warnings.push_back("boundary: p = 1/(n+1) is not covered by the strict-inequality analysis");
    return report;
  }
  if (x > 1.0) {
    report.regime = EvasionRegime::Mixed;
    report.l_star = report.l1;
  } else if (report.l1 / (1.0 - x) <= params.lM) {
    report.regime = EvasionRegime::FullEvasion;
    report.l_star = params.lM;
  } else {
    report.regime = EvasionRegime::L1;
    report.l_star = report.l1;
  }
  if (params.lM < report.l1 && report.l_star > params.lM) {
    std::ostringstream os;
    os << "clamped: l1 = " << report.l1 << " exceeds lM = " << params.lM
       << "; evasion clamped to lM";
    report.warnings.push_back(os.str());
    report.clamped = true;
    report.l_star = params.lM;
  }
  return report;
}

}  // namespace gamelab::taxgame
