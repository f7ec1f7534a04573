#pragma once

// Tax payer (Hide / Pay) against tax police (Check / Rest), and the extension
// where the payer chooses how much to hide under a proportional fine f = n*l.

#include <optional>
#include <string>
#include <vector>

#include "gamelab/bimatrix.hpp"

namespace gamelab::taxgame {

struct TaxParams {
  double p = 0.5;        // detection probability in (0, 1)
  double n = 0.4;        // fine coefficient
  double c = 1000.0;     // cost of a check
  double r = 1.0;        // base income
  double lM = 100000.0;  // full tax due (maximal evasion)

  void validate() const;
};

/// Stage game with row 1 = Hide, row 2 = Pay, column 1 = Check, column 2 = Rest.
bimatrix::BimatrixGame2x2 stage_matrix(double p, double f, double c, double l, double r);

enum class StageRegime {
  HideRest,   // c >= p(f+l): resting dominates for the police
  HideCheck,  // c < p(f+l), fp <= (1-p)l: hiding dominates for the payer
  Mixed,      // unique mixed equilibrium
};

const char* to_string(StageRegime regime);

struct StageResult {
  StageRegime regime = StageRegime::Mixed;
  bool strict_dominance = false;  // meaningful for the two pure regimes
  // x = P(Hide) (beta in the mixed regime), y = P(Check) (alpha).
  bimatrix::Equilibrium2x2 equilibrium;
};

StageResult stage_equilibrium(double p, double f, double c, double l, double r);

double l1_threshold(double c, double p, double n);
double l1_threshold(const TaxParams& params);

struct PInterval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Detection probabilities for which hiding the whole amount lM is optimal;
/// absent when c > lM / 4.
std::optional<PInterval> full_evasion_p_range(double c, double lM, double n);

enum class EvasionRegime { Mixed, FullEvasion, L1, Boundary };

const char* to_string(EvasionRegime regime);

struct EvasionReport {
  double l_star = 0.0;
  EvasionRegime regime = EvasionRegime::Mixed;
  double l1 = 0.0;
  std::optional<PInterval> p_range;
  bool clamped = false;
  std::vector<std::string> warnings;
};

/// Equilibrium payoff of the payer when hiding amount l (fine n*l).
double evasion_payoff(const TaxParams& params, double l);

EvasionReport optimal_evasion(const TaxParams& params);

}  // namespace gamelab::taxgame
