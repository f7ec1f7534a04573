#include "gamelab/inspection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gamelab/error.hpp"

namespace gamelab::inspection {

using bimatrix::BimatrixGame2x2;
using bimatrix::PayoffPair;

void InspectionParams::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!(positive(p) && positive(f) && positive(r) && positive(s) && positive(c) && positive(l))) {
    throw Error(ErrorKind::Domain, "inspection: all parameters must be positive and finite");
  }
  if (p > 1.0) throw Error(ErrorKind::Domain, "inspection: p must lie in (0, 1]");
  if (!(c < p * l)) {
    std::ostringstream os;
    os << "inspection: standing assumption c < p*l violated (c=" << c << ", p*l=" << p * l << ")";
    throw Error(ErrorKind::Domain, os.str());
  }
}

BimatrixGame2x2 stage_matrix(const InspectionParams& pr, const Continuations& cont) {
  const double q = 1.0 - pr.p;
  return BimatrixGame2x2::from_cells(
      -pr.p * pr.f + q * (pr.r + pr.s + cont.break_check.u),
      -(pr.c + q * pr.l) + q * cont.break_check.v,
      pr.r + pr.s + cont.break_rest.u, -pr.l + cont.break_rest.v,
      pr.r + cont.refrain_check.u, -pr.c + cont.refrain_check.v,
      pr.r + cont.refrain_rest.u, cont.refrain_rest.v);
}

std::optional<Thresholds> thresholds(double p, double f, double r) {
  if (p >= 1.0) return std::nullopt;
  const double q = 1.0 - p;
  Thresholds t;
  t.s1 = p / q * (f + r);
  t.s2 = t.s1 + p / (q * q) * r;
  return t;
}

std::optional<Thresholds> thresholds(const InspectionParams& params) {
  return thresholds(params.p, params.f, params.r);
}

const ValueEntry& ValueTable::at(int k, int m, int n) const {
  const auto it = entries.find({std::min(k, n), std::min(m, n), n});
  if (it == entries.end()) {
    std::ostringstream os;
    os << "inspection: no entry for (k,m,n)=(" << k << "," << m << "," << n << ")";
    throw Error(ErrorKind::Domain, os.str());
  }
  return it->second;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ValueEntry ambiguous() {
  ValueEntry e;
  e.value = {kNaN, kNaN};
  e.status = EntryStatus::Ambiguous;
  return e;
}

ValueEntry valued_stage(const BimatrixGame2x2& game) {
  const auto value = bimatrix::game_value(game);
  if (!value) return ambiguous();
  ValueEntry e;
  e.value = *value;
  e.stage = bimatrix::enumerate_equilibria(game).front();
  return e;
}

class Recursion {
 public:
  Recursion(const InspectionParams& params, bool memoize, ValueTable& table)
      : params_(params), memoize_(memoize), table_(table) {}

  ValueEntry value(int k, int m, int n) {
    k = std::min(k, n);
    m = std::min(m, n);
    const StateKey key{k, m, n};
    if (memoize_) {
      if (auto it = table_.entries.find(key); it != table_.entries.end()) return it->second;
    }
    ValueEntry entry = compute(k, m, n);
    table_.entries[key] = entry;
    return entry;
  }

 private:
  ValueEntry compute(int k, int m, int n) {
    if (k == 0) {
      ValueEntry e;
      e.value = {n * params_.r, 0.0};
      return e;
    }
    if (m == 0) {
      ValueEntry e;
      e.value = {n * params_.r + k * params_.s, -k * params_.l};
      return e;
    }
    const ValueEntry bc = value(k - 1, m - 1, n - 1);
    const ValueEntry br = value(k - 1, m, n - 1);
    const ValueEntry rc = value(k, m - 1, n - 1);
    const ValueEntry rr = value(k, m, n - 1);
    for (const ValueEntry* e : {&bc, &br, &rc, &rr}) {
      if (e->status == EntryStatus::Ambiguous) return ambiguous();
    }
    return valued_stage(stage_matrix(params_, {bc.value, br.value, rc.value, rr.value}));
  }

  const InspectionParams& params_;
  bool memoize_;
  ValueTable& table_;
};

void check_horizon(int k, int m, int n) {
  if (k < 0 || m < 0 || n < 0 || k > kMaxHorizon || m > kMaxHorizon || n > kMaxHorizon) {
    throw Error(ErrorKind::Domain, "inspection: k, m, n must lie in [0, 30]");
  }
}

}  // namespace

ValueTable solve(const InspectionParams& params, int k, int m, int n, bool memoize) {
  params.validate();
  check_horizon(k, m, n);
  ValueTable table;
  Recursion(params, memoize, table).value(k, m, n);
  return table;
}

BimatrixGame2x2 diagonal_matrix(const InspectionParams& pr, double U_prev, double V_prev) {
  const double q = 1.0 - pr.p;
  return BimatrixGame2x2::from_cells(q * (pr.r + pr.s) - pr.p * (pr.f + U_prev),
                                     -(pr.c + q * pr.l + pr.p * V_prev), pr.r + pr.s, -pr.l,
                                     pr.r, -pr.c, pr.r, 0.0);
}

std::vector<DiagonalStep> solve_diagonal(const InspectionParams& params, int n) {
  params.validate();
  check_horizon(n, n, n);
  std::vector<DiagonalStep> steps;
  double U = 0.0, V = 0.0;
  bool halted = false;
  for (int j = 1; j <= n; ++j) {
    DiagonalStep step;
    step.n = j;
    if (!halted) {
      const auto game = diagonal_matrix(params, U, V);
      if (const auto value = bimatrix::game_value(game)) {
        U += value->u;
        V += value->v;
        step.stage = bimatrix::enumerate_equilibria(game).front();
      } else {
        halted = true;
      }
    }
    if (halted) {
      step.status = EntryStatus::Ambiguous;
      U = V = kNaN;
    }
    step.U = U;
    step.V = V;
    steps.push_back(step);
  }
  return steps;
}

}  // namespace gamelab::inspection
