#include "gamelab/vnm.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <sstream>

#include "gamelab/error.hpp"

namespace gamelab::vnm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_index(const NTUGame& game, int i) {
  if (i < 0 || i >= static_cast<int>(game.H.size())) {
    throw Error(ErrorKind::Domain, "vnm: point index out of range");
  }
}

void check_subset(const NTUGame& game, const Subset& A) {
  if (A.empty()) throw Error(ErrorKind::Domain, "vnm: subset must be nonempty");
  for (int i : A) check_index(game, i);
}

// All pairwise L values and, per point, whether it lies in some v(S).
struct Tables {
  std::vector<std::vector<double>> L;
  std::vector<bool> effective;
};

Tables tabulate(const NTUGame& game) {
  const int h = static_cast<int>(game.H.size());
  Tables t{std::vector<std::vector<double>>(h, std::vector<double>(h, -kInf)),
           std::vector<bool>(h, false)};
  for (const auto& [S, pts] : game.v) {
    for (int x : pts) {
      t.effective[x] = true;
      for (int y : pts) {
        double m = kInf;
        for (int i : S) m = std::min(m, game.H[x](i) - game.H[y](i));
        t.L[x][y] = std::max(t.L[x][y], m);
      }
    }
  }
  return t;
}

double criterion_from(const NTUGame& game, const Tables& t, const Subset& A, double eps) {
  double worst = kInf;
  for (int y = 0; y < static_cast<int>(game.H.size()); ++y) {
    bool near = false;
    for (int a : A) {
      if ((game.H[y] - game.H[a]).squaredNorm() < eps) {
        near = true;
        break;
      }
    }
    if (near) continue;
    double best = -kInf;
    for (int x : A) best = std::max(best, t.L[x][y]);
    worst = std::min(worst, best);
  }
  return worst;
}

bool stable_from(const Tables& t, const Subset& A) {
  bool attained = false;
  for (int x : A) {
    attained = attained || t.effective[x];
    for (int y : A) {
      if (t.L[x][y] > 0.0) return false;
    }
  }
  return attained;
}

void check_eps(double eps) {
  if (!(eps > 0.0)) throw Error(ErrorKind::Domain, "vnm: eps must be positive");
}

Subset from_mask(std::uint32_t mask, int h) {
  Subset s;
  for (int i = 0; i < h; ++i) {
    if (mask & (1u << i)) s.push_back(i);
  }
  return s;
}

}  // namespace

void NTUGame::validate() const {
  if (n_players < 1) throw Error(ErrorKind::Domain, "vnm: n_players must be >= 1");
  if (H.empty()) throw Error(ErrorKind::Domain, "vnm: H must be nonempty");
  for (std::size_t i = 0; i < H.size(); ++i) {
    if (H[i].size() != n_players) {
      throw Error(ErrorKind::Dimension, "vnm: every point must have n_players coordinates");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (H[i] == H[j]) throw Error(ErrorKind::Domain, "vnm: points of H must be distinct");
    }
  }
  for (const auto& [S, pts] : v) {
    if (S.empty() || pts.empty()) {
      throw Error(ErrorKind::Domain, "vnm: coalitions and their point sets must be nonempty");
    }
    for (int i : S) {
      if (i < 0 || i >= n_players) throw Error(ErrorKind::Domain, "vnm: player index out of range");
    }
    if (!std::is_sorted(S.begin(), S.end()) ||
        std::adjacent_find(S.begin(), S.end()) != S.end()) {
      throw Error(ErrorKind::Domain, "vnm: coalitions must list distinct players in order");
    }
    for (int x : pts) check_index(*this, x);
  }
}

int NTUGame::index_of(const Eigen::VectorXd& point) const {
  for (std::size_t i = 0; i < H.size(); ++i) {
    if (H[i].size() == point.size() && H[i] == point) return static_cast<int>(i);
  }
  throw Error(ErrorKind::Domain, "vnm: point is not in H");
}

double dominance(const NTUGame& game, int x, int y) {
  check_index(game, x);
  check_index(game, y);
  double best = -kInf;
  for (const auto& [S, pts] : game.v) {
    const bool has_x = std::find(pts.begin(), pts.end(), x) != pts.end();
    const bool has_y = std::find(pts.begin(), pts.end(), y) != pts.end();
    if (!has_x || !has_y) continue;
    double m = kInf;
    for (int i : S) m = std::min(m, game.H[x](i) - game.H[y](i));
    best = std::max(best, m);
  }
  return best;
}

double dominance(const NTUGame& game, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  return dominance(game, game.index_of(x), game.index_of(y));
}

bool is_internally_stable(const NTUGame& game, const Subset& A) {
  game.validate();
  check_subset(game, A);
  return stable_from(tabulate(game), A);
}

double criterion_value(const NTUGame& game, const Subset& A, double eps) {
  game.validate();
  check_subset(game, A);
  check_eps(eps);
  const Tables t = tabulate(game);
  if (!stable_from(t, A)) {
    throw Error(ErrorKind::Precondition, "vnm: criterion requires an internally stable subset");
  }
  return criterion_from(game, t, A, eps);
}

std::vector<Subset> internally_stable_subsets(const NTUGame& game) {
  game.validate();
  const int h = static_cast<int>(game.H.size());
  if (game.H.size() > kMaxPoints) {
    throw Error(ErrorKind::Size, "vnm: brute force limited to |H| <= 20");
  }
  const Tables t = tabulate(game);
  // conflict[x]: points that cannot share a stable set with x.
  std::vector<std::uint32_t> conflict(h, 0);
  std::uint32_t effective = 0;
  for (int x = 0; x < h; ++x) {
    if (t.effective[x]) effective |= 1u << x;
    for (int y = 0; y < h; ++y) {
      if (t.L[x][y] > 0.0) {
        conflict[x] |= 1u << y;
        conflict[y] |= 1u << x;
      }
    }
  }
  std::vector<Subset> out;
  for (std::uint32_t mask = 1; mask < (1u << h); ++mask) {
    if (!(mask & effective)) continue;
    bool ok = true;
    for (int x = 0; x < h && ok; ++x) {
      if ((mask & (1u << x)) && (conflict[x] & mask)) ok = false;
    }
    if (ok) out.push_back(from_mask(mask, h));
  }
  return out;
}

std::optional<SolutionCandidate> find_epsilon_solution(const NTUGame& game, double eps) {
  check_eps(eps);
  const auto stable = internally_stable_subsets(game);
  const Tables t = tabulate(game);
  std::optional<SolutionCandidate> best;
  for (const Subset& A : stable) {
    const double value = criterion_from(game, t, A, eps);
    if (!(value > 0.0)) continue;
    bool better = !best;
    if (best) {
      if (value != best->criterion_value) {
        better = value > best->criterion_value;
      } else if (A.size() != best->A.size()) {
        better = A.size() < best->A.size();
      } else {
        better = A < best->A;
      }
    }
    if (better) best = SolutionCandidate{A, eps, value, true};
  }
  return best;
}

}  // namespace gamelab::vnm
