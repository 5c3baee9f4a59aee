// Copyright 2026 The Capscore Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "capscore/embedding.hpp"
#include "capscore/error.hpp"
#include "capscore/text.hpp"

namespace capscore {

/// Balanced transportation problem between two nBOW distributions.
struct TransportProblem {
  std::vector<std::string> supply_tokens;
  std::vector<double> supply;
  std::vector<std::string> demand_tokens;
  std::vector<double> demand;
  std::vector<double> costs;  // row-major, rows() x cols()

  std::size_t rows() const noexcept { return supply.size(); }
  std::size_t cols() const noexcept { return demand.size(); }
  double cost(std::size_t i, std::size_t j) const { return costs[i * cols() + j]; }

  /// Throws InvalidArgument unless masses are positive and sum to one
  /// (within 1e-9) and all costs are finite and non-negative.
  void validate() const {
    auto check_masses = [](const std::vector<double>& masses, const char* side) {
      if (masses.empty())
        throw Error(ErrorCode::kInvalidArgument, std::string(side) + " is empty");
      double sum = 0.0;
      for (const double m : masses) {
        if (!(m > 0) || !std::isfinite(m))
          throw Error(ErrorCode::kInvalidArgument, std::string(side) + " mass not positive");
        sum += m;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw Error(ErrorCode::kInvalidArgument, std::string(side) + " does not sum to 1");
    };
    check_masses(supply, "supply");
    check_masses(demand, "demand");
    if (costs.size() != rows() * cols())
      throw Error(ErrorCode::kInvalidArgument, "cost matrix has wrong shape");
    for (const double c : costs) {
      if (!(c >= 0) || !std::isfinite(c))
        throw Error(ErrorCode::kInvalidArgument, "cost entry negative or non-finite");
    }
  }
};

struct TransportPlan {
  struct Flow {
    std::size_t supply;
    std::size_t demand;
    double mass;
  };
  std::vector<Flow> flows;
  double objective = 0.0;
};

struct WmdOptions {
  std::set<std::string> stopwords;
};

namespace detail {

// Token masses after dropping stopwords and out-of-vocabulary tokens.
inline std::map<std::string, double> nbow(const Caption& c, const EmbeddingStore& words,
                                          const WmdOptions& opts) {
  std::map<std::string, double> counts;
  double total = 0.0;
  for (const auto& t : c.tokens) {
    if (opts.stopwords.count(t) || !words.find(t)) continue;
    counts[t] += 1.0;
    total += 1.0;
  }
  for (auto& [t, w] : counts) w /= total;
  return counts;
}

inline double euclidean(const EmbeddingVector& a, const EmbeddingVector& b) {
  double sq = 0.0;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const double d = static_cast<double>(a.values[k]) - b.values[k];
    sq += d * d;
  }
  return std::sqrt(sq);
}

}  // namespace detail

/// Builds the transport problem from sentence a (supply) to sentence b
/// (demand). Tokens are ordered lexicographically within each side.
inline TransportProblem build_problem(const Caption& a, const Caption& b,
                                      const EmbeddingStore& words,
                                      const WmdOptions& opts = {}) {
  const auto sa = detail::nbow(a, words, opts);
  const auto sb = detail::nbow(b, words, opts);
  if (sa.empty() || sb.empty())
    throw Error(ErrorCode::kAllTokensOOV,
                "no in-vocabulary tokens in \"" + (sa.empty() ? a.raw : b.raw) + "\"");
  TransportProblem p;
  for (const auto& [t, w] : sa) {
    p.supply_tokens.push_back(t);
    p.supply.push_back(w);
  }
  for (const auto& [t, w] : sb) {
    p.demand_tokens.push_back(t);
    p.demand.push_back(w);
  }
  p.costs.reserve(p.rows() * p.cols());
  for (const auto& ta : p.supply_tokens) {
    const auto& ea = words.at(ta);
    for (const auto& tb : p.demand_tokens) p.costs.push_back(detail::euclidean(ea, words.at(tb)));
  }
  return p;
}

namespace detail {

// Transportation simplex (MODI) on an m x n problem with a spanning-tree
// basis of exactly m + n - 1 cells, degenerate zero-flow cells included.
class TransportationSimplex {
 public:
  explicit TransportationSimplex(const TransportProblem& p)
      : p_(p), m_(p.rows()), n_(p.cols()), flow_(m_ * n_, 0.0), basic_(m_ * n_, 0) {}

  TransportPlan solve() {
    vogel();
    complete_basis();
    iterate();
    TransportPlan plan;
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        const double f = flow_[i * n_ + j];
        if (basic_[i * n_ + j] && f > 0) {
          plan.flows.push_back({i, j, f});
          plan.objective += f * p_.cost(i, j);
        }
      }
    }
    return plan;
  }

 private:
  void set_basic(std::size_t i, std::size_t j, double f) {
    flow_[i * n_ + j] = f;
    if (!basic_[i * n_ + j]) {
      basic_[i * n_ + j] = 1;
      ++basis_size_;
    }
  }

  // Vogel's approximation. Each allocation crosses out exactly one line, so
  // the result is a spanning tree.
  void vogel() {
    std::vector<double> rs = p_.supply;
    std::vector<double> rd = p_.demand;
    std::vector<char> row_live(m_, 1), col_live(n_, 1);
    std::size_t rows_left = m_;
    std::size_t cols_left = n_;
    while (rows_left > 1 && cols_left > 1) {
      double best_pen = -1.0;
      bool best_is_row = true;
      std::size_t best_line = 0;
      auto penalty = [](double lo, double second) { return second - lo; };
      for (std::size_t i = 0; i < m_; ++i) {
        if (!row_live[i]) continue;
        double lo = kInf, second = kInf;
        for (std::size_t j = 0; j < n_; ++j) {
          if (!col_live[j]) continue;
          const double c = p_.cost(i, j);
          if (c < lo) {
            second = lo;
            lo = c;
          } else if (c < second) {
            second = c;
          }
        }
        const double pen = penalty(lo, second);
        if (pen > best_pen) {
          best_pen = pen;
          best_is_row = true;
          best_line = i;
        }
      }
      for (std::size_t j = 0; j < n_; ++j) {
        if (!col_live[j]) continue;
        double lo = kInf, second = kInf;
        for (std::size_t i = 0; i < m_; ++i) {
          if (!row_live[i]) continue;
          const double c = p_.cost(i, j);
          if (c < lo) {
            second = lo;
            lo = c;
          } else if (c < second) {
            second = c;
          }
        }
        const double pen = penalty(lo, second);
        if (pen > best_pen) {
          best_pen = pen;
          best_is_row = false;
          best_line = j;
        }
      }
      std::size_t bi = 0, bj = 0;
      double lo = kInf;
      if (best_is_row) {
        bi = best_line;
        for (std::size_t j = 0; j < n_; ++j) {
          if (col_live[j] && p_.cost(bi, j) < lo) {
            lo = p_.cost(bi, j);
            bj = j;
          }
        }
      } else {
        bj = best_line;
        for (std::size_t i = 0; i < m_; ++i) {
          if (row_live[i] && p_.cost(i, bj) < lo) {
            lo = p_.cost(i, bj);
            bi = i;
          }
        }
      }
      const double q = std::min(rs[bi], rd[bj]);
      set_basic(bi, bj, q);
      if (rs[bi] <= rd[bj]) {
        rd[bj] = std::max(0.0, rd[bj] - q);
        rs[bi] = 0.0;
        row_live[bi] = 0;
        --rows_left;
      } else {
        rs[bi] = std::max(0.0, rs[bi] - q);
        rd[bj] = 0.0;
        col_live[bj] = 0;
        --cols_left;
      }
    }
    // One line remains; it absorbs everything still open.
    if (rows_left == 1) {
      const auto i = static_cast<std::size_t>(
          std::find(row_live.begin(), row_live.end(), 1) - row_live.begin());
      for (std::size_t j = 0; j < n_; ++j)
        if (col_live[j]) set_basic(i, j, rd[j]);
    } else {
      const auto j = static_cast<std::size_t>(
          std::find(col_live.begin(), col_live.end(), 1) - col_live.begin());
      for (std::size_t i = 0; i < m_; ++i)
        if (row_live[i]) set_basic(i, j, rs[i]);
    }
  }

  // Adds zero-flow cells until the basis spans all rows and columns.
  void complete_basis() {
    std::vector<std::size_t> parent(m_ + n_);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = 0; j < n_; ++j)
        if (basic_[i * n_ + j]) parent[find(i)] = find(m_ + j);
    for (std::size_t i = 0; i < m_ && basis_size_ < m_ + n_ - 1; ++i) {
      for (std::size_t j = 0; j < n_ && basis_size_ < m_ + n_ - 1; ++j) {
        if (basic_[i * n_ + j]) continue;
        const std::size_t a = find(i), b = find(m_ + j);
        if (a == b) continue;
        parent[a] = b;
        set_basic(i, j, 0.0);
      }
    }
  }

  // Potentials u (rows) and v (columns) with u_i + v_j = c_ij on the basis.
  void potentials(std::vector<double>& u, std::vector<double>& v) const {
    u.assign(m_, kInf);
    v.assign(n_, kInf);
    std::vector<std::size_t> queue;
    queue.reserve(m_ + n_);
    u[0] = 0.0;
    queue.push_back(0);
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t node = queue[head];
      if (node < m_) {
        for (std::size_t j = 0; j < n_; ++j) {
          if (basic_[node * n_ + j] && v[j] == kInf) {
            v[j] = p_.cost(node, j) - u[node];
            queue.push_back(m_ + j);
          }
        }
      } else {
        const std::size_t j = node - m_;
        for (std::size_t i = 0; i < m_; ++i) {
          if (basic_[i * n_ + j] && u[i] == kInf) {
            u[i] = p_.cost(i, j) - v[j];
            queue.push_back(i);
          }
        }
      }
    }
  }

  // Basis cells on the tree path from column `col` to row `row`, starting
  // with the cell incident to `col`.
  std::vector<std::size_t> tree_path(std::size_t row, std::size_t col) const {
    const std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> parent_node(m_ + n_, none);
    std::vector<std::size_t> parent_cell(m_ + n_, none);
    std::vector<std::size_t> queue{row};
    parent_node[row] = row;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t node = queue[head];
      if (node == m_ + col) break;
      if (node < m_) {
        for (std::size_t j = 0; j < n_; ++j) {
          const std::size_t cell = node * n_ + j;
          if (basic_[cell] && parent_node[m_ + j] == none) {
            parent_node[m_ + j] = node;
            parent_cell[m_ + j] = cell;
            queue.push_back(m_ + j);
          }
        }
      } else {
        const std::size_t j = node - m_;
        for (std::size_t i = 0; i < m_; ++i) {
          const std::size_t cell = i * n_ + j;
          if (basic_[cell] && parent_node[i] == none) {
            parent_node[i] = node;
            parent_cell[i] = cell;
            queue.push_back(i);
          }
        }
      }
    }
    if (parent_node[m_ + col] == none)
      throw Error(ErrorCode::kNumericalFailure, "transport basis is not a spanning tree");
    std::vector<std::size_t> path;
    for (std::size_t node = m_ + col; node != row; node = parent_node[node])
      path.push_back(parent_cell[node]);
    return path;
  }

  void iterate() {
    const double max_cost = *std::max_element(p_.costs.begin(), p_.costs.end());
    const double eps = 1e-12 * (1.0 + max_cost);
    const std::size_t max_iter = 1000 + 50 * (m_ + n_) * (m_ + n_);
    std::size_t degenerate_run = 0;
    std::vector<double> u, v;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
      potentials(u, v);
      // Dantzig's rule, switching to Bland's rule during long degenerate
      // runs so the method cannot cycle.
      const bool bland = degenerate_run > 2 * (m_ + n_);
      std::size_t entering = kNone;
      double best = -eps;
      for (std::size_t cell = 0; cell < m_ * n_ && !(bland && entering != kNone); ++cell) {
        if (basic_[cell]) continue;
        const std::size_t i = cell / n_, j = cell % n_;
        const double reduced = p_.cost(i, j) - u[i] - v[j];
        if (reduced < best) {
          best = reduced;
          entering = cell;
        }
      }
      if (entering == kNone) return;

      const std::size_t ei = entering / n_, ej = entering % n_;
      const auto path = tree_path(ei, ej);
      // Odd positions along the path (0, 2, ...) lose flow.
      double theta = kInf;
      std::size_t leaving = kNone;
      for (std::size_t k = 0; k < path.size(); k += 2) {
        const double f = flow_[path[k]];
        if (f < theta || (f == theta && path[k] < leaving)) {
          theta = f;
          leaving = path[k];
        }
      }
      for (std::size_t k = 0; k < path.size(); ++k) {
        double& f = flow_[path[k]];
        f = (k % 2 == 0) ? std::max(0.0, f - theta) : f + theta;
      }
      flow_[entering] = theta;
      basic_[entering] = 1;
      basic_[leaving] = 0;
      flow_[leaving] = 0.0;
      degenerate_run = theta > 0 ? 0 : degenerate_run + 1;
    }
    throw Error(ErrorCode::kNumericalFailure, "transportation simplex did not converge");
  }

  static constexpr double kInf = std::numeric_limits<double>::infinity();
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  const TransportProblem& p_;
  std::size_t m_;
  std::size_t n_;
  std::vector<double> flow_;
  std::vector<char> basic_;
  std::size_t basis_size_ = 0;
};

}  // namespace detail

/// Optimal transport plan; its objective is the Word Mover's Distance.
inline TransportPlan solve_exact(const TransportProblem& p) {
  p.validate();
  return detail::TransportationSimplex(p).solve();
}

/// Larger of the two one-sided relaxations in which every unit of mass
/// moves to its nearest point on the other side. Never exceeds the exact
/// objective.
inline double relaxed_lower_bound(const TransportProblem& p) {
  double forward = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p.cols(); ++j) lo = std::min(lo, p.cost(i, j));
    forward += p.supply[i] * lo;
  }
  double backward = 0.0;
  for (std::size_t j = 0; j < p.cols(); ++j) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < p.rows(); ++i) lo = std::min(lo, p.cost(i, j));
    backward += p.demand[j] * lo;
  }
  return std::max(forward, backward);
}

/// WMD between two captions, or nullopt when either side has no
/// in-vocabulary tokens.
inline std::optional<double> wmd(const Caption& a, const Caption& b,
                                 const EmbeddingStore& words, const WmdOptions& opts = {}) {
  try {
    return solve_exact(build_problem(a, b, words, opts)).objective;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kAllTokensOOV) return std::nullopt;
    throw;
  }
}

}  // namespace capscore
