// Copyright 2026 The Arbiter Authors
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

#include "arbiter/grad_engine.hpp"

#include <algorithm>
#include <cmath>

namespace arbiter {

namespace {

std::vector<double> reward_table(const TabularMarkovGame& game,
                                 const IncentiveScheme& scheme,
                                 const Vec& theta) {
  scheme.require_theta(theta);
  const int S = game.n_states(), A1 = game.n_actions_1(), A2 = game.n_actions_2();
  std::vector<double> r(static_cast<std::size_t>(S) * A1 * A2);
  for (int s = 0; s < S; ++s) {
    for (int a1 = 0; a1 < A1; ++a1) {
      for (int a2 = 0; a2 < A2; ++a2) {
        double v = game.base_reward(s, a1, a2);
        for (int j = 0; j < scheme.n_params(); ++j) {
          v += theta[j] * scheme.feature(j, s, a1, a2);
        }
        r[game.joint_index(s, a1, a2)] = v;
      }
    }
  }
  return r;
}

// Index set with counted membership and O(1) removal.
struct TouchedSet {
  std::vector<int> count;
  std::vector<int> pos;  // position in members, -1 if absent
  std::vector<int> members;

  explicit TouchedSet(int n) : count(n, 0), pos(n, -1) {}
  void add(int idx) {
    if (count[idx]++ == 0) {
      pos[idx] = static_cast<int>(members.size());
      members.push_back(idx);
    }
  }
  void remove(int idx) {
    if (--count[idx] == 0) {
      const int p = pos[idx];
      const int last = members.back();
      members[p] = last;
      pos[last] = p;
      members.pop_back();
      pos[idx] = -1;
    }
  }
};

// Running per-path sums maintained with push/pop step updates: discounted
// player-1 reward and its theta-gradient, the discounted log-ratio sum, the
// (un)discounted score sums of both players, and per-state visit counts.
class PathState {
 public:
  PathState(const TabularMarkovGame& game, const IncentiveScheme& scheme,
            const Vec& theta, const SoftmaxPolicyPair& policy, double lambda)
      : game(game),
        scheme(scheme),
        lambda(lambda),
        layout(game),
        tab(policy.tables()),
        r1(reward_table(game, scheme, theta)),
        m(scheme.n_params()),
        touched1(layout.d1()),
        touched2(layout.d2()),
        touched_states(game.n_states()) {
    const int T = game.horizon();
    gamma_pow.resize(T + 1);
    gamma_pow[0] = 1.0;
    for (int t = 1; t <= T; ++t) gamma_pow[t] = gamma_pow[t - 1] * game.gamma();
    R1 = 0.0;
    Delta1 = 0.0;
    grad_theta_R1 = Vec::Zero(m);
    S1 = Vec::Zero(layout.d1());
    S2 = Vec::Zero(layout.d2());
    Sg1 = Vec::Zero(layout.d1());
    Sg2 = Vec::Zero(layout.d2());
    visit.assign(game.n_states(), 0.0);
    visit_g.assign(game.n_states(), 0.0);
  }

  void push_step(int t, int s, int a1, int a2) { apply(t, s, a1, a2, +1.0); }
  void pop_step(int t, int s, int a1, int a2) { apply(t, s, a1, a2, -1.0); }
  void add_delta(double v) { Delta1 += v; }

  // Discounted log-ratio tail for an absorbing state entered at time t
  // (policies there stay uniform by the zero-logit convention).
  double terminal_delta_tail(int t) const {
    const double unit = std::log(1.0 / game.n_actions_1()) -
                        std::log(1.0 / game.n_actions_2());
    const double weight =
        (gamma_pow[t] - gamma_pow[game.horizon()]) / (1.0 - game.gamma());
    return unit * weight;
  }

  const TabularMarkovGame& game;
  const IncentiveScheme& scheme;
  double lambda;
  PolicyParamLayout layout;
  SoftmaxPolicyPair::Tables tab;
  std::vector<double> r1;
  int m;
  std::vector<double> gamma_pow;

  double R1, Delta1;
  Vec grad_theta_R1;
  Vec S1, S2, Sg1, Sg2;
  std::vector<double> visit, visit_g;
  TouchedSet touched1, touched2, touched_states;

 private:
  void apply(int t, int s, int a1, int a2, double sign) {
    const int A1 = game.n_actions_1(), A2 = game.n_actions_2();
    const double g = sign * gamma_pow[t];
    R1 += g * r1[game.joint_index(s, a1, a2)];
    for (int j = 0; j < m; ++j) {
      grad_theta_R1[j] += g * scheme.feature(j, s, a1, a2);
    }
    Delta1 += g * (tab.logp1[s * A1 + a1] - tab.logp2[s * A2 + a2]);
    if (game.is_terminal(s)) return;
    const int off1 = layout.state_offset(1, s);
    for (int b = 0; b + 1 < A1; ++b) {
      const double d = (b == a1 ? 1.0 : 0.0) - tab.p1[s * A1 + b];
      S1[off1 + b] += sign * d;
      Sg1[off1 + b] += g * d;
      if (sign > 0) touched1.add(off1 + b);
    }
    const int off2 = layout.state_offset(2, s);
    for (int b = 0; b + 1 < A2; ++b) {
      const double d = (b == a2 ? 1.0 : 0.0) - tab.p2[s * A2 + b];
      S2[off2 + b] += sign * d;
      Sg2[off2 + b] += g * d;
      if (sign > 0) touched2.add(off2 + b);
    }
    visit[s] += sign;
    visit_g[s] += g;
    if (sign > 0) {
      touched_states.add(s);
    } else {
      touched_states.remove(s);
      for (int b = 0; b + 1 < A1; ++b) touched1.remove(off1 + b);
      for (int b = 0; b + 1 < A2; ++b) touched2.remove(off2 + b);
    }
  }
};

// Weighted moment accumulators for the exact enumerator. The state-block
// Hessian pieces only depend on per-state visit statistics, so they are
// aggregated as scalars and expanded once at harvest.
class ExactMoments {
 public:
  explicit ExactMoments(const PathState& st)
      : d1_(st.layout.d1()), d2_(st.layout.d2()), d_(st.layout.d()), m_(st.m) {
    acc_grad_theta_ = Vec::Zero(m_);
    acc_grad_phi_1_ = Vec::Zero(d1_);
    acc_grad_phi_2_ = Vec::Zero(d2_);
    acc_htp_1_ = Mat::Zero(m_, d1_);
    acc_htp_2_ = Mat::Zero(m_, d2_);
    acc_hpp_1_ = Mat::Zero(d_, d1_);
    acc_hpp_2_ = Mat::Zero(d_, d2_);
    acc_R1reg_visit_.assign(st.game.n_states(), 0.0);
    acc_visit_g_.assign(st.game.n_states(), 0.0);
  }

  void fold(const PathState& st, double w) {
    total_weight_ += w;
    const double R1reg = st.R1 - st.lambda * st.Delta1;
    const double lam = st.lambda;

    acc_grad_theta_ += w * st.grad_theta_R1;
    for (int j : st.touched1.members) {
      acc_grad_phi_1_[j] += w * (R1reg * st.S1[j] - lam * st.Sg1[j]);
      acc_htp_1_.col(j) += (w * st.S1[j]) * st.grad_theta_R1;
      for (int r : st.touched1.members) {
        acc_hpp_1_(r, j) += w * (R1reg * st.S1[r] * st.S1[j] -
                                 lam * (st.Sg1[r] * st.S1[j] + st.S1[r] * st.Sg1[j]));
      }
      for (int r : st.touched2.members) {
        acc_hpp_1_(d1_ + r, j) +=
            w * (R1reg * st.S2[r] * st.S1[j] -
                 lam * (-st.Sg2[r] * st.S1[j] + st.S2[r] * st.Sg1[j]));
      }
    }
    const double R2reg = -R1reg;
    for (int j : st.touched2.members) {
      acc_grad_phi_2_[j] += w * (R2reg * st.S2[j] - lam * st.Sg2[j]);
      acc_htp_2_.col(j) += (-w * st.S2[j]) * st.grad_theta_R1;
      for (int r : st.touched1.members) {
        acc_hpp_2_(r, j) += w * (R2reg * st.S1[r] * st.S2[j] -
                                 lam * (-st.Sg1[r] * st.S2[j] + st.S1[r] * st.Sg2[j]));
      }
      for (int r : st.touched2.members) {
        acc_hpp_2_(d1_ + r, j) +=
            w * (R2reg * st.S2[r] * st.S2[j] +
                 -lam * (st.Sg2[r] * st.S2[j] + st.S2[r] * st.Sg2[j]));
      }
    }
    for (int s : st.touched_states.members) {
      acc_R1reg_visit_[s] += w * R1reg * st.visit[s];
      acc_visit_g_[s] += w * st.visit_g[s];
    }
  }

  PlayerBundles harvest(const PathState& st) const {
    const double Z = total_weight_;
    ARB_CHECK(Z > 0.0, "no paths folded");
    PlayerBundles out;
    out.p1.grad_theta = acc_grad_theta_ / Z;
    out.p2.grad_theta = -acc_grad_theta_ / Z;
    out.p1.grad_phi = acc_grad_phi_1_ / Z;
    out.p2.grad_phi = acc_grad_phi_2_ / Z;
    out.p1.hess_theta_phi = acc_htp_1_ / Z;
    out.p2.hess_theta_phi = acc_htp_2_ / Z;
    out.p1.hess_phi_phi = acc_hpp_1_ / Z;
    out.p2.hess_phi_phi = acc_hpp_2_ / Z;

    const int A1 = st.game.n_actions_1(), A2 = st.game.n_actions_2();
    for (int s = 0; s < st.game.n_states(); ++s) {
      if (st.game.is_terminal(s)) continue;
      const double rn1 = acc_R1reg_visit_[s] / Z;
      const double ng = acc_visit_g_[s] / Z;
      if (rn1 == 0.0 && ng == 0.0) continue;
      {
        const int off = st.layout.state_offset(1, s);
        const int g0 = st.layout.player_offset(1) + off;
        const double scale = rn1 - st.lambda * ng;
        for (int a = 0; a + 1 < A1; ++a) {
          const double pa = st.tab.p1[s * A1 + a];
          for (int b = 0; b + 1 < A1; ++b) {
            const double pb = st.tab.p1[s * A1 + b];
            out.p1.hess_phi_phi(g0 + a, off + b) +=
                scale * (pa * pb - (a == b ? pa : 0.0));
          }
        }
      }
      {
        const int off = st.layout.state_offset(2, s);
        const int g0 = st.layout.player_offset(2) + off;
        const double scale = -rn1 - st.lambda * ng;
        for (int a = 0; a + 1 < A2; ++a) {
          const double pa = st.tab.p2[s * A2 + a];
          for (int b = 0; b + 1 < A2; ++b) {
            const double pb = st.tab.p2[s * A2 + b];
            out.p2.hess_phi_phi(g0 + a, off + b) +=
                scale * (pa * pb - (a == b ? pa : 0.0));
          }
        }
      }
    }
    return out;
  }

 private:
  int d1_, d2_, d_, m_;
  double total_weight_ = 0.0;
  Vec acc_grad_theta_, acc_grad_phi_1_, acc_grad_phi_2_;
  Mat acc_htp_1_, acc_htp_2_, acc_hpp_1_, acc_hpp_2_;
  std::vector<double> acc_R1reg_visit_, acc_visit_g_;
};

class ExactEnumerator {
 public:
  ExactEnumerator(PathState* st, ExactMoments* moments)
      : st_(st), moments_(moments) {}

  void run(int start_state) { recurse(start_state, 0, 1.0); }

 private:
  void recurse(int s, int t, double w) {
    const TabularMarkovGame& game = st_->game;
    if (t == game.horizon()) {
      moments_->fold(*st_, w);
      return;
    }
    if (game.is_terminal(s)) {
      const double tail = st_->terminal_delta_tail(t);
      st_->add_delta(tail);
      moments_->fold(*st_, w);
      st_->add_delta(-tail);
      return;
    }
    const int A1 = game.n_actions_1(), A2 = game.n_actions_2();
    for (int a1 = 0; a1 < A1; ++a1) {
      const double p1 = st_->tab.p1[s * A1 + a1];
      for (int a2 = 0; a2 < A2; ++a2) {
        const double p = p1 * st_->tab.p2[s * A2 + a2];
        st_->push_step(t, s, a1, a2);
        for (const auto& [ns, pr] : game.next(s, a1, a2).entries) {
          recurse(ns, t + 1, w * p * pr);
        }
        st_->pop_step(t, s, a1, a2);
      }
    }
  }

  PathState* st_;
  ExactMoments* moments_;
};

// Sparse scratch matrix for per-trajectory Monte-Carlo integrands: entries
// written this epoch are listed so mean and squared-mean accumulators only
// visit them.
struct SparseScratch {
  Mat value;
  Eigen::MatrixXi stamp;
  std::vector<std::pair<int, int>> entries;
  int epoch = 0;

  SparseScratch(int rows, int cols)
      : value(Mat::Zero(rows, cols)), stamp(Eigen::MatrixXi::Zero(rows, cols)) {}

  void begin() {
    ++epoch;
    entries.clear();
  }
  void add(int r, int c, double v) {
    if (stamp(r, c) != epoch) {
      stamp(r, c) = epoch;
      value(r, c) = v;
      entries.emplace_back(r, c);
    } else {
      value(r, c) += v;
    }
  }
  void drain(Mat* mean_acc, Mat* sq_acc) {
    for (const auto& [r, c] : entries) {
      const double v = value(r, c);
      (*mean_acc)(r, c) += v;
      (*sq_acc)(r, c) += v * v;
    }
  }
};

// Monte-Carlo moments: per-trajectory integrands (including the state-block
// Hessian pieces, folded inline) accumulated as sums and sums of squares.
class McMoments {
 public:
  explicit McMoments(const PathState& st)
      : d1_(st.layout.d1()),
        d2_(st.layout.d2()),
        d_(st.layout.d()),
        m_(st.m),
        sum_grad_theta_(Vec::Zero(m_)),
        sq_grad_theta_(Vec::Zero(m_)),
        sum_grad_phi_1_(Vec::Zero(d1_)),
        sq_grad_phi_1_(Vec::Zero(d1_)),
        sum_grad_phi_2_(Vec::Zero(d2_)),
        sq_grad_phi_2_(Vec::Zero(d2_)),
        sum_htp_1_(Mat::Zero(m_, d1_)),
        sq_htp_1_(Mat::Zero(m_, d1_)),
        sum_htp_2_(Mat::Zero(m_, d2_)),
        sq_htp_2_(Mat::Zero(m_, d2_)),
        sum_hpp_1_(Mat::Zero(d_, d1_)),
        sq_hpp_1_(Mat::Zero(d_, d1_)),
        sum_hpp_2_(Mat::Zero(d_, d2_)),
        sq_hpp_2_(Mat::Zero(d_, d2_)),
        scratch_hpp_1_(d_, d1_),
        scratch_hpp_2_(d_, d2_) {}

  void fold(const PathState& st, double baseline1) {
    ++n_;
    const double R1reg = st.R1 - st.lambda * st.Delta1;
    const double R2reg = -R1reg;
    const double lam = st.lambda;

    for (int j = 0; j < m_; ++j) {
      const double v = st.grad_theta_R1[j];
      sum_grad_theta_[j] += v;
      sq_grad_theta_[j] += v * v;
    }
    for (int j : st.touched1.members) {
      const double v = (R1reg - baseline1) * st.S1[j] - lam * st.Sg1[j];
      sum_grad_phi_1_[j] += v;
      sq_grad_phi_1_[j] += v * v;
      for (int k = 0; k < m_; ++k) {
        const double h = st.grad_theta_R1[k] * st.S1[j];
        sum_htp_1_(k, j) += h;
        sq_htp_1_(k, j) += h * h;
      }
    }
    for (int j : st.touched2.members) {
      const double v = (R2reg + baseline1) * st.S2[j] - lam * st.Sg2[j];
      sum_grad_phi_2_[j] += v;
      sq_grad_phi_2_[j] += v * v;
      for (int k = 0; k < m_; ++k) {
        const double h = -st.grad_theta_R1[k] * st.S2[j];
        sum_htp_2_(k, j) += h;
        sq_htp_2_(k, j) += h * h;
      }
    }

    scratch_hpp_1_.begin();
    scratch_hpp_2_.begin();
    for (int j : st.touched1.members) {
      for (int r : st.touched1.members) {
        scratch_hpp_1_.add(r, j,
                           R1reg * st.S1[r] * st.S1[j] -
                               lam * (st.Sg1[r] * st.S1[j] + st.S1[r] * st.Sg1[j]));
      }
      for (int r : st.touched2.members) {
        scratch_hpp_1_.add(d1_ + r, j,
                           R1reg * st.S2[r] * st.S1[j] -
                               lam * (-st.Sg2[r] * st.S1[j] + st.S2[r] * st.Sg1[j]));
      }
    }
    for (int j : st.touched2.members) {
      for (int r : st.touched1.members) {
        scratch_hpp_2_.add(r, j,
                           R2reg * st.S1[r] * st.S2[j] -
                               lam * (-st.Sg1[r] * st.S2[j] + st.S1[r] * st.Sg2[j]));
      }
      for (int r : st.touched2.members) {
        scratch_hpp_2_.add(d1_ + r, j,
                           R2reg * st.S2[r] * st.S2[j] -
                               lam * (st.Sg2[r] * st.S2[j] + st.S2[r] * st.Sg2[j]));
      }
    }
    // state-block log-softmax Hessian contributions
    const int A1 = st.game.n_actions_1(), A2 = st.game.n_actions_2();
    for (int s : st.touched_states.members) {
      const double n_s = st.visit[s];
      const double ng_s = st.visit_g[s];
      {
        const int off = st.layout.state_offset(1, s);
        const int g0 = st.layout.player_offset(1) + off;
        const double scale = R1reg * n_s - lam * ng_s;
        for (int a = 0; a + 1 < A1; ++a) {
          const double pa = st.tab.p1[s * A1 + a];
          for (int b = 0; b + 1 < A1; ++b) {
            const double pb = st.tab.p1[s * A1 + b];
            scratch_hpp_1_.add(g0 + a, off + b,
                               scale * (pa * pb - (a == b ? pa : 0.0)));
          }
        }
      }
      {
        const int off = st.layout.state_offset(2, s);
        const int g0 = st.layout.player_offset(2) + off;
        const double scale = R2reg * n_s - lam * ng_s;
        for (int a = 0; a + 1 < A2; ++a) {
          const double pa = st.tab.p2[s * A2 + a];
          for (int b = 0; b + 1 < A2; ++b) {
            const double pb = st.tab.p2[s * A2 + b];
            scratch_hpp_2_.add(g0 + a, off + b,
                               scale * (pa * pb - (a == b ? pa : 0.0)));
          }
        }
      }
    }
    scratch_hpp_1_.drain(&sum_hpp_1_, &sq_hpp_1_);
    scratch_hpp_2_.drain(&sum_hpp_2_, &sq_hpp_2_);
  }

  PlayerBundles harvest() const {
    ARB_CHECK(n_ >= 2, "need at least two samples");
    const double n = static_cast<double>(n_);
    auto mean_v = [&](const Vec& sum) { return Vec(sum / n); };
    auto mean_m = [&](const Mat& sum) { return Mat(sum / n); };
    auto se_v = [&](const Vec& sum, const Vec& sq) {
      Vec se(sum.size());
      for (int i = 0; i < sum.size(); ++i) {
        const double mean = sum[i] / n;
        const double var = std::max(0.0, (sq[i] - n * mean * mean) / (n - 1.0));
        se[i] = std::sqrt(var / n);
      }
      return se;
    };
    auto se_m = [&](const Mat& sum, const Mat& sq) {
      Mat se(sum.rows(), sum.cols());
      for (int r = 0; r < sum.rows(); ++r) {
        for (int c = 0; c < sum.cols(); ++c) {
          const double mean = sum(r, c) / n;
          const double var =
              std::max(0.0, (sq(r, c) - n * mean * mean) / (n - 1.0));
          se(r, c) = std::sqrt(var / n);
        }
      }
      return se;
    };

    PlayerBundles out;
    out.p1.grad_theta = mean_v(sum_grad_theta_);
    out.p2.grad_theta = -mean_v(sum_grad_theta_);
    out.p1.grad_phi = mean_v(sum_grad_phi_1_);
    out.p2.grad_phi = mean_v(sum_grad_phi_2_);
    out.p1.hess_theta_phi = mean_m(sum_htp_1_);
    out.p2.hess_theta_phi = mean_m(sum_htp_2_);
    out.p1.hess_phi_phi = mean_m(sum_hpp_1_);
    out.p2.hess_phi_phi = mean_m(sum_hpp_2_);
    out.p1.se_grad_theta = se_v(sum_grad_theta_, sq_grad_theta_);
    out.p2.se_grad_theta = out.p1.se_grad_theta;
    out.p1.se_grad_phi = se_v(sum_grad_phi_1_, sq_grad_phi_1_);
    out.p2.se_grad_phi = se_v(sum_grad_phi_2_, sq_grad_phi_2_);
    out.p1.se_hess_theta_phi = se_m(sum_htp_1_, sq_htp_1_);
    out.p2.se_hess_theta_phi = se_m(sum_htp_2_, sq_htp_2_);
    out.p1.se_hess_phi_phi = se_m(sum_hpp_1_, sq_hpp_1_);
    out.p2.se_hess_phi_phi = se_m(sum_hpp_2_, sq_hpp_2_);
    return out;
  }

 private:
  int d1_, d2_, d_, m_;
  long long n_ = 0;
  Vec sum_grad_theta_, sq_grad_theta_;
  Vec sum_grad_phi_1_, sq_grad_phi_1_, sum_grad_phi_2_, sq_grad_phi_2_;
  Mat sum_htp_1_, sq_htp_1_, sum_htp_2_, sq_htp_2_;
  Mat sum_hpp_1_, sq_hpp_1_, sum_hpp_2_, sq_hpp_2_;
  SparseScratch scratch_hpp_1_, scratch_hpp_2_;
};

// Walks one sampled path, calls visit(state) at the end, then unwinds.
template <typename Fn>
void with_sampled_path(PathState* st, int s0, RngStream* rng, Fn&& fn) {
  const TabularMarkovGame& game = st->game;
  const int A1 = game.n_actions_1(), A2 = game.n_actions_2();
  std::vector<std::array<int, 3>> steps;
  steps.reserve(game.horizon());
  int s = s0;
  for (int t = 0; t < game.horizon(); ++t) {
    const int a1 = rng->categorical(st->tab.p1.data() + s * A1, A1);
    const int a2 = rng->categorical(st->tab.p2.data() + s * A2, A2);
    st->push_step(t, s, a1, a2);
    steps.push_back({s, a1, a2});
    const auto& row = game.next(s, a1, a2).entries;
    double u = rng->next_double();
    int ns = row.back().first;
    for (const auto& [cand, p] : row) {
      u -= p;
      if (u < 0.0) {
        ns = cand;
        break;
      }
    }
    s = ns;
  }
  fn();
  for (int t = game.horizon() - 1; t >= 0; --t) {
    st->pop_step(t, steps[t][0], steps[t][1], steps[t][2]);
  }
}

}  // namespace

Vec policy_score(const SoftmaxPolicyPair& policy,
                 const PolicyParamLayout& layout, int player, int s, int a) {
  check_index(s, policy.n_states(), "state");
  check_index(a, policy.n_actions(player), "action");
  Vec out = Vec::Zero(layout.d_player(player));
  const int off = layout.state_offset(player, s);
  if (off < 0) return out;  // terminal state holds no parameters
  const Vec p = policy.probs(player, s);
  for (int b = 0; b + 1 < policy.n_actions(player); ++b) {
    out[off + b] = (b == a ? 1.0 : 0.0) - p[b];
  }
  return out;
}

Mat policy_score_hessian(const SoftmaxPolicyPair& policy,
                         const PolicyParamLayout& layout, int player, int s,
                         int a) {
  check_index(s, policy.n_states(), "state");
  check_index(a, policy.n_actions(player), "action");
  const int d = layout.d_player(player);
  Mat out = Mat::Zero(d, d);
  const int off = layout.state_offset(player, s);
  if (off < 0) return out;
  const Vec p = policy.probs(player, s);
  for (int i = 0; i + 1 < policy.n_actions(player); ++i) {
    for (int j = 0; j + 1 < policy.n_actions(player); ++j) {
      out(off + i, off + j) = p[i] * p[j] - (i == j ? p[i] : 0.0);
    }
  }
  return out;
}

std::int64_t count_trajectories(const TabularMarkovGame& game,
                                int start_state) {
  check_index(start_state, game.n_states(), "start state");
  const int S = game.n_states(), A1 = game.n_actions_1(), A2 = game.n_actions_2();
  constexpr std::int64_t kCap = INT64_MAX / 4;
  std::vector<std::int64_t> paths(S, 1);  // at t = horizon
  for (int t = game.horizon() - 1; t >= 0; --t) {
    std::vector<std::int64_t> next(S, 0);
    for (int s = 0; s < S; ++s) {
      if (game.is_terminal(s)) {
        next[s] = 1;
        continue;
      }
      std::int64_t total = 0;
      for (int a1 = 0; a1 < A1 && total < kCap; ++a1) {
        for (int a2 = 0; a2 < A2 && total < kCap; ++a2) {
          for (const auto& entry : game.next(s, a1, a2).entries) {
            total += paths[entry.first];
            if (total >= kCap) break;
          }
        }
      }
      next[s] = std::min(total, kCap);
    }
    paths = std::move(next);
  }
  return paths[start_state];
}

PlayerBundles value_grads_exact(const TabularMarkovGame& game,
                                const IncentiveScheme& scheme, const Vec& theta,
                                const SoftmaxPolicyPair& policy, double lambda,
                                int start_state,
                                const EnumerationLimits& limits) {
  ARB_CHECK(lambda >= 0.0, "lambda must be non-negative");
  const std::int64_t n = count_trajectories(game, start_state);
  if (n > limits.max_paths) {
    throw InvalidArgument("trajectory count " + std::to_string(n) +
                          " exceeds the enumeration cap " +
                          std::to_string(limits.max_paths));
  }
  PathState st(game, scheme, theta, policy, lambda);
  ExactMoments moments(st);
  ExactEnumerator(&st, &moments).run(start_state);
  return moments.harvest(st);
}

PlayerBundles value_grads_mc(const TabularMarkovGame& game,
                             const IncentiveScheme& scheme, const Vec& theta,
                             const SoftmaxPolicyPair& policy, double lambda,
                             int start_state, int n_traj, RngStream rng,
                             const McOptions& options) {
  ARB_CHECK(lambda >= 0.0, "lambda must be non-negative");
  ARB_CHECK(n_traj >= 2, "need at least two trajectories");
  check_index(start_state, game.n_states(), "start state");

  PathState st(game, scheme, theta, policy, lambda);
  double baseline1 = 0.0;
  if (options.mean_baseline) {
    double sum = 0.0;
    for (int k = 0; k < n_traj; ++k) {
      RngStream sub = rng.substream(static_cast<std::uint64_t>(k));
      with_sampled_path(&st, start_state, &sub,
                        [&] { sum += st.R1 - lambda * st.Delta1; });
    }
    baseline1 = sum / n_traj;
  }

  McMoments moments(st);
  for (int k = 0; k < n_traj; ++k) {
    RngStream sub = rng.substream(static_cast<std::uint64_t>(k));
    with_sampled_path(&st, start_state, &sub,
                      [&] { moments.fold(st, baseline1); });
  }
  return moments.harvest();
}

Vec finite_difference(const std::function<double(const Vec&)>& fn, const Vec& x,
                      double step) {
  ARB_CHECK(step > 0.0, "step must be positive");
  Vec grad(x.size());
  Vec probe = x;
  for (int i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double hi = fn(probe);
    probe[i] = x[i] - step;
    const double lo = fn(probe);
    probe[i] = x[i];
    grad[i] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

Vec finite_difference_auto(const std::function<double(const Vec&)>& fn,
                           const Vec& x) {
  const double h1 = 1e-4, h2 = 1e-5;
  const Vec g1 = finite_difference(fn, x, h1);
  const Vec g2 = finite_difference(fn, x, h2);
  Vec out = g2;
  for (int i = 0; i < x.size(); ++i) {
    const double scale = std::max({1.0, std::abs(g1[i]), std::abs(g2[i])});
    if (std::abs(g1[i] - g2[i]) / scale > 1e-4) {
      out[i] = (g2[i] * h1 * h1 - g1[i] * h2 * h2) / (h1 * h1 - h2 * h2);
    }
  }
  return out;
}

}  // namespace arbiter
