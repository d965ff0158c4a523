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

#include "arbiter/environments.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace arbiter {

namespace {

// Grid moves: 0 up, 1 down, 2 left, 3 right. Off-grid moves stay put.
int grid_move(int cell, int dir, int side) {
  const int row = cell / side, col = cell % side;
  switch (dir) {
    case 0: return row > 0 ? cell - side : cell;
    case 1: return row + 1 < side ? cell + side : cell;
    case 2: return col > 0 ? cell - 1 : cell;
    case 3: return col + 1 < side ? cell + 1 : cell;
    default: throw InvalidArgument("bad direction");
  }
}

}  // namespace

double rws_payoff(const Vec& inv0, const Vec& inv1) {
  ARB_CHECK(inv0.size() == 3 && inv1.size() == 3, "inventories have 3 kinds");
  for (int i = 0; i < 3; ++i) {
    if (inv0[i] < 0.0 || inv1[i] < 0.0) {
      throw DomainError("negative inventory");
    }
  }
  const double n0 = inv0.norm(), n1 = inv1.norm();
  if (n0 == 0.0 || n1 == 0.0) throw DomainError("zero inventory");
  static const Mat kM = [] {
    Mat m(3, 3);
    m << 0, -1, 1, 1, 0, -1, -1, 1, 0;
    return m;
  }();
  return (inv0 / n0).dot(kM * (inv1 / n1));
}

// --- RwsModel ----------------------------------------------------------------

RwsModel::RwsModel(RwsConfig config) : config_(std::move(config)) {
  side_ = config_.side;
  ARB_CHECK(side_ >= 1, "grid side");
  ARB_CHECK(config_.horizon >= 1, "horizon");
  ARB_CHECK(config_.inventory_cap >= 1, "inventory cap");
  bool have_kind[3] = {false, false, false};
  for (const auto& p : config_.pools) {
    check_index(p.cell, side_ * side_, "pool cell");
    check_index(p.resource, 3, "pool resource");
    have_kind[p.resource] = true;
  }
  ARB_CHECK(have_kind[0] && have_kind[1] && have_kind[2],
            "need a deterministic pool of every resource kind");
  n_params_ = 0;
  for (const auto& c : config_.coins) {
    check_index(c.cell, side_ * side_, "coin cell");
    for (const auto& p : config_.pools) {
      if (config_.pools_on_grid) {
        ARB_CHECK(c.cell != p.cell, "coin must sit on a free grid");
      }
    }
    if (c.theta_index >= 0) n_params_ = std::max(n_params_, c.theta_index + 1);
  }
  for (int pl = 0; pl < 2; ++pl) {
    for (int r = 0; r < 3; ++r) {
      const int v = config_.initial_inventory[pl][r];
      ARB_CHECK(v >= 1 && v <= config_.inventory_cap,
                "initial inventory within [1, cap]");
    }
  }
  n_coins_ = static_cast<int>(config_.coins.size());
  n_pools_ = config_.pools_on_grid ? static_cast<int>(config_.pools.size()) : 0;
  n_positions_ = static_cast<std::int64_t>(side_) * side_ * side_ * side_;
  const int cap = config_.inventory_cap;
  std::int64_t inv_per_player = 1;
  if (config_.pools_on_grid) {
    for (int r = 0; r < 3; ++r) inv_per_player *= cap;  // counts in [1, cap]
  }
  n_inv_ = inv_per_player * inv_per_player;
  n_states_ = product_state_count() + 1;
}

std::int64_t RwsModel::product_state_count() const {
  return n_positions_ * (std::int64_t{1} << n_coins_) *
         (std::int64_t{1} << n_pools_) * n_inv_ * config_.horizon;
}

RwsModel::Decoded RwsModel::decode(std::int64_t state) const {
  ARB_CHECK(state >= 0 && state < n_states_ - 1, "decode of absorbing state");
  Decoded d;
  d.t = static_cast<int>(state % config_.horizon);
  state /= config_.horizon;
  d.inv_id = static_cast<int>(state % n_inv_);
  state /= n_inv_;
  d.pool_mask = static_cast<int>(state % (std::int64_t{1} << n_pools_));
  state /= (std::int64_t{1} << n_pools_);
  d.coin_mask = static_cast<int>(state % (std::int64_t{1} << n_coins_));
  state /= (std::int64_t{1} << n_coins_);
  d.pos2 = static_cast<int>(state % (side_ * side_));
  d.pos1 = static_cast<int>(state / (side_ * side_));
  return d;
}

std::int64_t RwsModel::encode(const Decoded& d) const {
  std::int64_t idx = static_cast<std::int64_t>(d.pos1) * side_ * side_ + d.pos2;
  idx = idx * (std::int64_t{1} << n_coins_) + d.coin_mask;
  idx = idx * (std::int64_t{1} << n_pools_) + d.pool_mask;
  idx = idx * n_inv_ + d.inv_id;
  idx = idx * config_.horizon + d.t;
  return idx;
}

std::array<std::array<int, 3>, 2> RwsModel::inventories(int inv_id) const {
  if (!config_.pools_on_grid) return config_.initial_inventory;
  const int cap = config_.inventory_cap;
  std::array<std::array<int, 3>, 2> inv;
  for (int pl = 1; pl >= 0; --pl) {
    for (int r = 2; r >= 0; --r) {
      inv[pl][r] = 1 + inv_id % cap;
      inv_id /= cap;
    }
  }
  return inv;
}

int RwsModel::inv_id_of(const std::array<std::array<int, 3>, 2>& inv) const {
  if (!config_.pools_on_grid) return 0;
  const int cap = config_.inventory_cap;
  int id = 0;
  for (int pl = 0; pl < 2; ++pl) {
    for (int r = 0; r < 3; ++r) {
      id = id * cap + (inv[pl][r] - 1);
    }
  }
  return id;
}

RwsModel::StepOut RwsModel::step(std::int64_t state, int a1, int a2) const {
  StepOut out;
  out.features.assign(n_params_, 0.0);
  if (is_absorbing(state)) {
    out.next = state;
    out.base_reward = 0.0;
    return out;
  }
  Decoded d = decode(state);
  const int npos1 = grid_move(d.pos1, a1, side_);
  const int npos2 = grid_move(d.pos2, a2, side_);

  double base = 0.0;
  int coin_mask = d.coin_mask;
  for (int j = 0; j < n_coins_; ++j) {
    if (!(coin_mask & (1 << j))) continue;
    const auto& coin = config_.coins[j];
    const bool c1 = npos1 == coin.cell;
    const bool c2 = npos2 == coin.cell;
    if (!c1 && !c2) continue;
    coin_mask &= ~(1 << j);  // consumed (simultaneous arrival splits to zero)
    const double indicator = (c1 ? 1.0 : 0.0) - (c2 ? 1.0 : 0.0);
    if (coin.theta_index >= 0) {
      out.features[coin.theta_index] += indicator;
    } else {
      base += coin.fixed_bonus * indicator;
    }
  }

  auto inv = inventories(d.inv_id);
  int pool_mask = d.pool_mask;
  if (config_.pools_on_grid) {
    for (int k = 0; k < n_pools_; ++k) {
      if (!(pool_mask & (1 << k))) continue;
      const auto& pool = config_.pools[k];
      const bool p1 = npos1 == pool.cell;
      const bool p2 = npos2 == pool.cell;
      if (p1 && p2) continue;  // contested: the pool stays
      if (p1 && inv[0][pool.resource] < config_.inventory_cap) {
        ++inv[0][pool.resource];
        pool_mask &= ~(1 << k);
      } else if (p2 && inv[1][pool.resource] < config_.inventory_cap) {
        ++inv[1][pool.resource];
        pool_mask &= ~(1 << k);
      }
    }
  }

  if (d.t + 1 == config_.horizon) {
    // Confrontation on the final step, with post-pickup inventories.
    Vec v0(3), v1(3);
    for (int r = 0; r < 3; ++r) {
      v0[r] = inv[0][r];
      v1[r] = inv[1][r];
    }
    base += rws_payoff(v0, v1);
    out.next = n_states_ - 1;
  } else {
    Decoded nd;
    nd.pos1 = npos1;
    nd.pos2 = npos2;
    nd.coin_mask = coin_mask;
    nd.pool_mask = pool_mask;
    nd.inv_id = inv_id_of(inv);
    nd.t = d.t + 1;
    out.next = encode(nd);
  }
  out.base_reward = base;
  return out;
}

std::vector<std::pair<std::int64_t, double>> RwsModel::initial_states() const {
  std::set<int> occupied;
  if (config_.pools_on_grid) {
    for (const auto& p : config_.pools) occupied.insert(p.cell);
  }
  for (const auto& c : config_.coins) occupied.insert(c.cell);

  Decoded d;
  d.coin_mask = (1 << n_coins_) - 1;
  d.pool_mask = (1 << n_pools_) - 1;
  d.inv_id = inv_id_of(config_.initial_inventory);
  d.t = 0;

  std::vector<std::pair<std::int64_t, double>> out;
  if (config_.spawn_cells[0] >= 0 && config_.spawn_cells[1] >= 0) {
    d.pos1 = config_.spawn_cells[0];
    d.pos2 = config_.spawn_cells[1];
    out.emplace_back(encode(d), 1.0);
    return out;
  }
  std::vector<int> free_cells;
  for (int c = 0; c < side_ * side_; ++c) {
    if (!occupied.count(c)) free_cells.push_back(c);
  }
  ARB_CHECK(!free_cells.empty(), "no free cells to spawn on");
  const double w = 1.0 / (free_cells.size() * free_cells.size());
  for (int c1 : free_cells) {
    for (int c2 : free_cells) {
      d.pos1 = c1;
      d.pos2 = c2;
      out.emplace_back(encode(d), w);
    }
  }
  return out;
}

std::pair<int, int> RwsModel::cells(std::int64_t state) const {
  if (is_absorbing(state)) return {-1, -1};
  const Decoded d = decode(state);
  return {d.pos1, d.pos2};
}

RwsBuild build_rws(const RwsConfig& config) {
  RwsBuild build;
  build.model = std::make_shared<RwsModel>(config);
  const RwsModel& model = *build.model;
  if (model.n_states() > config.tabular_cap) {
    build.tabular = false;
    return build;
  }
  const int S = static_cast<int>(model.n_states());
  const int A = model.n_actions();
  const int m = model.n_params();

  std::vector<TransitionRow> transition(static_cast<std::size_t>(S) * A * A);
  std::vector<double> base(transition.size(), 0.0);
  std::vector<std::vector<double>> features(
      m, std::vector<double>(transition.size(), 0.0));
  for (int s = 0; s < S; ++s) {
    for (int a1 = 0; a1 < A; ++a1) {
      for (int a2 = 0; a2 < A; ++a2) {
        const auto step = model.step(s, a1, a2);
        const std::size_t idx = (static_cast<std::size_t>(s) * A + a1) * A + a2;
        transition[idx].entries.emplace_back(static_cast<int>(step.next), 1.0);
        base[idx] = step.base_reward;
        for (int j = 0; j < m; ++j) features[j][idx] = step.features[j];
      }
    }
  }
  Vec rho0 = Vec::Zero(S);
  for (const auto& [s, p] : model.initial_states()) {
    rho0[static_cast<int>(s)] += p;
  }
  std::vector<std::uint8_t> terminal(S, 0);
  terminal[S - 1] = 1;

  build.game = std::make_shared<TabularMarkovGame>(
      S, A, A, std::move(transition), std::move(base), config.gamma,
      config.horizon, std::move(rho0), std::move(terminal));
  std::vector<std::pair<double, double>> bounds(
      m, {config.theta_lo, config.theta_hi});
  build.scheme = std::make_shared<IncentiveScheme>(S, A, A, std::move(features),
                                                   std::move(bounds), 2.0);
  build.scheme->validate_bound(*build.game);
  build.info.g_total = model.g_total();
  build.info.cells.resize(S);
  for (int s = 0; s < S; ++s) build.info.cells[s] = model.cells(s);
  build.tabular = true;
  return build;
}

RwsConfig rws_canonical_config() {
  RwsConfig cfg;
  cfg.side = 3;
  cfg.pools = {{0, 0}, {2, 1}, {6, 2}};
  cfg.pools_on_grid = true;
  cfg.inventory_cap = 2;
  cfg.horizon = 8;
  cfg.gamma = 0.3;
  cfg.coins = {{4, 0.5, -1}, {8, 0.0, 0}};
  cfg.spawn_cells = {1, 7};
  return cfg;
}

RwsConfig rws_lite_config() {
  RwsConfig cfg;
  cfg.side = 2;
  // Pool contents are dealt into the spawn inventories; the grids stay free.
  cfg.pools = {{0, 0}, {1, 1}, {2, 2}};
  cfg.pools_on_grid = false;
  cfg.inventory_cap = 2;
  cfg.horizon = 4;
  cfg.gamma = 0.3;
  cfg.coins = {{1, 0.0, 0}};
  cfg.spawn_cells = {0, 3};
  cfg.initial_inventory = {{{2, 1, 1}, {1, 1, 2}}};
  cfg.theta_lo = 0.0;
  cfg.theta_hi = 0.5;
  return cfg;
}

// --- Predator-prey -----------------------------------------------------------

namespace {

struct PpModel {
  PpConfig cfg;
  int side, n_cells, n_pools, n_params;
  std::int64_t n_states;

  explicit PpModel(const PpConfig& config) : cfg(config) {
    side = cfg.side;
    n_cells = side * side;
    check_index(cfg.nest_cell, n_cells, "nest cell");
    for (int c : cfg.shelter_cells) {
      check_index(c, n_cells, "shelter cell");
      ARB_CHECK(c != cfg.nest_cell, "nest and shelter must differ");
    }
    n_pools = static_cast<int>(cfg.pools.size());
    n_params = 0;
    for (const auto& p : cfg.pools) {
      check_index(p.cell, n_cells, "pool cell");
      if (p.theta_index >= 0) n_params = std::max(n_params, p.theta_index + 1);
    }
    n_states = static_cast<std::int64_t>(n_cells) * n_cells *
                   (std::int64_t{1} << n_pools) +
               1;
  }

  bool is_shelter(int c) const {
    return std::find(cfg.shelter_cells.begin(), cfg.shelter_cells.end(), c) !=
           cfg.shelter_cells.end();
  }

  std::int64_t encode(int pred, int prey, int mask) const {
    return (static_cast<std::int64_t>(pred) * n_cells + prey) *
               (std::int64_t{1} << n_pools) +
           mask;
  }
  void decode(std::int64_t s, int* pred, int* prey, int* mask) const {
    *mask = static_cast<int>(s % (std::int64_t{1} << n_pools));
    s /= (std::int64_t{1} << n_pools);
    *prey = static_cast<int>(s % n_cells);
    *pred = static_cast<int>(s / n_cells);
  }

  // Predator actions 0..7: direction and distance 1 or 2; prey actions 0..3.
  // A move that would end on a shelter falls back to the next shorter move.
  int pred_move(int pos, int action) const {
    const int dir = action % 4;
    const int dist = 1 + action / 4;
    int best = pos;
    int cur = pos;
    std::vector<int> path;
    for (int k = 0; k < dist; ++k) {
      const int nxt = grid_move(cur, dir, side);
      if (nxt == cur) break;  // wall
      cur = nxt;
      path.push_back(cur);
    }
    for (int k = static_cast<int>(path.size()) - 1; k >= 0; --k) {
      if (!is_shelter(path[k])) {
        best = path[k];
        break;
      }
    }
    return best;
  }
  int prey_move(int pos, int action) const {
    const int nxt = grid_move(pos, action, side);
    return is_shelter(nxt) ? pos : nxt;
  }

  struct StepOut {
    std::int64_t next;
    double base;
    std::vector<double> features;
  };
  StepOut step(std::int64_t state, int a1, int a2) const {
    StepOut out;
    out.features.assign(n_params, 0.0);
    if (state == n_states - 1) {
      out.next = state;
      out.base = 0.0;
      return out;
    }
    int pred, prey, mask;
    decode(state, &pred, &prey, &mask);
    const int npred = pred_move(pred, a1);
    const int nprey = prey_move(prey, a2);
    const bool caught = npred == nprey || (npred == prey && nprey == pred);
    if (caught) {  // termination overrides same-step pickups
      out.next = n_states - 1;
      out.base = 1.0;
      return out;
    }
    if (nprey == cfg.nest_cell) {
      out.next = n_states - 1;
      out.base = -1.0;
      return out;
    }
    double base = 0.0;
    int nmask = mask;
    for (int k = 0; k < n_pools; ++k) {
      if (!(nmask & (1 << k))) continue;
      const auto& pool = cfg.pools[k];
      const bool dp = npred == pool.cell;
      const bool dy = nprey == pool.cell;
      if (!dp && !dy) continue;
      nmask &= ~(1 << k);
      const double indicator = dp ? 1.0 : -1.0;
      if (pool.theta_index >= 0) {
        out.features[pool.theta_index] += indicator;
      } else {
        base += pool.fixed_bonus * indicator;
      }
    }
    out.next = encode(npred, nprey, nmask);
    out.base = base;
    return out;
  }
};

}  // namespace

PpBuild build_pp(const PpConfig& config) {
  PpModel model(config);
  ARB_CHECK(model.n_states <= config.tabular_cap,
            "predator-prey instance exceeds the tabular cap");
  const int S = static_cast<int>(model.n_states);
  const int A1 = 8, A2 = 4;
  const int m = model.n_params;

  std::vector<TransitionRow> transition(static_cast<std::size_t>(S) * A1 * A2);
  std::vector<double> base(transition.size(), 0.0);
  std::vector<std::vector<double>> features(
      m, std::vector<double>(transition.size(), 0.0));
  for (int s = 0; s < S; ++s) {
    for (int a1 = 0; a1 < A1; ++a1) {
      for (int a2 = 0; a2 < A2; ++a2) {
        const auto step = model.step(s, a1, a2);
        const std::size_t idx = (static_cast<std::size_t>(s) * A1 + a1) * A2 + a2;
        transition[idx].entries.emplace_back(static_cast<int>(step.next), 1.0);
        base[idx] = step.base;
        for (int j = 0; j < m; ++j) features[j][idx] = step.features[j];
      }
    }
  }

  std::set<int> blocked(config.shelter_cells.begin(), config.shelter_cells.end());
  blocked.insert(config.nest_cell);
  for (const auto& p : config.pools) blocked.insert(p.cell);
  Vec rho0 = Vec::Zero(S);
  if (config.spawn_cells[0] >= 0 && config.spawn_cells[1] >= 0) {
    ARB_CHECK(config.spawn_cells[0] != config.spawn_cells[1],
              "players must spawn apart");
    rho0[static_cast<int>(model.encode(config.spawn_cells[0],
                                       config.spawn_cells[1],
                                       (1 << model.n_pools) - 1))] = 1.0;
  } else {
    std::vector<int> free_cells;
    for (int c = 0; c < model.n_cells; ++c) {
      if (!blocked.count(c)) free_cells.push_back(c);
    }
    std::vector<std::int64_t> starts;
    for (int cp : free_cells) {
      for (int cy : free_cells) {
        if (cp == cy) continue;
        starts.push_back(model.encode(cp, cy, (1 << model.n_pools) - 1));
      }
    }
    ARB_CHECK(!starts.empty(), "no spawn pairs available");
    for (auto s : starts) rho0[static_cast<int>(s)] += 1.0 / starts.size();
  }

  std::vector<std::uint8_t> terminal(S, 0);
  terminal[S - 1] = 1;

  PpBuild build;
  build.game = std::make_shared<TabularMarkovGame>(
      S, A1, A2, std::move(transition), std::move(base), config.gamma,
      config.horizon, std::move(rho0), std::move(terminal));
  std::vector<std::pair<double, double>> bounds(
      m, {config.theta_lo, config.theta_hi});
  build.scheme = std::make_shared<IncentiveScheme>(
      S, A1, A2, std::move(features), std::move(bounds), 2.0);
  build.scheme->validate_bound(*build.game);
  build.info.g_total = model.n_cells;
  build.info.cells.resize(S);
  for (int s = 0; s < S; ++s) {
    if (s == S - 1) {
      build.info.cells[s] = {-1, -1};
    } else {
      int pred, prey, mask;
      model.decode(s, &pred, &prey, &mask);
      build.info.cells[s] = {pred, prey};
    }
  }
  return build;
}

PpConfig pp_pursuit_config() {
  PpConfig cfg;
  cfg.side = 4;
  cfg.nest_cell = 0;
  cfg.shelter_cells = {5, 10};
  cfg.pools = {};
  cfg.horizon = 25;
  cfg.gamma = 0.6;
  cfg.spawn_cells = {15, 2};
  return cfg;
}

PpConfig pp_lite_config() {
  PpConfig cfg = pp_pursuit_config();
  cfg.pools = {{6, 0.1, -1}, {9, 0.1, -1}, {3, 0.0, 0}, {12, 0.0, 1}};
  return cfg;
}

// --- Exploration objective ---------------------------------------------------

namespace {

int popcount64(std::uint64_t x) {
  int n = 0;
  while (x) {
    x &= x - 1;
    ++n;
  }
  return n;
}

double exploration_loss(const GridEnvInfo& info, std::uint64_t mask1,
                        std::uint64_t mask2, bool union_semantics) {
  const double total = static_cast<double>(info.g_total);
  double explored;
  if (union_semantics) {
    explored = popcount64(mask1 | mask2);
  } else {
    explored = std::min(static_cast<double>(popcount64(mask1) + popcount64(mask2)),
                        total);
  }
  return 1.0 - explored / total;
}

void add_cells(const GridEnvInfo& info, int s, std::uint64_t* mask1,
               std::uint64_t* mask2) {
  const auto [c1, c2] = info.cells[s];
  if (c1 >= 0) *mask1 |= (std::uint64_t{1} << c1);
  if (c2 >= 0) *mask2 |= (std::uint64_t{1} << c2);
}

// Enumerates D^pi from rho0, folding (1 - ER) and its score-function
// gradient exactly.
class ExplorationEnumerator {
 public:
  ExplorationEnumerator(const TabularMarkovGame& game, const GridEnvInfo& info,
                        const SoftmaxPolicyPair& policy, bool union_semantics)
      : game_(game),
        info_(info),
        layout_(game),
        tab_(policy.tables()),
        union_(union_semantics),
        score_(Vec::Zero(layout_.d())),
        grad_(Vec::Zero(layout_.d())) {}

  void run() {
    for (int s = 0; s < game_.n_states(); ++s) {
      if (game_.rho0()[s] > 0.0) recurse(s, 0, game_.rho0()[s], 0, 0);
    }
  }

  double value() const { return value_; }
  Vec grad() const { return grad_; }

 private:
  void recurse(int s, int t, double w, std::uint64_t mask1,
               std::uint64_t mask2) {
    add_cells(info_, s, &mask1, &mask2);
    if (t == game_.horizon() || game_.is_terminal(s)) {
      const double loss = exploration_loss(info_, mask1, mask2, union_);
      value_ += w * loss;
      grad_ += (w * loss) * score_;
      return;
    }
    const int A1 = game_.n_actions_1(), A2 = game_.n_actions_2();
    for (int a1 = 0; a1 < A1; ++a1) {
      for (int a2 = 0; a2 < A2; ++a2) {
        const double p = tab_.p1[s * A1 + a1] * tab_.p2[s * A2 + a2];
        push(s, a1, a2, +1.0);
        for (const auto& [ns, pr] : game_.next(s, a1, a2).entries) {
          recurse(ns, t + 1, w * p * pr, mask1, mask2);
        }
        push(s, a1, a2, -1.0);
      }
    }
  }

  void push(int s, int a1, int a2, double sign) {
    const int A1 = game_.n_actions_1(), A2 = game_.n_actions_2();
    const int off1 = layout_.state_offset(1, s);
    if (off1 >= 0) {
      for (int b = 0; b + 1 < A1; ++b) {
        score_[off1 + b] += sign * ((b == a1 ? 1.0 : 0.0) - tab_.p1[s * A1 + b]);
      }
      const int off2 = layout_.player_offset(2) + layout_.state_offset(2, s);
      for (int b = 0; b + 1 < A2; ++b) {
        score_[off2 + b] += sign * ((b == a2 ? 1.0 : 0.0) - tab_.p2[s * A2 + b]);
      }
    }
  }

  const TabularMarkovGame& game_;
  const GridEnvInfo& info_;
  PolicyParamLayout layout_;
  SoftmaxPolicyPair::Tables tab_;
  bool union_;
  double value_ = 0.0;
  Vec score_, grad_;
};

}  // namespace

ExplorationResult exploration_objective(const TabularMarkovGame& game,
                                        const GridEnvInfo& info,
                                        const IncentiveScheme& scheme,
                                        const Vec& theta,
                                        const SoftmaxPolicyPair& policy,
                                        int budget, RngStream rng,
                                        bool union_semantics) {
  ARB_CHECK(budget >= 1, "budget must be positive");
  ARB_CHECK(static_cast<int>(info.cells.size()) == game.n_states(),
            "env info size");
  const PolicyParamLayout layout(game);
  const int A1 = game.n_actions_1(), A2 = game.n_actions_2();
  const auto tab = policy.tables();

  std::vector<double> losses(budget);
  std::vector<Trajectory> trajs(budget);
  double mean_loss = 0.0;
  for (int k = 0; k < budget; ++k) {
    RngStream sub = rng.substream(static_cast<std::uint64_t>(k));
    trajs[k] = sample_trajectory(game, scheme, theta, policy, sub);
    std::uint64_t m1 = 0, m2 = 0;
    for (const auto& st : trajs[k].steps) add_cells(info, st.s, &m1, &m2);
    add_cells(info, trajs[k].terminal_state, &m1, &m2);
    losses[k] = exploration_loss(info, m1, m2, union_semantics);
    mean_loss += losses[k];
  }
  mean_loss /= budget;

  Vec grad = Vec::Zero(layout.d());
  Vec score = Vec::Zero(layout.d());
  for (int k = 0; k < budget; ++k) {
    score.setZero();
    for (const auto& st : trajs[k].steps) {
      const int off1 = layout.state_offset(1, st.s);
      if (off1 < 0) continue;
      for (int b = 0; b + 1 < A1; ++b) {
        score[off1 + b] += (b == st.a1 ? 1.0 : 0.0) - tab.p1[st.s * A1 + b];
      }
      const int off2 = layout.player_offset(2) + layout.state_offset(2, st.s);
      for (int b = 0; b + 1 < A2; ++b) {
        score[off2 + b] += (b == st.a2 ? 1.0 : 0.0) - tab.p2[st.s * A2 + b];
      }
    }
    grad += (losses[k] - mean_loss) * score;
  }
  grad /= budget;

  ExplorationResult out;
  out.value = mean_loss;
  out.grad_phi = grad;
  out.grad_theta = Vec::Zero(scheme.n_params());
  return out;
}

ExplorationResult exploration_objective_exact(const TabularMarkovGame& game,
                                              const GridEnvInfo& info,
                                              const IncentiveScheme& scheme,
                                              const Vec& theta,
                                              const SoftmaxPolicyPair& policy,
                                              bool union_semantics,
                                              std::int64_t max_paths) {
  ARB_CHECK(info.g_total <= 64, "exact exploration needs <= 64 cells");
  ARB_CHECK(static_cast<int>(info.cells.size()) == game.n_states(),
            "env info size");
  scheme.require_theta(theta);
  std::int64_t worst = 0;
  for (int s = 0; s < game.n_states(); ++s) {
    if (game.rho0()[s] > 0.0) {
      worst = std::max(worst, count_trajectories(game, s));
    }
  }
  ARB_CHECK(worst <= max_paths, "exploration enumeration too large");
  ExplorationEnumerator walker(game, info, policy, union_semantics);
  walker.run();
  ExplorationResult out;
  out.value = walker.value();
  out.grad_phi = walker.grad();
  out.grad_theta = Vec::Zero(scheme.n_params());
  return out;
}

// --- Synthetic bi-level instance ----------------------------------------------

SyntheticConfig::SyntheticConfig() {
  stage_payoff = Mat(2, 2);
  stage_payoff << 1, -1, -1, 1;
  incentive_dir = Mat(2, 2);
  incentive_dir << 1, 0, 0, -1;
}

DesignerObjective make_policy_target_objective(const TabularMarkovGame& game,
                                               int target_state,
                                               int target_action,
                                               double p_target,
                                               double reg_coeff) {
  const PolicyParamLayout layout(game);
  const int na1 = game.n_actions_1();
  check_index(target_state, game.n_states(), "target state");
  check_index(target_action, na1, "target action");

  DesignerObjective obj;
  obj.value = [=](const Vec& theta, const SoftmaxPolicyPair& policy) {
    const double p = policy.probs(1, target_state)[target_action];
    return (p - p_target) * (p - p_target) + reg_coeff * theta.squaredNorm();
  };
  obj.grad_theta = [=](const Vec& theta, const SoftmaxPolicyPair&) {
    return Vec(2.0 * reg_coeff * theta);
  };
  obj.grad_phi = [=](const Vec&, const SoftmaxPolicyPair& policy) {
    Vec g = Vec::Zero(layout.d());
    const Vec probs = policy.probs(1, target_state);
    const double p = probs[target_action];
    const double scale = 2.0 * (p - p_target);
    for (int b = 0; b + 1 < na1; ++b) {
      const int idx = layout.global_index(1, target_state, b);
      if (idx < 0) continue;
      const double dp = p * ((b == target_action ? 1.0 : 0.0) - probs[b]);
      g[idx] = scale * dp;
    }
    return g;
  };
  return obj;
}

BuiltEnvironment build_synthetic_environment(const SyntheticConfig& config) {
  const int A1 = static_cast<int>(config.stage_payoff.rows());
  const int A2 = static_cast<int>(config.stage_payoff.cols());
  std::vector<TransitionRow> transition(static_cast<std::size_t>(A1) * A2);
  std::vector<double> base(transition.size());
  std::vector<double> feature(transition.size());
  for (int a1 = 0; a1 < A1; ++a1) {
    for (int a2 = 0; a2 < A2; ++a2) {
      transition[a1 * A2 + a2].entries.emplace_back(0, 1.0);
      base[a1 * A2 + a2] = config.stage_payoff(a1, a2);
      feature[a1 * A2 + a2] = config.incentive_dir(a1, a2);
    }
  }
  Vec rho0 = Vec::Ones(1);

  BuiltEnvironment env;
  env.game = std::make_shared<TabularMarkovGame>(
      1, A1, A2, std::move(transition), std::move(base), config.gamma,
      config.horizon, std::move(rho0));
  env.scheme = std::make_shared<IncentiveScheme>(
      1, A1, A2, std::vector<std::vector<double>>{feature},
      std::vector<std::pair<double, double>>{{config.theta_lo, config.theta_hi}},
      2.0);
  env.scheme->validate_bound(*env.game);
  env.objective = make_policy_target_objective(*env.game, 0, 0,
                                               config.p_target,
                                               config.reg_coeff);
  env.lambda = config.lambda;
  env.theta0 = Vec::Zero(1);
  env.kind = "synthetic";
  return env;
}

namespace {

DesignerObjective make_exploration_designer_objective(
    std::shared_ptr<TabularMarkovGame> game,
    std::shared_ptr<IncentiveScheme> scheme, GridEnvInfo info,
    const ExplorationObjectiveSpec& spec) {
  auto info_ptr = std::make_shared<GridEnvInfo>(std::move(info));
  DesignerObjective obj;
  auto eval = [=](const Vec& theta, const SoftmaxPolicyPair& policy) {
    if (spec.exact) {
      return exploration_objective_exact(*game, *info_ptr, *scheme, theta,
                                         policy, spec.union_semantics);
    }
    return exploration_objective(*game, *info_ptr, *scheme, theta, policy,
                                 spec.budget, RngStream(spec.seed),
                                 spec.union_semantics);
  };
  obj.value = [eval](const Vec& theta, const SoftmaxPolicyPair& policy) {
    return eval(theta, policy).value;
  };
  obj.grad_theta = [scheme](const Vec&, const SoftmaxPolicyPair&) {
    return Vec(Vec::Zero(scheme->n_params()));
  };
  obj.grad_phi = [eval](const Vec& theta, const SoftmaxPolicyPair& policy) {
    return eval(theta, policy).grad_phi;
  };
  return obj;
}

}  // namespace

BuiltEnvironment build_rws_environment(const RwsConfig& config,
                                       const ExplorationObjectiveSpec& spec) {
  RwsBuild build = build_rws(config);
  ARB_CHECK(build.tabular, "instance exceeds the tabular cap (sampler-only)");
  BuiltEnvironment env;
  env.game = build.game;
  env.scheme = build.scheme;
  env.info = build.info;
  env.objective = make_exploration_designer_objective(build.game, build.scheme,
                                                      build.info, spec);
  env.lambda = 0.5;
  env.theta0 = Vec::Constant(build.scheme->n_params(),
                             0.5 * (config.theta_lo + config.theta_hi));
  env.kind = "rws";
  return env;
}

BuiltEnvironment build_pp_environment(const PpConfig& config,
                                      const ExplorationObjectiveSpec& spec) {
  PpBuild build = build_pp(config);
  BuiltEnvironment env;
  env.game = build.game;
  env.scheme = build.scheme;
  env.info = build.info;
  ExplorationObjectiveSpec pp_spec = spec;
  pp_spec.exact = false;  // horizon-25 episodes: sampled estimate
  env.objective = make_exploration_designer_objective(build.game, build.scheme,
                                                      build.info, pp_spec);
  env.lambda = 0.2;
  env.theta0 = Vec::Constant(build.scheme->n_params(),
                             0.5 * (config.theta_lo + config.theta_hi));
  env.kind = "pp";
  return env;
}

// --- Canonical two-state game -------------------------------------------------

std::pair<TabularMarkovGame, IncentiveScheme> build_twostate(int horizon) {
  const int S = 2, A = 2;
  auto row = [](std::initializer_list<double> ps) {
    TransitionRow r;
    int i = 0;
    for (double p : ps) {
      if (p > 0.0) r.entries.emplace_back(i, p);
      ++i;
    }
    return r;
  };
  std::vector<TransitionRow> transition = {
      row({0.7, 0.3}), row({0.2, 0.8}), row({0.5, 0.5}), row({0.9, 0.1}),
      row({0.4, 0.6}), row({0.8, 0.2}), row({0.6, 0.4}), row({0.1, 0.9}),
  };
  std::vector<double> base = {0.2, -0.7, -0.4, 0.5, -0.3, 0.6, 0.1, -0.8};
  std::vector<double> g0 = {1.0, 0.0, 0.0, -1.0, 0.0, 0.5, -0.5, 0.0};
  std::vector<double> g1 = {0.0, -0.3, 0.3, 0.0, 0.4, 0.0, 0.0, -0.4};
  Vec rho0(2);
  rho0 << 0.6, 0.4;
  TabularMarkovGame game(S, A, A, std::move(transition), std::move(base), 0.9,
                         horizon, rho0);
  IncentiveScheme scheme(S, A, A, {g0, g1}, {{-0.5, 0.5}, {-0.5, 0.5}}, 2.0);
  scheme.validate_bound(game);
  return {std::move(game), std::move(scheme)};
}

Vec twostate_canonical_theta() {
  Vec theta(2);
  theta << 0.12, -0.07;
  return theta;
}

SoftmaxPolicyPair twostate_canonical_policy() {
  SoftmaxPolicyPair policy(2, 2, 2);
  policy.set_logit(1, 0, 0, 0.3);
  policy.set_logit(1, 1, 0, -0.2);
  policy.set_logit(2, 0, 0, -0.1);
  policy.set_logit(2, 1, 0, 0.4);
  return policy;
}

BuiltEnvironment build_twostate_environment(int horizon) {
  auto [game, scheme] = build_twostate(horizon);
  BuiltEnvironment env;
  env.game = std::make_shared<TabularMarkovGame>(std::move(game));
  env.scheme = std::make_shared<IncentiveScheme>(std::move(scheme));
  env.objective = make_policy_target_objective(*env.game, 0, 0, 0.6, 0.05);
  env.lambda = 0.3;
  env.theta0 = Vec::Zero(2);
  env.kind = "twostate";
  return env;
}

}  // namespace arbiter
