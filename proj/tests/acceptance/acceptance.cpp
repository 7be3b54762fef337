// One PASS/FAIL line per acceptance criterion. Tolerances and workloads are
// pinned below; `--only 3,7` runs a subset, `--cli PATH` adds the command-line
// replay checks to the determinism criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "redist/arena/analysis.hpp"
#include "redist/arena/metrics.hpp"
#include "redist/arena/tournament.hpp"
#include "redist/designer/graph_net.hpp"
#include "redist/designer/training.hpp"
#include "redist/mechanisms/mechanism.hpp"
#include "redist/nn/gradcheck.hpp"
#include "redist/nn/layers.hpp"
#include "redist/nn/ops.hpp"
#include "redist/players/corpus.hpp"
#include "redist/players/imitation.hpp"
#include "redist/players/rational.hpp"
#include "redist/service/session.hpp"

using namespace redist;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and workloads.
constexpr int kConservationDraws = 10000;
constexpr double kConservationTol = 1e-9;
constexpr double kConservationSeconds = 10.0;
constexpr int kCanonicalDraws = 1000;
constexpr double kCanonicalTol = 1e-12;
constexpr int kGiniVectors = 1000;
constexpr double kGiniTol = 1e-12;
constexpr double kNnGradTol = 1e-4;
constexpr double kJacobianTol = 1e-5;
constexpr double kRationalStepTol = 1e-9;
constexpr int kDynamicsSeeds = 100;
constexpr double kDynamicsSeconds = 5.0;
constexpr int kScgSamples = 100000;
constexpr int kScgBatch = 1000;
constexpr double kScgRelTol = 0.02;
constexpr double kScgSeconds = 60.0;
constexpr int kMetagameBlocks = 4096;
constexpr double kMetagameSigmas = 3.0;
constexpr double kMetagameSeconds = 600.0;
constexpr int kDesignerUpdates = 10000;
constexpr int kDesignerEpisodesPerProfile = 8;
constexpr int kDesignerEvalPairs = 512;
constexpr int kDesignerProfilesAtHalf = 4;
constexpr double kDesignerSeconds = 7200.0;
constexpr int kStructureObservations = 10000;
constexpr double kStructureTol = 1e-12;
constexpr int kMdsPoints = 100;
constexpr double kMdsTol = 1e-6;
constexpr int kRegressionVotes = 4000;
constexpr double kRegressionSes = 2.0;
constexpr int kPipelineEpisodes = 600;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome(const fs::path& work, const std::string& cli)> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << x;
  return os.str();
}

PlayerVector random_endowments(Rng& rng) {
  PlayerVector e{10, 0, 0, 0};
  for (int i = 1; i < kPlayers; ++i) e[i] = rng.uniform_int(1, 10);
  std::swap(e[0], e[static_cast<std::size_t>(rng.uniform_int(0, 3))]);
  return e;
}

PlayerVector random_contributions(const PlayerVector& e, Rng& rng) {
  PlayerVector c{};
  for (int i = 0; i < kPlayers; ++i) c[i] = rng.uniform(0.0, e[i]);
  return c;
}

double total(const PlayerVector& x) { return x[0] + x[1] + x[2] + x[3]; }

// 1 -------------------------------------------------------------------------
Outcome conservation(const fs::path&, const std::string&) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int n = 0; n < kConservationDraws; ++n) {
    const ManifoldParams p{rng.uniform(), rng.uniform()};
    const auto e = random_endowments(rng);
    const auto c = random_contributions(e, rng);
    worst = std::max(worst, std::abs(total(manifold_payout(p, e, c)) - kGrowth * total(c)));
  }
  double worst_designer = 0.0;
  for (int net_id = 0; net_id < 10; ++net_id) {
    Rng init(500 + static_cast<std::uint64_t>(net_id));
    const DesignerMechanism mech(std::make_shared<const designer::GraphNet>(designer::GraphNet::create(init)), "random");
    for (int n = 0; n < kConservationDraws / 10; ++n) {
      const auto e = random_endowments(rng);
      const auto c = random_contributions(e, rng);
      worst_designer = std::max(worst_designer, std::abs(total(mech.payouts(e, c)) - kGrowth * total(c)));
    }
  }
  const double t = seconds_since(t0);
  return {worst < kConservationTol && worst_designer < kConservationTol && t < kConservationSeconds,
          "manifold max|dev| " + fmt(worst) + ", designer max|dev| " + fmt(worst_designer) + ", " + fmt(t, 3) + " s"};
}

// 2 -------------------------------------------------------------------------
Outcome canonical_points(const fs::path&, const std::string&) {
  Rng rng(102);
  double worst = 0.0;
  auto track = [&](double got, double want) {
    worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
  };
  for (int n = 0; n < kCanonicalDraws; ++n) {
    const auto e = random_endowments(rng);
    auto c = random_contributions(e, rng);
    if (total(c) == 0.0) c[0] = 1.0;
    double ratio_sum = 0.0;
    for (int i = 0; i < kPlayers; ++i) ratio_sum += c[i] / e[i];
    const auto lib = manifold_payout(ManifoldParams{0.0, 1.0}, e, c);
    const auto le = manifold_payout(ManifoldParams{1.0, 1.0}, e, c);
    const auto strict = manifold_payout(ManifoldParams{rng.uniform(), 1.0 / kPlayers}, e, c);
    for (int i = 0; i < kPlayers; ++i) {
      track(lib[i], kGrowth * c[i]);
      track(le[i], kGrowth * total(c) / ratio_sum * (c[i] / e[i]));
      track(strict[i], kGrowth * total(c) / kPlayers);
    }
  }
  return {worst <= kCanonicalTol, "max relative deviation " + fmt(worst)};
}

// 3 -------------------------------------------------------------------------
Outcome gini_check(const fs::path&, const std::string&) {
  const std::vector<double> head_tail{10, 2, 2, 2};
  const double g = arena::gini(head_tail);
  Rng rng(103);
  double worst = 0.0;
  for (int n = 0; n < kGiniVectors; ++n) {
    std::vector<double> x(static_cast<std::size_t>(rng.uniform_int(2, 10)));
    for (auto& v : x) v = rng.uniform(0.0, 10.0);
    const double base = arena::gini(x);
    auto scaled = x;
    const double lambda = rng.uniform(0.01, 100.0);
    for (auto& v : scaled) v *= lambda;
    std::shuffle(x.begin(), x.end(), rng);
    worst = std::max({worst, std::abs(arena::gini(scaled) - base), std::abs(arena::gini(x) - base)});
  }
  return {std::abs(g - 0.375) < kGiniTol && worst < kGiniTol,
          "gini([10,2,2,2]) = " + fmt(g, 12) + " (paper: 0.38), invariance max|dev| " + fmt(worst)};
}

// 4 -------------------------------------------------------------------------
Outcome gradient_integrity(const fs::path&, const std::string&) {
  using namespace nn;
  Rng rng(104);
  auto random_tensor = [&](std::size_t r, std::size_t c, double lo, double hi) {
    Tensor t(r, c);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) t(i, j) = rng.uniform(lo, hi);
    return t;
  };
  std::vector<std::pair<std::string, double>> checks;
  const Tensor w = random_tensor(3, 4, -1, 1);
  const Tensor mask{{1, 1, 0, 1}, {1, 0, 1, 1}};
  checks.emplace_back("elementwise", finite_difference_check(
                                         [](Graph&, Var x) {
                                           return sum(tanh(x) * sigmoid(x) + exp(x * 0.3) + log(square(x) + 1.0) / x);
                                         },
                                         random_tensor(2, 3, 0.5, 1.5)));
  checks.emplace_back("matmul", finite_difference_check(
                                    [&](Graph& g, Var x) { return sum(square(matmul_nt(x, g.constant(w)))); },
                                    random_tensor(2, 4, -1, 1)));
  checks.emplace_back("softmax", finite_difference_check(
                                     [&](Graph& g, Var x) {
                                       const Var target = g.constant(Tensor{{0.1, 0.5, 0, 0.4}, {0.3, 0, 0.3, 0.4}});
                                       return sum(masked_log_softmax(x, mask) * target) +
                                              sum(square(masked_softmax(x, mask)));
                                     },
                                     random_tensor(2, 4, -2, 2)));

  ParamSet params;
  const auto lstm = Lstm::create(params, "lstm", 3, 4, rng);
  checks.emplace_back("lstm", finite_difference_check(
                                  [&](Graph& g, Var x) {
                                    const auto bound = bind_frozen(g, params);
                                    auto state = lstm.initial_state(g, 2);
                                    for (int t = 0; t < 3; ++t) state = lstm.step(bound, x, state);
                                    return sum(square(state.h)) + sum(state.c);
                                  },
                                  random_tensor(2, 3, -1, 1)));

  const auto player = players::VirtualPlayerModel::create(rng);
  checks.emplace_back("player", finite_difference_check(
                                    [&](Graph& g, Var x) {
                                      const auto bound = bind_frozen(g, player.params());
                                      auto state = player.initial_state(g, 2);
                                      return sum(square(player.step(bound, x, state)));
                                    },
                                    random_tensor(2, players::kObservationSize, 0, 1)));

  const auto net = designer::GraphNet::create(rng);
  const Tensor e{{10, 2, 2, 2}, {10, 7, 4, 9}};
  checks.emplace_back("designer", finite_difference_check(
                                      [&](Graph& g, Var c) {
                                        const auto bound = bind_frozen(g, net.params());
                                        const Var weights = net.forward(bound, designer::build_observation(g, e, c));
                                        return sum(square(weights * g.constant(Tensor{{1, 2, 3, 4}})));
                                      },
                                      Tensor{{5, 1, 0.5, 1.5}, {3, 6, 2, 8}}));
  double nn_worst = 0.0;
  std::string worst_name;
  for (const auto& [name, err] : checks)
    if (err >= nn_worst) {
      nn_worst = err;
      worst_name = name;
    }

  double jac_worst = 0.0;
  const double h = 1e-6;
  for (int n = 0; n < 200; ++n) {
    const ManifoldParams p{rng.uniform(), rng.uniform()};
    const auto endow = random_endowments(rng);
    PlayerVector c{};
    for (int i = 0; i < kPlayers; ++i) c[i] = rng.uniform(0.1, endow[i] - 0.1);
    const auto jac = manifold_jacobian(p, endow, c);
    for (int j = 0; j < kPlayers; ++j) {
      auto up = c, down = c;
      up[j] += h;
      down[j] -= h;
      const auto yu = manifold_payout(p, endow, up), yd = manifold_payout(p, endow, down);
      for (int i = 0; i < kPlayers; ++i) {
        const double fd = (yu[i] - yd[i]) / (2 * h);
        jac_worst = std::max(jac_worst, std::abs(jac[i][j] - fd) / std::max(1.0, std::abs(fd)));
      }
    }
  }

  const players::RationalPlayerState start{1.0, 0.0};
  const PlayerVector full{10, 10, 10, 10}, half{5, 5, 5, 5};
  const double up = rational_player_step(start, full, 0, half, *make_baseline(Baseline::kLibertarian)).generosity;
  const double down =
      rational_player_step(start, full, 0, half, *make_baseline(Baseline::kStrictEgalitarian)).generosity;
  const double step_err = std::max(std::abs(up - 1.5), std::abs(down + 1.5));

  return {nn_worst < kNnGradTol && jac_worst < kJacobianTol && step_err < kRationalStepTol,
          "nn max rel " + fmt(nn_worst) + " (" + worst_name + "), jacobian max rel " + fmt(jac_worst) +
              ", rational step Δg = " + fmt(up, 12) + " / " + fmt(down, 12)};
}

// 5 -------------------------------------------------------------------------
Outcome rational_dynamics(const fs::path&, const std::string&) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto profiles = arena::evaluation_profiles();
  const auto lib = make_baseline(Baseline::kLibertarian);
  const auto strict = make_baseline(Baseline::kStrictEgalitarian);
  int rising = 0, falling = 0;
  for (int seed = 0; seed < kDynamicsSeeds; ++seed) {
    const auto& profile = profiles[static_cast<std::size_t>(seed) % profiles.size()];
    players::RationalPlayer a, b, c, d;
    const SeatPlayers seats{&a, &b, &c, &d};
    auto monotone = [&](const Mechanism& mech, int sign) {
      const auto block = run_block(profile, seats, mech, kBlockRounds, static_cast<std::uint64_t>(seed));
      for (std::size_t t = 1; t < block.rounds.size(); ++t)
        for (int i = 0; i < kPlayers; ++i)
          if (sign * (block.rounds[t].contributions[i] - block.rounds[t - 1].contributions[i]) <= 0) return false;
      return true;
    };
    rising += monotone(*lib, +1);
    falling += monotone(*strict, -1);
  }
  const double t = seconds_since(t0);
  return {rising == kDynamicsSeeds && falling == kDynamicsSeeds && t < kDynamicsSeconds,
          "libertarian rising " + std::to_string(rising) + "/" + std::to_string(kDynamicsSeeds) +
              ", strict egalitarian falling " + std::to_string(falling) + "/" + std::to_string(kDynamicsSeeds) +
              ", " + fmt(t, 3) + " s"};
}

// 6 -------------------------------------------------------------------------
// Two players, two rounds, binary actions. Round-1 actions are fair coins; the
// designer's two parameters set the split; round-2 action probabilities depend
// on the round-1 payout; the objective is smooth in the summed payouts.
struct ScgToy {
  static constexpr double kSlope = 2.0;
  static constexpr double kShift = 1.0;

  static std::array<double, 2> split(const std::array<double, 2>& theta, int a0, int a1) {
    const double l0 = theta[0] * a0 + theta[1];
    const double l1 = theta[0] * a1;
    const double m = std::max(l0, l1);
    const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
    const double pool = kGrowth * (a0 + a1);
    return {pool * e0 / (e0 + e1), pool * e1 / (e0 + e1)};
  }
  static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
  static double objective(const std::array<double, 2>& y1, const std::array<double, 2>& y2) {
    return sigmoid(y1[0] + y2[0] - kShift) + sigmoid(y1[1] + y2[1] - kShift);
  }

  // Exact expectation by enumerating all 16 action profiles.
  static double expected(const std::array<double, 2>& theta) {
    double value = 0.0;
    for (int a0 = 0; a0 < 2; ++a0)
      for (int a1 = 0; a1 < 2; ++a1) {
        const auto y1 = split(theta, a0, a1);
        const double q0 = sigmoid(kSlope * y1[0] - kShift), q1 = sigmoid(kSlope * y1[1] - kShift);
        for (int b0 = 0; b0 < 2; ++b0)
          for (int b1 = 0; b1 < 2; ++b1) {
            const double p = 0.25 * (b0 ? q0 : 1 - q0) * (b1 ? q1 : 1 - q1);
            value += p * objective(y1, split(theta, b0, b1));
          }
      }
    return value;
  }
};

Outcome scg_unbiasedness(const fs::path&, const std::string&) {
  using namespace nn;
  const auto t0 = std::chrono::steady_clock::now();
  const std::array<double, 2> theta{0.7, -0.4};
  std::array<double, 2> exact{};
  const double h = 1e-5;
  for (int k = 0; k < 2; ++k) {
    auto up = theta, down = theta;
    up[k] += h;
    down[k] -= h;
    exact[k] = (ScgToy::expected(up) - ScgToy::expected(down)) / (2 * h);
  }

  Rng rng(106);
  std::array<double, 2> estimate{};
  const int batches = kScgSamples / kScgBatch;
  const Tensor ones(kScgBatch, 2, 1.0);
  auto split = [&](Graph& g, Var th, const Tensor& actions) {
    const Var a = g.constant(actions);
    const Var logits = a * slice_cols(th, 0, 1) + g.constant(Tensor{{1.0, 0.0}}) * slice_cols(th, 1, 1);
    return masked_softmax(logits, ones) * (kGrowth * sum_cols(a));
  };
  for (int b = 0; b < batches; ++b) {
    Graph g;
    const Var th = g.leaf(Tensor{{theta[0], theta[1]}});
    Tensor first(kScgBatch, 2);
    for (std::size_t n = 0; n < kScgBatch; ++n)
      for (std::size_t i = 0; i < 2; ++i) first(n, i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const Var y1 = split(g, th, first);
    const Var q = sigmoid(ScgToy::kSlope * y1 + (-ScgToy::kShift));
    Tensor second(kScgBatch, 2);
    for (std::size_t n = 0; n < kScgBatch; ++n)
      for (std::size_t i = 0; i < 2; ++i) second(n, i) = rng.bernoulli(q.value()(n, i)) ? 1.0 : 0.0;
    const Var taken = g.constant(second);
    const Var score = sum_cols(taken * log(q) + (1.0 - taken) * log(1.0 - q));
    const Var y2 = split(g, th, second);
    const Var objective = sum_cols(sigmoid(y1 + y2 + (-ScgToy::kShift)));
    g.backward(designer::scg_surrogate(objective, score, true));
    for (std::size_t k = 0; k < 2; ++k) estimate[k] += th.grad()(0, k) / batches;
  }
  double worst = 0.0;
  for (int k = 0; k < 2; ++k) worst = std::max(worst, std::abs(estimate[k] - exact[k]) / std::abs(exact[k]));
  const double t = seconds_since(t0);
  return {worst < kScgRelTol && t < kScgSeconds,
          "exact (" + fmt(exact[0], 6) + ", " + fmt(exact[1], 6) + ") vs Monte-Carlo (" + fmt(estimate[0], 6) + ", " +
              fmt(estimate[1], 6) + "), max rel err " + fmt(worst, 3) + ", " + fmt(t, 3) + " s"};
}

// 7 -------------------------------------------------------------------------
Outcome metagame_dominance(const fs::path&, const std::string&) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto grid = arena::default_grid();
  const auto game = arena::run_metagame(grid, arena::PlayerSource::rational_players(), kMetagameBlocks, 7);
  const std::size_t n = grid.size();
  double worst_sigma = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double se = std::hypot(game.std_error[i][j], game.std_error[j][i]);
      const double dev = std::abs(game.share[i][j] + game.share[j][i] - 1.0);
      worst_sigma = std::max(worst_sigma, se > 0 ? dev / se : (dev > 0 ? INFINITY : 0.0));
    }
  std::size_t row = n;
  for (std::size_t i = 0; i < n; ++i)
    if (grid[i].value("v", -1.0) == 1.0 && grid[i].value("w", -1.0) == 1.0) row = i;
  if (row == n) return {false, "grid has no (v=1, w=1) entry"};
  double row_min = 1.0;
  std::string row_text, losers;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == row) continue;
    row_min = std::min(row_min, game.share[row][j]);
    row_text += (row_text.empty() ? "" : " ") + fmt(game.share[row][j], 3);
    if (game.share[row][j] < 0.5) losers += (losers.empty() ? "" : ", ") + game.labels[j];
  }
  const double t = seconds_since(t0);
  std::string detail = "antisymmetry max " + fmt(worst_sigma, 3) + "σ; (v=1,w=1) row [" + row_text + "]";
  if (!losers.empty()) detail += "; loses to " + losers;
  detail += "; " + fmt(t, 3) + " s";
  return {worst_sigma <= kMetagameSigmas && row_min >= 0.5 && t < kMetagameSeconds, detail};
}

// 8 -------------------------------------------------------------------------
Outcome designer_training(const fs::path&, const std::string&) {
  const auto t0 = std::chrono::steady_clock::now();
  players::CorpusConfig corpus_cfg;
  corpus_cfg.episodes = 3000;
  corpus_cfg.seed = 1;
  const auto corpus = players::generate_corpus(corpus_cfg);
  players::ImitationConfig imitation;
  imitation.updates = 1500;
  imitation.batch = 256;
  imitation.eval_every = 100;
  const auto fitted = players::train_virtual_players(corpus, imitation, 3);
  const auto& model = fitted.model;

  designer::TrainingConfig cfg;
  cfg.updates = kDesignerUpdates;
  cfg.episodes_per_profile = kDesignerEpisodesPerProfile;
  const std::uint64_t seed = 5;
  Rng init = Rng(seed).derive("designer-init");
  const auto untrained = std::make_shared<const designer::GraphNet>(designer::GraphNet::create(init));
  const auto result = designer::train_designer(model, cfg, seed, *untrained);
  const auto trained = std::make_shared<const designer::GraphNet>(result.net);

  const auto rival = players::mechanism_payout_fn(make_baseline(Baseline::kLiberalEgalitarian));
  int at_half = 0, improved = 0;
  std::string rows;
  for (const auto& profile : arena::evaluation_profiles()) {
    const auto a = designer::evaluate_vote_share(designer::designer_payout_fn(trained), rival, model, profile,
                                                 kDesignerEvalPairs, 99);
    const auto b = designer::evaluate_vote_share(designer::designer_payout_fn(untrained), rival, model, profile,
                                                 kDesignerEvalPairs, 99);
    at_half += a.share >= 0.5;
    improved += a.share > b.share;
    rows += (rows.empty() ? "" : "; ") + profile.str() + " " + fmt(a.share, 3) + " vs " + fmt(b.share, 3);
  }
  const double t = seconds_since(t0);
  const int profiles = static_cast<int>(arena::evaluation_profiles().size());
  return {at_half >= kDesignerProfilesAtHalf && improved == profiles && t < kDesignerSeconds,
          "trained vs untrained share: " + rows + "; ≥0.5 in " + std::to_string(at_half) + "/" +
              std::to_string(profiles) + ", " + fmt(t, 4) + " s"};
}

// 9 -------------------------------------------------------------------------
Outcome designer_structure(const fs::path&, const std::string&) {
  Rng rng(109);
  double equivariance = 0.0, simplex = 0.0;
  bool positive = true;
  std::vector<designer::GraphNet> nets;
  for (int k = 0; k < 10; ++k) nets.push_back(designer::GraphNet::create(rng));
  for (int n = 0; n < kStructureObservations; ++n) {
    const auto& net = nets[static_cast<std::size_t>(n) % nets.size()];
    const auto e = random_endowments(rng);
    PlayerVector c{};
    for (int i = 0; i < kPlayers; ++i) c[i] = rng.uniform_int(0, static_cast<int>(e[i]));
    std::array<int, kPlayers> perm{0, 1, 2, 3};
    std::shuffle(perm.begin(), perm.end(), rng);
    PlayerVector pe{}, pc{};
    for (int k = 0; k < kPlayers; ++k) {
      pe[k] = e[perm[k]];
      pc[k] = c[perm[k]];
    }
    const auto w = net.forward(designer::build_observation(e, c));
    const auto pw = net.forward(designer::build_observation(pe, pc));
    for (int k = 0; k < kPlayers; ++k) {
      equivariance = std::max(equivariance, std::abs(pw[k] - w[perm[k]]));
      positive = positive && w[k] > 0.0;
    }
    simplex = std::max(simplex, std::abs(total(w) - 1.0));
  }

  // Replay a played block round by round in shuffled order through a fresh mechanism.
  const auto net = std::make_shared<const designer::GraphNet>(nets[0]);
  const DesignerMechanism mech(net, "random");
  const auto profile = EndowmentProfile::head_tail(4);
  players::RationalPlayer a, b, c, d;
  const SeatPlayers seats{&a, &b, &c, &d};
  const auto block = run_block(profile, seats, mech, kBlockRounds, 9);
  std::vector<std::size_t> order(block.rounds.size());
  for (std::size_t t = 0; t < order.size(); ++t) order[t] = t;
  std::shuffle(order.begin(), order.end(), rng);
  bool memoryless = true;
  for (std::size_t t : order)
    memoryless = memoryless && mech.payouts(profile.endowments(), block.rounds[t].contributions) == block.rounds[t].payouts;

  return {equivariance <= kStructureTol && simplex <= kStructureTol && positive && memoryless,
          "equivariance max|dev| " + fmt(equivariance) + ", simplex max|dev| " + fmt(simplex) + ", memoryless " +
              (memoryless ? "yes" : "no")};
}

// 10 ------------------------------------------------------------------------
Outcome mds_recovery(const fs::path&, const std::string&) {
  Rng rng(110);
  Eigen::MatrixXd planted(kMdsPoints, 2);
  for (Eigen::Index i = 0; i < planted.rows(); ++i) planted.row(i) << rng.uniform(-5, 5), rng.normal(0, 2);
  const auto d = arena::pairwise_distances(planted);
  const auto fit = arena::classical_mds(d, 2);
  const double err = (arena::pairwise_distances(fit.coordinates) - d).cwiseAbs().maxCoeff();
  return {err < kMdsTol, "n=" + std::to_string(kMdsPoints) + ", max pairwise-distance error " + fmt(err)};
}

// 11 ------------------------------------------------------------------------
Outcome vote_regression(const fs::path&, const std::string&) {
  Rng rng(111);
  const std::array<double, 4> truth{0.3, 1.2, -0.4, 0.2};
  std::vector<arena::VoteObservation> votes(kRegressionVotes);
  for (int n = 0; n < kRegressionVotes; ++n) {
    auto& v = votes[static_cast<std::size_t>(n)];
    v.relative_payout = rng.normal(0.5, 2.0);
    v.absolute_payout = rng.normal(-1.0, 6.0);
    v.contributions = rng.normal(4.0, 12.0);
    v.group = n / kPlayers;
  }
  std::array<double, 3> mean{}, sd{};
  for (int k = 0; k < 3; ++k) {
    double s = 0, ss = 0;
    for (const auto& v : votes) {
      const double x = k == 0 ? v.relative_payout : k == 1 ? v.absolute_payout : v.contributions;
      s += x;
      ss += x * x;
    }
    mean[k] = s / kRegressionVotes;
    sd[k] = std::sqrt(ss / kRegressionVotes - mean[k] * mean[k]);
  }
  for (auto& v : votes) {
    const double z = truth[0] + truth[1] * (v.relative_payout - mean[0]) / sd[0] +
                     truth[2] * (v.absolute_payout - mean[1]) / sd[1] +
                     truth[3] * (v.contributions - mean[2]) / sd[2];
    v.voted_first = rng.bernoulli(1.0 / (1.0 + std::exp(-z)));
  }
  const auto planted = arena::fit_vote_regression(votes);
  double worst_se = 0.0;
  for (int k = 0; k < 4; ++k) worst_se = std::max(worst_se, std::abs(planted.coef[k] - truth[k]) / planted.std_error[k]);

  players::CorpusConfig cfg;
  cfg.episodes = kPipelineEpisodes;
  cfg.seed = 2;
  std::vector<arena::VoteObservation> pipeline;
  int group = 0;
  for (const auto& ep : players::generate_corpus(cfg)) {
    const auto obs = arena::vote_observations(ep, group++);
    pipeline.insert(pipeline.end(), obs.begin(), obs.end());
  }
  const auto fit = arena::fit_vote_regression(pipeline);
  const bool rpay_max = !fit.separated && std::abs(fit.z[1]) > std::abs(fit.z[2]) && std::abs(fit.z[1]) > std::abs(fit.z[3]);
  return {worst_se <= kRegressionSes && !planted.separated && rpay_max,
          "planted max |β̂−β|/SE " + fmt(worst_se, 3) + "; pipeline z = [rpay " + fmt(fit.z[1], 3) + ", apay " +
              fmt(fit.z[2], 3) + ", cont " + fmt(fit.z[3], 3) + "]"};
}

// 12 ------------------------------------------------------------------------
std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism(const fs::path& work, const std::string& cli) {
  std::vector<std::string> failures;
  auto same = [&](const std::string& what, const std::string& x, const std::string& y) {
    if (x.empty() || x != y) failures.push_back(what);
  };

  Rng rng(112);
  const auto model = std::make_shared<const players::VirtualPlayerModel>(players::VirtualPlayerModel::create(rng));
  designer::TrainingConfig cfg;
  cfg.updates = 5;
  cfg.episodes_per_profile = 2;
  same("train_designer", designer::train_designer(*model, cfg, 4).net.to_json().dump(),
       designer::train_designer(*model, cfg, 4).net.to_json().dump());

  const auto source = arena::PlayerSource::virtual_players(model);
  const auto grid = arena::default_grid();
  same("run_metagame", arena::to_json(arena::run_metagame(grid, source, 16, 7)).dump(),
       arena::to_json(arena::run_metagame(grid, source, 16, 7)).dump());

  auto session_bytes = [&] {
    service::SessionOptions o;
    o.profile = EndowmentProfile::head_tail(6);
    o.seed = 42;
    o.model = model;
    service::Session s("s1", o, std::make_shared<service::ManualClock>());
    std::string out = to_jsonl_line(s.record());
    for (const auto& e : s.events_since(0)) out += e.to_json().dump() + "\n";
    return out;
  };
  same("session", session_bytes(), session_bytes());

  int cli_checks = 0;
  if (!cli.empty()) {
    fs::create_directories(work);
    auto run = [&](const std::string& args) {
      const std::string cmd = "\"" + cli + "\" " + args + " > /dev/null 2>&1";
      return std::system(cmd.c_str()) == 0;
    };
    const auto p = [&](const std::string& name) { return (work / name).string(); };
    bool ok = run("gen-corpus --episodes 40 --seed 3 --out " + p("corpus.jsonl")) &&
              run("train-players --corpus " + p("corpus.jsonl") + " --updates 20 --batch 32 --seed 3 --out " +
                  p("players.json"));
    for (int k = 0; ok && k < 2; ++k) {
      const std::string tag = std::to_string(k);
      ok = run("train-designer --model " + p("players.json") + " --updates 5 --episodes-per-profile 2 --seed 9 --out " +
               p("designer" + tag + ".json")) &&
           run("tournament --grid 3x3 --blocks 32 --players rational --seed 7 --out " + p("tournament" + tag + ".json")) &&
           run("export --players virtual --model " + p("players.json") + " --episodes 3 --seed 11 --out " +
               p("sessions" + tag + ".jsonl"));
    }
    if (!ok) failures.push_back("cli invocation");
    for (const auto& name : {"designer", "tournament", "sessions"}) {
      const std::string ext = std::string(name) == "sessions" ? ".jsonl" : ".json";
      same(std::string("cli ") + name, read_bytes(work / (std::string(name) + "0" + ext)),
           read_bytes(work / (std::string(name) + "1" + ext)));
      ++cli_checks;
    }
  }
  std::string detail = failures.empty() ? "library replays identical" : "differs: ";
  for (const auto& f : failures) detail += f + " ";
  detail += cli.empty() ? "; CLI not checked" : "; " + std::to_string(cli_checks) + " CLI outputs compared";
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string only, cli;
  std::string work = (fs::temp_directory_path() / "redist_acceptance").string();
  app.add_option("--only", only, "Comma-separated criterion numbers");
  app.add_option("--cli", cli, "Path to the command-line tool for replay checks");
  app.add_option("--work", work, "Scratch directory");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "conservation", conservation},
      {2, "canonical points", canonical_points},
      {3, "gini", gini_check},
      {4, "gradient integrity", gradient_integrity},
      {5, "rational dynamics", rational_dynamics},
      {6, "scg unbiasedness", scg_unbiasedness},
      {7, "metagame dominance", metagame_dominance},
      {8, "designer training", designer_training},
      {9, "designer structure", designer_structure},
      {10, "mds recovery", mds_recovery},
      {11, "vote regression", vote_regression},
      {12, "determinism", determinism},
  };

  std::set<int> selected;
  std::stringstream ss(only);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) selected.insert(std::stoi(item));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome out;
    try {
      out = c.run(fs::path(work) / std::to_string(c.id), cli);
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failed += !out.pass;
    std::cout << (out.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << out.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
