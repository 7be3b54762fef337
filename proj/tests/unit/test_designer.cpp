#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "redist/designer/graph_net.hpp"
#include "redist/designer/training.hpp"
#include "redist/mechanisms/mechanism.hpp"
#include "redist/nn/ops.hpp"

using namespace redist;
using namespace redist::designer;

namespace {

GraphNet random_net(std::uint64_t seed) {
  Rng rng(seed);
  return GraphNet::create(rng);
}

}  // namespace

TEST_SUITE("designer") {
  TEST_CASE("weights lie on the simplex") {
    const auto net = random_net(1);
    Rng rng(2);
    for (int n = 0; n < 200; ++n) {
      PlayerVector e{10, 0, 0, 0}, c{};
      for (int i = 1; i < kPlayers; ++i) e[i] = rng.uniform_int(1, 10);
      for (int i = 0; i < kPlayers; ++i) c[i] = rng.uniform_int(0, static_cast<int>(e[i]));
      const auto w = net.forward(build_observation(e, c));
      double total = 0;
      for (double x : w) {
        CHECK(x > 0.0);
        total += x;
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }

  TEST_CASE("output is equivariant to seat permutations") {
    const auto net = random_net(3);
    const PlayerVector e{10, 3, 6, 9}, c{4, 1, 6, 2};
    const auto base = net.forward(build_observation(e, c));
    std::array<int, kPlayers> perm{0, 1, 2, 3};
    do {
      PlayerVector pe{}, pc{};
      for (int k = 0; k < kPlayers; ++k) {
        pe[k] = e[perm[k]];
        pc[k] = c[perm[k]];
      }
      const auto out = net.forward(build_observation(pe, pc));
      for (int k = 0; k < kPlayers; ++k) REQUIRE(std::abs(out[k] - base[perm[k]]) < 1e-12);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }

  TEST_CASE("mechanism is memoryless and conserves") {
    const auto net = std::make_shared<const GraphNet>(random_net(4));
    DesignerMechanism mech(net, "inline");
    const PlayerVector e{10, 4, 4, 4}, c{5, 2, 3, 4};
    const auto first = mech.payouts(e, c);
    mech.payouts(e, PlayerVector{0, 4, 0, 1});
    mech.payouts(e, PlayerVector{10, 0, 0, 0});
    const auto again = mech.payouts(e, c);
    for (int i = 0; i < kPlayers; ++i) CHECK(first[i] == again[i]);
    double total = 0;
    for (double y : first) total += y;
    CHECK(std::abs(total - 1.6 * 14) < 1e-9);
  }

  TEST_CASE("batched forward matches single observations") {
    const auto net = random_net(5);
    nn::Graph g;
    const nn::Tensor e{{10, 2, 2, 2}, {10, 8, 5, 1}};
    const nn::Tensor c{{3, 1, 0, 2}, {10, 0, 5, 1}};
    const auto bound = nn::bind_frozen(g, net.params());
    const auto w = net.forward(bound, build_observation(g, e, g.constant(c)));
    for (std::size_t b = 0; b < 2; ++b) {
      PlayerVector eb{}, cb{};
      for (int k = 0; k < kPlayers; ++k) {
        eb[k] = e(b, k);
        cb[k] = c(b, k);
      }
      const auto single = net.forward(build_observation(eb, cb));
      for (int k = 0; k < kPlayers; ++k) CHECK(w.value()(b, k) == doctest::Approx(single[k]).epsilon(1e-12));
    }
  }

  TEST_CASE("observation features") {
    const auto obs = build_observation(PlayerVector{10, 4, 4, 4}, PlayerVector{5, 2, 0, 4});
    CHECK(obs.nodes[1][0] == doctest::Approx(0.4));
    CHECK(obs.nodes[1][1] == doctest::Approx(0.2));
    CHECK(obs.nodes[1][2] == doctest::Approx(0.5));
    CHECK(obs.nodes[3][2] == doctest::Approx(1.0));
    CHECK_THROWS_AS(build_observation(PlayerVector{10, 0, 4, 4}, PlayerVector{0, 0, 0, 0}), DomainError);
    CHECK(edge_list().size() == 12);
  }

  TEST_CASE("weights round trip") {
    const auto net = random_net(6);
    CHECK(GraphNet::from_json(net.to_json()) == net);
    auto doc = net.to_json();
    doc["type"] = "player_model";
    CHECK_THROWS(GraphNet::from_json(doc));
  }

  TEST_CASE("expected votes") {
    nn::Graph g;
    const auto a = g.constant(nn::Tensor{{1, 2, 3, 4}});
    const auto b = g.constant(nn::Tensor{{1, 1, 1, 1}});
    const auto votes = expected_votes(a, b);
    double want = 0;
    for (double d : {0.0, 1.0, 2.0, 3.0}) want += 1.0 / (1.0 + std::exp(-1.4 * d));
    CHECK(votes.value()(0, 0) == doctest::Approx(want));
  }

  TEST_CASE("surrogate gradients") {
    nn::Graph g;
    const auto j = g.leaf(nn::Tensor{{1.0}, {3.0}, {5.0}});
    const auto score = g.leaf(nn::Tensor{{0.1}, {0.2}, {0.3}});
    g.backward(scg_surrogate(j, score, true));
    for (std::size_t n = 0; n < 3; ++n) CHECK(j.grad()(n, 0) == doctest::Approx(1.0 / 3));
    CHECK(score.grad()(0, 0) == doctest::Approx(-2.0 / 3));
    CHECK(score.grad()(1, 0) == doctest::Approx(0.0));
    CHECK(score.grad()(2, 0) == doctest::Approx(2.0 / 3));

    nn::Graph h;
    const auto j2 = h.leaf(nn::Tensor{{1.0}, {3.0}});
    const auto s2 = h.leaf(nn::Tensor{{0.0}, {0.0}});
    h.backward(scg_surrogate(j2, s2, false));
    CHECK(s2.grad()(0, 0) == doctest::Approx(0.5));
    CHECK(s2.grad()(1, 0) == doctest::Approx(1.5));

    nn::Graph k;
    CHECK_THROWS_AS(scg_surrogate(k.leaf(nn::Tensor(3, 1)), k.leaf(nn::Tensor(2, 1))), std::invalid_argument);
  }

  TEST_CASE("training is deterministic per seed") {
    Rng rng(7);
    const auto players = players::VirtualPlayerModel::create(rng);
    TrainingConfig cfg;
    cfg.updates = 3;
    cfg.episodes_per_profile = 2;
    cfg.tails = {2, 6};
    const auto a = train_designer(players, cfg, 11);
    const auto b = train_designer(players, cfg, 11);
    CHECK(a.net == b.net);
    REQUIRE(a.history.size() == 3);
    for (const auto& s : a.history) CHECK(std::isfinite(s.surrogate));
    Rng init = Rng(11).derive("designer-init");
    CHECK_FALSE(a.net == GraphNet::create(init));
    CHECK_THROWS_AS(TrainingConfig::from_json(nlohmann::json{{"update", 3}}), std::invalid_argument);
  }

  TEST_CASE("vote share of a mechanism against itself is one half") {
    Rng rng(8);
    const auto players = players::VirtualPlayerModel::create(rng);
    const auto fn = players::mechanism_payout_fn(make_baseline(Baseline::kLibertarian));
    const auto est = evaluate_vote_share(fn, fn, players, EndowmentProfile::head_tail(4), 32, 3, true);
    CHECK(est.share == doctest::Approx(0.5).epsilon(1e-12));
  }
}
