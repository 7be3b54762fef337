#include <doctest.h>

#include <cmath>

#include "redist/game/engine.hpp"
#include "redist/players/rational.hpp"

using namespace redist;

namespace {

class FixedPlayer final : public PlayerPolicy {
 public:
  explicit FixedPlayer(double fraction) : fraction_(fraction) {}
  void begin_block(const EndowmentProfile& profile, int seat) override { endowment_ = profile[seat]; }
  double contribute(const RoundContext&, Rng&) override { return std::round(fraction_ * endowment_); }

 private:
  double fraction_;
  double endowment_ = 0;
};

class OverPlayer final : public PlayerPolicy {
 public:
  void begin_block(const EndowmentProfile&, int) override {}
  double contribute(const RoundContext&, Rng&) override { return 11; }
};

}  // namespace

TEST_SUITE("game") {
  TEST_CASE("endowment profiles") {
    const auto p = EndowmentProfile::head_tail(4);
    CHECK(p.endowments() == PlayerVector{10, 4, 4, 4});
    CHECK(p.head() == 0);
    CHECK_THROWS_AS(EndowmentProfile(PlayerVector{9, 4, 4, 4}), DomainError);
    CHECK_THROWS_AS(EndowmentProfile(PlayerVector{10, 0, 4, 4}), DomainError);
    CHECK_THROWS_AS(EndowmentProfile(PlayerVector{10, 2.5, 4, 4}), DomainError);
  }

  TEST_CASE("round resolution") {
    const EndowmentProfile p;
    const auto r = play_round(p, PlayerVector{6, 0, 4, 0}, *no_referee());
    for (int i = 0; i < kPlayers; ++i) CHECK(r.payouts[i] == doctest::Approx(4.0));
    CHECK(r.returns[0] == doctest::Approx(8.0));
    CHECK(r.returns[1] == doctest::Approx(14.0));

    const auto zero = play_round(p, PlayerVector{0, 0, 0, 0}, *make_baseline(Baseline::kLibertarian));
    for (int i = 0; i < kPlayers; ++i) CHECK(zero.returns[i] == doctest::Approx(10.0));

    CHECK_THROWS_AS(play_round(p, PlayerVector{11, 0, 0, 0}, *no_referee()), DomainError);
    CHECK_THROWS_AS(play_round(p, PlayerVector{-1, 0, 0, 0}, *no_referee()), DomainError);
  }

  TEST_CASE("blocks") {
    const auto p = EndowmentProfile::head_tail(6);
    FixedPlayer a(1.0), b(1.0), c(1.0), d(1.0);
    const SeatPlayers players{&a, &b, &c, &d};
    const auto block = run_block(p, players, *make_baseline(Baseline::kLibertarian), 10, 5, "A");
    CHECK(block.rounds.size() == 10);
    CHECK(block.mech == "A");
    for (const auto& r : block.rounds)
      for (int i = 0; i < kPlayers; ++i) CHECK(r.returns[i] == doctest::Approx(1.6 * p[i]));

    OverPlayer bad;
    const SeatPlayers broken{&a, &b, &bad, &d};
    try {
      run_block(p, broken, *no_referee(), 10, 5);
      FAIL("expected ProtocolError");
    } catch (const ProtocolError& err) {
      CHECK(err.seat() == 2);
    }
  }

  TEST_CASE("rational blocks are deterministic per seed") {
    const auto p = EndowmentProfile::head_tail(2);
    auto play = [&](std::uint64_t seed) {
      players::RationalPlayer a, b, c, d;
      const SeatPlayers seats{&a, &b, &c, &d};
      return run_block(p, seats, *make_baseline(Baseline::kLiberalEgalitarian), 10, seed);
    };
    const auto x = play(9), y = play(9), z = play(10);
    for (std::size_t t = 0; t < x.rounds.size(); ++t) CHECK(to_json(x.rounds[t]) == to_json(y.rounds[t]));
    CHECK(to_json(x.rounds[0]) != to_json(z.rounds[0]));
  }

  TEST_CASE("vote and lottery") {
    const EndowmentProfile p;
    FixedPlayer half(0.5);
    const SeatPlayers players{&half, &half, &half, &half};
    const auto a = run_block(p, players, *make_baseline(Baseline::kLibertarian), 10, 1);
    const auto b = run_block(p, players, *make_baseline(Baseline::kStrictEgalitarian), 10, 1);
    Rng rng(3);
    const auto out = conduct_vote(a, b, VoteModel{}, rng);
    for (double q : out.probabilities) CHECK(q == doctest::Approx(0.5));

    const auto other = run_block(EndowmentProfile::head_tail(2), players, *no_referee(), 10, 1);
    CHECK_THROWS_AS(conduct_vote(a, other, VoteModel{}, rng), DomainError);

    Rng lottery(4);
    int wins = 0;
    const int draws = 10000;
    for (int n = 0; n < draws; ++n) wins += draw_bonus(0.5, lottery) == 'A';
    CHECK(std::abs(wins - draws / 2) < 4 * std::sqrt(draws * 0.25));
    for (int n = 0; n < 100; ++n) {
      CHECK(draw_bonus(1.0, lottery) == 'A');
      CHECK(draw_bonus(0.0, lottery) == 'B');
    }
  }

  TEST_CASE("vote model") {
    CHECK(vote_probability(1.0, 1.0) == doctest::Approx(0.5));
    CHECK(vote_probability(2.0, 1.0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.4))));
    CHECK(vote_probability(-800, 800) >= 0.0);
    CHECK(vote_probability(800, -800) == doctest::Approx(1.0));
  }

  TEST_CASE("session structure") {
    players::RationalPlayer a, b, c, d;
    const SeatPlayers seats{&a, &b, &c, &d};
    for (bool order : {false, true}) {
      const auto ep = run_session(EndowmentProfile::head_tail(4), seats, make_baseline(Baseline::kLibertarian),
                                  make_baseline(Baseline::kLiberalEgalitarian), order, VoteModel{}, 21);
      REQUIRE(ep.blocks.size() == 4);
      CHECK(ep.round_count() == kSessionRounds);
      CHECK(ep.blocks[0].mech == "none");
      CHECK(ep.blocks[1].mech == (order ? "B" : "A"));
      CHECK(ep.blocks[2].mech == (order ? "A" : "B"));
      CHECK(ep.blocks[3].rounds.size() == kBonusRounds);
      CHECK(ep.blocks[3].mech == std::string(1, ep.bonus_mech));
      for (char v : ep.votes) CHECK((v == 'A' || v == 'B'));
      for (const auto& r : ep.blocks[0].rounds) {
        double pool = 0;
        for (double x : r.contributions) pool += x;
        for (double y : r.payouts) CHECK(y == doctest::Approx(1.6 * pool / 4));
      }
    }
  }

  TEST_CASE("jsonl round trip") {
    players::RationalPlayer a, b, c, d;
    const SeatPlayers seats{&a, &b, &c, &d};
    const auto ep = run_session(EndowmentProfile::head_tail(8), seats, make_manifold(0.5, 1.0),
                                make_baseline(Baseline::kStrictEgalitarian), true, VoteModel{}, 77);
    const auto line = to_jsonl_line(ep);
    CHECK(line.back() == '\n');
    CHECK(line.find('\n') == line.size() - 1);
    const auto back = episode_from_json(nlohmann::json::parse(line));
    CHECK(to_jsonl_line(back) == line);
    CHECK_THROWS_AS(episode_from_json(nlohmann::json{{"seed", 1}}), std::invalid_argument);
  }

  TEST_CASE("external payouts must conserve") {
    SessionConfig cfg;
    cfg.mech_a = make_baseline(Baseline::kLibertarian);
    cfg.mech_b = make_baseline(Baseline::kLiberalEgalitarian);
    SessionMachine m(cfg);
    for (int t = 0; t < kBlockRounds; ++t) m.resolve_round(PlayerVector{1, 1, 1, 1});
    m.set_external('A', nlohmann::json{{"kind", "human"}});
    CHECK(m.external_block());
    CHECK_THROWS_AS(m.resolve_round(PlayerVector{1, 1, 1, 1}, PlayerVector{1, 1, 1, 1}), DomainError);
    m.resolve_round(PlayerVector{1, 1, 1, 1}, PlayerVector{3.2, 1.6, 1.6, 0});
    CHECK(m.record().blocks[1].rounds.size() == 1);
  }
}
