#include "redist/arena/tournament.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace redist::arena {

PlayerSource PlayerSource::rational_players(players::RationalConfig config) {
  PlayerSource s;
  s.kind = Kind::kRational;
  s.rational = config;
  return s;
}

PlayerSource PlayerSource::virtual_players(std::shared_ptr<const players::VirtualPlayerModel> model) {
  if (!model) throw std::invalid_argument("virtual player source needs a model");
  PlayerSource s;
  s.kind = Kind::kVirtual;
  s.model = std::move(model);
  return s;
}

std::vector<EndowmentProfile> evaluation_profiles() {
  std::vector<EndowmentProfile> out;
  for (int tail : {2, 4, 6, 8, 10}) out.push_back(EndowmentProfile::head_tail(tail));
  return out;
}

std::pair<double, double> wilson_interval(double p, double n, double z) {
  if (n <= 0) return {0.0, 1.0};
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z / (1 + z2 / n) * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n));
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

namespace {

Rng pair_stream(const std::string& a, const std::string& b, std::uint64_t seed) {
  const auto& lo = std::min(a, b);
  const auto& hi = std::max(a, b);
  return Rng(seed).derive(stable_hash(lo) ^ mix64(stable_hash(hi)));
}

double block_share(const PlayerVector& rpay_a, const PlayerVector& rpay_b, const HeadToHeadOptions& opt,
                   Rng& ballot) {
  double votes = 0.0;
  for (std::size_t i = 0; i < kPlayers; ++i) {
    const double p = opt.vote_model.probability(rpay_a[i], rpay_b[i]);
    votes += opt.sampled_votes ? (ballot.uniform() < p ? 1.0 : 0.0) : p;
  }
  return votes / kPlayers;
}

std::vector<double> rational_shares(const Mechanism& a, const Mechanism& b, const players::RationalConfig& cfg,
                                    int n_blocks, const Rng& root, std::uint64_t key_a, std::uint64_t key_b,
                                    const std::vector<EndowmentProfile>& profiles, const HeadToHeadOptions& opt) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_blocks));
  std::array<players::RationalPlayer, kPlayers> seats{players::RationalPlayer(cfg), players::RationalPlayer(cfg),
                                                      players::RationalPlayer(cfg), players::RationalPlayer(cfg)};
  SeatPlayers ptrs{&seats[0], &seats[1], &seats[2], &seats[3]};
  for (int n = 0; n < n_blocks; ++n) {
    const Rng block = root.derive(static_cast<std::uint64_t>(n));
    const EndowmentProfile& profile = profiles[static_cast<std::size_t>(n) % profiles.size()];
    Rng draws = block.derive("players");
    std::array<players::RationalPlayerState, kPlayers> initial;
    for (auto& s : initial) s = players::RationalPlayerState::sample(cfg, draws);

    for (std::size_t k = 0; k < kPlayers; ++k) seats[k].preset(initial[k]);
    const BlockRecord block_a = run_block(profile, ptrs, a, opt.rounds, block.derive(key_a).seed());
    for (std::size_t k = 0; k < kPlayers; ++k) seats[k].preset(initial[k]);
    const BlockRecord block_b = run_block(profile, ptrs, b, opt.rounds, block.derive(key_b).seed());
    Rng ballot = block.derive("ballot");
    out.push_back(block_share(block_a.relative_payouts(), block_b.relative_payouts(), opt, ballot));
  }
  return out;
}

std::vector<double> virtual_shares(const Mechanism& a, const Mechanism& b, const players::VirtualPlayerModel& model,
                                   int n_blocks, const Rng& root, std::uint64_t key_a, std::uint64_t key_b,
                                   const std::vector<EndowmentProfile>& profiles, const HeadToHeadOptions& opt) {
  constexpr std::size_t kChunk = 512;
  std::vector<double> out(static_cast<std::size_t>(n_blocks));
  for (std::size_t p = 0; p < profiles.size(); ++p) {
    std::vector<std::size_t> blocks;
    for (std::size_t n = p; n < out.size(); n += profiles.size()) blocks.push_back(n);
    for (std::size_t start = 0; start < blocks.size(); start += kChunk) {
      const std::size_t count = std::min(kChunk, blocks.size() - start);
      nn::Tensor e(count, kPlayers);
      std::vector<Rng> sa;
      std::vector<Rng> sb;
      for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t k = 0; k < kPlayers; ++k) e(r, k) = profiles[p].endowments()[k];
        const Rng block = root.derive(blocks[start + r]);
        sa.push_back(block.derive(key_a));
        sb.push_back(block.derive(key_b));
      }
      nn::Graph g;
      const nn::BoundParams frozen = nn::bind_frozen(g, model.params());
      const auto fa = [&a](nn::Graph& gr, const nn::Tensor& ev, const nn::Tensor& c) {
        return a.payouts(gr, ev, gr.constant(c));
      };
      const auto fb = [&b](nn::Graph& gr, const nn::Tensor& ev, const nn::Tensor& c) {
        return b.payouts(gr, ev, gr.constant(c));
      };
      const auto ra = players::rollout_batch(g, model, frozen, e, fa, opt.rounds, sa).relative_payouts.value();
      const auto rb = players::rollout_batch(g, model, frozen, e, fb, opt.rounds, sb).relative_payouts.value();
      for (std::size_t r = 0; r < count; ++r) {
        PlayerVector pa{};
        PlayerVector pb{};
        for (std::size_t k = 0; k < kPlayers; ++k) {
          pa[k] = ra(r, k);
          pb[k] = rb(r, k);
        }
        Rng ballot = root.derive(blocks[start + r]).derive("ballot");
        out[blocks[start + r]] = block_share(pa, pb, opt, ballot);
      }
    }
  }
  return out;
}

}  // namespace

HeadToHead head_to_head(const Mechanism& a, const Mechanism& b, const PlayerSource& players, int n_blocks,
                        std::uint64_t seed, const HeadToHeadOptions& options) {
  if (n_blocks < 1) throw std::invalid_argument("head_to_head needs at least one block");
  const auto profiles = options.profiles.empty() ? evaluation_profiles() : options.profiles;
  const std::string ja = a.to_json().dump();
  const std::string jb = b.to_json().dump();
  const Rng root = pair_stream(ja, jb, seed);
  const std::uint64_t key_a = stable_hash(ja);
  const std::uint64_t key_b = stable_hash(jb);

  const std::vector<double> shares =
      players.kind == PlayerSource::Kind::kRational
          ? rational_shares(a, b, players.rational, n_blocks, root, key_a, key_b, profiles, options)
          : virtual_shares(a, b, *players.model, n_blocks, root, key_a, key_b, profiles, options);

  HeadToHead h;
  h.blocks = n_blocks;
  double sum = 0.0;
  for (double s : shares) sum += s;
  h.share = sum / n_blocks;
  double ss = 0.0;
  for (double s : shares) ss += (s - h.share) * (s - h.share);
  h.std_error = n_blocks > 1 ? std::sqrt(ss / (n_blocks - 1) / n_blocks) : 0.0;
  std::tie(h.wilson_low, h.wilson_high) = wilson_interval(h.share, kPlayers * static_cast<double>(n_blocks));
  return h;
}

std::vector<nlohmann::json> default_grid() {
  std::vector<nlohmann::json> out;
  for (double v : {0.0, 0.5, 1.0})
    for (double w : {0.0, 0.5, 1.0}) out.push_back({{"kind", "manifold"}, {"v", v}, {"w", w}});
  return out;
}

std::optional<std::vector<int>> find_condorcet_cycle(const std::vector<std::vector<double>>& share) {
  const int n = static_cast<int>(share.size());
  std::vector<int> colour(static_cast<std::size_t>(n), 0);  // 0 unseen, 1 on stack, 2 done
  std::vector<int> stack;
  std::optional<std::vector<int>> found;
  std::function<bool(int)> visit = [&](int u) {
    colour[static_cast<std::size_t>(u)] = 1;
    stack.push_back(u);
    for (int v = 0; v < n; ++v) {
      if (v == u || !(share[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] > 0.5)) continue;
      if (colour[static_cast<std::size_t>(v)] == 1) {
        auto it = std::find(stack.begin(), stack.end(), v);
        found = std::vector<int>(it, stack.end());
        return true;
      }
      if (colour[static_cast<std::size_t>(v)] == 0 && visit(v)) return true;
    }
    stack.pop_back();
    colour[static_cast<std::size_t>(u)] = 2;
    return false;
  };
  for (int u = 0; u < n && !found; ++u)
    if (colour[static_cast<std::size_t>(u)] == 0) visit(u);
  return found;
}

Metagame run_metagame(const std::vector<nlohmann::json>& grid, const PlayerSource& players, int n_blocks,
                      std::uint64_t seed, const HeadToHeadOptions& options) {
  if (grid.size() < 2) throw std::invalid_argument("metagame needs at least two mechanisms");
  std::vector<MechanismPtr> mechs;
  Metagame m;
  for (const auto& spec : grid) {
    mechs.push_back(make_mechanism(spec));
    m.labels.push_back(mechs.back()->name());
    m.mechanisms.push_back(mechs.back()->to_json());
  }
  const std::size_t n = mechs.size();
  m.share.assign(n, std::vector<double>(n, 0.5));
  m.std_error.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const HeadToHead h = head_to_head(*mechs[i], *mechs[j], players, n_blocks, seed, options);
      m.share[i][j] = h.share;
      m.std_error[i][j] = h.std_error;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    bool dominant = true;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && m.share[i][j] < 0.5) dominant = false;
    if (dominant) m.dominant.push_back(static_cast<int>(i));
  }
  m.condorcet_cycle = find_condorcet_cycle(m.share);
  return m;
}

nlohmann::json to_json(const HeadToHead& r) {
  return {{"share", r.share},
          {"std_error", r.std_error},
          {"wilson_95", {r.wilson_low, r.wilson_high}},
          {"blocks", r.blocks}};
}

nlohmann::json to_json(const Metagame& m) {
  nlohmann::json dominant = nlohmann::json::array();
  for (int i : m.dominant) dominant.push_back(m.labels[static_cast<std::size_t>(i)]);
  nlohmann::json cycle = nullptr;
  if (m.condorcet_cycle) {
    cycle = nlohmann::json::array();
    for (int i : *m.condorcet_cycle) cycle.push_back(m.labels[static_cast<std::size_t>(i)]);
  }
  return {{"labels", m.labels},   {"mechanisms", m.mechanisms}, {"share", m.share},
          {"std_error", m.std_error}, {"dominant", dominant},       {"condorcet_cycle", cycle}};
}

}  // namespace redist::arena
