// Command-line front end for every pipeline stage.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "redist/arena/analysis.hpp"
#include "redist/arena/tournament.hpp"
#include "redist/designer/training.hpp"
#include "redist/players/corpus.hpp"
#include "redist/players/imitation.hpp"
#include "redist/service/http_server.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace redist;

namespace {

constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_text(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + out);
  f << text;
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

/// "10,4,4,4" or a tail shorthand "4" for [10, 4, 4, 4].
EndowmentProfile parse_profile(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("bad --profile '" + text + "'");
    }
  }
  if (v.size() == 1) return EndowmentProfile::head_tail(static_cast<int>(v[0]));
  if (v.size() != kPlayers) throw UsageError("--profile needs 1 or 4 comma-separated endowments");
  return EndowmentProfile(PlayerVector{v[0], v[1], v[2], v[3]});
}

/// Accepts inline JSON, a baseline name, "v=..,w=..", a mechanism spec file, or a
/// designer weights file.
json parse_mechanism(const std::string& text) {
  if (text.empty()) throw UsageError("empty mechanism");
  if (text.front() == '{') {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw UsageError(std::string("bad mechanism JSON: ") + e.what());
    }
  }
  for (auto b : {Baseline::kStrictEgalitarian, Baseline::kLibertarian, Baseline::kLiberalEgalitarian}) {
    if (text == baseline_name(b)) return {{"kind", "named"}, {"name", text}};
  }
  double v = 0.0;
  double w = 0.0;
  if (std::sscanf(text.c_str(), "v=%lf,w=%lf", &v, &w) == 2) return {{"kind", "manifold"}, {"v", v}, {"w", w}};
  const fs::path path(text);
  if (!fs::exists(path)) throw UsageError("unknown mechanism '" + text + "'");
  json doc = read_json_file(path);
  if (doc.contains("kind")) {
    if (doc["kind"] == "designer") {
      const fs::path ref = doc.at("weights_ref").get<std::string>();
      if (ref.is_relative()) doc["weights_ref"] = (path.parent_path() / ref).string();
    }
    return doc;
  }
  if (doc.value("type", "") == designer::kPolicyTypeTag) return {{"kind", "designer"}, {"weights_ref", path.string()}};
  throw UsageError(text + " is neither a mechanism spec nor designer weights");
}

std::shared_ptr<const players::VirtualPlayerModel> load_model(const std::string& path) {
  if (path.empty()) throw UsageError("--model is required for virtual players");
  return std::make_shared<players::VirtualPlayerModel>(players::VirtualPlayerModel::from_json(read_json_file(path)));
}

arena::PlayerSource player_source(const std::string& kind, const std::string& model) {
  if (kind == "rational") return arena::PlayerSource::rational_players();
  return arena::PlayerSource::virtual_players(load_model(model));
}

// Shared option bundles ---------------------------------------------------------

struct Common {
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Root random seed");
  cmd->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Output path (stdout when omitted)");
}

struct PlayerFlags {
  std::string kind = "virtual";
  std::string model;
};

void add_players(CLI::App* cmd, PlayerFlags& p) {
  cmd->add_option("--players", p.kind, "Simulated players")->check(CLI::IsMember({"virtual", "rational"}));
  cmd->add_option("--model", p.model, "Virtual player weights (train-players output)")->check(CLI::ExistingFile);
}

// Commands ----------------------------------------------------------------------

int gen_corpus(const Common& c, int episodes, const std::string& mix) {
  players::CorpusConfig cfg = c.config.empty() ? players::CorpusConfig{}
                                               : players::CorpusConfig::from_json(read_json_file(c.config));
  cfg.seed = c.seed;
  if (episodes > 0) cfg.episodes = episodes;
  if (!mix.empty()) cfg.mix = players::StyleMix::parse(mix);
  const auto corpus = players::generate_corpus(cfg);
  if (c.out.empty()) {
    for (const auto& e : corpus) std::cout << to_jsonl_line(e);
  } else {
    players::write_corpus(c.out, corpus);
  }
  std::cerr << "wrote " << corpus.size() << " episodes\n";
  return 0;
}

int train_players(const Common& c, const std::string& corpus_path, int updates, int batch) {
  players::ImitationConfig cfg = c.config.empty() ? players::ImitationConfig{}
                                                  : players::ImitationConfig::from_json(read_json_file(c.config));
  if (updates >= 0) cfg.updates = updates;
  if (batch > 0) cfg.batch = batch;
  const auto corpus = players::read_corpus(corpus_path);
  const auto result = players::train_virtual_players(corpus, cfg, c.seed);
  write_text(c.out, result.model.to_json().dump() + "\n");
  std::cerr << pretty({{"validation_cross_entropy", result.validation_ce},
                       {"uniform_cross_entropy", result.uniform_ce},
                       {"best_update", result.best_update}});
  return 0;
}

int train_designer(const Common& c, const std::string& model_path, int updates, int per_profile,
                   const std::string& history) {
  designer::TrainingConfig cfg = c.config.empty() ? designer::TrainingConfig{}
                                                  : designer::TrainingConfig::from_json(read_json_file(c.config));
  if (updates >= 0) cfg.updates = updates;
  if (per_profile > 0) cfg.episodes_per_profile = per_profile;
  const auto model = load_model(model_path);
  std::ofstream log;
  if (!history.empty()) {
    log.open(history);
    if (!log) throw std::runtime_error("cannot write " + history);
    log << "update,surrogate,vote_share\n";
    log.precision(17);
  }
  const auto result = designer::train_designer(*model, cfg, c.seed, [&](const designer::UpdateStats& s) {
    if (log.is_open()) log << s.update << ',' << s.surrogate << ',' << s.vote_share << '\n';
  });
  write_text(c.out, result.net.to_json().dump() + "\n");
  return 0;
}

std::vector<json> grid_of(const std::string& text) {
  int n = 0;
  int m = 0;
  if (std::sscanf(text.c_str(), "%dx%d", &n, &m) != 2 || n < 2 || m < 2)
    throw UsageError("--grid must look like 3x3 (both sides ≥ 2)");
  std::vector<json> grid;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      grid.push_back({{"kind", "manifold"}, {"v", static_cast<double>(i) / (n - 1)}, {"w", static_cast<double>(j) / (m - 1)}});
  return grid;
}

arena::HeadToHeadOptions h2h_options(const std::string& profile, bool sampled) {
  arena::HeadToHeadOptions o;
  if (!profile.empty()) o.profiles = {parse_profile(profile)};
  o.sampled_votes = sampled;
  return o;
}

int tournament(const Common& c, const PlayerFlags& p, const std::string& grid, int blocks, const std::string& profile,
               bool sampled) {
  const auto m = arena::run_metagame(grid_of(grid), player_source(p.kind, p.model), blocks, c.seed,
                                     h2h_options(profile, sampled));
  write_text(c.out, pretty(arena::to_json(m)));
  return 0;
}

int evaluate(const Common& c, const PlayerFlags& p, const std::string& mech_a, const std::string& mech_b, int blocks,
             const std::string& profile, bool sampled, const std::string& corpus, int shuffles) {
  if (!corpus.empty()) {
    // Vote determinants on recorded sessions.
    const auto episodes = players::read_corpus(corpus);
    std::vector<arena::VoteObservation> obs;
    std::vector<std::array<bool, kPlayers>> groups;
    for (std::size_t g = 0; g < episodes.size(); ++g) {
      const auto v = arena::vote_observations(episodes[g], static_cast<int>(g));
      std::array<bool, kPlayers> votes{};
      for (std::size_t i = 0; i < kPlayers; ++i) votes[i] = v[i].voted_first;
      groups.push_back(votes);
      obs.insert(obs.end(), v.begin(), v.end());
    }
    json report = {{"regression", arena::to_json(arena::fit_vote_regression(obs))},
                   {"first_mechanism_permutation_p", arena::group_permutation_test(groups, shuffles, c.seed)}};
    write_text(c.out, pretty(report));
    return 0;
  }
  if (mech_a.empty() || mech_b.empty()) throw UsageError("evaluate needs --mech-a and --mech-b (or --corpus)");
  const json ja = parse_mechanism(mech_a);
  const json jb = parse_mechanism(mech_b);
  const auto a = make_mechanism(ja);
  const auto b = make_mechanism(jb);
  const auto players = player_source(p.kind, p.model);
  const auto opt = h2h_options(profile, sampled);
  json report = {{"mech_a", ja}, {"mech_b", jb}, {"players", p.kind}, {"blocks", blocks}};
  report["overall"] = arena::to_json(arena::head_to_head(*a, *b, players, blocks, c.seed, opt));
  if (profile.empty()) {
    json per = json::array();
    for (const auto& prof : arena::evaluation_profiles()) {
      auto o = opt;
      o.profiles = {prof};
      json row = arena::to_json(arena::head_to_head(*a, *b, players, blocks, c.seed, o));
      row["profile"] = to_json(prof);
      per.push_back(row);
    }
    report["profiles"] = per;
  }
  write_text(c.out, pretty(report));
  return 0;
}

int beach(const Common& c, const std::string& mech, const std::string& profile, int resolution) {
  if (mech.empty()) throw UsageError("beach-plot needs --mech-a");
  const auto m = make_mechanism(parse_mechanism(mech));
  const auto plot = arena::beach_plot(*m, parse_profile(profile.empty() ? "4" : profile), resolution);
  if (c.out.empty()) {
    std::cout << arena::beach_csv(plot);
    return 0;
  }
  write_text(c.out + ".csv", arena::beach_csv(plot));
  write_text(c.out + ".pgm", arena::beach_pgm(plot));
  write_text(c.out + ".json", pretty(arena::to_json(plot)));
  return 0;
}

int embed(const Common& c, const PlayerFlags& p, const std::string& profile, int grid, int blocks) {
  const auto e = arena::manifold_embedding(player_source(p.kind, p.model), parse_profile(profile.empty() ? "4" : profile),
                                           grid, blocks, c.seed);
  if (c.out.empty()) {
    std::cout << arena::embedding_csv(e);
    return 0;
  }
  write_text(c.out + ".csv", arena::embedding_csv(e));
  write_text(c.out + ".json", pretty(arena::to_json(e)));
  return 0;
}

int export_sessions(const Common& c, const PlayerFlags& p, const std::string& mech_a, const std::string& mech_b,
                    const std::string& profile, int episodes, bool order_flag) {
  service::SessionOptions o;
  if (!c.config.empty()) o = service::SessionOptions::from_json(read_json_file(c.config));
  if (!mech_a.empty()) o.mech_a = parse_mechanism(mech_a);
  if (!mech_b.empty()) o.mech_b = parse_mechanism(mech_b);
  if (!profile.empty()) o.profile = parse_profile(profile);
  if (order_flag) o.order_flag = true;
  if (!o.human_seats.empty() || o.referee_block) throw UsageError("export simulates sessions without humans");
  if (p.kind == "virtual") o.model = load_model(p.model);
  service::SessionManager sessions;
  std::string text;
  const Rng root(c.seed);
  for (int n = 0; n < episodes; ++n) {
    o.seed = episodes == 1 ? c.seed : root.derive(static_cast<std::uint64_t>(n)).seed();
    text += to_jsonl_line(sessions.find(sessions.create(o))->record());
  }
  write_text(c.out, text);
  return 0;
}

service::HttpServer* g_server = nullptr;

int serve(const PlayerFlags& p, int port, const std::string& host, const std::string& base_dir) {
  service::ServerConfig cfg;
  cfg.port = port;
  cfg.host = host;
  cfg.base_dir = base_dir;
  if (p.kind == "virtual") cfg.model = load_model(p.model);
  service::SessionManager sessions;
  service::HttpServer server(sessions, cfg);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::cerr << "listening on http://" << host << ':' << port << '\n';
  if (!server.run()) {
    std::cerr << "error: cannot listen on " << host << ':' << port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mechanism-design laboratory for redistribution games"};
  app.require_subcommand(1);

  Common common;
  PlayerFlags players_flags;
  int episodes = 0;
  std::string mix;
  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic behaviour corpus (JSONL)");
  add_common(gen, common);
  gen->add_option("--episodes", episodes, "Number of sessions");
  gen->add_option("--mix", mix, "Archetype weights, e.g. conditional=0.7,free_rider=0.1");

  std::string corpus;
  int updates = -1;
  int batch = 0;
  auto* tp = app.add_subcommand("train-players", "Fit virtual players to a corpus by imitation");
  add_common(tp, common);
  tp->add_option("--corpus", corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  tp->add_option("--updates", updates, "Override the number of updates");
  tp->add_option("--batch", batch, "Override the minibatch size");

  std::string history;
  int per_profile = 0;
  auto* td = app.add_subcommand("train-designer", "Train the mechanism designer against virtual players");
  add_common(td, common);
  td->add_option("--model", players_flags.model, "Virtual player weights")->required()->check(CLI::ExistingFile);
  td->add_option("--updates", updates, "Override the number of updates");
  td->add_option("--episodes-per-profile", per_profile, "Override episodes per endowment profile");
  td->add_option("--history", history, "Per-update CSV log");

  std::string grid = "3x3";
  int blocks = 4096;
  std::string profile;
  bool sampled = false;
  auto* tour = app.add_subcommand("tournament", "Round-robin meta-game over a (v, w) grid");
  add_common(tour, common);
  add_players(tour, players_flags);
  tour->add_option("--grid", grid, "Grid size NxM over v and w");
  tour->add_option("--blocks", blocks, "Blocks per pairing")->check(CLI::PositiveNumber);
  tour->add_option("--profile", profile, "Restrict to one profile (default: tails 2,4,6,8,10)");
  tour->add_flag("--sampled-votes", sampled, "Count sampled ballots instead of expected votes");

  std::string mech_a;
  std::string mech_b;
  int shuffles = 10000;
  auto* ev = app.add_subcommand("evaluate", "Head-to-head election between two mechanisms");
  add_common(ev, common);
  add_players(ev, players_flags);
  ev->add_option("--mech-a", mech_a, "Mechanism A (JSON, name, v=..,w=.., or file)");
  ev->add_option("--mech-b", mech_b, "Mechanism B");
  ev->add_option("--blocks", blocks, "Blocks")->check(CLI::PositiveNumber);
  ev->add_option("--profile", profile, "Restrict to one profile");
  ev->add_flag("--sampled-votes", sampled, "Count sampled ballots instead of expected votes");
  ev->add_option("--corpus", corpus, "Fit the vote regression on recorded sessions instead")->check(CLI::ExistingFile);
  ev->add_option("--shuffles", shuffles, "Permutation-test shuffles")->check(CLI::PositiveNumber);

  int resolution = 11;
  auto* bp = app.add_subcommand("beach-plot", "Head payout fraction over relative contributions");
  add_common(bp, common);
  bp->add_option("--mech-a", mech_a, "Mechanism to plot");
  bp->add_option("--profile", profile, "Endowment profile (default 10,4,4,4)");
  bp->add_option("--resolution", resolution, "Bins per axis")->check(CLI::Range(2, 101));

  int embed_grid = 10;
  int embed_blocks = 64;
  auto* em = app.add_subcommand("embed", "MDS embedding of the (v, w) manifold");
  add_common(em, common);
  add_players(em, players_flags);
  em->add_option("--profile", profile, "Endowment profile (default 10,4,4,4)");
  em->add_option("--grid", embed_grid, "Points per axis")->check(CLI::Range(2, 50));
  em->add_option("--blocks", embed_blocks, "Blocks per mechanism")->check(CLI::PositiveNumber);

  int port = 8080;
  std::string host = "127.0.0.1";
  std::string base_dir = ".";
  auto* sv = app.add_subcommand("serve", "Run the live session service");
  add_players(sv, players_flags);
  sv->add_option("--serve-port", port, "TCP port")->check(CLI::Range(1, 65535));
  sv->add_option("--host", host, "Bind address");
  sv->add_option("--base-dir", base_dir, "Directory for relative designer weight paths");

  int export_episodes = 1;
  bool order_flag = false;
  auto* ex = app.add_subcommand("export", "Simulate sessions and write episode JSONL");
  add_common(ex, common);
  add_players(ex, players_flags);
  ex->add_option("--mech-a", mech_a, "Mechanism A");
  ex->add_option("--mech-b", mech_b, "Mechanism B");
  ex->add_option("--profile", profile, "Endowment profile");
  ex->add_option("--episodes", export_episodes, "Sessions to simulate")->check(CLI::PositiveNumber);
  ex->add_flag("--order-flag", order_flag, "Play B in block 2 and A in block 3");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*gen) return gen_corpus(common, episodes, mix);
    if (*tp) return train_players(common, corpus, updates, batch);
    if (*td) return train_designer(common, players_flags.model, updates, per_profile, history);
    if (*tour) return tournament(common, players_flags, grid, blocks, profile, sampled);
    if (*ev) return evaluate(common, players_flags, mech_a, mech_b, blocks, profile, sampled, corpus, shuffles);
    if (*bp) return beach(common, mech_a, profile, resolution);
    if (*em) return embed(common, players_flags, profile, embed_grid, embed_blocks);
    if (*sv) return serve(players_flags, port, host, base_dir);
    if (*ex) return export_sessions(common, players_flags, mech_a, mech_b, profile, export_episodes, order_flag);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kUsageError;
}
