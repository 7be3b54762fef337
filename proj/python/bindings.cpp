// Structured values cross the boundary as JSON text; redistlab/__init__.py
// converts them to and from Python objects.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "redist/arena/analysis.hpp"
#include "redist/arena/metrics.hpp"
#include "redist/arena/tournament.hpp"
#include "redist/designer/training.hpp"
#include "redist/players/corpus.hpp"
#include "redist/players/imitation.hpp"
#include "redist/players/rational.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace redist;

namespace {

PlayerVector to_vector(const std::vector<double>& v) {
  if (v.size() != kPlayers) throw std::invalid_argument("expected 4 values");
  return {v[0], v[1], v[2], v[3]};
}

std::shared_ptr<const players::VirtualPlayerModel> load_model(const std::string& text) {
  if (text.empty()) return nullptr;
  return std::make_shared<const players::VirtualPlayerModel>(players::VirtualPlayerModel::from_json(json::parse(text)));
}

arena::PlayerSource player_source(const std::string& model) {
  auto m = load_model(model);
  return m ? arena::PlayerSource::virtual_players(std::move(m)) : arena::PlayerSource::rational_players();
}

std::vector<EpisodeRecord> parse_episodes(const std::string& text) {
  std::vector<EpisodeRecord> out;
  for (const auto& e : json::parse(text)) out.push_back(episode_from_json(e));
  return out;
}

std::string episodes_json(const std::vector<EpisodeRecord>& episodes) {
  json out = json::array();
  for (const auto& e : episodes) out.push_back(to_json(e));
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_redist, m) {
  m.doc() = "Native core of redistlab";
  m.attr("GROWTH") = kGrowth;
  m.attr("PLAYERS") = kPlayers;

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  m.def("manifold_payout", [](double v, double w, const std::vector<double>& e, const std::vector<double>& c) {
    const auto y = manifold_payout(ManifoldParams{v, w}, to_vector(e), to_vector(c));
    return std::vector<double>(y.begin(), y.end());
  });
  m.def("mechanism_payout",
        [](const std::string& spec, const std::vector<double>& e, const std::vector<double>& c) {
          const auto y = make_mechanism(json::parse(spec))->payouts(to_vector(e), to_vector(c));
          return std::vector<double>(y.begin(), y.end());
        },
        py::arg("spec"), py::arg("endowments"), py::arg("contributions"));
  m.def("gini", [](const std::vector<double>& x) { return arena::gini(x); });
  m.def("vote_probability", &vote_probability, py::arg("rpay_a"), py::arg("rpay_b"), py::arg("slope") = 1.4);
  m.def("rational_step",
        [](double learning_rate, double generosity, const std::vector<double>& e, int seat,
           const std::vector<double>& c, const std::string& spec) {
          const auto s = players::rational_player_step({learning_rate, generosity}, to_vector(e), seat, to_vector(c),
                                                       *make_mechanism(json::parse(spec)));
          return s.generosity;
        });

  m.def("run_session",
        [](const std::vector<double>& profile, const std::string& mech_a, const std::string& mech_b, bool order_flag,
           std::uint64_t seed, const std::string& model) {
          const EndowmentProfile p(to_vector(profile));
          const auto m = load_model(model);
          std::array<std::unique_ptr<PlayerPolicy>, kPlayers> owned;
          SeatPlayers seats{};
          for (int i = 0; i < kPlayers; ++i) {
            if (m) {
              owned[static_cast<std::size_t>(i)] = std::make_unique<players::VirtualPlayer>(m);
            } else {
              owned[static_cast<std::size_t>(i)] = std::make_unique<players::RationalPlayer>();
            }
            seats[static_cast<std::size_t>(i)] = owned[static_cast<std::size_t>(i)].get();
          }
          py::gil_scoped_release release;
          const auto ep = redist::run_session(p, seats, make_mechanism(json::parse(mech_a)),
                                              make_mechanism(json::parse(mech_b)), order_flag, VoteModel{}, seed);
          return to_json(ep).dump();
        });

  m.def("generate_corpus", [](const std::string& config) {
    const auto cfg = players::CorpusConfig::from_json(json::parse(config));
    py::gil_scoped_release release;
    return episodes_json(players::generate_corpus(cfg));
  });

  m.def("train_players", [](const std::string& episodes, const std::string& config, std::uint64_t seed) {
    const auto corpus = parse_episodes(episodes);
    const auto cfg = players::ImitationConfig::from_json(json::parse(config));
    py::gil_scoped_release release;
    const auto r = players::train_virtual_players(corpus, cfg, seed);
    return json{{"model", r.model.to_json()},
                {"validation_ce", r.validation_ce},
                {"uniform_ce", r.uniform_ce},
                {"best_update", r.best_update},
                {"training_loss", r.training_loss}}
        .dump();
  });

  m.def("train_designer", [](const std::string& model, const std::string& config, std::uint64_t seed) {
    const auto players_model = load_model(model);
    if (!players_model) throw std::invalid_argument("a virtual player model is required");
    const auto cfg = designer::TrainingConfig::from_json(json::parse(config));
    py::gil_scoped_release release;
    const auto r = designer::train_designer(*players_model, cfg, seed);
    json history = json::array();
    for (const auto& s : r.history) history.push_back({{"update", s.update}, {"surrogate", s.surrogate}, {"vote_share", s.vote_share}});
    return json{{"policy", r.net.to_json()}, {"history", history}}.dump();
  });

  m.def("designer_weights", [](const std::string& policy, const std::vector<double>& e, const std::vector<double>& c) {
    const auto net = designer::GraphNet::from_json(json::parse(policy));
    const auto w = net.forward(designer::build_observation(to_vector(e), to_vector(c)));
    return std::vector<double>(w.begin(), w.end());
  });

  m.def("head_to_head",
        [](const std::string& a, const std::string& b, int blocks, std::uint64_t seed, const std::string& model) {
          const auto ma = make_mechanism(json::parse(a));
          const auto mb = make_mechanism(json::parse(b));
          const auto source = player_source(model);
          py::gil_scoped_release release;
          return arena::to_json(arena::head_to_head(*ma, *mb, source, blocks, seed)).dump();
        });

  m.def("run_metagame", [](const std::string& grid, int blocks, std::uint64_t seed, const std::string& model) {
    std::vector<json> specs = json::parse(grid).get<std::vector<json>>();
    if (specs.empty()) specs = arena::default_grid();
    const auto source = player_source(model);
    py::gil_scoped_release release;
    return arena::to_json(arena::run_metagame(specs, source, blocks, seed)).dump();
  });

  m.def("beach_plot", [](const std::string& spec, const std::vector<double>& profile, int resolution) {
    return arena::to_json(arena::beach_plot(*make_mechanism(json::parse(spec)), EndowmentProfile(to_vector(profile)),
                                            resolution))
        .dump();
  });

  m.def("classical_mds", [](const Eigen::MatrixXd& distances, int dims) {
    const auto r = arena::classical_mds(distances, dims);
    return py::make_tuple(r.coordinates, r.eigenvalues, r.degenerate);
  });
  m.def("pairwise_distances", &arena::pairwise_distances);

  m.def("fit_vote_regression", [](const std::string& episodes) {
    std::vector<arena::VoteObservation> votes;
    int group = 0;
    for (const auto& ep : parse_episodes(episodes)) {
      const auto obs = arena::vote_observations(ep, group++);
      votes.insert(votes.end(), obs.begin(), obs.end());
    }
    return arena::to_json(arena::fit_vote_regression(votes)).dump();
  });
}
