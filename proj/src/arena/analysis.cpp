#include "redist/arena/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace redist::arena {

// Beach plots -----------------------------------------------------------------

BeachPlot beach_plot(const Mechanism& mechanism, const EndowmentProfile& profile, int resolution) {
  if (resolution < 2) throw std::invalid_argument("beach plot resolution must be at least 2");
  const auto res = static_cast<std::size_t>(resolution);
  const PlayerVector& e = profile.endowments();
  const int head = profile.head();
  std::array<int, 3> tails{};
  for (int k = 0, n = 0; k < kPlayers; ++k)
    if (k != head) tails[static_cast<std::size_t>(n++)] = k;

  std::vector<std::vector<double>> sum(res, std::vector<double>(res, 0.0));
  std::vector<std::vector<int>> paid(res, std::vector<int>(res, 0));
  BeachPlot plot;
  plot.resolution = resolution;
  plot.samples.assign(res, std::vector<int>(res, 0));
  const auto bin = [&](double ratio) { return static_cast<std::size_t>(std::lround(ratio * (resolution - 1))); };
  const auto endow = [&](int seat) { return static_cast<int>(e[static_cast<std::size_t>(seat)]); };

  PlayerVector c{};
  for (int ch = 0; ch <= endow(head); ++ch) {
    for (int c1 = 0; c1 <= endow(tails[0]); ++c1) {
      for (int c2 = 0; c2 <= endow(tails[1]); ++c2) {
        for (int c3 = 0; c3 <= endow(tails[2]); ++c3) {
          c[static_cast<std::size_t>(head)] = ch;
          c[static_cast<std::size_t>(tails[0])] = c1;
          c[static_cast<std::size_t>(tails[1])] = c2;
          c[static_cast<std::size_t>(tails[2])] = c3;
          double tail_ratio = 0.0;
          for (int t : tails) tail_ratio += c[static_cast<std::size_t>(t)] / e[static_cast<std::size_t>(t)] / 3.0;
          const std::size_t i = bin(ch / e[static_cast<std::size_t>(head)]);
          const std::size_t j = bin(tail_ratio);
          ++plot.samples[i][j];
          if (ch + c1 + c2 + c3 == 0) continue;
          const PlayerVector y = mechanism.payouts(e, c);
          double total = 0.0;
          for (double v : y) total += v;
          sum[i][j] += y[static_cast<std::size_t>(head)] / total;
          ++paid[i][j];
        }
      }
    }
  }
  plot.head_fraction.assign(res, std::vector<double>(res, std::numeric_limits<double>::quiet_NaN()));
  plot.empty_pool.assign(res, std::vector<bool>(res, false));
  for (std::size_t i = 0; i < res; ++i) {
    for (std::size_t j = 0; j < res; ++j) {
      if (paid[i][j] > 0) {
        plot.head_fraction[i][j] = sum[i][j] / paid[i][j];
      } else if (plot.samples[i][j] > 0) {
        plot.head_fraction[i][j] = 1.0 / kPlayers;
        plot.empty_pool[i][j] = true;
      }
    }
  }
  return plot;
}

std::string beach_csv(const BeachPlot& plot) {
  std::ostringstream out;
  out.precision(17);
  out << "head_bin";
  for (int j = 0; j < plot.resolution; ++j) out << ",tail_" << j;
  out << '\n';
  for (int i = 0; i < plot.resolution; ++i) {
    out << i;
    for (int j = 0; j < plot.resolution; ++j) {
      const double v = plot.head_fraction[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      out << ',';
      if (!std::isnan(v)) out << v;
    }
    out << '\n';
  }
  return out.str();
}

std::string beach_pgm(const BeachPlot& plot) {
  std::ostringstream out;
  out << "P2\n" << plot.resolution << ' ' << plot.resolution << "\n255\n";
  for (int i = plot.resolution - 1; i >= 0; --i) {
    for (int j = 0; j < plot.resolution; ++j) {
      const double v = plot.head_fraction[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      out << (j ? " " : "") << (std::isnan(v) ? 0 : static_cast<int>(std::lround(255.0 * v)));
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const BeachPlot& plot) {
  nlohmann::json values = nlohmann::json::array();
  for (const auto& row : plot.head_fraction) {
    nlohmann::json r = nlohmann::json::array();
    for (double v : row) r.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    values.push_back(r);
  }
  return {{"resolution", plot.resolution},
          {"head_fraction", values},
          {"empty_pool", plot.empty_pool},
          {"samples", plot.samples}};
}

// Classical MDS ---------------------------------------------------------------

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) d(i, j) = (points.row(i) - points.row(j)).norm();
  return d;
}

MdsResult classical_mds(const Eigen::MatrixXd& distances, int dims) {
  const Eigen::Index n = distances.rows();
  if (distances.cols() != n || n < 1) throw std::invalid_argument("classical_mds: distance matrix must be square");
  if (dims < 1 || dims > n) throw std::invalid_argument("classical_mds: bad target dimension");
  const double scale = distances.cwiseAbs().maxCoeff();
  if (!((distances - distances.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, scale))) {
    throw std::invalid_argument("classical_mds: distance matrix is not symmetric");
  }
  MdsResult out;
  out.coordinates = Eigen::MatrixXd::Zero(n, dims);
  out.eigenvalues = Eigen::VectorXd::Zero(dims);
  if (scale == 0.0) {
    out.degenerate = true;
    return out;
  }
  const Eigen::MatrixXd centring =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  const Eigen::MatrixXd gram = -0.5 * centring * distances.cwiseProduct(distances) * centring;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) throw std::runtime_error("classical_mds: eigensolver failed");
  // Eigenvalues come in increasing order.
  for (int k = 0; k < dims; ++k) {
    const Eigen::Index idx = n - 1 - k;
    const double lambda = std::max(0.0, solver.eigenvalues()(idx));
    Eigen::VectorXd v = solver.eigenvectors().col(idx);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.eigenvalues(k) = lambda;
    out.coordinates.col(k) = v * std::sqrt(lambda);
  }
  return out;
}

namespace {

// Per-round head and mean-tail relative payouts averaged over blocks.
Eigen::VectorXd mechanism_features(const Mechanism& mech, const PlayerSource& source, const EndowmentProfile& profile,
                                   int blocks, std::uint64_t seed) {
  const PlayerVector& e = profile.endowments();
  const int head = profile.head();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(2 * kBlockRounds);
  const auto add_round = [&](int t, const PlayerVector& y) {
    double tail = 0.0;
    for (int k = 0; k < kPlayers; ++k) {
      if (k == head) continue;
      tail += y[static_cast<std::size_t>(k)] / e[static_cast<std::size_t>(k)] / (kPlayers - 1);
    }
    f(2 * t) += y[static_cast<std::size_t>(head)] / e[static_cast<std::size_t>(head)] / blocks;
    f(2 * t + 1) += tail / blocks;
  };
  const Rng root(seed);
  if (source.kind == PlayerSource::Kind::kRational) {
    std::array<players::RationalPlayer, kPlayers> seats{players::RationalPlayer(source.rational),
                                                        players::RationalPlayer(source.rational),
                                                        players::RationalPlayer(source.rational),
                                                        players::RationalPlayer(source.rational)};
    SeatPlayers ptrs{&seats[0], &seats[1], &seats[2], &seats[3]};
    for (int n = 0; n < blocks; ++n) {
      const BlockRecord b = run_block(profile, ptrs, mech, kBlockRounds, root.derive(static_cast<std::uint64_t>(n)).seed());
      for (int t = 0; t < kBlockRounds; ++t) add_round(t, b.rounds[static_cast<std::size_t>(t)].payouts);
    }
    return f;
  }
  nn::Tensor et(static_cast<std::size_t>(blocks), kPlayers);
  std::vector<Rng> streams;
  for (int n = 0; n < blocks; ++n) {
    for (std::size_t k = 0; k < kPlayers; ++k) et(static_cast<std::size_t>(n), k) = e[k];
    streams.push_back(root.derive(static_cast<std::uint64_t>(n)));
  }
  nn::Graph g;
  const nn::BoundParams frozen = nn::bind_frozen(g, source.model->params());
  const auto fn = [&mech](nn::Graph& gr, const nn::Tensor& ev, const nn::Tensor& c) {
    return mech.payouts(gr, ev, gr.constant(c));
  };
  const auto roll = players::rollout_batch(g, *source.model, frozen, et, fn, kBlockRounds, streams);
  for (int t = 0; t < kBlockRounds; ++t) {
    const nn::Tensor& y = roll.payouts[static_cast<std::size_t>(t)].value();
    for (int n = 0; n < blocks; ++n) {
      PlayerVector row{};
      for (std::size_t k = 0; k < kPlayers; ++k) row[k] = y(static_cast<std::size_t>(n), k);
      add_round(t, row);
    }
  }
  return f;
}

}  // namespace

ManifoldEmbedding manifold_embedding(const PlayerSource& players, const EndowmentProfile& profile, int grid,
                                     int blocks_per_mechanism, std::uint64_t seed) {
  if (grid < 2 || blocks_per_mechanism < 1) throw std::invalid_argument("manifold_embedding: bad grid or block count");
  ManifoldEmbedding out;
  out.features = Eigen::MatrixXd(grid * grid, 2 * kBlockRounds);
  int row = 0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j, ++row) {
      const double v = static_cast<double>(i) / (grid - 1);
      const double w = static_cast<double>(j) / (grid - 1);
      out.params.push_back({v, w});
      out.features.row(row) = mechanism_features(*make_manifold(v, w), players, profile, blocks_per_mechanism, seed);
    }
  }
  out.mds = classical_mds(pairwise_distances(out.features), 2);
  return out;
}

nlohmann::json to_json(const ManifoldEmbedding& emb) {
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < emb.params.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    points.push_back({{"v", emb.params[i][0]},
                      {"w", emb.params[i][1]},
                      {"x", emb.mds.coordinates(r, 0)},
                      {"y", emb.mds.coordinates(r, 1)}});
  }
  return {{"points", points},
          {"eigenvalues", {emb.mds.eigenvalues(0), emb.mds.eigenvalues(1)}},
          {"degenerate", emb.mds.degenerate}};
}

std::string embedding_csv(const ManifoldEmbedding& emb) {
  std::ostringstream out;
  out.precision(17);
  out << "v,w,x,y\n";
  for (std::size_t i = 0; i < emb.params.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << emb.params[i][0] << ',' << emb.params[i][1] << ',' << emb.mds.coordinates(r, 0) << ','
        << emb.mds.coordinates(r, 1) << '\n';
  }
  return out.str();
}

// Vote regression -------------------------------------------------------------

std::vector<VoteObservation> vote_observations(const EpisodeRecord& episode, int group) {
  if (episode.blocks.size() < 3) throw std::invalid_argument("vote_observations: session lacks rival blocks");
  const BlockRecord& first = episode.blocks[1];
  const BlockRecord& second = episode.blocks[2];
  const auto totals = [](const BlockRecord& b) {
    PlayerVector y{};
    double c = 0.0;
    for (const auto& r : b.rounds) {
      for (std::size_t i = 0; i < kPlayers; ++i) {
        y[i] += r.payouts[i];
        c += r.contributions[i];
      }
    }
    return std::pair{y, c};
  };
  const auto [y1, c1] = totals(first);
  const auto [y2, c2] = totals(second);
  const PlayerVector r1 = first.relative_payouts();
  const PlayerVector r2 = second.relative_payouts();
  std::vector<VoteObservation> out;
  for (std::size_t i = 0; i < kPlayers; ++i) {
    const char v = episode.votes[i];
    if (v != 'A' && v != 'B') throw std::invalid_argument("vote_observations: session has no votes");
    out.push_back({v == first.mech.front(), r1[i] - r2[i], y1[i] - y2[i], c1 - c2, group});
  }
  return out;
}

VoteRegression fit_vote_regression(const std::vector<VoteObservation>& votes) {
  if (votes.size() < 50) throw std::invalid_argument("vote regression needs at least 50 votes");
  const auto n = static_cast<Eigen::Index>(votes.size());
  VoteRegression fit;
  fit.observations = static_cast<int>(n);

  Eigen::MatrixXd x(n, 4);
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& v = votes[static_cast<std::size_t>(r)];
    x.row(r) << 1.0, v.relative_payout, v.absolute_payout, v.contributions;
    y(r) = v.voted_first ? 1.0 : 0.0;
  }
  std::vector<Eigen::Index> active = {0};
  for (Eigen::Index k = 1; k < 4; ++k) {
    const double mean = x.col(k).mean();
    const double sd = std::sqrt((x.col(k).array() - mean).square().sum() / static_cast<double>(n - 1));
    fit.scaling[static_cast<std::size_t>(k - 1)] = {mean, sd};
    x.col(k).array() -= mean;
    if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
      x.col(k) /= sd;
      active.push_back(k);
    } else {
      x.col(k).setZero();
    }
  }
  const auto m = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd xa(n, m);
  for (Eigen::Index k = 0; k < m; ++k) xa.col(k) = x.col(active[static_cast<std::size_t>(k)]);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd info(m, m);
  constexpr int kMaxIterations = 200;
  constexpr double kDivergence = 30.0;
  for (fit.iterations = 0; fit.iterations < kMaxIterations; ++fit.iterations) {
    const Eigen::VectorXd eta = xa * beta;
    Eigen::VectorXd p(n);
    Eigen::VectorXd w(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      p(r) = vote_probability(eta(r), 0.0, 1.0);
      w(r) = p(r) * (1.0 - p(r));
    }
    const Eigen::VectorXd grad = xa.transpose() * (y - p);
    info = xa.transpose() * w.asDiagonal() * xa;
    fit.gradient_norm = grad.norm();
    if (fit.gradient_norm < 1e-8) break;
    if (beta.cwiseAbs().maxCoeff() > kDivergence) {
      fit.separated = true;
      break;
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      fit.separated = true;
      break;
    }
    beta += ldlt.solve(grad);
  }
  if (fit.iterations == kMaxIterations) fit.separated = true;

  const Eigen::MatrixXd cov = info.inverse();
  double ll = 0.0;
  const Eigen::VectorXd eta = xa * beta;
  for (Eigen::Index r = 0; r < n; ++r) {
    // log σ(η) and log(1 − σ(η)) without cancellation
    const double e = eta(r);
    const double log1pexp = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    ll += y(r) * e - log1pexp;
  }
  fit.log_likelihood = ll;
  fit.coef.fill(0.0);
  fit.std_error.fill(std::numeric_limits<double>::quiet_NaN());
  fit.z.fill(0.0);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto idx = static_cast<std::size_t>(active[static_cast<std::size_t>(k)]);
    fit.coef[idx] = beta(k);
    fit.std_error[idx] = std::sqrt(cov(k, k));
    fit.z[idx] = beta(k) / fit.std_error[idx];
  }
  return fit;
}

nlohmann::json to_json(const VoteRegression& fit) {
  nlohmann::json terms = nlohmann::json::array();
  for (std::size_t k = 0; k < 4; ++k) {
    const double se = fit.std_error[k];
    terms.push_back({{"term", kRegressionTerms[k]},
                     {"coef", fit.coef[k]},
                     {"std_error", std::isnan(se) ? nlohmann::json(nullptr) : nlohmann::json(se)},
                     {"z", fit.z[k]}});
  }
  return {{"terms", terms},
          {"observations", fit.observations},
          {"iterations", fit.iterations},
          {"gradient_norm", fit.gradient_norm},
          {"log_likelihood", fit.log_likelihood},
          {"separated", fit.separated}};
}

double group_permutation_test(const std::vector<std::array<bool, kPlayers>>& groups, int shuffles,
                              std::uint64_t seed) {
  if (groups.empty() || shuffles < 1) throw std::invalid_argument("permutation test needs groups and shuffles");
  std::vector<int> counts;
  int observed = 0;
  for (const auto& g : groups) {
    int k = 0;
    for (bool v : g) k += v;
    counts.push_back(k);
    observed += k;
  }
  const double centre = 2.0 * static_cast<double>(groups.size());
  const double deviation = std::abs(observed - centre);
  Rng rng(seed);
  int extreme = 0;
  for (int s = 0; s < shuffles; ++s) {
    int total = 0;
    for (int k : counts) total += rng.bernoulli(0.5) ? kPlayers - k : k;
    if (std::abs(total - centre) >= deviation - 1e-12) ++extreme;
  }
  return (1.0 + extreme) / (1.0 + shuffles);
}

}  // namespace redist::arena
