#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "redist/arena/tournament.hpp"

namespace redist::arena {

// Beach plots -----------------------------------------------------------------

/// Fraction of the pool paid to the head over (head c/e, mean tail c/e) bins.
/// Cell (i, j) holds head bin i and tail bin j, bin = round(ratio·(resolution − 1)).
struct BeachPlot {
  int resolution = 0;
  std::vector<std::vector<double>> head_fraction;
  std::vector<std::vector<bool>> empty_pool;  // only zero-pool contributions fell in the cell
  std::vector<std::vector<int>> samples;       // contribution profiles averaged in the cell
};

/// Enumerates every integer contribution profile under `profile`, averaging the
/// head's fraction of the payouts within each cell. Cells reached only by an
/// empty pool hold 1/4 and are flagged; cells reached by nothing hold NaN.
/// The head is the profile's head seat.
BeachPlot beach_plot(const Mechanism& mechanism, const EndowmentProfile& profile, int resolution = 11);

/// Rows are head bins from 0 upward; columns are tail bins.
std::string beach_csv(const BeachPlot& plot);
/// Plain PGM (P2), head bins increasing upward, 255 = all to the head.
std::string beach_pgm(const BeachPlot& plot);
nlohmann::json to_json(const BeachPlot& plot);

// Classical MDS ---------------------------------------------------------------

struct MdsResult {
  Eigen::MatrixXd coordinates;  // n × dims
  Eigen::VectorXd eigenvalues;  // top `dims` eigenvalues of the centred Gram matrix
  bool degenerate = false;      // all inputs coincide; every point is at the origin
};

/// Double-centres the squared distances, B = −½·J·D²·J, and embeds with the top
/// eigenpairs (negative eigenvalues clipped to zero). Throws std::invalid_argument
/// for a non-square or asymmetric matrix.
MdsResult classical_mds(const Eigen::MatrixXd& distances, int dims = 2);

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& points);

struct ManifoldEmbedding {
  std::vector<std::array<double, 2>> params;  // (v, w) per mechanism
  Eigen::MatrixXd features;  // per mechanism: per-round mean head and tail relative payout
  MdsResult mds;
};

/// Simulates a grid×grid lattice of (v, w) in [0, 1]² under `profile` and embeds the
/// 2·rounds relative-payout features in two dimensions.
ManifoldEmbedding manifold_embedding(const PlayerSource& players, const EndowmentProfile& profile, int grid,
                                     int blocks_per_mechanism, std::uint64_t seed);

nlohmann::json to_json(const ManifoldEmbedding& embedding);
std::string embedding_csv(const ManifoldEmbedding& embedding);

// Vote regression -------------------------------------------------------------

/// One voter's comparison of two experienced mechanisms; differences are
/// first minus second, aggregated over a block.
struct VoteObservation {
  bool voted_first = false;
  double relative_payout = 0.0;  // Σ y/e of the voter
  double absolute_payout = 0.0;  // Σ y of the voter
  double contributions = 0.0;    // Σ c over the whole group
  int group = 0;
};

inline const std::array<std::string, 4> kRegressionTerms = {"intercept", "relative_payout", "absolute_payout",
                                                            "contributions"};

struct VoteRegression {
  std::array<double, 4> coef{};  // on standardized predictors
  std::array<double, 4> std_error{};
  std::array<double, 4> z{};
  std::array<std::array<double, 2>, 3> scaling{};  // per predictor: mean and sd used for standardization
  int iterations = 0;
  double gradient_norm = 0.0;
  double log_likelihood = 0.0;
  bool separated = false;  // coefficients diverge; statistics are not meaningful
  int observations = 0;
};

/// Logistic regression by Newton ascent on the log-likelihood until the gradient
/// norm falls below 1e-8. Predictors are standardized first; a predictor with
/// zero variance is left centred at 0. Throws std::invalid_argument for fewer than 50 votes.
VoteRegression fit_vote_regression(const std::vector<VoteObservation>& votes);

/// The four voters' comparisons in one session; "first" is the mechanism played in block 2.
std::vector<VoteObservation> vote_observations(const EpisodeRecord& episode, int group);

nlohmann::json to_json(const VoteRegression& fit);

/// Group-level permutation test: under the null each group's four votes are
/// flipped together with probability ½. Returns the two-sided p-value of the
/// total votes for the first mechanism, (1 + #extreme) / (1 + shuffles).
double group_permutation_test(const std::vector<std::array<bool, kPlayers>>& groups, int shuffles,
                              std::uint64_t seed);

}  // namespace redist::arena
