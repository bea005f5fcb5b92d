#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dlbs {

inline const std::vector<double> kDefaultWeightGrid = {0.0, 0.25, 0.5, 0.75,
                                                       1.0};

struct CalibrationDataset {
  Eigen::MatrixXd metrics;  // N x M
  Eigen::VectorXd feedback;  // N
  std::vector<std::string> metric_names;  // optional, M when present
};

void validate(const CalibrationDataset& data);

// Normalized weighted sum sum(w_i r_i) / sum(w_i); scale-invariant in w.
double combine(const Eigen::VectorXd& metric_row, const Eigen::VectorXd& w);

// Sample Pearson correlation; throws when either input has zero variance
// or N < 3.
double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct CalibrationOutcome {
  Eigen::VectorXd weights;
  double correlation = 0.0;
};

// One evaluated weight vector (an equivalence-class representative) and its
// correlation, for audit tables.
struct CalibrationCandidate {
  Eigen::VectorXd weights;
  double correlation = 0.0;
};

// Brute-force grid search maximizing pearson(combine, feedback). The grid is
// sorted ascending; vectors are enumerated lexicographically (first metric
// slowest) skipping the all-zero vector. Because combine is scale-invariant,
// only the lexicographically smallest member of each scale-equivalence class
// is evaluated, which also implements the documented tie rule. Candidates
// with zero-variance combined scores are skipped; if all are skipped, a
// calibration-failure error is thrown. When table is non-null it receives
// every evaluated candidate sorted by descending correlation.
CalibrationOutcome calibrate(const CalibrationDataset& data,
                             const std::vector<double>& grid = kDefaultWeightGrid,
                             std::vector<CalibrationCandidate>* table = nullptr,
                             int workers = 1);

// Two-sided permutation test for pearson(x, y): feedback is shuffled
// `resamples` times and p = (1 + #{|r_perm| >= |r_obs|}) / (resamples + 1).
// Deterministic given the seed.
double significance(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                    int resamples = 10000, std::uint64_t seed = 0);

// One-sided sign-flip permutation test on seed-matched differences:
// p = (1 + #{mean_perm >= mean_obs}) / (resamples + 1) against the
// alternative that the mean difference is positive.
double paired_sign_flip_p(const std::vector<double>& diffs,
                          int resamples = 10000, std::uint64_t seed = 0);

// CSV with a header of metric names followed by "feedback"; one sample per
// row.
CalibrationDataset load_calibration_csv(const std::string& path);

}  // namespace dlbs
