#include "dlbs/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "dlbs/parallel.hpp"
#include "dlbs/rng.hpp"

namespace dlbs {

namespace {

std::string direction_key(const Eigen::VectorXd& w) {
  // Scale-equivalent vectors share the exact ratios w_i / max(w), so the
  // byte image of those quotients is a class key.
  const double wmax = w.maxCoeff();
  std::string key(static_cast<std::size_t>(w.size()) * sizeof(double), '\0');
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double q = w[i] / wmax;
    std::memcpy(&key[static_cast<std::size_t>(i) * sizeof(double)], &q,
                sizeof(double));
  }
  return key;
}

double mean_of(const Eigen::VectorXd& v) { return v.mean(); }

}  // namespace

void validate(const CalibrationDataset& data) {
  const Eigen::Index n = data.metrics.rows();
  if (n < 3) throw std::invalid_argument("calibration needs at least 3 rows");
  if (data.metrics.cols() < 1) {
    throw std::invalid_argument("calibration needs at least one metric");
  }
  if (data.feedback.size() != n) {
    throw std::invalid_argument("metrics/feedback row count mismatch");
  }
  if (!data.metrics.allFinite() || !data.feedback.allFinite()) {
    throw std::invalid_argument("calibration data must be finite");
  }
  if (!data.metric_names.empty() &&
      static_cast<Eigen::Index>(data.metric_names.size()) !=
          data.metrics.cols()) {
    throw std::invalid_argument("metric name count mismatch");
  }
}

double combine(const Eigen::VectorXd& metric_row, const Eigen::VectorXd& w) {
  if (metric_row.size() != w.size()) {
    throw std::invalid_argument("combine dimension mismatch");
  }
  const double total = w.sum();
  if (total <= 0.0) throw std::domain_error("weights must not all be zero");
  return w.dot(metric_row) / total;
}

double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.size();
  if (n < 3) throw std::invalid_argument("pearson needs at least 3 points");
  if (y.size() != n) throw std::invalid_argument("pearson length mismatch");
  const Eigen::VectorXd dx = x.array() - mean_of(x);
  const Eigen::VectorXd dy = y.array() - mean_of(y);
  const double sx = dx.squaredNorm();
  const double sy = dy.squaredNorm();
  if (sx == 0.0 || sy == 0.0) {
    throw std::domain_error("pearson undefined for zero-variance input");
  }
  return dx.dot(dy) / std::sqrt(sx * sy);
}

CalibrationOutcome calibrate(const CalibrationDataset& data,
                             const std::vector<double>& grid,
                             std::vector<CalibrationCandidate>* table,
                             int workers) {
  validate(data);
  std::vector<double> values = grid;
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  if (values.empty()) throw std::invalid_argument("empty weight grid");
  for (const double g : values) {
    if (!(g >= 0.0) || !std::isfinite(g)) {
      throw std::invalid_argument("grid values must be finite and >= 0");
    }
  }
  const int M = static_cast<int>(data.metrics.cols());
  const std::size_t G = values.size();
  double combos = 1.0;
  for (int i = 0; i < M; ++i) combos *= double(G);
  if (combos > 5e7) throw std::invalid_argument("weight grid too large");
  const std::size_t total = static_cast<std::size_t>(combos);

  // Lexicographic enumeration, first metric slowest. Scale-equivalent
  // vectors collapse onto their first (smallest) member.
  std::vector<Eigen::VectorXd> reps;
  std::unordered_set<std::string> seen;
  Eigen::VectorXd w(M);
  for (std::size_t combo = 0; combo < total; ++combo) {
    std::size_t rest = combo;
    for (int i = M - 1; i >= 0; --i) {
      w[i] = values[rest % G];
      rest /= G;
    }
    if (w.sum() <= 0.0) continue;
    if (seen.insert(direction_key(w)).second) reps.push_back(w);
  }
  if (reps.empty()) throw std::invalid_argument("grid admits no nonzero weights");

  std::vector<double> corr(reps.size(),
                           std::numeric_limits<double>::quiet_NaN());
  parallel_for(reps.size(), workers, [&](std::size_t i) {
    const Eigen::VectorXd scores =
        (data.metrics * reps[i]) / reps[i].sum();
    const double sx = (scores.array() - scores.mean()).matrix().squaredNorm();
    if (sx == 0.0) return;  // degenerate candidate: skipped
    corr[i] = pearson(scores, data.feedback);
  });

  int best = -1;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    if (std::isnan(corr[i])) continue;
    if (best < 0 || corr[i] > corr[static_cast<std::size_t>(best)]) {
      best = static_cast<int>(i);
    }
  }
  if (best < 0) {
    throw std::runtime_error(
        "calibration failed: every candidate combination is degenerate");
  }

  if (table) {
    table->clear();
    for (std::size_t i = 0; i < reps.size(); ++i) {
      if (std::isnan(corr[i])) continue;
      table->push_back(CalibrationCandidate{reps[i], corr[i]});
    }
    std::stable_sort(table->begin(), table->end(),
                     [](const CalibrationCandidate& a,
                        const CalibrationCandidate& b) {
                       return a.correlation > b.correlation;
                     });
  }
  return CalibrationOutcome{reps[static_cast<std::size_t>(best)],
                            corr[static_cast<std::size_t>(best)]};
}

double significance(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                    int resamples, std::uint64_t seed) {
  if (resamples < 1) throw std::invalid_argument("resamples must be >= 1");
  const double observed = std::abs(pearson(x, y));
  const Eigen::Index n = y.size();
  Eigen::VectorXd shuffled = y;
  int hits = 0;
  for (int rep = 0; rep < resamples; ++rep) {
    RandomStream stream(seed, StreamPurpose::kShuffle,
                        static_cast<uint32_t>(rep), 0, 0);
    shuffled = y;
    for (Eigen::Index i = n - 1; i > 0; --i) {
      const Eigen::Index j = static_cast<Eigen::Index>(
          stream.below(static_cast<uint64_t>(i) + 1));
      std::swap(shuffled[i], shuffled[j]);
    }
    if (std::abs(pearson(x, shuffled)) >= observed) ++hits;
  }
  return (1.0 + hits) / (resamples + 1.0);
}

double paired_sign_flip_p(const std::vector<double>& diffs, int resamples,
                          std::uint64_t seed) {
  if (diffs.empty()) throw std::invalid_argument("no paired differences");
  if (resamples < 1) throw std::invalid_argument("resamples must be >= 1");
  double observed = 0.0;
  for (const double d : diffs) observed += d;
  observed /= double(diffs.size());
  int hits = 0;
  for (int rep = 0; rep < resamples; ++rep) {
    RandomStream stream(seed, StreamPurpose::kShuffle,
                        static_cast<uint32_t>(rep), 1, 0);
    double flipped = 0.0;
    for (const double d : diffs) {
      flipped += stream.below(2) == 0 ? d : -d;
    }
    flipped /= double(diffs.size());
    if (flipped >= observed) ++hits;
  }
  return (1.0 + hits) / (resamples + 1.0);
}

CalibrationDataset load_calibration_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
  auto split = [](const std::string& text) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(text);
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
        cell.pop_back();
      }
      std::size_t start = 0;
      while (start < cell.size() && cell[start] == ' ') ++start;
      cells.push_back(cell.substr(start));
    }
    return cells;
  };
  const std::vector<std::string> header = split(line);
  if (header.size() < 2 || header.back() != "feedback") {
    throw std::runtime_error(path + ": header must end with a feedback column");
  }
  const std::size_t M = header.size() - 1;

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(header.size()) +
                               " columns, got " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& cell : cells) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cell.size() || cell.empty()) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": bad number '" + cell + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }

  CalibrationDataset data;
  data.metric_names.assign(header.begin(), header.end() - 1);
  data.metrics.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(M));
  data.feedback.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < M; ++c) {
      data.metrics(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
    }
    data.feedback[static_cast<Eigen::Index>(r)] = rows[r][M];
  }
  return data;
}

}  // namespace dlbs
