#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dlbs/oracle.hpp"

namespace dlbs {

// F frames of d values each, one frame per row. value_range is the
// full-scale value span (255 for pixel data, 1 for toy data).
struct FrameSequence {
  Eigen::MatrixXd frames;
  double value_range = 1.0;
};

// Stand-in for pretrained perceptual backbones. All outputs are unit-norm;
// implementations must be pure.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual Eigen::VectorXd embed(const Eigen::VectorXd& frame) const = 0;
  virtual Eigen::VectorXd embed_video(const Eigen::MatrixXd& frames) const = 0;
  virtual Eigen::VectorXd embed_text(const std::string& condition) const = 0;
};

// Normalizes the raw frame; video embedding is the normalized mean of frame
// embeddings; text embeddings are seeded unit vectors derived from the
// condition string.
class IdentityNormalizeExtractor final : public FeatureExtractor {
 public:
  explicit IdentityNormalizeExtractor(int dim);
  Eigen::VectorXd embed(const Eigen::VectorXd& frame) const override;
  Eigen::VectorXd embed_video(const Eigen::MatrixXd& frames) const override;
  Eigen::VectorXd embed_text(const std::string& condition) const override;

 private:
  int dim_;
};

// Fixed seeded random projection into out_dim dimensions, then normalize.
class ProjectionExtractor final : public FeatureExtractor {
 public:
  ProjectionExtractor(int in_dim, int out_dim, std::uint64_t seed);
  Eigen::VectorXd embed(const Eigen::VectorXd& frame) const override;
  Eigen::VectorXd embed_video(const Eigen::MatrixXd& frames) const override;
  Eigen::VectorXd embed_text(const std::string& condition) const override;

 private:
  Eigen::MatrixXd projection_;
  std::uint64_t seed_;
};

struct MetricVector {
  std::vector<double> values;
  std::vector<std::string> names;
};

using Interpolator =
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
using Flow =
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
using FrameScorer = std::function<double(const Eigen::VectorXd&)>;

Eigen::VectorXd midpoint_interpolator(const Eigen::VectorXd& prev,
                                      const Eigen::VectorXd& next);
Eigen::VectorXd difference_flow(const Eigen::VectorXd& from,
                                const Eigen::VectorXd& to);

// Mean over t = 2..F of the half-sum of cosine similarities to the first
// and to the previous frame's embedding.
double subject_consistency(const FrameSequence& seq,
                           const FeatureExtractor& fx);

// Drop odd-indexed frames, reconstruct them with the interpolator, score
// 1 - MAE / value_range. F must be odd and >= 3.
double motion_smoothness(const FrameSequence& seq,
                         const Interpolator& interpolator = midpoint_interpolator);

// log(max(sum of flow norms, 1e-8)) / 16.
double dynamic_degree(const FrameSequence& seq,
                      const Flow& flow = difference_flow);

// Mean of scorer(frame) / scale; out-of-range scores are clamped and a
// warning is appended to *warnings when provided.
double per_frame_quality(const FrameSequence& seq, const FrameScorer& scorer,
                         double scale,
                         std::vector<std::string>* warnings = nullptr);

// Cosine similarity between the video embedding of an 8-frame uniform-stride
// subsample (indices floor(i*F/8); all frames when F <= 8) and the text
// embedding of the condition.
double text_video_consistency(const FrameSequence& seq,
                              const std::string& condition,
                              const FeatureExtractor& fx);

std::vector<int> subsample_indices(int F, int count);

struct MetricEntry {
  std::string name;
  std::function<double(const FrameSequence&, const std::string&)> fn;
};
using MetricRegistry = std::vector<MetricEntry>;

// Evaluates every registered metric in declared order; member errors are
// rethrown tagged with the metric name.
MetricVector metric_vector(const FrameSequence& seq,
                           const std::string& condition,
                           const MetricRegistry& registry);

// The six standard metrics, in order: subject_consistency,
// motion_smoothness, dynamic_degree, aesthetic_quality, imaging_quality,
// text_video_consistency. The extractor must outlive the registry; the two
// quality scorers are bounded squashes standing in for learned models.
MetricRegistry default_registry(const FeatureExtractor& fx);

enum class TestbedRewardKind { kModeDistance, kComponentPreference, kLinear };

TestbedRewardKind testbed_reward_kind_from_string(const std::string& name);
std::string to_string(TestbedRewardKind kind);

struct TestbedRewardSpec {
  TestbedRewardKind kind = TestbedRewardKind::kModeDistance;
  Eigen::VectorXd target;      // mode_distance
  // When > 0, mode_distance is divided by 2 * region_radius, making it
  // 1-Lipschitz on the ball ||x - target|| <= region_radius.
  double region_radius = 0.0;
  GaussianMixture mixture;     // component_preference
  int component = 0;
  Eigen::VectorXd weights;     // linear
};

Reward testbed_reward(const TestbedRewardSpec& spec);

}  // namespace dlbs
