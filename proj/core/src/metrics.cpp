#include "dlbs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dlbs/rng.hpp"

namespace dlbs {

namespace {

Eigen::VectorXd normalized(Eigen::VectorXd v) {
  const double n = v.norm();
  if (n == 0.0) throw std::domain_error("zero-norm embedding");
  return v / n;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

void check_frames(const FrameSequence& seq, int min_frames, const char* what) {
  if (seq.frames.rows() < min_frames) {
    throw std::invalid_argument(std::string(what) + " needs at least " +
                                std::to_string(min_frames) + " frames");
  }
  if (!seq.frames.allFinite()) {
    throw std::invalid_argument("frame values must be finite");
  }
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

IdentityNormalizeExtractor::IdentityNormalizeExtractor(int dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("extractor dim must be >= 1");
}

Eigen::VectorXd IdentityNormalizeExtractor::embed(
    const Eigen::VectorXd& frame) const {
  if (frame.size() != dim_) throw std::invalid_argument("frame dim mismatch");
  return normalized(frame);
}

Eigen::VectorXd IdentityNormalizeExtractor::embed_video(
    const Eigen::MatrixXd& frames) const {
  if (frames.rows() < 1) throw std::invalid_argument("empty frame set");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim_);
  for (Eigen::Index i = 0; i < frames.rows(); ++i) {
    mean += embed(frames.row(i).transpose());
  }
  return normalized(mean / double(frames.rows()));
}

Eigen::VectorXd IdentityNormalizeExtractor::embed_text(
    const std::string& condition) const {
  const std::uint64_t h = fnv1a(condition);
  RandomStream stream(h, StreamPurpose::kData, 0, 0, 0);
  return normalized(stream.normal_vector(dim_));
}

ProjectionExtractor::ProjectionExtractor(int in_dim, int out_dim,
                                         std::uint64_t seed)
    : seed_(seed) {
  if (in_dim < 1 || out_dim < 1) {
    throw std::invalid_argument("projection dims must be >= 1");
  }
  projection_.resize(out_dim, in_dim);
  RandomStream stream(seed, StreamPurpose::kData, 0, 0, 0);
  const double scale = 1.0 / std::sqrt(double(in_dim));
  for (int r = 0; r < out_dim; ++r) {
    for (int c = 0; c < in_dim; ++c) {
      projection_(r, c) = scale * stream.normal();
    }
  }
}

Eigen::VectorXd ProjectionExtractor::embed(const Eigen::VectorXd& frame) const {
  if (frame.size() != projection_.cols()) {
    throw std::invalid_argument("frame dim mismatch");
  }
  return normalized(projection_ * frame);
}

Eigen::VectorXd ProjectionExtractor::embed_video(
    const Eigen::MatrixXd& frames) const {
  if (frames.rows() < 1) throw std::invalid_argument("empty frame set");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(projection_.rows());
  for (Eigen::Index i = 0; i < frames.rows(); ++i) {
    mean += embed(frames.row(i).transpose());
  }
  return normalized(mean / double(frames.rows()));
}

Eigen::VectorXd ProjectionExtractor::embed_text(
    const std::string& condition) const {
  const std::uint64_t h = fnv1a(condition);
  RandomStream stream(seed_, StreamPurpose::kData,
                      static_cast<uint32_t>(h),
                      static_cast<uint32_t>(h >> 32), 1);
  return normalized(stream.normal_vector(projection_.rows()));
}

Eigen::VectorXd midpoint_interpolator(const Eigen::VectorXd& prev,
                                      const Eigen::VectorXd& next) {
  return 0.5 * (prev + next);
}

Eigen::VectorXd difference_flow(const Eigen::VectorXd& from,
                                const Eigen::VectorXd& to) {
  return to - from;
}

double subject_consistency(const FrameSequence& seq,
                           const FeatureExtractor& fx) {
  check_frames(seq, 2, "subject_consistency");
  const Eigen::Index F = seq.frames.rows();
  const Eigen::VectorXd first = fx.embed(seq.frames.row(0).transpose());
  Eigen::VectorXd prev = first;
  double total = 0.0;
  for (Eigen::Index t = 1; t < F; ++t) {
    const Eigen::VectorXd cur = fx.embed(seq.frames.row(t).transpose());
    total += 0.5 * (first.dot(cur) + prev.dot(cur));
    prev = cur;
  }
  return total / double(F - 1);
}

double motion_smoothness(const FrameSequence& seq,
                         const Interpolator& interpolator) {
  check_frames(seq, 3, "motion_smoothness");
  const Eigen::Index F = seq.frames.rows();
  if (F % 2 == 0) {
    throw std::invalid_argument("motion_smoothness needs an odd frame count");
  }
  if (seq.value_range <= 0.0) {
    throw std::invalid_argument("value_range must be positive");
  }
  double abs_err = 0.0;
  Eigen::Index terms = 0;
  for (Eigen::Index t = 1; t < F; t += 2) {
    const Eigen::VectorXd rebuilt = interpolator(
        seq.frames.row(t - 1).transpose(), seq.frames.row(t + 1).transpose());
    abs_err += (rebuilt - seq.frames.row(t).transpose()).cwiseAbs().sum();
    terms += seq.frames.cols();
  }
  const double mae = abs_err / double(terms);
  return std::max(0.0, 1.0 - mae / seq.value_range);
}

double dynamic_degree(const FrameSequence& seq, const Flow& flow) {
  check_frames(seq, 2, "dynamic_degree");
  double total = 0.0;
  for (Eigen::Index t = 0; t + 1 < seq.frames.rows(); ++t) {
    total += flow(seq.frames.row(t).transpose(),
                  seq.frames.row(t + 1).transpose())
                 .norm();
  }
  return std::log(std::max(total, 1e-8)) / 16.0;
}

double per_frame_quality(const FrameSequence& seq, const FrameScorer& scorer,
                         double scale, std::vector<std::string>* warnings) {
  check_frames(seq, 1, "per_frame_quality");
  if (scale <= 0.0) throw std::invalid_argument("scale must be positive");
  double total = 0.0;
  for (Eigen::Index t = 0; t < seq.frames.rows(); ++t) {
    double s = scorer(seq.frames.row(t).transpose());
    if (s < 0.0 || s > scale) {
      if (warnings) {
        warnings->push_back("frame " + std::to_string(t) +
                            " score out of [0, scale]; clamped");
      }
      s = std::clamp(s, 0.0, scale);
    }
    total += s / scale;
  }
  return total / double(seq.frames.rows());
}

std::vector<int> subsample_indices(int F, int count) {
  if (F < 1 || count < 1) throw std::invalid_argument("bad subsample shape");
  std::vector<int> idx;
  if (F <= count) {
    idx.reserve(static_cast<std::size_t>(F));
    for (int i = 0; i < F; ++i) idx.push_back(i);
    return idx;
  }
  idx.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    idx.push_back(static_cast<int>((static_cast<std::int64_t>(i) * F) / count));
  }
  return idx;
}

double text_video_consistency(const FrameSequence& seq,
                              const std::string& condition,
                              const FeatureExtractor& fx) {
  check_frames(seq, 1, "text_video_consistency");
  const std::vector<int> idx =
      subsample_indices(static_cast<int>(seq.frames.rows()), 8);
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(idx.size()),
                      seq.frames.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    sub.row(static_cast<Eigen::Index>(i)) = seq.frames.row(idx[i]);
  }
  return fx.embed_video(sub).dot(fx.embed_text(condition));
}

MetricVector metric_vector(const FrameSequence& seq,
                           const std::string& condition,
                           const MetricRegistry& registry) {
  MetricVector out;
  out.values.reserve(registry.size());
  out.names.reserve(registry.size());
  for (const MetricEntry& entry : registry) {
    try {
      out.values.push_back(entry.fn(seq, condition));
    } catch (const std::exception& e) {
      throw std::runtime_error(entry.name + ": " + e.what());
    }
    out.names.push_back(entry.name);
  }
  return out;
}

MetricRegistry default_registry(const FeatureExtractor& fx) {
  MetricRegistry registry;
  registry.push_back({"subject_consistency",
                      [&fx](const FrameSequence& seq, const std::string&) {
                        return subject_consistency(seq, fx);
                      }});
  registry.push_back({"motion_smoothness",
                      [](const FrameSequence& seq, const std::string&) {
                        return motion_smoothness(seq);
                      }});
  registry.push_back({"dynamic_degree",
                      [](const FrameSequence& seq, const std::string&) {
                        return dynamic_degree(seq);
                      }});
  registry.push_back({"aesthetic_quality",
                      [](const FrameSequence& seq, const std::string&) {
                        return per_frame_quality(
                            seq,
                            [](const Eigen::VectorXd& f) {
                              return 10.0 * logistic(f.mean());
                            },
                            10.0);
                      }});
  registry.push_back({"imaging_quality",
                      [](const FrameSequence& seq, const std::string&) {
                        return per_frame_quality(
                            seq,
                            [](const Eigen::VectorXd& f) {
                              return 100.0 * logistic(
                                                 f.norm() /
                                                 std::sqrt(double(f.size())));
                            },
                            100.0);
                      }});
  registry.push_back({"text_video_consistency",
                      [&fx](const FrameSequence& seq, const std::string& cond) {
                        return text_video_consistency(seq, cond, fx);
                      }});
  return registry;
}

TestbedRewardKind testbed_reward_kind_from_string(const std::string& name) {
  if (name == "mode_distance") return TestbedRewardKind::kModeDistance;
  if (name == "component_preference") {
    return TestbedRewardKind::kComponentPreference;
  }
  if (name == "linear") return TestbedRewardKind::kLinear;
  throw std::invalid_argument("unknown testbed reward kind: " + name);
}

std::string to_string(TestbedRewardKind kind) {
  switch (kind) {
    case TestbedRewardKind::kModeDistance: return "mode_distance";
    case TestbedRewardKind::kComponentPreference: return "component_preference";
    case TestbedRewardKind::kLinear: return "linear";
  }
  throw std::logic_error("bad reward kind enum");
}

Reward testbed_reward(const TestbedRewardSpec& spec) {
  switch (spec.kind) {
    case TestbedRewardKind::kModeDistance: {
      if (spec.target.size() == 0) {
        throw std::invalid_argument("mode_distance needs a target");
      }
      const Eigen::VectorXd target = spec.target;
      const double denom =
          spec.region_radius > 0.0 ? 2.0 * spec.region_radius : 1.0;
      return [target, denom](const Eigen::VectorXd& x) {
        if (x.size() != target.size()) {
          throw std::invalid_argument("reward input dim mismatch");
        }
        return -(x - target).squaredNorm() / denom;
      };
    }
    case TestbedRewardKind::kComponentPreference: {
      validate(spec.mixture);
      if (spec.component < 0 || spec.component >= spec.mixture.components()) {
        throw std::invalid_argument("component index out of range");
      }
      const GaussianMixture gmm = spec.mixture;
      const int component = spec.component;
      return [gmm, component](const Eigen::VectorXd& x) {
        return gmm_responsibilities(gmm, x, 1.0)(component);
      };
    }
    case TestbedRewardKind::kLinear: {
      if (spec.weights.size() == 0) {
        throw std::invalid_argument("linear reward needs weights");
      }
      const Eigen::VectorXd w = spec.weights;
      return [w](const Eigen::VectorXd& x) {
        if (x.size() != w.size()) {
          throw std::invalid_argument("reward input dim mismatch");
        }
        return w.dot(x);
      };
    }
  }
  throw std::logic_error("bad reward kind enum");
}

}  // namespace dlbs
