#pragma once

#include <string>
#include <vector>

#include "audioshield/classifier.hpp"
#include "audioshield/transforms.hpp"

namespace audioshield::detect {

/// Per-clip result of probing the classifier through an ensemble of
/// preprocessing transforms.
struct EnsembleVerdict {
  kw::ProbVector raw_probs;                   // r
  std::vector<kw::ProbVector> member_probs;   // P, in ensemble order
  std::vector<bool> votes;                    // true = prediction mismatch
  int vote_count = 0;
  double l1_score = 0.0;
  bool adversarial = false;  // set by whichever scheme is applied
};

enum class VectorSource { probabilities, logits };
enum class L1Mode { raw_vs_member, any_pair };

struct ProbeOptions {
  VectorSource source = VectorSource::probabilities;
  L1Mode l1_mode = L1Mode::raw_vs_member;
  int jobs = 1;
};

/// r = predict(clip); p_i = predict(transform_i(clip)); votes compare argmax
/// labels; l1_score is the maximum L1 distance per the configured mode.
/// Transform/codec failures are rethrown as MemberError with the member id.
EnsembleVerdict probe(const kw::Classifier& classifier, const audio::AudioClip& clip,
                      const std::vector<transforms::TransformSpec>& ensemble,
                      const ProbeOptions& options = {});

/// Adversarial iff votes reach half the ensemble (ties count as adversarial).
bool majority_vote(const EnsembleVerdict& verdict);

struct ThresholdModel {
  enum class Kind { vote_count, l1 };
  Kind kind = Kind::vote_count;
  double threshold = 0.0;
  double training_f1 = 0.0;
};

/// Picks the vote threshold t in {0..k} maximizing training F1; ties break
/// toward smaller t. Classification rule: adversarial iff vote_count >= t.
ThresholdModel learn_vote_threshold(const std::vector<EnsembleVerdict>& verdicts,
                                    const std::vector<bool>& is_adversarial);

/// Maximum L1 distance between the raw vector and each member vector.
double l1_score(const kw::ProbVector& raw, const std::vector<kw::ProbVector>& members,
                L1Mode mode = L1Mode::raw_vs_member);

/// Threshold of maximum information gain over midpoints of consecutive
/// distinct scores; ties break toward the smaller threshold. Classification
/// rule: adversarial iff score >= threshold.
ThresholdModel learn_l1_threshold(const std::vector<double>& scores,
                                  const std::vector<bool>& is_adversarial);

bool apply_threshold(const ThresholdModel& model, const EnsembleVerdict& verdict);

/// Eq.-style summed absolute class-specific differences: S_i = sum_p |r_i - p_i|.
struct SadVector {
  std::vector<double> values;
};
SadVector sad_vector(const EnsembleVerdict& verdict);

/// Concatenation [r, p_1, ..., p_k]; dimension (1+k)*C.
struct CpVector {
  std::vector<double> values;
};
CpVector cp_vector(const EnsembleVerdict& verdict);

}  // namespace audioshield::detect
