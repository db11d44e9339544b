#include "audioshield/detection.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "audioshield/errors.hpp"
#include "audioshield/kernels.hpp"
#include "audioshield/parallel.hpp"

namespace audioshield::detect {

namespace {

const std::vector<double>& pick_vector(const kw::Prediction& pred, VectorSource source) {
  return source == VectorSource::logits ? pred.logits : pred.probs.probs;
}

double f1_of_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (tp == 0) return 0.0;
  const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * p * r / (p + r);
}

double entropy_bits(std::size_t pos, std::size_t total) {
  if (total == 0 || pos == 0 || pos == total) return 0.0;
  const double p = static_cast<double>(pos) / static_cast<double>(total);
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

}  // namespace

EnsembleVerdict probe(const kw::Classifier& classifier, const audio::AudioClip& clip,
                      const std::vector<transforms::TransformSpec>& ensemble,
                      const ProbeOptions& options) {
  if (ensemble.empty()) throw Error("probe: ensemble must be nonempty");
  if (clip.channels != 1) throw Error("probe: mono clip required");

  EnsembleVerdict verdict;
  const auto raw = classifier.predict_full(clip);
  verdict.raw_probs = raw.probs;
  const std::size_t raw_top = raw.probs.argmax();

  const std::size_t k = ensemble.size();
  std::vector<kw::Prediction> member_preds(k);
  parallel_for(k, options.jobs, [&](std::size_t i) {
    try {
      const auto processed = transforms::apply_transform(ensemble[i], clip);
      member_preds[i] = classifier.predict_full(processed);
    } catch (const MemberError&) {
      throw;
    } catch (const Error& e) {
      throw MemberError(ensemble[i].id, e.what());
    }
  });

  verdict.member_probs.reserve(k);
  verdict.votes.reserve(k);
  std::vector<const std::vector<double>*> vectors;
  vectors.reserve(k + 1);
  vectors.push_back(&pick_vector(raw, options.source));
  for (std::size_t i = 0; i < k; ++i) {
    verdict.member_probs.push_back(member_preds[i].probs);
    const bool mismatch = member_preds[i].probs.argmax() != raw_top;
    verdict.votes.push_back(mismatch);
    if (mismatch) ++verdict.vote_count;
    vectors.push_back(&pick_vector(member_preds[i], options.source));
  }

  double best = 0.0;
  if (options.l1_mode == L1Mode::raw_vs_member) {
    for (std::size_t i = 1; i < vectors.size(); ++i) {
      if (vectors[i]->size() != vectors[0]->size()) throw DimensionMismatch("probe vector size");
      best = std::max(best, kernels::sum_abs_diff(vectors[0]->data(), vectors[i]->data(),
                                                  vectors[0]->size()));
    }
  } else {
    for (std::size_t a = 0; a < vectors.size(); ++a)
      for (std::size_t b = a + 1; b < vectors.size(); ++b)
        best = std::max(best, kernels::sum_abs_diff(vectors[a]->data(), vectors[b]->data(),
                                                    vectors[a]->size()));
  }
  verdict.l1_score = best;
  return verdict;
}

bool majority_vote(const EnsembleVerdict& verdict) {
  const auto k = static_cast<int>(verdict.votes.size());
  return 2 * verdict.vote_count >= k;
}

ThresholdModel learn_vote_threshold(const std::vector<EnsembleVerdict>& verdicts,
                                    const std::vector<bool>& is_adversarial) {
  if (verdicts.size() != is_adversarial.size() || verdicts.empty())
    throw Error("learn_vote_threshold: empty or mismatched training data");
  const std::size_t k = verdicts.front().votes.size();
  bool any_pos = false, any_neg = false;
  for (bool label : is_adversarial) (label ? any_pos : any_neg) = true;
  if (!any_pos || !any_neg) throw DegenerateTraining("training data contains a single class");
  for (const auto& v : verdicts)
    if (v.votes.size() != k) throw DimensionMismatch("mixed ensemble sizes in training data");

  ThresholdModel best;
  best.kind = ThresholdModel::Kind::vote_count;
  double best_f1 = -1.0;
  for (std::size_t t = 0; t <= k; ++t) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
      const bool predicted = verdicts[i].vote_count >= static_cast<int>(t);
      if (predicted && is_adversarial[i]) ++tp;
      else if (predicted) ++fp;
      else if (is_adversarial[i]) ++fn;
    }
    const double f1 = f1_of_counts(tp, fp, fn);
    if (f1 > best_f1) {  // strict: ties keep the smaller threshold
      best_f1 = f1;
      best.threshold = static_cast<double>(t);
    }
  }
  best.training_f1 = best_f1;
  return best;
}

double l1_score(const kw::ProbVector& raw, const std::vector<kw::ProbVector>& members, L1Mode mode) {
  for (const auto& m : members)
    if (m.probs.size() != raw.probs.size())
      throw DimensionMismatch("l1_score: member dimension mismatch");
  double best = 0.0;
  if (mode == L1Mode::raw_vs_member) {
    for (const auto& m : members)
      best = std::max(best,
                      kernels::sum_abs_diff(raw.probs.data(), m.probs.data(), raw.probs.size()));
  } else {
    std::vector<const std::vector<double>*> all;
    all.push_back(&raw.probs);
    for (const auto& m : members) all.push_back(&m.probs);
    for (std::size_t a = 0; a < all.size(); ++a)
      for (std::size_t b = a + 1; b < all.size(); ++b)
        best = std::max(best, kernels::sum_abs_diff(all[a]->data(), all[b]->data(), all[a]->size()));
  }
  return best;
}

ThresholdModel learn_l1_threshold(const std::vector<double>& scores,
                                  const std::vector<bool>& is_adversarial) {
  if (scores.size() != is_adversarial.size() || scores.empty())
    throw Error("learn_l1_threshold: empty or mismatched training data");
  bool any_pos = false, any_neg = false;
  for (bool label : is_adversarial) (label ? any_pos : any_neg) = true;
  if (!any_pos || !any_neg) throw DegenerateTraining("training data contains a single class");

  std::vector<double> distinct(scores);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw DegenerateTraining("all scores identical: no candidate splits");

  const std::size_t total = scores.size();
  std::size_t total_pos = 0;
  for (bool label : is_adversarial)
    if (label) ++total_pos;
  const double parent = entropy_bits(total_pos, total);

  ThresholdModel best;
  best.kind = ThresholdModel::Kind::l1;
  double best_gain = -1.0;
  for (std::size_t c = 0; c + 1 < distinct.size(); ++c) {
    const double threshold = (distinct[c] + distinct[c + 1]) / 2.0;
    std::size_t hi = 0, hi_pos = 0;
    for (std::size_t i = 0; i < total; ++i) {
      if (scores[i] >= threshold) {
        ++hi;
        if (is_adversarial[i]) ++hi_pos;
      }
    }
    const std::size_t lo = total - hi;
    const std::size_t lo_pos = total_pos - hi_pos;
    const double children = (static_cast<double>(hi) / total) * entropy_bits(hi_pos, hi) +
                            (static_cast<double>(lo) / total) * entropy_bits(lo_pos, lo);
    const double gain = parent - children;
    if (gain > best_gain) {  // strict: ties keep the smaller threshold
      best_gain = gain;
      best.threshold = threshold;
    }
  }

  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const bool predicted = scores[i] >= best.threshold;
    if (predicted && is_adversarial[i]) ++tp;
    else if (predicted) ++fp;
    else if (is_adversarial[i]) ++fn;
  }
  best.training_f1 = f1_of_counts(tp, fp, fn);
  return best;
}

bool apply_threshold(const ThresholdModel& model, const EnsembleVerdict& verdict) {
  if (model.kind == ThresholdModel::Kind::vote_count)
    return verdict.vote_count >= static_cast<int>(model.threshold);
  return verdict.l1_score >= model.threshold;
}

SadVector sad_vector(const EnsembleVerdict& verdict) {
  SadVector sad;
  const auto& r = verdict.raw_probs.probs;
  sad.values.assign(r.size(), 0.0);
  for (const auto& member : verdict.member_probs) {
    if (member.probs.size() != r.size()) throw DimensionMismatch("sad_vector: member dimension");
    for (std::size_t i = 0; i < r.size(); ++i) sad.values[i] += std::fabs(r[i] - member.probs[i]);
  }
  return sad;
}

CpVector cp_vector(const EnsembleVerdict& verdict) {
  CpVector cp;
  const auto& r = verdict.raw_probs.probs;
  cp.values.reserve(r.size() * (1 + verdict.member_probs.size()));
  cp.values.insert(cp.values.end(), r.begin(), r.end());
  for (const auto& member : verdict.member_probs)
    cp.values.insert(cp.values.end(), member.probs.begin(), member.probs.end());
  return cp;
}

}  // namespace audioshield::detect
