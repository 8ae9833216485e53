#include "lctc/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "lctc/errors.hpp"
#include "lctc/ngram.hpp"

namespace lctc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_labels(std::span<const Label> labels, std::size_t num_classes) {
  for (Label l : labels) {
    if (l <= kBlank || static_cast<std::size_t>(l) >= num_classes) {
      throw InvalidArgument("ctc: label " + std::to_string(l) + " outside [1, " +
                            std::to_string(num_classes - 1) + "]");
    }
  }
}

}  // namespace

std::size_t ctc_min_frames(std::span<const Label> labels) {
  std::size_t n = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++n;
  return n;
}

LogProbLattice ctc_lattice(const RealArray& log_probs, std::span<const Label> labels) {
  if (log_probs.rank() != 2 || log_probs.rows() < 1) {
    throw ShapeError("ctc: log-probs must be (T', V+1), got " + shape_string(log_probs.shape()));
  }
  const std::size_t frames = log_probs.rows();
  check_labels(labels, log_probs.cols());
  const std::size_t need = ctc_min_frames(labels);
  if (frames < need) throw InfeasibleAlignment(frames, need);

  LogProbLattice lat;
  lat.extended.reserve(2 * labels.size() + 1);
  lat.extended.push_back(kBlank);
  for (Label l : labels) {
    lat.extended.push_back(l);
    lat.extended.push_back(kBlank);
  }
  const auto& ext = lat.extended;
  const std::size_t states = ext.size();
  // s may take the skip transition from s-2 when it emits a label that
  // differs from the label two states back
  auto can_skip = [&](std::size_t s) { return s >= 2 && ext[s] != kBlank && ext[s] != ext[s - 2]; };

  lat.alpha = RealArray::matrix(frames, states, kNegInf);
  lat.beta = RealArray::matrix(frames, states, kNegInf);
  RealArray& alpha = lat.alpha;
  RealArray& beta = lat.beta;

  alpha(0, 0) = log_probs(0, kBlank);
  if (states > 1) alpha(0, 1) = log_probs(0, ext[1]);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (can_skip(s)) a = log_add(a, alpha(t - 1, s - 2));
      alpha(t, s) = a == kNegInf ? kNegInf : a + log_probs(t, ext[s]);
    }
  }

  beta(frames - 1, states - 1) = 0.0;
  if (states > 1) beta(frames - 1, states - 2) = 0.0;
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double b = beta(t + 1, s) + log_probs(t + 1, ext[s]);
      if (s + 1 < states) b = log_add(b, beta(t + 1, s + 1) + log_probs(t + 1, ext[s + 1]));
      if (s + 2 < states && can_skip(s + 2))
        b = log_add(b, beta(t + 1, s + 2) + log_probs(t + 1, ext[s + 2]));
      beta(t, s) = b;
    }
  }

  double total = alpha(frames - 1, states - 1);
  if (states > 1) total = log_add(total, alpha(frames - 1, states - 2));
  lat.log_likelihood = total;
  return lat;
}

CtcResult ctc_loss(const RealArray& logits, std::span<const Label> labels) {
  const RealArray log_probs = log_softmax_rows(logits);
  const LogProbLattice lat = ctc_lattice(log_probs, labels);
  const double total = lat.log_likelihood;

  CtcResult out;
  out.loss = -total;
  out.grad_logits = RealArray(logits.shape());
  const std::size_t frames = logits.rows(), classes = logits.cols();
  std::vector<double> occupancy(classes);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kNegInf);
    for (std::size_t s = 0; s < lat.extended.size(); ++s) {
      const double v = lat.alpha(t, s) + lat.beta(t, s);
      auto& o = occupancy[static_cast<std::size_t>(lat.extended[s])];
      o = log_add(o, v);
    }
    for (std::size_t c = 0; c < classes; ++c) {
      out.grad_logits(t, c) = std::exp(log_probs(t, c)) - std::exp(occupancy[c] - total);
    }
  }
  return out;
}

double ctc_log_likelihood(const RealArray& logits, std::span<const Label> labels) {
  const RealArray log_probs = log_softmax_rows(logits);
  if (labels.empty()) {
    double s = 0.0;
    for (std::size_t t = 0; t < log_probs.rows(); ++t) s += log_probs(t, kBlank);
    return s;
  }
  if (log_probs.rows() < ctc_min_frames(labels)) return kNegInf;
  return ctc_lattice(log_probs, labels).log_likelihood;
}

Var ctc_loss(Var logits, std::span<const Label> labels) {
  CtcResult r = ctc_loss(logits.value(), labels);
  return ad::external_scalar(logits, r.loss, std::move(r.grad_logits));
}

LabelSequence greedy_decode(const RealArray& logits) {
  LabelSequence out;
  Label prev = kBlank;
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    auto row = logits.row_view(t);
    const Label best = static_cast<Label>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best != kBlank && best != prev) out.push_back(best);
    prev = best;
  }
  return out;
}

namespace {

struct PrefixState {
  double blank = kNegInf;      // paths ending in blank
  double non_blank = kNegInf;  // paths ending in the prefix's last label
  double lm = 0.0;             // LM log-prob of the prefix symbols (no end marker)

  double ctc() const { return log_add(blank, non_blank); }
};

}  // namespace

BeamHypothesis beam_search(const RealArray& logits, const NGramLM* lm, double lm_weight,
                           std::size_t beam_width) {
  if (beam_width == 0) throw InvalidArgument("beam_decode: beam_width must be >= 1");
  if (!(lm_weight >= 0.0)) throw InvalidArgument("beam_decode: lm_weight must be >= 0");
  if (logits.rank() != 2 || logits.rows() < 1) {
    throw ShapeError("beam_decode: logits must be (T', V+1), got " + shape_string(logits.shape()));
  }
  const bool use_lm = lm != nullptr && lm_weight > 0.0;
  if (use_lm && lm->vocab_size() + 1 != logits.cols()) {
    throw InvalidArgument("beam_decode: LM vocabulary does not match the logits width");
  }

  const RealArray log_probs = log_softmax_rows(logits);
  const std::size_t frames = log_probs.rows(), classes = log_probs.cols();

  // std::map keeps prefixes in lexicographic order, which gives the
  // deterministic tie-break for free
  using Beam = std::map<LabelSequence, PrefixState>;
  Beam beams;
  beams[{}].blank = 0.0;

  auto score = [&](const LabelSequence&, const PrefixState& st) {
    return st.ctc() + (use_lm ? lm_weight * st.lm : 0.0);
  };

  for (std::size_t t = 0; t < frames; ++t) {
    Beam next;
    for (const auto& [prefix, st] : beams) {
      const double total = st.ctc();
      auto [self, inserted] = next.try_emplace(prefix);
      if (inserted) self->second.lm = st.lm;
      self->second.blank = log_add(self->second.blank, total + log_probs(t, kBlank));
      if (!prefix.empty()) {
        const Label last = prefix.back();
        self->second.non_blank =
            log_add(self->second.non_blank, st.non_blank + log_probs(t, static_cast<std::size_t>(last)));
      }
      for (std::size_t c = 1; c < classes; ++c) {
        const Label sym = static_cast<Label>(c);
        LabelSequence extended = prefix;
        extended.push_back(sym);
        auto [it, fresh] = next.try_emplace(std::move(extended));
        if (fresh && use_lm) it->second.lm = st.lm + lm->conditional_logprob(prefix, sym);
        const double from = (!prefix.empty() && prefix.back() == sym) ? st.blank : total;
        it->second.non_blank = log_add(it->second.non_blank, from + log_probs(t, c));
      }
    }

    if (t + 1 < frames && next.size() > beam_width) {
      std::vector<std::pair<double, const LabelSequence*>> ranked;
      ranked.reserve(next.size());
      for (const auto& [prefix, st] : next) ranked.emplace_back(score(prefix, st), &prefix);
      // stable sort over lexicographically ordered entries keeps ties in prefix order
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      Beam kept;
      for (std::size_t i = 0; i < beam_width; ++i) {
        auto node = next.extract(*ranked[i].second);
        kept.insert(std::move(node));
      }
      beams = std::move(kept);
    } else {
      beams = std::move(next);
    }
  }

  BeamHypothesis best;
  bool have = false;
  for (const auto& [prefix, st] : beams) {
    const double ctc = st.ctc();
    if (ctc == kNegInf) continue;
    const double lm_total = use_lm ? st.lm + lm->conditional_logprob(prefix, lm->end_symbol()) : 0.0;
    const double s = ctc + (use_lm ? lm_weight * lm_total : 0.0);
    if (!have || s > best.score) {
      best.labels = prefix;
      best.score = s;
      best.ctc_logprob = ctc;
      best.lm_logprob = lm_total;
      have = true;
    }
  }
  return best;
}

LabelSequence beam_decode(const RealArray& logits, const NGramLM* lm, double lm_weight,
                          std::size_t beam_width) {
  return beam_search(logits, lm, lm_weight, beam_width).labels;
}

}  // namespace lctc
