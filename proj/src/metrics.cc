// metrics.cc

// Copyright 2026  The shiftctx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "shiftctx/metrics.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "shiftctx/error.h"

namespace shiftctx {

namespace {

using NgramCounts = std::map<std::vector<std::string>, int64_t>;

NgramCounts count_ngrams(const std::vector<std::string> &tokens, size_t n) {
  NgramCounts counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + i,
                                      tokens.begin() + i + n)];
  return counts;
}

}  // namespace

LatencyResult average_lagging(const LatencyInput &input) {
  if (input.source_tokens < 1)
    throw PreconditionError("average_lagging: |X| must be >= 1");
  if (input.reference_len < 1)
    throw PreconditionError("average_lagging: |Y*| must be >= 1");
  const auto &d = input.delays_ms;
  for (size_t i = 1; i < d.size(); ++i)
    if (d[i] < d[i - 1])
      throw PreconditionError("average_lagging: delays must be non-decreasing");

  LatencyResult result;
  if (d.empty()) {
    result.tau_flagged = true;
    return result;
  }
  const double source_end = input.source_tokens * input.token_ms;
  const auto after = std::find_if(d.begin(), d.end(),
                                  [&](double t) { return t >= source_end; });
  if (after == d.end()) {
    result.tau = static_cast<int64_t>(d.size());
    result.tau_flagged = true;
  } else {
    result.tau = static_cast<int64_t>(after - d.begin()) + 1;
  }
  const double rate = static_cast<double>(input.source_tokens) /
                      static_cast<double>(input.reference_len) * input.token_ms;
  double sum = 0.0;
  for (int64_t i = 1; i <= result.tau; ++i)
    sum += d[i - 1] - rate * static_cast<double>(i - 1);
  result.al_ms = sum / static_cast<double>(result.tau);
  return result;
}

std::vector<std::string> tokenize(const std::string &text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

BleuStats &BleuStats::operator+=(const BleuStats &other) {
  for (size_t n = 0; n < 4; ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  hyp_len += other.hyp_len;
  ref_len += other.ref_len;
  return *this;
}

BleuStats bleu_stats(const std::vector<std::string> &hyp,
                     const std::vector<std::string> &ref) {
  BleuStats s;
  s.hyp_len = static_cast<int64_t>(hyp.size());
  s.ref_len = static_cast<int64_t>(ref.size());
  for (size_t n = 1; n <= 4; ++n) {
    const NgramCounts ref_counts = count_ngrams(ref, n);
    for (const auto &[gram, count] : count_ngrams(hyp, n)) {
      const auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) s.matches[n - 1] += std::min(count, it->second);
    }
    s.totals[n - 1] = std::max<int64_t>(0, s.hyp_len - static_cast<int64_t>(n) + 1);
  }
  return s;
}

double bleu_from_stats(const BleuStats &stats, Smoothing smoothing) {
  // No unigram overlap scores 0 whatever the smoothing.
  if (stats.hyp_len == 0 || stats.matches[0] == 0) return 0.0;
  double log_sum = 0.0;
  int orders = 0;
  double exp_factor = 1.0;
  for (size_t n = 0; n < 4; ++n) {
    if (stats.totals[n] == 0) continue;
    ++orders;
    double precision;
    if (stats.matches[n] > 0) {
      precision = static_cast<double>(stats.matches[n]) / stats.totals[n];
    } else if (smoothing == Smoothing::kExp) {
      exp_factor *= 2.0;
      precision = 1.0 / (exp_factor * stats.totals[n]);
    } else {
      return 0.0;
    }
    log_sum += std::log(precision);
  }
  const double bp =
      stats.hyp_len >= stats.ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(stats.ref_len) / stats.hyp_len);
  return 100.0 * bp * std::exp(log_sum / orders);
}

double sentence_bleu(const std::vector<std::string> &hyp,
                     const std::vector<std::string> &ref,
                     Smoothing smoothing) {
  if (ref.empty()) throw PreconditionError("sentence_bleu: empty reference");
  return bleu_from_stats(bleu_stats(hyp, ref), smoothing);
}

double corpus_bleu(
    const std::vector<std::pair<std::vector<std::string>,
                                std::vector<std::string>>> &pairs) {
  if (pairs.empty()) throw PreconditionError("corpus_bleu: no sentence pairs");
  BleuStats total;
  for (const auto &[hyp, ref] : pairs) total += bleu_stats(hyp, ref);
  return bleu_from_stats(total, Smoothing::kNone);
}

MetricsSummary summarize(const std::vector<InstanceTrace> &traces,
                         const std::map<std::string, std::string> &references) {
  MetricsSummary summary;
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>
      pairs;
  std::vector<const InstanceTrace *> order;
  for (const auto &t : traces) order.push_back(&t);
  std::sort(order.begin(), order.end(),
            [](const auto *a, const auto *b) { return a->id < b->id; });

  for (const InstanceTrace *t : order) {
    InstanceMetrics m;
    m.id = t->id;
    const auto ref_it = references.find(t->id);
    std::vector<std::string> ref;
    if (ref_it != references.end()) ref = tokenize(ref_it->second);
    LatencyInput in;
    in.source_tokens = t->source_frames;
    in.token_ms = t->frame_ms;
    in.reference_len = !ref.empty() ? static_cast<int64_t>(ref.size())
                                    : std::max<int64_t>(1, t->tokens.size());
    in.delays_ms = t->delays_ms;
    m.al_ca = average_lagging(in);
    in.delays_ms = t->ideal_delays_ms;
    m.al_ideal = average_lagging(in);
    if (!ref.empty()) {
      const auto hyp = tokenize(t->text);
      m.bleu = sentence_bleu(hyp, ref, Smoothing::kExp);
      pairs.emplace_back(hyp, ref);
    }
    if (m.al_ca.tau_flagged) ++summary.flagged;
    summary.mean_al_ca += m.al_ca.al_ms;
    summary.mean_al_ideal += m.al_ideal.al_ms;
    summary.instances.push_back(std::move(m));
  }
  if (!summary.instances.empty()) {
    summary.mean_al_ca /= summary.instances.size();
    summary.mean_al_ideal /= summary.instances.size();
  }
  if (!pairs.empty()) summary.corpus_bleu = corpus_bleu(pairs);
  return summary;
}

nlohmann::json summary_to_json(const MetricsSummary &summary) {
  nlohmann::json instances = nlohmann::json::array();
  for (const auto &m : summary.instances) {
    instances.push_back({
        {"id", m.id},
        {"AL_ca", m.al_ca.al_ms},
        {"AL_ideal", m.al_ideal.al_ms},
        {"BLEU_sentence", m.bleu ? nlohmann::json(*m.bleu) : nlohmann::json()},
        {"tau", m.al_ca.tau},
        {"tau_flagged", m.al_ca.tau_flagged},
    });
  }
  return {
      {"instances", instances},
      {"corpus",
       {{"BLEU", summary.corpus_bleu ? nlohmann::json(*summary.corpus_bleu)
                                     : nlohmann::json()},
        {"mean_AL_ca", summary.mean_al_ca},
        {"mean_AL_ideal", summary.mean_al_ideal},
        {"flagged", summary.flagged},
        {"count", summary.instances.size()}}},
  };
}

std::string summary_to_csv(const MetricsSummary &summary) {
  std::ostringstream os;
  os << "id,al_ca_ms,al_ideal_ms,bleu,tau,tau_flagged\n";
  os << std::setprecision(17);
  for (const auto &m : summary.instances) {
    os << m.id << ',' << m.al_ca.al_ms << ',' << m.al_ideal.al_ms << ',';
    if (m.bleu) os << *m.bleu;
    os << ',' << m.al_ca.tau << ',' << (m.al_ca.tau_flagged ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace shiftctx
