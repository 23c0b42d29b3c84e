// shiftctx/metrics.h

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

#ifndef SHIFTCTX_METRICS_H_
#define SHIFTCTX_METRICS_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "shiftctx/simul_decoder.h"

namespace shiftctx {

struct LatencyInput {
  std::vector<double> delays_ms;  // d(y_i), non-decreasing
  int64_t source_tokens = 0;      // |X|
  double token_ms = 10.0;         // T, duration of one source token
  int64_t reference_len = 0;      // |Y*|
};

struct LatencyResult {
  double al_ms = 0.0;
  int64_t tau = 0;
  /// No token was emitted at or after the end of the source; tau fell back
  /// to the hypothesis length.
  bool tau_flagged = false;
};

/// Average Lagging over emission times.  tau is the first token whose
/// emission time is at or after |X| * T.
LatencyResult average_lagging(const LatencyInput &input);

enum class Smoothing { kNone, kExp };

std::vector<std::string> tokenize(const std::string &text);

/// Clipped n-gram statistics for n = 1..4.
struct BleuStats {
  std::array<int64_t, 4> matches{};
  std::array<int64_t, 4> totals{};
  int64_t hyp_len = 0;
  int64_t ref_len = 0;

  BleuStats &operator+=(const BleuStats &other);
};

BleuStats bleu_stats(const std::vector<std::string> &hyp,
                     const std::vector<std::string> &ref);

/// BLEU in [0, 100] from accumulated statistics.  Orders with no
/// hypothesis n-grams are left out of the geometric mean; no unigram
/// matches gives 0 under either smoothing.
double bleu_from_stats(const BleuStats &stats, Smoothing smoothing);

double sentence_bleu(const std::vector<std::string> &hyp,
                     const std::vector<std::string> &ref,
                     Smoothing smoothing = Smoothing::kExp);

/// Pooled statistics over all pairs, no smoothing.
double corpus_bleu(
    const std::vector<std::pair<std::vector<std::string>,
                                std::vector<std::string>>> &pairs);

struct InstanceMetrics {
  std::string id;
  LatencyResult al_ca;
  LatencyResult al_ideal;
  std::optional<double> bleu;
};

struct MetricsSummary {
  std::vector<InstanceMetrics> instances;  // sorted by id
  std::optional<double> corpus_bleu;
  double mean_al_ca = 0.0;
  double mean_al_ideal = 0.0;
  int64_t flagged = 0;
};

/// |X| is the unpadded frame count and T the frame period.  |Y*| is the
/// reference length when a reference exists, otherwise the number of
/// emitted tokens.
MetricsSummary summarize(const std::vector<InstanceTrace> &traces,
                         const std::map<std::string, std::string> &references);

nlohmann::json summary_to_json(const MetricsSummary &summary);
std::string summary_to_csv(const MetricsSummary &summary);

}  // namespace shiftctx

#endif  // SHIFTCTX_METRICS_H_
