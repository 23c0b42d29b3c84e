// shiftctx/harness.h

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

#ifndef SHIFTCTX_HARNESS_H_
#define SHIFTCTX_HARNESS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "shiftctx/amt_encoder.h"
#include "shiftctx/metrics.h"
#include "shiftctx/segment_scheduler.h"
#include "shiftctx/simul_decoder.h"

namespace shiftctx {

/// Everything a run needs.  Keys of the key=value config format are the
/// long CLI flag names ("left", "wait-k", "frame-ms", ...).
struct RunConfig {
  SegmentLayout layout;
  ContextMode mode = ContextMode::kShiftable;
  EncoderConfig encoder;
  DecoderConfig decoder;
  double frame_ms = 10.0;
  ComputeModel compute;
  std::string corpus;
  std::string out_dir = "out";
  int64_t threads = 0;  // 0: hardware concurrency
  int64_t synthetic = 0;
  int64_t synthetic_frames = 1000;

  /// Sets one key; throws ConfigError for unknown keys or bad values.
  void set(const std::string &key, const std::string &value);
  /// Cross-module checks (layout, encoder, decoder, read-unit alignment).
  void validate() const;

  static const std::vector<std::string> &keys();
};

/// Parses "key=value" lines ('#' comments, blank lines ignored) into
/// `config`.  Throws ConfigError naming the offending line.
void apply_config_text(const std::string &text, RunConfig *config);
void apply_config_file(const std::string &path, RunConfig *config);

struct SyntheticSource {
  int64_t length = 0;
  uint64_t seed = 0;
};
struct FileSource {
  std::string path;  // whitespace-separated floats, one frame per line
};

struct CorpusRecord {
  std::string id;
  std::variant<SyntheticSource, Matrix, FileSource> source;
  std::optional<std::string> reference;
};

/// Seeded uniform frames in [-1, 1].
Matrix synthetic_frames(int64_t length, int64_t width, uint64_t seed);

/// One JSON object per line:
///   {"id": ..., "source": {"synthetic": {"length": L, "seed": S}}
///                       | {"frames": [[...], ...]} | {"file": "path"},
///    "reference": "optional text"}
/// Throws DataError naming the line number.
std::vector<CorpusRecord> parse_corpus(const std::string &text);
std::vector<CorpusRecord> load_corpus(const std::string &path);

/// `base_dir` resolves relative file sources.
Matrix load_source(const CorpusRecord &record, int64_t width,
                   const std::string &base_dir = ".");

std::vector<CorpusRecord> synthetic_corpus(int64_t count, int64_t frames,
                                           uint64_t seed);

/// Records from config.corpus, or config.synthetic generated ones.
std::vector<CorpusRecord> corpus_for(const RunConfig &config);

std::map<std::string, std::string> references_of(
    const std::vector<CorpusRecord> &records);

struct Models {
  std::shared_ptr<const EncoderWeights> encoder;
  std::shared_ptr<const DecoderWeights> decoder;
};
Models build_models(const RunConfig &config);

/// translate_stream over every record on a worker pool; the result is
/// sorted by id and independent of the thread count.
std::vector<InstanceTrace> run_simulation(const RunConfig &config,
                                          const std::vector<CorpusRecord> &records,
                                          const std::string &base_dir = ".");

std::string traces_to_jsonl(const std::vector<InstanceTrace> &traces);
/// Throws DataError naming the first malformed line.
std::vector<InstanceTrace> parse_traces(const std::string &jsonl);

/// Writes traces.jsonl, summary.json and metrics.csv into `dir`.
void write_outputs(const std::string &dir,
                   const std::vector<InstanceTrace> &traces,
                   const MetricsSummary &summary);

/// One line per chunk: "t=<ms> | A+B+C | ...".
std::vector<std::string> trace_listing(const SegmentLayout &layout,
                                       ContextMode mode, int64_t chunks,
                                       double frame_ms);

struct StreamConsistency {
  double final_deviation = 0.0;  // streaming vs offline after finish
  std::vector<double> provisional_deviation;  // per step
  std::vector<int64_t> recompute_counts;      // per step
  std::vector<double> encode_us;              // per step

  double max_provisional_deviation() const;
  int64_t max_recompute() const;
};

/// Streams `frames` (zero-padded to whole chunks) through the encoder and
/// compares against offline_encode with shiftable_left = (mode ==
/// shiftable).
StreamConsistency measure_consistency(
    std::shared_ptr<const EncoderWeights> weights, const Matrix &frames,
    const SegmentLayout &layout, ContextMode mode);

/// Cost at the end of a series relative to its start, from a Theil-Sen
/// fit: 1 + slope * (n - 1) / median.  Flat series give about 1.
double cost_growth_ratio(const std::vector<double> &cost);

/// Encoder time per recomputed segment for each step that encoded any.
std::vector<double> per_segment_us(const StreamConsistency &run);

int64_t recompute_bound(const SegmentLayout &layout);

nlohmann::json consistency_report(const RunConfig &config,
                                  const std::vector<CorpusRecord> &records,
                                  const std::string &base_dir = ".");

std::string read_file(const std::string &path);
void write_file(const std::string &path, const std::string &contents);

}  // namespace shiftctx

#endif  // SHIFTCTX_HARNESS_H_
