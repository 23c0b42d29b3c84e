// shiftctx/simul_decoder.h

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

#ifndef SHIFTCTX_SIMUL_DECODER_H_
#define SHIFTCTX_SIMUL_DECODER_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "shiftctx/amt_encoder.h"
#include "shiftctx/segment_scheduler.h"
#include "shiftctx/tensor.h"

namespace shiftctx {

inline constexpr int64_t kBosId = 0;
inline constexpr int64_t kEosId = 1;

struct DecoderConfig {
  int64_t wait_k = 5;
  int64_t pre_decision = 8;  // encoder tokens per decoder read
  int64_t d_model = 64;
  int64_t layers = 2;
  int64_t heads = 4;
  int64_t ffn_dim = 256;
  int64_t vocab = 32;
  int64_t max_len = 200;
  uint64_t seed = 2;

  void validate() const;
};

struct DecoderLayerWeights {
  Matrix self_q, self_k, self_v, self_o;
  Matrix cross_q, cross_k, cross_v, cross_o;  // cross_k/v: encoder_dim x d
  Matrix ffn1_w, ffn1_b, ffn2_w, ffn2_b;
};

struct DecoderWeights {
  DecoderConfig config;
  int64_t encoder_dim = 0;
  Matrix embed;   // vocab x d
  Matrix out_w;   // d x vocab
  std::vector<DecoderLayerWeights> layers;

  static DecoderWeights random(const DecoderConfig &config,
                               int64_t encoder_dim);
};

/// Greedy next token.  Cross-attention sees only the first `visible` rows
/// of `encoder_states`; `prefix` is the emitted output so far (no BOS).
/// BOS is never produced; EOS only when `allow_eos`, and always once the
/// prefix reaches max_len.
int64_t decode_step(const DecoderWeights &w, const Matrix &encoder_states,
                    int64_t visible, const std::vector<int64_t> &prefix,
                    bool allow_eos = true);

/// Self-attention keys and values of target positions already decoded.
/// Cached positions are not revisited, so each keeps the cross-attention
/// context that was visible when it was first decoded.
struct DecoderCache {
  std::vector<int64_t> inputs;       // BOS followed by fed tokens
  std::vector<Matrix> keys, values;  // per layer, one row per position

  int64_t positions() const { return static_cast<int64_t>(inputs.size()); }
  void clear();
};

/// Incremental form of decode_step: only positions past the cache are
/// computed.  Throws PreconditionError if the cache is not a prefix of
/// [BOS] + prefix.
int64_t decode_step(const DecoderWeights &w, const Matrix &encoder_states,
                    int64_t visible, const std::vector<int64_t> &prefix,
                    bool allow_eos, DecoderCache *cache);

enum class Action { kRead, kWrite, kStop };

struct AgentState {
  int64_t chunks_read = 0;
  int64_t tokens_written = 0;
  bool source_finished = false;
  bool done = false;  // EOS emitted
  std::vector<int64_t> emitted;
  double clock_ms = 0.0;
  double ideal_clock_ms = 0.0;
};

/// wait-k: write once k + tokens_written chunks have been read, or once
/// the source is exhausted.
Action policy_action(const AgentState &state, int64_t wait_k);

/// How long model invocations take on the simulated clock.
struct ComputeModel {
  enum class Kind { kZero, kFixed, kMeasured };
  Kind kind = Kind::kZero;
  double fixed_ms = 0.0;  // per encoder step or decoder call

  /// "zero", "fixed:<ms>" or "measured".
  static ComputeModel parse(const std::string &spec);
  std::string to_string() const;
  double charge(double measured_ms) const;
};

/// Echo of the settings that produced a trace.
struct TraceConfig {
  SegmentLayout layout;
  ContextMode mode = ContextMode::kShiftable;
  int64_t wait_k = 0;
  int64_t pre_decision = 0;
  std::string compute = "zero";
};

struct InstanceTrace {
  std::string id;
  std::string actions;                 // 'R' / 'W' per action
  std::vector<double> delays_ms;       // d(y_i), compute included
  std::vector<double> ideal_delays_ms; // d(y_i) with compute ignored
  std::vector<int64_t> tokens;         // emitted ids, EOS included
  std::string text;                    // whitespace-joined, EOS dropped
  bool padded = false;
  int64_t source_frames = 0;           // before padding
  double frame_ms = 10.0;
  TraceConfig config;
};

nlohmann::json trace_to_json(const InstanceTrace &trace);
/// Throws DataError on missing or mistyped fields.
InstanceTrace trace_from_json(const nlohmann::json &j);

std::string token_text(int64_t id);

/// One simultaneous-translation instance: a streaming encoder, a decoder
/// and a simulated clock.  A read delivers pre_decision * subsample frames.
class SimulAgent {
 public:
  SimulAgent(std::shared_ptr<const EncoderWeights> encoder,
             std::shared_ptr<const DecoderWeights> decoder,
             const SegmentLayout &layout, ContextMode mode,
             ComputeModel compute, double frame_ms);

  int64_t read_unit() const { return read_unit_; }
  Action next_action() const;
  void read(const Matrix &frames);
  /// No more source: the encoder finalizes its trailing segments.
  void finish_source();
  int64_t write();

  const AgentState &state() const { return state_; }
  const StreamingEncoder &encoder() const { return encoder_; }
  const std::vector<double> &delays() const { return delays_; }
  const std::vector<double> &ideal_delays() const { return ideal_delays_; }

 private:
  std::shared_ptr<const DecoderWeights> decoder_;
  StreamingEncoder encoder_;
  ComputeModel compute_;
  double frame_ms_;
  int64_t read_unit_;
  AgentState state_;
  DecoderCache cache_;
  std::vector<double> delays_, ideal_delays_;
};

/// Runs the wait-k loop over a whole source.  Sources that are not a
/// multiple of the read unit are right-padded with zero frames.
InstanceTrace translate_stream(const std::string &id, const Matrix &frames,
                               std::shared_ptr<const EncoderWeights> encoder,
                               std::shared_ptr<const DecoderWeights> decoder,
                               const SegmentLayout &layout, ContextMode mode,
                               ComputeModel compute, double frame_ms);

}  // namespace shiftctx

#endif  // SHIFTCTX_SIMUL_DECODER_H_
