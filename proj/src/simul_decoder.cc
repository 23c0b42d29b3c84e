// simul_decoder.cc

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

#include "shiftctx/simul_decoder.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "shiftctx/error.h"

namespace shiftctx {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since)
      .count();
}

// Rows of q sit at positions offset, offset+1, ...; when causal a row sees
// keys up to and including its own position.
Matrix attend(const Matrix &q, const Matrix &k, const Matrix &v,
              int64_t heads, bool causal, int64_t offset) {
  const int64_t d = q.cols();
  const int64_t hd = d / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  Matrix ctx(q.rows(), d);
  for (int64_t h = 0; h < heads; ++h) {
    Matrix scores =
        (q.middleCols(h * hd, hd) * k.middleCols(h * hd, hd).transpose()) *
        scale;
    if (causal) {
      for (Eigen::Index i = 0; i < scores.rows(); ++i)
        for (Eigen::Index j = offset + i + 1; j < scores.cols(); ++j)
          scores(i, j) = -std::numeric_limits<float>::infinity();
    }
    softmax_rows(&scores);
    ctx.middleCols(h * hd, hd) = scores * v.middleCols(h * hd, hd);
  }
  return ctx;
}

void append_rows(Matrix *m, const Matrix &rows) {
  const Eigen::Index old = m->rows();
  m->conservativeResize(old + rows.rows(), rows.cols());
  m->bottomRows(rows.rows()) = rows;
}

void add_positions(Matrix *x, int64_t first) {
  const int64_t d = x->cols();
  for (Eigen::Index row = 0; row < x->rows(); ++row) {
    const double pos = static_cast<double>(first + row);
    for (int64_t i = 0; i < d; i += 2) {
      const double angle =
          pos / std::pow(10000.0, static_cast<double>(i) / d);
      (*x)(row, i) += static_cast<float>(std::sin(angle));
      if (i + 1 < d) (*x)(row, i + 1) += static_cast<float>(std::cos(angle));
    }
  }
}

}  // namespace

void DecoderConfig::validate() const {
  if (wait_k < 1) throw ConfigError("wait-k must be >= 1");
  if (pre_decision < 1) throw ConfigError("pre-decision ratio must be >= 1");
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  if (d_model < 1 || layers < 1 || heads < 1 || ffn_dim < 1)
    throw ConfigError("decoder dimensions must be positive");
  if (d_model % heads != 0)
    throw ConfigError("decoder d_model must be divisible by heads");
  if (vocab < 3) throw ConfigError("vocabulary needs BOS, EOS and a word");
}

DecoderWeights DecoderWeights::random(const DecoderConfig &config,
                                      int64_t encoder_dim) {
  config.validate();
  DecoderWeights w;
  w.config = config;
  w.encoder_dim = encoder_dim;
  WeightRng rng(config.seed);
  const int64_t d = config.d_model;
  w.embed = rng.uniform_matrix(config.vocab, d, 1.0f);
  for (int64_t l = 0; l < config.layers; ++l) {
    DecoderLayerWeights lw;
    lw.self_q = rng.glorot(d, d);
    lw.self_k = rng.glorot(d, d);
    lw.self_v = rng.glorot(d, d);
    lw.self_o = rng.glorot(d, d);
    lw.cross_q = rng.glorot(d, d);
    lw.cross_k = rng.glorot(encoder_dim, d);
    lw.cross_v = rng.glorot(encoder_dim, d);
    lw.cross_o = rng.glorot(d, d);
    lw.ffn1_w = rng.glorot(d, config.ffn_dim);
    lw.ffn1_b = rng.uniform_matrix(1, config.ffn_dim, 0.02f);
    lw.ffn2_w = rng.glorot(config.ffn_dim, d);
    lw.ffn2_b = rng.uniform_matrix(1, d, 0.02f);
    w.layers.push_back(std::move(lw));
  }
  w.out_w = rng.glorot(d, config.vocab);
  return w;
}

void DecoderCache::clear() {
  inputs.clear();
  keys.clear();
  values.clear();
}

int64_t decode_step(const DecoderWeights &w, const Matrix &encoder_states,
                    int64_t visible, const std::vector<int64_t> &prefix,
                    bool allow_eos) {
  DecoderCache scratch;
  return decode_step(w, encoder_states, visible, prefix, allow_eos, &scratch);
}

int64_t decode_step(const DecoderWeights &w, const Matrix &encoder_states,
                    int64_t visible, const std::vector<int64_t> &prefix,
                    bool allow_eos, DecoderCache *cache) {
  const auto &cfg = w.config;
  if (visible < 1 || visible > encoder_states.rows())
    throw PreconditionError("decode_step: " + std::to_string(visible) +
                            " visible encoder states out of " +
                            std::to_string(encoder_states.rows()));
  if (encoder_states.cols() != w.encoder_dim)
    throw PreconditionError("decode_step: encoder width mismatch");
  if (static_cast<int64_t>(prefix.size()) >= cfg.max_len) return kEosId;

  std::vector<int64_t> inputs{kBosId};
  inputs.insert(inputs.end(), prefix.begin(), prefix.end());
  const int64_t start = cache->positions();
  if (start >= static_cast<int64_t>(inputs.size()) ||
      !std::equal(cache->inputs.begin(), cache->inputs.end(), inputs.begin()))
    throw PreconditionError("decode_step: cache does not match the prefix");
  if (cache->keys.empty()) {
    cache->keys.assign(cfg.layers, Matrix(0, cfg.d_model));
    cache->values.assign(cfg.layers, Matrix(0, cfg.d_model));
  }

  const int64_t fresh = static_cast<int64_t>(inputs.size()) - start;
  Matrix x(fresh, cfg.d_model);
  for (int64_t i = 0; i < fresh; ++i) x.row(i) = w.embed.row(inputs[start + i]);
  add_positions(&x, start);

  const Matrix memory = encoder_states.topRows(visible);
  for (size_t l = 0; l < w.layers.size(); ++l) {
    const auto &lw = w.layers[l];
    const Matrix ln = layer_norm(x);
    append_rows(&cache->keys[l], ln * lw.self_k);
    append_rows(&cache->values[l], ln * lw.self_v);
    x += attend(ln * lw.self_q, cache->keys[l], cache->values[l], cfg.heads,
                true, start) *
         lw.self_o;
    x += attend(layer_norm(x) * lw.cross_q, memory * lw.cross_k,
                memory * lw.cross_v, cfg.heads, false, 0) *
         lw.cross_o;
    Matrix hidden = layer_norm(x) * lw.ffn1_w;
    hidden.rowwise() += lw.ffn1_b.row(0);
    hidden = hidden.cwiseMax(0.0f);
    Matrix ffn = hidden * lw.ffn2_w;
    ffn.rowwise() += lw.ffn2_b.row(0);
    x += ffn;
  }
  cache->inputs = std::move(inputs);
  const RowVector logits = layer_norm(x.bottomRows(1)) * w.out_w;

  int64_t best = -1;
  for (int64_t id = 0; id < cfg.vocab; ++id) {
    if (id == kBosId || (id == kEosId && !allow_eos)) continue;
    if (best < 0 || logits(id) > logits(best)) best = id;
  }
  return best;
}

Action policy_action(const AgentState &state, int64_t wait_k) {
  if (state.done) return Action::kStop;
  if (state.source_finished ||
      state.chunks_read >= wait_k + state.tokens_written)
    return Action::kWrite;
  return Action::kRead;
}

ComputeModel ComputeModel::parse(const std::string &spec) {
  ComputeModel m;
  if (spec == "zero") return m;
  if (spec == "measured") {
    m.kind = Kind::kMeasured;
    return m;
  }
  if (spec.rfind("fixed:", 0) == 0) {
    m.kind = Kind::kFixed;
    try {
      size_t used = 0;
      m.fixed_ms = std::stod(spec.substr(6), &used);
      if (used != spec.size() - 6 || m.fixed_ms < 0) throw std::exception();
    } catch (const std::exception &) {
      throw ConfigError("bad compute model '" + spec + "'");
    }
    return m;
  }
  throw ConfigError("unknown compute model '" + spec +
                    "' (expected zero, fixed:<ms> or measured)");
}

std::string ComputeModel::to_string() const {
  switch (kind) {
    case Kind::kZero:
      return "zero";
    case Kind::kMeasured:
      return "measured";
    case Kind::kFixed: {
      std::string s = std::to_string(fixed_ms);
      s.erase(s.find_last_not_of('0') + 1);
      if (s.back() == '.') s.pop_back();
      return "fixed:" + s;
    }
  }
  return "zero";
}

double ComputeModel::charge(double measured_ms) const {
  switch (kind) {
    case Kind::kZero:
      return 0.0;
    case Kind::kFixed:
      return fixed_ms;
    case Kind::kMeasured:
      return measured_ms;
  }
  return 0.0;
}

std::string token_text(int64_t id) { return "w" + std::to_string(id); }

SimulAgent::SimulAgent(std::shared_ptr<const EncoderWeights> encoder,
                       std::shared_ptr<const DecoderWeights> decoder,
                       const SegmentLayout &layout, ContextMode mode,
                       ComputeModel compute, double frame_ms)
    : decoder_(std::move(decoder)),
      encoder_(std::move(encoder), layout, mode),
      compute_(compute),
      frame_ms_(frame_ms),
      read_unit_(decoder_->config.pre_decision * layout.subsample) {
  decoder_->config.validate();
  if (read_unit_ % layout.chunk != 0)
    throw ConfigError("pre-decision ratio x subsampling (" +
                      std::to_string(read_unit_) +
                      " frames) must be a multiple of the chunk size " +
                      std::to_string(layout.chunk));
  if (decoder_->encoder_dim != encoder_.weights().config.d_model)
    throw ConfigError("decoder was built for a different encoder width");
  if (frame_ms <= 0) throw ConfigError("frame period must be positive");
}

Action SimulAgent::next_action() const {
  return policy_action(state_, decoder_->config.wait_k);
}

void SimulAgent::read(const Matrix &frames) {
  if (state_.source_finished)
    throw LifecycleError("read after the source was finished");
  if (frames.rows() != read_unit_)
    throw PreconditionError("read: expected " + std::to_string(read_unit_) +
                            " frames");
  ++state_.chunks_read;
  const double arrival =
      static_cast<double>(state_.chunks_read * read_unit_) * frame_ms_;
  state_.clock_ms = std::max(state_.clock_ms, arrival);
  state_.ideal_clock_ms = std::max(state_.ideal_clock_ms, arrival);

  const int64_t h = encoder_.scheduler().layout().chunk;
  for (int64_t i = 0; i < read_unit_ / h; ++i) {
    const auto start = Clock::now();
    encoder_.step(frames.middleRows(i * h, h));
    state_.clock_ms += compute_.charge(elapsed_ms(start));
  }
}

void SimulAgent::finish_source() {
  if (state_.chunks_read == 0)
    throw EmptyInputError("finish_source before any input was read");
  const auto start = Clock::now();
  encoder_.finish();
  state_.clock_ms += compute_.charge(elapsed_ms(start));
  state_.source_finished = true;
}

int64_t SimulAgent::write() {
  if (state_.done) throw LifecycleError("write after EOS");
  if (state_.chunks_read == 0)
    throw PreconditionError("write before any input was read");
  const auto start = Clock::now();
  const Matrix states = encoder_.outputs();
  const int64_t visible = state_.chunks_read * decoder_->config.pre_decision;
  const int64_t token = decode_step(*decoder_, states, visible, state_.emitted,
                                    state_.source_finished, &cache_);
  state_.clock_ms += compute_.charge(elapsed_ms(start));

  state_.emitted.push_back(token);
  ++state_.tokens_written;
  delays_.push_back(state_.clock_ms);
  ideal_delays_.push_back(state_.ideal_clock_ms);
  if (token == kEosId) state_.done = true;
  return token;
}

InstanceTrace translate_stream(const std::string &id, const Matrix &frames,
                               std::shared_ptr<const EncoderWeights> encoder,
                               std::shared_ptr<const DecoderWeights> decoder,
                               const SegmentLayout &layout, ContextMode mode,
                               ComputeModel compute, double frame_ms) {
  if (frames.rows() == 0) throw EmptyInputError(id + ": empty source");
  const int64_t wait_k = decoder->config.wait_k;
  const int64_t pre_decision = decoder->config.pre_decision;
  SimulAgent agent(std::move(encoder), std::move(decoder), layout, mode,
                   compute, frame_ms);

  InstanceTrace trace;
  trace.id = id;
  trace.source_frames = frames.rows();
  trace.frame_ms = frame_ms;
  trace.config = {layout, mode, wait_k, pre_decision, compute.to_string()};

  const int64_t unit = agent.read_unit();
  const int64_t units = (frames.rows() + unit - 1) / unit;
  Matrix source = Matrix::Zero(units * unit, frames.cols());
  source.topRows(frames.rows()) = frames;
  trace.padded = source.rows() != frames.rows();

  for (;;) {
    const Action action = agent.next_action();
    if (action == Action::kStop) break;
    if (action == Action::kRead) {
      const int64_t next = agent.state().chunks_read;
      agent.read(source.middleRows(next * unit, unit));
      trace.actions += 'R';
      if (next + 1 == units) agent.finish_source();
    } else {
      agent.write();
      trace.actions += 'W';
    }
  }

  trace.tokens = agent.state().emitted;
  trace.delays_ms = agent.delays();
  trace.ideal_delays_ms = agent.ideal_delays();
  for (int64_t t : trace.tokens) {
    if (t == kEosId) continue;
    if (!trace.text.empty()) trace.text += ' ';
    trace.text += token_text(t);
  }
  return trace;
}

nlohmann::json trace_to_json(const InstanceTrace &trace) {
  const auto &c = trace.config;
  return {
      {"id", trace.id},
      {"actions", trace.actions},
      {"delays_ms", trace.delays_ms},
      {"ideal_delays_ms", trace.ideal_delays_ms},
      {"tokens", trace.tokens},
      {"text", trace.text},
      {"padded", trace.padded},
      {"source_frames", trace.source_frames},
      {"frame_ms", trace.frame_ms},
      {"config",
       {{"left", c.layout.left},
        {"center", c.layout.center},
        {"right", c.layout.right},
        {"chunk", c.layout.chunk},
        {"subsample", c.layout.subsample},
        {"mode", to_string(c.mode)},
        {"wait_k", c.wait_k},
        {"pre_decision", c.pre_decision},
        {"compute", c.compute}}},
  };
}

InstanceTrace trace_from_json(const nlohmann::json &j) {
  InstanceTrace t;
  try {
    t.id = j.at("id").get<std::string>();
    t.actions = j.at("actions").get<std::string>();
    t.delays_ms = j.at("delays_ms").get<std::vector<double>>();
    t.ideal_delays_ms =
        j.value("ideal_delays_ms", std::vector<double>(t.delays_ms));
    t.tokens = j.at("tokens").get<std::vector<int64_t>>();
    t.text = j.value("text", std::string());
    t.padded = j.value("padded", false);
    t.source_frames = j.at("source_frames").get<int64_t>();
    t.frame_ms = j.value("frame_ms", 10.0);
    if (j.contains("config")) {
      const auto &c = j.at("config");
      t.config.layout = {c.at("left").get<int64_t>(),
                         c.at("center").get<int64_t>(),
                         c.at("right").get<int64_t>(),
                         c.at("chunk").get<int64_t>(),
                         c.at("subsample").get<int64_t>()};
      t.config.mode = parse_context_mode(c.at("mode").get<std::string>());
      t.config.wait_k = c.at("wait_k").get<int64_t>();
      t.config.pre_decision = c.at("pre_decision").get<int64_t>();
      t.config.compute = c.value("compute", std::string("zero"));
    }
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("bad trace record: ") + e.what());
  } catch (const ConfigError &e) {
    throw DataError(std::string("bad trace record: ") + e.what());
  }
  if (t.ideal_delays_ms.size() != t.delays_ms.size())
    throw DataError("bad trace record: delay lists differ in length");
  if (t.source_frames < 1)
    throw DataError("bad trace record: source_frames must be >= 1");
  for (size_t i = 1; i < t.delays_ms.size(); ++i)
    if (t.delays_ms[i] < t.delays_ms[i - 1])
      throw DataError("bad trace record: delays must be non-decreasing");
  return t;
}

}  // namespace shiftctx
