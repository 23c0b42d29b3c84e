// test_harness.cc

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

#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "shiftctx/error.h"
#include "shiftctx/harness.h"

using namespace shiftctx;

namespace {

std::string golden(const std::string &name) {
  return read_file(std::string(SHIFTCTX_GOLDEN_DIR) + "/" + name);
}

std::string joined(const std::vector<std::string> &lines) {
  std::string out;
  for (const auto &l : lines) out += l + "\n";
  return out;
}

RunConfig small_config() {
  RunConfig c;
  c.decoder.max_len = 24;
  c.synthetic = 4;
  c.synthetic_frames = 320;
  return c;
}

std::filesystem::path scratch(const std::string &name) {
  auto p = std::filesystem::temp_directory_path() / ("shiftctx_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("config keys and validation") {
  RunConfig c;
  CHECK_THROWS_AS(c.set("lefty", "3"), ConfigError);
  CHECK_THROWS_AS(c.set("left", "3x"), ConfigError);
  CHECK_THROWS_AS(c.set("mode", "sideways"), ConfigError);
  c.set("seed", "41");
  CHECK(c.encoder.seed == 41);
  CHECK(c.decoder.seed == 42);
  c.set("subsample", "2");
  CHECK(c.encoder.subsample == 2);
  CHECK(c.layout.subsample == 2);

  RunConfig d;
  apply_config_text("# defaults\nleft = 64\n\nmode=baseline  # trailing\n", &d);
  CHECK(d.layout.left == 64);
  CHECK(d.mode == ContextMode::kBaseline);
  d.validate();
  try {
    apply_config_text("left=16\ncenterr=3\n", &d);
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_config_text("left\n", &d), ConfigError);

  RunConfig bad;
  bad.decoder.pre_decision = 3;  // 12 frames, not a multiple of 32
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = RunConfig();
  bad.encoder.heads = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = RunConfig();
  bad.layout.center = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(RunConfig::keys().size() == 29);
}

TEST_CASE("corpus parsing") {
  const auto recs = parse_corpus(
      "{\"id\":\"a\",\"source\":{\"synthetic\":{\"length\":40,\"seed\":7}},"
      "\"reference\":\"w2 w3\"}\n"
      "\n"
      "{\"id\":\"b\",\"source\":{\"frames\":[[1,2],[3,4],[5,6]]}}\n"
      "{\"id\":\"c\",\"source\":{\"file\":\"c.txt\"}}\n");
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].reference == std::optional<std::string>("w2 w3"));
  CHECK_FALSE(recs[1].reference);
  CHECK(load_source(recs[0], 16).rows() == 40);
  CHECK(load_source(recs[0], 16) == load_source(recs[0], 16));
  CHECK(load_source(recs[1], 2)(2, 1) == 6.0f);
  CHECK_THROWS_AS(load_source(recs[1], 3), DataError);

  const auto dir = scratch("corpus");
  {
    std::ofstream os(dir / "c.txt");
    os << "1 2\n3 4\n\n";
  }
  const Matrix m = load_source(recs[2], 2, dir.string());
  CHECK(m.rows() == 2);
  CHECK(m(1, 0) == 3.0f);
  CHECK_THROWS_AS(load_source(recs[2], 3, dir.string()), DataError);
  CHECK_THROWS_AS(load_source(recs[2], 2, "/nonexistent"), DataError);

  auto line_of = [](const std::string &text) -> std::string {
    try {
      parse_corpus(text);
    } catch (const DataError &e) {
      return e.what();
    }
    return "";
  };
  const std::string ok =
      "{\"id\":\"a\",\"source\":{\"synthetic\":{\"length\":4,\"seed\":1}}}\n";
  CHECK(line_of(ok + "{not json\n").find("line 2") != std::string::npos);
  CHECK(line_of(ok + ok +
                "{\"id\":\"x\",\"source\":{\"frames\":[[1]],\"file\":\"f\"}}\n")
            .find("line 3") != std::string::npos);
  CHECK(line_of("{\"id\":\"x\",\"source\":{}}\n").find("line 1") !=
        std::string::npos);
  CHECK(line_of("{\"id\":\"x\",\"source\":{\"frames\":[[1],[1,2]]}}\n")
            .find("ragged") != std::string::npos);
  CHECK(line_of("{\"source\":{\"frames\":[[1]]}}\n").find("line 1") !=
        std::string::npos);
}

TEST_CASE("trace listing matches golden files") {
  const SegmentLayout layout;
  for (auto mode : {ContextMode::kBaseline, ContextMode::kShiftable}) {
    const std::string m = to_string(mode);
    CHECK(joined(trace_listing(layout, mode, 7, 10.0)) ==
          golden("trace_" + m + "_7.txt"));
    CHECK(joined(trace_listing(layout, mode, 1, 10.0)) ==
          golden("trace_" + m + "_1.txt"));
  }
  const auto s = trace_listing(layout, ContextMode::kShiftable, 7, 10.0);
  CHECK(s[4] == "t=1600 | 0+64+64 | 32+64+32 | 96+32+0");
  CHECK(s[5] == "t=1920 | 0+64+64 | 32+64+32 | 64+64+0");
  CHECK(s[6] == "t=2240 | 0+64+64 | 32+64+32 | 32+64+32 | 96+32+0");
  CHECK(trace_listing(layout, ContextMode::kBaseline, 5, 10.0)[4] ==
        "t=1600 | 0+64+32 | 32+64+32 | 32+32+0");
}

TEST_CASE("simulation is deterministic, order independent and replayable") {
  RunConfig c = small_config();
  const auto records = corpus_for(c);
  c.threads = 1;
  const auto serial = run_simulation(c, records);
  c.threads = 3;
  const auto parallel = run_simulation(c, records);
  const auto again = run_simulation(c, records);
  CHECK(traces_to_jsonl(serial) == traces_to_jsonl(parallel));
  CHECK(traces_to_jsonl(parallel) == traces_to_jsonl(again));
  REQUIRE(serial.size() == 4);
  CHECK(serial[0].id == "syn-0000");

  const auto summary = summarize(serial, references_of(records));
  const auto replayed = summarize(parse_traces(traces_to_jsonl(serial)), {});
  CHECK(summary_to_json(summary).dump() == summary_to_json(replayed).dump());
  CHECK(summary_to_csv(summary) == summary_to_csv(replayed));

  double first = 1e300;
  for (const auto &t : serial) first = std::min(first, t.delays_ms.front());
  CHECK(first == 1600.0);

  const auto dir = scratch("outputs");
  write_outputs(dir.string(), serial, summary);
  CHECK(read_file((dir / "traces.jsonl").string()) == traces_to_jsonl(serial));
  CHECK(read_file((dir / "metrics.csv").string()) == summary_to_csv(summary));
  CHECK(nlohmann::json::parse(read_file((dir / "summary.json").string())) ==
        summary_to_json(summary));
}

TEST_CASE("baseline and shiftable runs over one corpus") {
  RunConfig c = small_config();
  c.synthetic = 2;
  const auto records = corpus_for(c);
  c.mode = ContextMode::kBaseline;
  const auto base = summarize(run_simulation(c, records), {});
  c.mode = ContextMode::kShiftable;
  const auto shift = summarize(run_simulation(c, records), {});
  CHECK(base.instances.size() == shift.instances.size());
  CHECK(std::isfinite(shift.mean_al_ca - base.mean_al_ca));
}

TEST_CASE("replay of hand-written traces") {
  const auto traces = parse_traces(
      "{\"id\":\"hand\",\"actions\":\"RRWW\",\"delays_ms\":[20,40],"
      "\"tokens\":[5,1],\"source_frames\":4,\"frame_ms\":10}\n"
      "{\"id\":\"early\",\"actions\":\"RWW\",\"delays_ms\":[10,20],"
      "\"tokens\":[5,1],\"source_frames\":4,\"frame_ms\":10}\n");
  const auto s = summarize(traces, {});
  REQUIRE(s.instances.size() == 2);
  CHECK(s.instances[1].id == "hand");
  CHECK(std::abs(s.instances[1].al_ca.al_ms - 20.0) < 1e-9);
  CHECK(s.flagged == 1);
  CHECK(s.instances[0].al_ca.tau_flagged);

  try {
    parse_traces("{\"id\":\"a\",\"actions\":\"\",\"delays_ms\":[],"
                 "\"tokens\":[],\"source_frames\":4}\n\n{oops\n");
    FAIL("expected DataError");
  } catch (const DataError &e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_traces("{\"id\":\"a\"}\n"), DataError);
}

TEST_CASE("consistency measurement") {
  EncoderConfig ec;
  auto w = std::make_shared<const EncoderWeights>(EncoderWeights::random(ec));
  const SegmentLayout layout;
  const Matrix frames = synthetic_frames(1000, ec.input_dim, 5);
  const auto shift =
      measure_consistency(w, frames, layout, ContextMode::kShiftable);
  const auto base = measure_consistency(w, frames, layout, ContextMode::kBaseline);
  CHECK(shift.final_deviation <= 1e-5);
  CHECK(base.final_deviation <= 1e-5);
  CHECK(base.max_provisional_deviation() > 1e-3);
  CHECK(shift.recompute_counts.size() == 32);
  CHECK(shift.max_recompute() <= recompute_bound(layout));
  CHECK(recompute_bound(layout) == 2);
  CHECK(cost_growth_ratio({3, 3, 3, 3, 3}) == 1.0);
  CHECK(cost_growth_ratio({1, 2, 3, 4, 5}) == doctest::Approx(7.0 / 3));
  CHECK(cost_growth_ratio({2, 2, 90, 2, 2, 2}) == 1.0);
  CHECK(cost_growth_ratio({5}) == 1.0);
  StreamConsistency run;
  run.encode_us = {10, 40, 7};
  run.recompute_counts = {1, 2, 0};
  CHECK(per_segment_us(run) == std::vector<double>{10, 20});

  RunConfig c = small_config();
  c.synthetic = 2;
  const auto report = consistency_report(c, corpus_for(c));
  CHECK(report["records"].size() == 2);
  CHECK(report["aggregate"]["shiftable_max_final_deviation"].get<double>() <=
        1e-5);
  CHECK(report["aggregate"]["recompute_bound"] == 2);
}
