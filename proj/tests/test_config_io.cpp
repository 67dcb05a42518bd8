#include <optional>
#include <sstream>

#include <gtest/gtest.h>

#include "omnijump/config.hpp"
#include "omnijump/io.hpp"
#include "schema_check.hpp"

using namespace omnijump;

namespace {

const std::string kSchemaPath = std::string(OMNIJUMP_SOURCE_DIR) + "/docs/summary.schema.json";

std::optional<ErrorCode> code_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

JumpLog short_hop() {
  const ExecutiveConfig c;
  const JumpCommand cmd = make_jump_command(Vec3::Zero(), Vec3(0, 0, 1.5), Vec3(0, 0, 13.0));
  return run_jump(cmd, initial_sim_state(c), c);
}

}  // namespace

TEST(Config, DefaultsSurviveRoundTrip) {
  const ExecutiveConfig a;
  const Json j = config_to_json(a);
  const ExecutiveConfig b = config_from_json(j);
  EXPECT_EQ(config_to_json(b), j);
  EXPECT_EQ(b.model.mass, a.model.mass);
  EXPECT_EQ(b.model.inertia, a.model.inertia);
  EXPECT_EQ(b.prepare_gains.kp_p, a.prepare_gains.kp_p);
  EXPECT_EQ(b.planner.end_velocity.hi, a.planner.end_velocity.hi);
}

TEST(Config, EmptyObjectGivesDefaults) {
  EXPECT_EQ(config_to_json(parse_config("{}")), config_to_json(ExecutiveConfig{}));
}

TEST(Config, PartialOverlayKeepsOtherDefaults) {
  const ExecutiveConfig c = parse_config(R"({
    // comments are allowed
    "model": {"mass": 10.0},
    "vmc": {"f_min": 4.0, "kp_p": [1, 2, 3]},
    "sim": {"dt": 5e-4}
  })");
  EXPECT_EQ(c.model.mass, 10.0);
  EXPECT_EQ(c.prepare_gains.f_min, 4.0);
  EXPECT_EQ(c.prepare_gains.kp_p, Vec3(1, 2, 3));
  EXPECT_EQ(c.sim.dt, 5e-4);
  EXPECT_EQ(c.model.legs.l2, ExecutiveConfig{}.model.legs.l2);
  EXPECT_EQ(c.landing_gains.f_min, ExecutiveConfig{}.landing_gains.f_min);
}

TEST(Config, FullInertiaMatrix) {
  const ExecutiveConfig c = parse_config(R"({"model": {"inertia": [0.1, 0.01, 0, 0.01, 0.2, 0, 0, 0, 0.3]}})");
  EXPECT_EQ(c.model.inertia(0, 1), 0.01);
  EXPECT_EQ(c.model.inertia(1, 0), 0.01);
  EXPECT_EQ(c.model.inertia(2, 2), 0.3);
}

TEST(Config, RejectsUnknownKeys) {
  EXPECT_EQ(code_of(R"({"modle": {}})"), ErrorCode::ConfigError);
  EXPECT_EQ(code_of(R"({"model": {"masss": 9}})"), ErrorCode::ConfigError);
  EXPECT_EQ(code_of(R"({"landing": {"gains": {"kp": 1}}})"), ErrorCode::ConfigError);
}

TEST(Config, RejectsMalformedValues) {
  EXPECT_EQ(code_of("{"), ErrorCode::ConfigError);
  EXPECT_EQ(code_of(R"({"model": {"mass": "heavy"}})"), ErrorCode::ConfigError);
  EXPECT_EQ(code_of(R"({"vmc": {"kp_p": [1, 2]}})"), ErrorCode::ConfigError);
  EXPECT_EQ(code_of(R"({"model": {"hip_offsets": [[0, 0, 0]]}})"), ErrorCode::ConfigError);
  EXPECT_EQ(code_of(R"({"model": {"mass": -1}})"), ErrorCode::ConfigError);
  EXPECT_EQ(code_of(R"({"sim": {"dt": 0}})"), ErrorCode::ConfigError);
  EXPECT_EQ(code_of(R"({"vmc": {"mu": 0}})"), ErrorCode::ConfigError);
}

TEST(Config, ShippedDefaultFileMatchesDefaults) {
  const ExecutiveConfig c = load_config(std::string(OMNIJUMP_SOURCE_DIR) + "/config/default.json");
  EXPECT_EQ(config_to_json(c), config_to_json(ExecutiveConfig{}));
}

TEST(Config, MissingFileIsConfigError) {
  try {
    load_config("/nonexistent/omnijump.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
}

TEST(SummaryJson, ValidatesAgainstShippedSchema) {
  const Json schema_doc = schema::load(kSchemaPath);
  const Json j = summary_json(short_hop().summary);
  const auto errors = schema::validate(j, schema_doc);
  EXPECT_TRUE(errors.empty()) << errors.front();
}

TEST(SummaryJson, NoTouchdownSerializesAsNull) {
  JumpSummary s;
  const Json j = summary_json(s);
  EXPECT_TRUE(j["first_touchdown"].is_null());
  EXPECT_TRUE(schema::validate(j, schema::load(kSchemaPath)).empty());
}

TEST(SummaryJson, SchemaCheckerCatchesViolations) {
  const Json schema_doc = schema::load(kSchemaPath);
  Json j = summary_json(JumpSummary{});
  j["apex_rise"] = "high";
  EXPECT_FALSE(schema::validate(j, schema_doc).empty());
  j = summary_json(JumpSummary{});
  j.erase("latency");
  EXPECT_FALSE(schema::validate(j, schema_doc).empty());
  j = summary_json(JumpSummary{});
  j["extra"] = 1;
  EXPECT_FALSE(schema::validate(j, schema_doc).empty());
  j = summary_json(JumpSummary{});
  j["displacement"] = Json::array({1.0, 2.0});
  EXPECT_FALSE(schema::validate(j, schema_doc).empty());
}

TEST(SummaryJson, DeterministicOutsideLatency) {
  Json a = summary_json(short_hop().summary), b = summary_json(short_hop().summary);
  a.erase("latency");
  b.erase("latency");
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(LogCsv, HeaderColumnsMatchRows) {
  const JumpLog log = short_hop();
  std::ostringstream os;
  write_log_csv(os, log.ticks);
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  auto count = [](const std::string& s) { return std::count(s.begin(), s.end(), ',') + 1; };
  EXPECT_EQ(count(header), 2 + 12 + 3 + 12 + 12 + 4 + 1);
  EXPECT_EQ(count(row), count(header));
  EXPECT_EQ(header.rfind("t,phase,ref_p_x", 0), 0u);
}

TEST(LogCsv, OptionalColumns) {
  std::ostringstream os;
  write_log_header(os, LogOptions{true, true});
  const std::string h = os.str();
  EXPECT_EQ(h.rfind("jump,t,", 0), 0u);
  EXPECT_NE(h.find(",solve_ns\n"), std::string::npos);
}

TEST(LogCsv, ByteReproducible) {
  std::ostringstream a, b;
  write_log_csv(a, short_hop().ticks);
  write_log_csv(b, short_hop().ticks);
  EXPECT_GT(a.str().size(), 1000u);
  EXPECT_EQ(a.str(), b.str());
}

TEST(LogCsv, NumbersRoundTripExactly) {
  TickRecord r;
  r.t = 0.1 + 0.2;
  r.p = Vec3(1.0 / 3.0, -2e-17, 6.02214076e23);
  std::ostringstream os;
  write_log_row(os, r);
  std::stringstream ss(os.str());
  std::vector<std::string> cells;
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  EXPECT_EQ(std::stod(cells[0]), r.t);
  EXPECT_EQ(std::stod(cells[8]), r.p.x());
  EXPECT_EQ(std::stod(cells[9]), r.p.y());
  EXPECT_EQ(std::stod(cells[10]), r.p.z());
}
