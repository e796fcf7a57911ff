#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include <pointvortex/scenario.hpp>

using pv::Json;

namespace {

Json base() {
  return Json::parse(R"({
    "schema_version": 1,
    "field": {"type": "plane", "alpha": 1.0},
    "initial": {"type": "explicit", "positions": [[0, 0], [1, 0]], "intensities": [1, -1]},
    "t_final": 1.0
  })");
}

void expect_schema_error(const Json& j) { EXPECT_THROW(pv::parse_scenario(j), pv::SchemaError) << j.dump(); }

}  // namespace

TEST(ParseScenario, Minimal) {
  const auto sc = pv::parse_scenario(base());
  EXPECT_EQ(sc.field.kind, pv::FieldKind::plane);
  EXPECT_EQ(*sc.t_final, 1.0);
  const auto& e = std::get<pv::ExplicitInit>(sc.initial);
  EXPECT_EQ(e.positions.size(), 2u);
  EXPECT_EQ(sc.integrator.rel_tol, 1e-12);
}

TEST(ParseScenario, RejectsMalformedInput) {
  {
    auto j = base();
    j["schema_version"] = 2;
    expect_schema_error(j);
  }
  {
    auto j = base();
    j.erase("schema_version");
    expect_schema_error(j);
  }
  {
    auto j = base();
    j["initial"]["intensities"] = {1};
    expect_schema_error(j);
  }
  {
    auto j = base();
    j["unknown_key"] = 3;
    expect_schema_error(j);
  }
  {
    auto j = base();
    j["field"]["type"] = "torus";
    expect_schema_error(j);
  }
  {
    auto j = base();
    j.erase("t_final");
    expect_schema_error(j);
  }
  {
    auto j = base();
    j["t_final"] = -1.0;
    expect_schema_error(j);
  }
  {
    auto j = base();
    j["integrator"] = {{"rel_tol", 0.0}};
    expect_schema_error(j);
  }
  {
    auto j = base();
    j["analysis"] = {{"holder", {{"indices", {0, 5}}}}};
    expect_schema_error(j);
  }
  {
    auto j = base();
    j["analysis"] = {{"prevent_collapse", {{"etas", {1.5}}}}};
    expect_schema_error(j);
  }
  {
    auto j = base();
    j["field"] = {{"type", "disc"}};
    j["initial"]["positions"] = {{0.1, 0.0}, {0.2, 0.0}};
    j["analysis"] = {{"quasi_preservation", Json::object()}};
    expect_schema_error(j);
  }
  {
    auto j = base();
    j["initial"] = {{"type", "selfsimilar"}, {"alpha", 2.0}};
    expect_schema_error(j);
  }
  expect_schema_error(Json::array());
}

TEST(ParseScenario, RoundTrip) {
  auto j = base();
  j["name"] = "round-trip";
  j["integrator"] = {{"rel_tol", 1e-10}, {"collapse_radius", 1e-7}, {"max_step", 0.1}};
  j["analysis"] = {{"holder", {{"indices", {0}}, {"window", {1e-5, 1e-2}}}},
                   {"clusters", {{"kappa", 0.25}}},
                   {"prevent_collapse", {{"etas", {0.5}}, {"C0", 2.0}}},
                   {"quasi_preservation", {{"subsets", {{0}}}}}};
  const auto sc = pv::parse_scenario(j);
  const auto again = pv::parse_scenario(pv::to_json(sc));
  EXPECT_TRUE(sc == again);
  for (const char* file : {"selfsimilar_alpha1.json", "random_five.json", "disc_selfsimilar.json",
                           "translating_pair.json", "disc_single.json", "selfsimilar_template.json"}) {
    const auto s = pv::load_scenario(std::filesystem::path(PV_SOURCE_DIR) / "scenarios" / file);
    EXPECT_TRUE(s == pv::parse_scenario(pv::to_json(s))) << file;
  }
}

TEST(ParseScenario, Overrides) {
  auto sc = pv::parse_scenario(base());
  pv::apply_overrides(sc, {1e-9, 1e-5, std::nullopt});
  EXPECT_EQ(sc.integrator.rel_tol, 1e-9);
  EXPECT_EQ(sc.integrator.collapse_radius, 1e-5);
}

TEST(Execute, TranslatingPair) {
  const auto res = pv::execute(pv::parse_scenario(base()));
  EXPECT_EQ(res.exit_code, pv::kExitOk);
  const Json& s = res.summary;
  EXPECT_EQ(s["schema_version"], 1);
  EXPECT_EQ(s["termination"], "reached_final_time");
  EXPECT_TRUE(s["t_c"].is_null());
  EXPECT_LE(s["max_invariant_drift"]["H_relative"].get<double>(), 1e-9);
  const std::string csv = pv::trajectory_csv(res.record);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,x1,y1,x2,y2,H,Mx,My,I,L,dmin");
}

TEST(Execute, SelfSimilarSummary) {
  auto j = Json::parse(R"({"schema_version": 1, "field": {"type": "plane", "alpha": 2.0},
                           "initial": {"type": "selfsimilar", "scale": 0.5}, "run_to_collapse": true,
                           "analysis": {"holder": {}, "clusters": {}}})");
  const auto res = pv::execute(pv::parse_scenario(j));
  ASSERT_EQ(res.exit_code, pv::kExitOk) << res.summary.dump(2);
  const Json& s = res.summary;
  EXPECT_EQ(s["termination"], "collapsed");
  EXPECT_LE(s["t_c_relative_error"].get<double>(), 1e-3);
  // Scaling by 1/2 shortens the collapse time by 2^(alpha+1).
  EXPECT_NEAR(s["t_c_predicted"].get<double>(), s["selfsimilar"]["T_unit"].get<double>() / 8.0, 1e-15);
  EXPECT_EQ(s["selfsimilar"]["scale_functionals"]["winner"], "kernel_power");
  EXPECT_TRUE(s["holder"]["within_2_percent"].get<bool>());
  EXPECT_EQ(s["clusters"]["collision"]["parts"], Json::parse("[[0,1,2]]"));
}

TEST(Execute, RunToCollapseWithoutCollapseIsIntegrationFailure) {
  auto j = base();
  j["run_to_collapse"] = true;
  const auto res = pv::execute(pv::parse_scenario(j));
  EXPECT_EQ(res.exit_code, pv::kExitIntegration);
  EXPECT_EQ(res.summary["status"], "integration_failure");
}

TEST(Execute, HolderOnNonCollapsingRunIsAnalysisFailure) {
  auto j = base();
  j["analysis"] = {{"holder", Json::object()}};
  const auto res = pv::execute(pv::parse_scenario(j));
  EXPECT_EQ(res.exit_code, pv::kExitAnalysis);
  EXPECT_EQ(res.summary["status"], "analysis_failure");
}

TEST(Execute, RandomScenarioIsDeterministic) {
  const auto sc = pv::load_scenario(std::filesystem::path(PV_SOURCE_DIR) / "scenarios" / "random_five.json");
  const auto r1 = pv::execute(sc);
  const auto r2 = pv::execute(sc);
  EXPECT_EQ(r1.summary.dump(), r2.summary.dump());
  EXPECT_EQ(pv::trajectory_csv(r1.record), pv::trajectory_csv(r2.record));
  auto other = sc;
  pv::apply_overrides(other, {std::nullopt, std::nullopt, 8});
  EXPECT_NE(pv::execute(other).summary["intensities"].dump(), r1.summary["intensities"].dump());
}

TEST(FormatDouble, SeventeenDigitsRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) {
    const std::string s = pv::format_double(v);
    EXPECT_EQ(std::stod(s), v);
  }
  EXPECT_EQ(pv::format_double(0.1), "0.10000000000000001");
}
