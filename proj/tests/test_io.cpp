#include "jflow/io.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace jflow;

TEST(ParseProblem, RobinOnAGrid) {
  const Json j = Json::parse(R"({
    "problem": "robin", "name": "r", "p": 3, "T": 0.5, "tau": 0.1, "seed": 9,
    "grid": {"topology": "grid", "nx": 5, "ny": 4},
    "law": {"beta": {"kind": "linear", "params": [2.0]}, "g": {"kind": "tanh", "params": [1.0]}}
  })");
  const Problem pr = parse_problem(j);
  EXPECT_EQ(pr.kind, "robin");
  EXPECT_EQ(pr.pair.name, "r");
  EXPECT_EQ(pr.pair.v_dim(), 20);
  EXPECT_EQ(pr.pair.h_dim(), 6);
  EXPECT_DOUBLE_EQ(pr.T, 0.5);
  EXPECT_DOUBLE_EQ(pr.tau, 0.1);
  EXPECT_EQ(pr.seed, 9u);
  EXPECT_EQ(pr.pair.omega, 0.0);
  EXPECT_FALSE(pr.reference);
}

TEST(ParseProblem, SubdomainBoxAndReference) {
  const Json j = Json::parse(R"({
    "problem": "dirichlet", "p": 2,
    "grid": {"n": 12, "subdomain": {"lo": 3, "hi": 8}},
    "reference": {"relation": "domination",
                  "problem": {"problem": "coupled", "p": 2, "grid": {"n": 12, "subdomain": [3, 4, 5, 6, 7, 8]}}}
  })");
  const Problem pr = parse_problem(j);
  EXPECT_EQ(pr.pair.h_dim(), 6);
  ASSERT_TRUE(pr.reference);
  EXPECT_EQ(pr.relation, "domination");
  EXPECT_EQ(pr.reference->pair.v_dim(), 10);
  EXPECT_EQ(pr.reference->pair.H.weights(), pr.pair.H.weights());
}

TEST(ParseProblem, QuadraticAndInitialDatum) {
  const Problem pr =
      parse_problem(Json::parse(R"({"problem": "quadratic", "Q": [[1, 0.5], [0.5, 1]], "initial": [1, -1]})"));
  EXPECT_EQ(pr.pair.h_dim(), 2);
  ASSERT_TRUE(pr.initial);
  EXPECT_EQ((*pr.initial)[1], -1.0);
}

TEST(ParseProblem, ConfigurationErrors) {
  const char* bad[] = {
      R"([1, 2])",
      R"({"problem": "heat"})",
      R"({"problem": "robin"})",
      R"({"problem": "robin", "grid": {"n": 1}})",
      R"({"problem": "robin", "grid": {"topology": "torus", "n": 4}})",
      R"({"problem": "robin", "grid": {"n": 5}, "p": 1})",
      R"({"problem": "robin", "grid": {"n": 5}, "law": {"g": {"kind": "cubic"}}})",
      R"({"problem": "robin", "grid": {"n": 5}, "initial": [1, 2]})",
      R"({"problem": "robin", "grid": {"n": 5, "boundary": [7]}})",
      R"({"problem": "robin", "grid": {"n": "five"}})",
      R"({"problem": "quadratic", "Q": [[1, 0], [0]]})",
      R"({"problem": "dtn", "grid": {"n": 5}, "reference": {"problem": {"problem": "neumann", "grid": {"n": 5}}}})",
      R"({"problem": "robin", "grid": {"n": 5}, "reference": {"relation": "equal", "problem": {}}})",
  };
  for (const char* text : bad) EXPECT_THROW(parse_problem(Json::parse(text)), ConfigError) << text;
  EXPECT_THROW(load_problem("/nonexistent/problem.json"), ConfigError);
}

TEST(TrajectoryCsv, HeaderAndRoundTrip) {
  Trajectory tr;
  tr.times = {0.0, 0.1};
  Vector a(2), b(2);
  a << 1.0, 1.0 / 3.0;
  b << 0.5, -2.0;
  tr.states = {a, b};
  tr.energies = {1.5, 0.25};
  tr.step_residuals = {0.0, 1e-12};
  std::ostringstream out;
  write_trajectory_csv(out, tr);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,node_0,node_1,energy,step_residual");
  std::getline(in, line);
  double t, x0, x1, e, r;
  char c;
  std::istringstream row(line);
  row >> t >> c >> x0 >> c >> x1 >> c >> e >> c >> r;
  EXPECT_EQ(x1, 1.0 / 3.0);  // 17 significant digits round-trip exactly
  EXPECT_EQ(e, 1.5);
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 4), "0.10");
  EXPECT_FALSE(std::getline(in, line));
}

TEST(ReportJson, FieldsAndNesting) {
  PropertyReport part;
  part.name = "functional";
  part.max_violation = 0.5;
  part.tolerance = 1e-8;
  part.witness = {1.0, 2.0};
  part.finalize();
  PropertyReport r;
  r.name = "order";
  r.parts = {part};
  r.max_violation = -kInfinity;
  r.notes = {"n"};
  const Json j = to_json(r);
  EXPECT_EQ(j["name"], "order");
  EXPECT_TRUE(j["max_violation"].is_null());
  EXPECT_EQ(j["parts"][0]["passed"], false);
  EXPECT_EQ(j["parts"][0]["witness"][1], 2.0);
  EXPECT_EQ(j["notes"][0], "n");
}

TEST(Dissipation, ExcessOfAHandMadeTrajectory) {
  Trajectory tr;
  Vector a(1), b(1);
  a << 1.0;
  b << 0.5;
  tr.states = {a, b};
  tr.energies = {1.0, 0.2};
  // 0.2 + 0.25 / (2 * 0.5) - 1 = -0.55
  EXPECT_NEAR(dissipation_excess(WeightedSpace::uniform(1), tr, 0.5), -0.55, 1e-15);
}
