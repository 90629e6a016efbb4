#include "srg/config.hpp"

#include <gtest/gtest.h>

using namespace srg;
using nlohmann::json;

namespace {

json base() {
  return json::parse(R"({
    "schema": 1,
    "particle": { "preset": "two_level", "gap": 0.3, "dipole": 0.5 },
    "coupling": { "type": "nelson", "kappa": { "preset": "sqrt_gauss", "sigma": 0.2 }, "g": 0.02, "mu": 0.5 },
    "modes": { "count": 6, "n_max": 3 }
  })");
}

} // namespace

TEST(Config, ParsesPresets) {
  ModelConfig c = parse_model_config(base());
  EXPECT_EQ(c.n_max, 3);
  EXPECT_EQ(c.H.modes.size(), 6u);
  EXPECT_DOUBLE_EQ(c.H.interaction.g, 0.02);
  EXPECT_NEAR(c.H.particle.level(1).real(), 0.3, 1e-15);
  EXPECT_FALSE(c.theta.has_value());
  EXPECT_EQ(c.solver.L_max, 4);
}

TEST(Config, ExplicitMatrixAndModes) {
  json j = base();
  j["particle"] = json::parse(R"({ "matrix": [[0, 0], [0, [0.4, 0]]], "position": [[0, 1], [1, 0]] })");
  j["modes"] = json::parse(R"({ "momenta": [0.2, 0.7], "weights": [0.1, 0.2] })");
  j["deform"] = {{"theta_im", 0.3}};
  ModelConfig c = parse_model_config(j);
  EXPECT_NEAR(c.H.particle.level(1).real(), 0.4, 1e-15);
  EXPECT_EQ(c.H.modes.momenta[1], 0.7);
  ASSERT_TRUE(c.theta.has_value());
  EXPECT_EQ(*c.theta, cd(0.0, 0.3));
}

TEST(Config, RejectsUnknownKeysAndSchema) {
  json j = base();
  j["extra"] = 1;
  EXPECT_THROW(parse_model_config(j), config_error);
  j = base();
  j["coupling"]["kappa"]["width"] = 1;
  EXPECT_THROW(parse_model_config(j), config_error);
  j = base();
  j["schema"] = 2;
  EXPECT_THROW(parse_model_config(j), config_error);
  j = base();
  j.erase("modes");
  EXPECT_THROW(parse_model_config(j), config_error);
}

TEST(Config, RejectsBadValues) {
  json j = base();
  j["coupling"]["type"] = "custom";
  EXPECT_THROW(parse_model_config(j), config_error);
  j = base();
  j["modes"]["count"] = "six";
  EXPECT_THROW(parse_model_config(j), config_error);
  j = base();
  j["particle"] = json::parse(R"({ "matrix": [[0, 1]] })");
  EXPECT_THROW(parse_model_config(j), config_error);
  EXPECT_THROW(load_model_config("/nonexistent/config.json"), config_error);
}
