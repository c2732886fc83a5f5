#include "doctest.h"

#include <fstream>

#include "aec/config.hpp"
#include "support.hpp"

using namespace aec;

TEST_SUITE("config") {
  TEST_CASE("defaults validate and survive a text round-trip") {
    const ProtocolConfig defaults;
    CHECK_NOTHROW(validate(defaults));
    const std::string text = to_ini(defaults);
    CHECK(to_ini(parse_config(text)) == text);
  }

  TEST_CASE("parsed values override defaults") {
    const ProtocolConfig c = parse_config(
        "[protocol]\nmodel = hierarchical\nseed = 18446744073709551615\nsteps_per_fixation = 7\n"
        "[gassom]\neta_initial = 0.0125\nlearn = false\n"
        "[evaluation]\nscenes = conflict\n");
    CHECK(c.model == ModelKind::hierarchical);
    CHECK(c.seed == 18446744073709551615ull);
    CHECK(c.steps_per_fixation == 7);
    CHECK(c.agent.gassom.eta_initial == 0.0125);
    CHECK(!c.agent.learn_dictionaries);
    CHECK(c.eval.scenes == EvalScenes::conflict);
    CHECK(c.fixations_per_scene == ProtocolConfig{}.fixations_per_scene);
  }

  TEST_CASE("every value round-trips exactly") {
    ProtocolConfig c;
    c.agent.learner.actor_rate = 0.1 + 0.2;
    c.agent.temperature = 1.0 / 3.0;
    c.scene_manifest = "scenes/manifest.csv";
    const ProtocolConfig back = parse_config(to_ini(c));
    CHECK(back.agent.learner.actor_rate == c.agent.learner.actor_rate);
    CHECK(back.agent.temperature == c.agent.temperature);
    CHECK(back.scene_manifest == c.scene_manifest);
  }

  TEST_CASE("unknown keys, sections and malformed values are errors") {
    CHECK_THROWS_AS(parse_config("[protocol]\nsedd = 3\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("[nonsense]\nseed = 3\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("[protocol]\nseed = three\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("[protocol]\nmodel = serial\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("[policy]\ntemperature = 1.0x\n"), std::invalid_argument);
  }

  TEST_CASE("validation rejects out-of-range settings") {
    auto rejects = [](auto mutate) {
      ProtocolConfig c;
      mutate(c);
      CHECK_THROWS_AS(validate(c), std::invalid_argument);
    };
    rejects([](ProtocolConfig& c) { c.steps_per_fixation = 0; });
    rejects([](ProtocolConfig& c) { c.scene_rows = 100; });
    rejects([](ProtocolConfig& c) { c.curriculum.uniform_fraction = 1.5; });
    rejects([](ProtocolConfig& c) { c.curriculum.min_extent = 10; });
    rejects([](ProtocolConfig& c) { c.agent.temperature = 0.0; });
    rejects([](ProtocolConfig& c) { c.probe.max_disparity = 40; });
    rejects([](ProtocolConfig& c) { c.workers = 0; });
    rejects([](ProtocolConfig& c) { c.initial_residual_range = 100; });
  }

  TEST_CASE("config files load from disk") {
    aec::testing::TempDir dir("config");
    std::ofstream(dir / "run.ini") << "[protocol]\nscenes_per_run = 3\n";
    CHECK(load_config(dir / "run.ini").scenes_per_run == 3);
    CHECK_THROWS(load_config(dir / "missing.ini"));
  }
}
