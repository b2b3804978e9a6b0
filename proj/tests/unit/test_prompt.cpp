#include <doctest.h>

#include "hoir/errors.hpp"
#include "hoir/prompt.hpp"

using namespace hoir;

namespace {

bool contains(const std::string& haystack, std::string_view needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("common-sense prompt") {
  std::vector<std::string> one{"<person,hug,person>"};
  auto bundle = render_common_sense(one);
  CHECK(bundle.instruction == kCommonSenseInstruction);
  REQUIRE(bundle.demonstrations.size() == 5);
  CHECK(bundle.demonstrations[4].input == "<person,ride,bicycle>");
  CHECK(bundle.demonstrations[4].output == "1.0");
  CHECK(bundle.demonstrations[2].input == "<person,hug,table>");
  CHECK(bundle.demonstrations[2].output == "0.1");

  auto text = bundle.render();
  CHECK(contains(text, "Input:<person,sit on,chair> Output: 1.0"));
  CHECK(text.ends_with("Input: <person,hug,person> Output:"));
  CHECK(text.find("Input:<person,ride,bicycle>") < text.find("Input: <person,hug,person>"));

  std::vector<std::string> two{"<person,hold,cup>", "<person,ride,horse>"};
  auto rendered = render_common_sense(two).render();
  CHECK(rendered.find("Input: <person,hold,cup> Output:") < rendered.find("Input: <person,ride,horse> Output:"));
  CHECK(render_common_sense(two).render() == rendered);

  CHECK_THROWS_AS(render_common_sense({}), PreconditionError);
}

TEST_CASE("spatial prompts") {
  std::vector<std::string> ride{"ride"};
  auto awareness = render_spatial_awareness(ride);
  CHECK(contains(awareness.instruction, "\"ride\""));
  CHECK(contains(awareness.instruction, "\"look at\""));
  CHECK(awareness.render().ends_with("Input: ride Output:"));
  bool has_contrast = false;
  for (const auto& d : awareness.demonstrations) has_contrast |= d.input == "look at" && d.output == "no";
  CHECK(has_contrast);

  SpatialQuery q{"<person,ride,bicycle>", {10, 10, 50, 100}, {12, 80, 55, 140}};
  CHECK(spatial_test_input(q) == "<person,ride,bicycle> person box [10,10,50,100], object box [12,80,55,140]");
  SpatialQuery fractional{"<person,ride,bicycle>", {10.4, 10.6, 50.5, 99.5}, {12, 80, 55, 140}};
  CHECK(contains(spatial_test_input(fractional), "person box [10,11,51,100]"));
  std::vector<SpatialQuery> queries{q};
  CHECK(render_spatial_scoring(queries).render().ends_with(
      "Input: <person,ride,bicycle> person box [10,10,50,100], object box [12,80,55,140] Output:"));
  CHECK_THROWS_AS(render_spatial_awareness({}), PreconditionError);
}

TEST_CASE("temporal prompt") {
  std::vector<TransitionText> t{{"<person,ride,bike>", "<person,carry,bike>"},
                                {"<person,hold,cup>", "<person,look at,cup>"}};
  auto text = render_temporal(t).render();
  CHECK(contains(text, "Input: frame i: <person,ride,bike>; frame i+1: <person,carry,bike> Output:"));
  CHECK(text.find("<person,carry,bike> Output:") < text.find("<person,look at,cup> Output:"));
  std::vector<TransitionText> same{{"<person,ride,bike>", "<person,ride,bike>"}};
  CHECK_THROWS_AS(render_temporal(same), PreconditionError);
  CHECK_THROWS_AS(render_temporal({}), PreconditionError);
}

TEST_CASE("debate turns") {
  auto empty = render_debate_turn(DebateRole::debater, "Q?", {});
  CHECK(empty == std::string(kDebaterPreamble) + "\n\nQuestion: Q?");

  std::vector<HistoryEntry> h1{{"alpha", "first answer", false}};
  auto with_one = render_debate_turn(DebateRole::debater, "Q?", h1);
  CHECK(with_one.find("Q?") < with_one.find("[alpha] first answer"));

  std::vector<HistoryEntry> h;
  for (int i = 0; i < 10; ++i) h.push_back({"d" + std::to_string(i % 3), "entry " + std::to_string(i), false});
  auto judge = render_debate_turn(DebateRole::judge, "Q?", h);
  CHECK(judge.starts_with(kJudgePreamble));
  std::size_t last = 0;
  for (const auto& e : h) {
    auto pos = judge.find("entry " + e.text.substr(6));
    REQUIRE(pos != std::string::npos);
    CHECK(pos >= last);
    last = pos;
  }
  CHECK_THROWS_AS(render_debate_turn(DebateRole::judge, "Q?", {}), PreconditionError);

  std::vector<HistoryEntry> failed{{"beta", "", true}};
  CHECK(contains(render_debate_turn(DebateRole::debater, "Q?", failed), "[beta] (no response)"));
}

TEST_CASE("parse_score_output") {
  auto one = parse_score_output("Output: 0.7", 1);
  REQUIRE(one.values[0]);
  CHECK(*one.values[0] == doctest::Approx(0.7));

  auto two = parse_score_output("reasoning... Output: 1.0 ... Output: 0.1", 2);
  CHECK(*two.values[0] == doctest::Approx(1.0));
  CHECK(*two.values[1] == doctest::Approx(0.1));

  auto none = parse_score_output("I cannot answer", 1);
  CHECK_FALSE(none.values[0]);
  CHECK(none.failures() == 1);

  auto missing = parse_score_output("Output: 0.2", 3);
  CHECK(missing.failures() == 2);

  auto drift = parse_score_output("Output: 1.00001", 1);
  CHECK(*drift.values[0] == 1.0);
  CHECK(drift.warnings.size() == 1);
  CHECK_FALSE(parse_score_output("Output: 7", 1).values[0]);
  CHECK(*parse_score_output("output: -0.03", 1).values[0] == 0.0);
  CHECK_FALSE(parse_score_output("Output: -0.2", 1).values[0]);
  CHECK(*parse_score_output("0.4", 1).values[0] == doctest::Approx(0.4));
  CHECK_FALSE(parse_score_output("Output: high", 1).values[0]);
  CHECK_THROWS_AS(parse_score_output("x", 0), PreconditionError);
}

TEST_CASE("ideal completion recovers the demonstration outputs") {
  std::vector<std::string> tests;
  std::string ideal;
  auto demos = render_common_sense(std::vector<std::string>{"x"}).demonstrations;
  for (const auto& d : demos) ideal += "Input:" + d.input + " Output: " + d.output + "\n";
  auto parsed = parse_score_output(ideal, demos.size());
  for (std::size_t i = 0; i < demos.size(); ++i) {
    REQUIRE(parsed.values[i]);
    CHECK(*parsed.values[i] == std::stod(demos[i].output));
  }
}

TEST_CASE("parse_binary_output") {
  CHECK(parse_binary_output("Yes, riding requires...") == true);
  CHECK(parse_binary_output("no") == false);
  CHECK_FALSE(parse_binary_output("maybe"));
  CHECK(parse_binary_output("Looking at the relation. Output: YES") == true);
  CHECK(parse_binary_output("Output: No.") == false);
  CHECK_FALSE(parse_binary_output("nothing"));
}
