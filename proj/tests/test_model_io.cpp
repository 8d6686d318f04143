#include <doctest.h>

#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>

#include "mlstab/eval.hpp"
#include "mlstab/model.hpp"
#include "mlstab/model_io.hpp"
#include "random_models.hpp"

using namespace mlstab;

namespace {

/// Unique temp path helper; files are tiny and cleaned up per test.
std::string temp_path(const std::string& stem) {
  return std::string("/tmp/mlstab_io_") + stem + ".json";
}

}  // namespace

TEST_SUITE("model_io") {

TEST_CASE("model JSON round trip preserves structure and values") {
  std::mt19937 rng(2024);
  for (int k = 0; k < 10; ++k) {
    const Cpn1Model model = testing::make_random_model(rng);
    const Cpn1Model copy = model_from_json(model_to_json(model));

    CHECK(copy.partition().n == model.partition().n);
    CHECK(copy.partition().m == model.partition().m);
    CHECK(copy.partition().q == model.partition().q);
    CHECK(copy.partition().names == model.partition().names);
    CHECK(copy.r() == model.r());
    REQUIRE(copy.lifts().size() == model.lifts().size());

    // Exact round trip: identical residuals at random points.
    for (int j = 0; j < 5; ++j) {
      const Eigen::VectorXd v = testing::make_random_point(model, rng);
      const Eigen::VectorXd ha = eval_residual(model, model.make_vector(v));
      const Eigen::VectorXd hb = eval_residual(copy, copy.make_vector(v));
      CHECK((ha - hb).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("serialization is idempotent after one round trip") {
  std::mt19937 rng(77);
  const Cpn1Model model = testing::make_random_model(rng);
  const std::string once = model_to_json(model);
  const std::string twice = model_to_json(model_from_json(once));
  CHECK(once == twice);
}

TEST_CASE("save and load through a file") {
  std::mt19937 rng(5);
  const Cpn1Model model = testing::make_random_model(rng);
  const std::string path = temp_path("model");
  save_model(model, path);
  const Cpn1Model copy = load_model(path);
  CHECK(copy.partition().names == model.partition().names);
  CHECK(copy.r() == model.r());
  std::remove(path.c_str());
}

TEST_CASE("malformed model documents are rejected") {
  std::mt19937 rng(11);
  const Cpn1Model model = testing::make_random_model(rng);
  const std::string good = model_to_json(model);

  SUBCASE("not JSON at all") {
    CHECK_THROWS_AS((void)model_from_json("not json"), std::runtime_error);
  }
  SUBCASE("missing partition") {
    CHECK_THROWS_AS((void)model_from_json("{}"), std::runtime_error);
  }
  SUBCASE("non-finite entry") {
    std::string bad = good;
    // Splice an Infinity token into the phi matrix payload.
    const auto pos = bad.find("\"phi\"");
    REQUIRE(pos != std::string::npos);
    const auto open = bad.find('[', pos);
    REQUIRE(open != std::string::npos);
    bad.replace(open + 1, 0, "[1e999],");
    CHECK_THROWS_AS((void)model_from_json(bad), std::runtime_error);
  }
}

TEST_CASE("point files default unlisted signals to zero") {
  std::mt19937 rng(3);
  const Cpn1Model model = testing::make_random_model(rng);

  SignalVector v = model.make_vector();
  const std::string first = model.partition().names.front();
  v[first] = 1.5;
  const std::string text = point_to_json(v);

  const SignalVector back = point_from_json(model, text);
  CHECK(back[first] == doctest::Approx(1.5));

  // A document naming only one signal leaves the rest at zero.
  const SignalVector sparse = point_from_json(
      model, std::string("{\"signals\": {\"") + first + "\": 2.0}}");
  CHECK(sparse[first] == doctest::Approx(2.0));
  CHECK(sparse.values.cwiseAbs().sum() == doctest::Approx(2.0));
}

TEST_CASE("point loader rejects unknown signals and bad payloads") {
  std::mt19937 rng(4);
  const Cpn1Model model = testing::make_random_model(rng);
  CHECK_THROWS_AS(
      (void)point_from_json(model, "{\"signals\": {\"no_such\": 1.0}}"),
      std::invalid_argument);
  CHECK_THROWS_AS((void)point_from_json(model, "[]"), std::runtime_error);
}

TEST_CASE("schedules sort by time on load and round trip") {
  const std::string text =
      "[{\"t\": 2.0, \"signal\": \"u1\", \"value\": 5.0},"
      " {\"t\": 1.0, \"signal\": \"u0\", \"value\": -1.0}]";
  const std::vector<InputEvent> events = schedule_from_json(text);
  REQUIRE(events.size() == 2);
  CHECK(events[0].t == doctest::Approx(1.0));
  CHECK(events[0].signal == "u0");
  CHECK(events[1].t == doctest::Approx(2.0));
  CHECK(events[1].value == doctest::Approx(5.0));

  const std::vector<InputEvent> again =
      schedule_from_json(schedule_to_json(events));
  REQUIRE(again.size() == 2);
  CHECK(again[0].signal == events[0].signal);
  CHECK(again[1].t == doctest::Approx(events[1].t));
}

TEST_CASE("text file helpers round trip and report missing files") {
  const std::string path = temp_path("text");
  write_text_file(path, "hello\n");
  CHECK(read_text_file(path) == "hello\n");
  std::remove(path.c_str());
  CHECK_THROWS_AS((void)read_text_file(path), std::runtime_error);
}

}  // TEST_SUITE
