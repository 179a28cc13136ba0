#include <doctest.h>

#include <random>

#include "edgemark/error.hpp"
#include "edgemark/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace edgemark;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Precondition;
}

Dataset labelled(const std::vector<std::string>& truth, const std::vector<std::string>& label_set) {
  Dataset d;
  for (const auto& l : label_set) d.label_set.push_back(ClassLabel{l});
  for (std::size_t i = 0; i < truth.size(); ++i)
    d.samples.push_back(LabeledSample{"r" + std::to_string(i), "t", "t", ClassLabel{truth[i]}});
  return d;
}

std::vector<InferenceRecord> predictions(const std::vector<std::string>& pred) {
  std::vector<InferenceRecord> out;
  for (std::size_t i = 0; i < pred.size(); ++i)
    out.push_back(InferenceRecord{"r" + std::to_string(i), ClassLabel{pred[i]}, 0.1, 0, 100, std::nullopt});
  return out;
}

MetricInputs inputs(double flops, int q, double t) {
  MetricInputs in;
  in.flops_throughput = flops;
  in.q_bits = q;
  in.total_time_s = t;
  return in;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("quality against a brute-force confusion matrix") {
    std::mt19937_64 rng(2024);
    const std::vector<std::string> names{"positive", "neutral", "negative", "mixed"};
    for (int instance = 0; instance < 200; ++instance) {
      const std::size_t k = 2 + rng() % 3;
      const std::size_t n = 1 + rng() % 60;
      std::vector<std::string> set(names.begin(), names.begin() + static_cast<long>(k)), truth, pred;
      for (std::size_t i = 0; i < n; ++i) {
        truth.push_back(set[rng() % k]);
        pred.push_back(rng() % 3 == 0 ? truth.back() : set[rng() % k]);
      }
      const auto got = quality(predictions(pred), labelled(truth, set));
      const auto want = oracle::brute_force_quality(truth, pred);
      CHECK(got.accuracy == doctest::Approx(want.accuracy).epsilon(1e-12));
      CHECK(got.f_score_macro == doctest::Approx(want.macro_f1).epsilon(1e-12));
      CHECK(got.n_total == n);
    }
  }

  TEST_CASE("quality is invariant under relabelling") {
    const std::vector<std::string> truth{"a", "b", "c", "a", "b", "c", "a", "a"};
    const std::vector<std::string> pred{"a", "c", "c", "b", "b", "a", "a", "c"};
    auto rename = [](std::vector<std::string> v) {
      for (auto& s : v) s = s == "a" ? "z" : s == "b" ? "x" : "y";
      return v;
    };
    const auto q1 = quality(predictions(pred), labelled(truth, {"a", "b", "c"}));
    const auto q2 = quality(predictions(rename(pred)), labelled(rename(truth), {"y", "x", "z"}));
    CHECK(q1.accuracy == q2.accuracy);
    CHECK(q1.f_score_macro == doctest::Approx(q2.f_score_macro).epsilon(1e-15));
  }

  TEST_CASE("perfect and hopeless predictions") {
    const std::vector<std::string> truth{"a", "b", "a"};
    const auto perfect = quality(predictions(truth), labelled(truth, {"a", "b", "c"}));
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.f_score_macro == 1.0);
    const auto none = quality(predictions({"b", "a", "b"}), labelled(truth, {"a", "b"}));
    CHECK(none.accuracy == 0.0);
    CHECK(none.f_score_macro == 0.0);
  }

  TEST_CASE("quality errors") {
    const auto d = labelled({"a", "b"}, {"a", "b"});
    CHECK(code_of([&] { quality({}, d); }) == ErrorCode::EmptyRecords);
    auto dup = predictions({"a", "b"});
    dup[1].sample_id = dup[0].sample_id;
    CHECK(code_of([&] { quality(dup, d); }) == ErrorCode::IdMismatch);
    auto stranger = predictions({"a"});
    stranger[0].sample_id = "nope";
    CHECK(code_of([&] { quality(stranger, d); }) == ErrorCode::IdMismatch);
  }

  TEST_CASE("speed index examples") {
    CHECK(speed_index(inputs(2.18e8, 32, 64719)) == doctest::Approx(2.18e8 / (32.0 * 64719)).epsilon(1e-15));
    CHECK(speed_index(inputs(9.82e8, 8, 14851)) == doctest::Approx(8265.4366709).epsilon(1e-9));
    // Halving the bit width doubles the index.
    CHECK(speed_index(inputs(1e9, 8, 10)) == 2 * speed_index(inputs(1e9, 16, 10)));
    CHECK(code_of([] { speed_index(inputs(1, 8, 0)); }) == ErrorCode::Precondition);
  }

  TEST_CASE("model performance index") {
    MetricInputs in;
    in.accuracy_avg = 0.685;
    in.fscore_avg = 0.602;
    in.power_tot_kw = 2919.80;
    CHECK(model_performance_index(in) == doctest::Approx((0.685 + 0.602) / 2919.80).epsilon(1e-15));
    in.power_tot_kw = 0;
    CHECK(code_of([&] { model_performance_index(in); }) == ErrorCode::ZeroPower);
  }

  TEST_CASE("resource efficiency ratio") {
    MetricInputs in;
    in.energy_tot_j = 1200;
    in.cpu_pct_avg = 40;
    in.mem_pct_avg = 30;
    CHECK(resource_efficiency_ratio(in) == 1.0);
    in.mem_pct_avg = 0;
    CHECK(code_of([&] { resource_efficiency_ratio(in); }) == ErrorCode::ZeroUtilization);
  }

  TEST_CASE("flops throughput") {
    CHECK(flops_throughput(3.6e8, 1000, 1060) == doctest::Approx(3.6e8 * 1000 / 1060));
    CHECK(code_of([] { flops_throughput(1, 0, 1); }) == ErrorCode::Precondition);
  }

  TEST_CASE("min-max normalization") {
    const auto n = normalize_attributes({{1, 5, 7}, {3, 5, 9}, {2, 5, 8}});
    CHECK(n[0] == std::vector<double>{0, 1, 0});
    CHECK(n[1] == std::vector<double>{1, 1, 1});
    CHECK(n[2] == std::vector<double>{0.5, 1, 0.5});
    CHECK(code_of([] { normalize_attributes({{1, 2}}); }) == ErrorCode::TooFewRows);
    CHECK(code_of([] { normalize_attributes({{1, 2}, {1}}); }) == ErrorCode::Precondition);
  }

  TEST_CASE("mean and sample standard deviation") {
    const std::vector<double> constant(7, 0.1);
    const auto c = mean_and_stddev(constant);
    CHECK(c.mean == 0.1);
    CHECK(c.stddev == 0.0);
    CHECK(c.n == 7);

    const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
    const auto s = mean_and_stddev(v);
    CHECK(s.mean == 5.0);
    CHECK(s.stddev == doctest::Approx(std::sqrt(32.0 / 7)));
    CHECK(mean_and_stddev(std::vector<double>{3}).stddev == 0.0);
    CHECK(mean_and_stddev(std::vector<double>{}).n == 0);
  }
}
