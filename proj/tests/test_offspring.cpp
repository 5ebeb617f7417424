#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "bou/offspring.hpp"

using namespace bou;

namespace {
OffspringLaw law_half() { return build_offspring_law(2.0, 0.5, 1.0, 1024); }
}  // namespace

TEST_CASE("pmf matches the closed-form recursion") {
  const OffspringLaw law = law_half();
  // p_1 = m - (1+b)(m-1), p_2 = (m-1)(1+b)b/2, p_{n+1} = p_n (n-1-b)/(n+1)
  const double want[8] = {0.5, 0.375, 0.0625, 0.0234375, 0.01171875,
                          0.0068359375, 0.00439453125, 0.003021240234375};
  REQUIRE(law.pmf_table[0] == 0.0);  // p_0 = 0
  for (int n = 1; n <= 8; ++n)
    REQUIRE_THAT(law.pmf_table[static_cast<std::size_t>(n)],
                 Catch::Matchers::WithinAbs(want[n - 1], 1e-15));
}

TEST_CASE("pmf with tail correction sums to one and has mean m") {
  const OffspringLaw law = law_half();
  double sum = 0.0, mean = 0.0;
  for (std::size_t n = 0; n < law.pmf_table.size(); ++n) {
    sum += law.pmf_table[n];
    mean += static_cast<double>(n) * law.pmf_table[n];
  }
  sum += law.tail_mass(law.truncation_N);
  mean += law.tail_mean(law.truncation_N);
  REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(mean, Catch::Matchers::WithinAbs(law.m, 1e-9));
}

TEST_CASE("exact tail masses and tail mean") {
  const OffspringLaw law = law_half();
  REQUIRE_THAT(law.tail_mass(7), Catch::Matchers::WithinRel(1.611328124999999e-02, 1e-12));
  REQUIRE_THAT(law.tail_mass(64), Catch::Matchers::WithinRel(5.542211981891029e-04, 1e-11));
  REQUIRE_THAT(law.tail_mass(10000), Catch::Matchers::WithinRel(2.821053708783669e-07, 1e-10));
  REQUIRE_THAT(law.tail_mean(64), Catch::Matchers::WithinRel(1.064104700523089e-01, 1e-11));
}

TEST_CASE("generating function value") {
  const OffspringLaw law = law_half();
  REQUIRE_THAT(evaluate_pgf(law, 0.5), Catch::Matchers::WithinAbs(0.353553390593274, 1e-14));
  REQUIRE_THAT(evaluate_pgf(law, 0.0), Catch::Matchers::WithinAbs(0.0, 1e-15));  // p_0 = 0
  REQUIRE_THAT(evaluate_pgf(law, 1.0), Catch::Matchers::WithinAbs(1.0, 1e-15));
}

TEST_CASE("parameter validation") {
  REQUIRE_THROWS_AS(build_offspring_law(1.0, 0.5, 1.0, 64), std::invalid_argument);   // m <= 1
  REQUIRE_THROWS_AS(build_offspring_law(3.01, 0.5, 1.0, 64), std::invalid_argument);  // m > (1+b)/b
  REQUIRE_THROWS_AS(build_offspring_law(2.0, 0.0, 1.0, 64), std::invalid_argument);
  REQUIRE_THROWS_AS(build_offspring_law(2.0, 1.0, 1.0, 64), std::invalid_argument);
  REQUIRE_THROWS_AS(build_offspring_law(2.0, 0.5, 0.0, 64), std::invalid_argument);
  REQUIRE_NOTHROW(build_offspring_law(3.0, 0.5, 1.0, 64));  // boundary m = (1+b)/b allowed
}

TEST_CASE("boundary law has no single-child events") {
  const OffspringLaw law = build_offspring_law(3.0, 0.5, 0.5, 1024);
  REQUIRE(law.pmf_table[1] == 0.0);
  REQUIRE_THAT(law.lambda, Catch::Matchers::WithinAbs(1.0, 1e-15));
}

TEST_CASE("lambda is a(m-1)") {
  const OffspringLaw law = build_offspring_law(1.5, 0.25, 3.0, 256);
  REQUIRE_THAT(law.lambda, Catch::Matchers::WithinAbs(1.5, 1e-15));
}

TEST_CASE("sampling matches the pmf and the exact tail") {
  const OffspringLaw law = law_half();
  Stream s(55u);
  const int n = 2000000;
  std::vector<int> counts(10, 0);
  int over64 = 0;
  for (int i = 0; i < n; ++i) {
    const std::int64_t k = sample_offspring(law, s);
    REQUIRE(k >= 1);
    if (k < 10) ++counts[static_cast<std::size_t>(k)];
    if (k > 64) ++over64;
  }
  for (int k = 1; k <= 4; ++k) {
    const double p = law.pmf_table[static_cast<std::size_t>(k)];
    const double se = std::sqrt(p * (1 - p) / n);
    REQUIRE(std::abs(counts[static_cast<std::size_t>(k)] / static_cast<double>(n) - p) < 5 * se);
  }
  const double ptail = law.tail_mass(64);
  const double se = std::sqrt(ptail / n);
  REQUIRE(std::abs(over64 / static_cast<double>(n) - ptail) < 5 * se);
}

TEST_CASE("sampling beyond the table respects the tail law") {
  // tiny table forces the inverse-tail path often
  const OffspringLaw law = build_offspring_law(2.0, 0.5, 1.0, 16);
  Stream s(17u);
  const int n = 1000000;
  int over32 = 0, over128 = 0;
  for (int i = 0; i < n; ++i) {
    const std::int64_t k = sample_offspring(law, s);
    if (k > 32) ++over32;
    if (k > 128) ++over128;
  }
  REQUIRE(std::abs(over32 / static_cast<double>(n) - law.tail_mass(32)) <
          5 * std::sqrt(law.tail_mass(32) / n));
  REQUIRE(std::abs(over128 / static_cast<double>(n) - law.tail_mass(128)) <
          5 * std::sqrt(law.tail_mass(128) / n));
}
