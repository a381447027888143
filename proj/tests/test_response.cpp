// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "mflab/response.hpp"

using namespace mflab;

TEST(Response, HeatValues) {
  EXPECT_DOUBLE_EQ(response_eval(FilterSpec::heat(1.0), 0.0), 1.0);
  EXPECT_NEAR(response_eval(FilterSpec::heat(1.0), 1.0), 0.36787944117144233, 1e-15);
}

TEST(Response, TikhonovHalfAtOne) { EXPECT_DOUBLE_EQ(response_eval(FilterSpec::tikhonov(1.0), 1.0), 0.5); }

TEST(Response, BandRejectDipsAtCenter) {
  const auto h = FilterSpec::band_reject(4.0, 0.5, 0.8);
  EXPECT_NEAR(response_eval(h, 4.0), 0.2, 1e-15);
  EXPECT_GT(response_eval(h, 10.0), 0.999);
}

TEST(Response, NegativeLambdaRejected) {
  try {
    response_eval(FilterSpec::heat(1.0), -0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_argument);
  }
}

TEST(Response, TapsHaveNoResponse) {
  const auto t = FilterSpec::taps({1.0, 2.0});
  EXPECT_FALSE(t.is_response());
  EXPECT_THROW(response_eval(t, 1.0), Error);
}

TEST(Response, TabulatedInterpolatesAndClamps) {
  const auto t = FilterSpec::tabulated({0.0, 1.0, 3.0}, {1.0, 0.0, 2.0});
  EXPECT_DOUBLE_EQ(response_eval(t, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(response_eval(t, 0.25), 0.75);
  EXPECT_DOUBLE_EQ(response_eval(t, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(response_eval(t, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(response_eval(t, 7.0), 2.0);
}

TEST(Response, ValidateRejectsBadParameters) {
  EXPECT_THROW(validate(FilterSpec::heat(-1.0)), Error);
  EXPECT_THROW(validate(FilterSpec::tikhonov(-0.5)), Error);
  EXPECT_THROW(validate(FilterSpec::band_reject(1.0, 0.0, 1.0)), Error);
  EXPECT_THROW(validate(FilterSpec::tabulated({1.0, 1.0}, {0.0, 0.0})), Error);
  EXPECT_THROW(validate(FilterSpec::tabulated({1.0}, {})), Error);
  EXPECT_THROW(validate(FilterSpec::taps({})), Error);
  EXPECT_NO_THROW(validate(FilterSpec::heat(0.0)));
}

// h in (0, 1] and nonincreasing for heat with tau >= 0.
TEST(Response, HeatBoundedAndMonotone) {
  for (double tau : {0.0, 0.1, 1.0, 5.0}) {
    double prev = 2.0;
    for (int i = 0; i <= 200; ++i) {
      const double h = response_eval(FilterSpec::heat(tau), 0.05 * i);
      EXPECT_GT(h, 0.0);
      EXPECT_LE(h, 1.0);
      EXPECT_LE(h, prev);
      prev = h;
    }
  }
}

TEST(Response, FamilyNames) {
  EXPECT_EQ(family_name(FilterSpec::heat(1.0)), "heat");
  EXPECT_EQ(family_name(FilterSpec::constant(1.0)), "constant");
  EXPECT_EQ(family_name(FilterSpec::taps({1.0})), "taps");
}
