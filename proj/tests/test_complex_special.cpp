// Scaled Hankel and Bessel values against frozen high-precision references
// (generated by tests/oracles/hankel_oracle.py, mpmath at 80 digits).

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "hsm/complex_special.hpp"

using hsm::Complex;

namespace {

struct HankelRef {
  double re, im;
  double h[3][2];  // e^{-iz} H_n(z), n = 0, 1, 2
};

const HankelRef kHankelRefs[] = {
    {1, 0, {{0.48770374908695632, -0.59620620960600407}, {-0.4196075759074961, -0.79238088847438188}, {-1.3269189009019485, -0.98855556734275969}}},
    {0.3, 0, {{0.69539637149990935, -1.0601262159981834}, {-0.53596452718314481, -2.2345182193407773}, {-4.2684932193875415, -13.836661912940332}}},
    {2, 1, {{0.25440385540217831, -0.45188936665729519}, {-0.4542040754626249, -0.36375873987442966}, {-0.76327061172205009, 0.34256400494280142}}},
    {3, 2, {{0.18523683018762185, -0.36782593931062495}, {-0.3768953228089765, -0.23932828562207103}, {-0.43282799013701747, 0.37333452219550801}}},
    {5, 0, {{0.24546755173048568, -0.25781663894718269}, {-0.23471137160719776, -0.27218040450585442}, {-0.33935210037336478, 0.14894447714484093}}},
    {7.5, 3.2, {{0.14987983507042989, -0.23364881719554111}, {-0.23128381473404519, -0.16650098248695305}, {-0.21808352748924741, 0.21834879729771577}}},
    {1, 11, {{0.010538212816898666, -0.23726212756120741}, {-0.24769651750540929, -0.011937066733432359}, {-0.016751397268917769, 0.28173302306655282}}},
    {0.2, 6, {{0.0051294511311848408, -0.31937210985162151}, {-0.34498607935196937, -0.0063673323264008921}, {-0.011078463885280248, 0.43416916921047478}}},
    {12, 0.5, {{0.15751305739907487, -0.16764437808355995}, {-0.16154722849075662, -0.16486877989809337}, {-0.18553387031884091, 0.14133378197220131}}},
    {10, 10, {{0.079527749800243594, -0.19527724249166739}, {-0.19821298562116656, -0.086279715243396289}, {-0.10797701988669988, 0.20647056952944442}}},
    {15, -2, {{0.15332691918112116, -0.13648869213710733}, {-0.13092777245951544, -0.15722469071631185}, {-0.1677327463030435, 0.11360462309200944}}},
    {20, 1, {{0.12202806245630129, -0.12988792985699506}, {-0.12705225640579396, -0.12545075152368903}, {-0.13532729377619939, 0.11800781627062106}}},
    {35, 40, {{0.038269629214700702, -0.10232701200809998}, {-0.10281538881677661, -0.039169789883279326}, {-0.041926500155527856, 0.10426801937571505}}},
    {0.05, 0.05, {{0.42931014911361646, -1.8750199534159888}, {-6.9531500135325826, -6.3946177631505821}, {-267.3846656827769, 13.045664961055997}}},
    {4, -1.5, {{0.3130063724723321, -0.23063026983372111}, {-0.18726642999903866, -0.32812000697682415}, {-0.34115823105106288, 0.056013319378284994}}},
    {2.49, 0.3, {{0.3128567222484855, -0.386432265282869}, {-0.34224065699088493, -0.39792172165150497}, {-0.62177255900871344, 0.10403520011220976}}},
    {2.51, 0.3, {{0.31197601692816116, -0.38474145912086295}, {-0.34086215542775506, -0.39599507255793909}, {-0.61693604318472898, 0.10565694229261279}}},
    {16.9, 2, {{0.12729147878654796, -0.14534737098732203}, {-0.14221038183748368, -0.13200597783032486}, {-0.14571188836297228, 0.13190529190402019}}},
    {17.1, 2, {{0.12666842613455018, -0.14441332122488491}, {-0.14131963135699846, -0.13129487582295972}, {-0.14474578821984145, 0.13117150675264299}}},
};

struct JyRef {
  double re, im;
  double jy[3][2][2];  // per order: J, Y
};

const JyRef kJyRefs[] = {
    {10, 0, {{{-0.24593576445134834, 0.0}, {0.055671167283599391, 0.0}}, {{0.043472746168861437, 0.0}, {0.24901542420695388, 0.0}}, {{0.25463031368512062, 0.0}, {-0.0058680824422086146, 0.0}}}},
    {0.7, 0.4, {{{0.91442006901250145, -0.13422920321225017}, {-0.093075880201485651, 0.4141442735608831}}, {{0.3488149296371302, 0.16771610261427731}, {-0.92486395227471636, 0.43357714640518317}}, {{0.043293444192735693, 0.066153203135764078}, {-1.3653053752761395, 1.6580082907268548}}}},
    {6, -3, {{{2.0482740795256663, -2.3430702841003261}, {-2.357779806976417, -2.0444422752361457}}, {{-2.1438233977385552, -2.1414277182887747}, {-2.1463401411361752, 2.128851377078417}}, {{-2.3344366231507778, 1.4861797728581788}, {1.501575585729648, 2.3259572903055669}}}},
    {11, 2, {{{-0.58270446869699626, 0.66382347351022596}, {-0.6843076249409859, -0.55784017663106272}}, {{-0.7054477672225436, -0.52432760074102912}, {0.54852004308012577, -0.68369806599703323}}, {{0.44176717844211565, -0.73353080268952569}, {0.75896881441118297, 0.41995667563702085}}}},
};

double rel_err(Complex got, Complex want) { return std::abs(got - want) / std::abs(want); }

}  // namespace

TEST(Hankel, ScaledMatchesReference) {
  for (const auto& r : kHankelRefs) {
    const Complex z(r.re, r.im);
    for (int n = 0; n < 3; ++n) {
      const Complex want(r.h[n][0], r.h[n][1]);
      EXPECT_LT(rel_err(hsm::hankel1_scaled(n, z), want), 1e-12) << "n=" << n << " z=" << z;
    }
    const auto all = hsm::hankel1_scaled_012(z);
    for (int n = 0; n < 3; ++n)
      EXPECT_LT(rel_err(all[n], Complex(r.h[n][0], r.h[n][1])), 1e-12) << "n=" << n << " z=" << z;
  }
}

TEST(Hankel, UnscaledMatchesReference) {
  for (const auto& r : kHankelRefs) {
    const Complex z(r.re, r.im);
    for (int n = 0; n < 3; ++n) {
      const Complex want = std::exp(hsm::kI * z) * Complex(r.h[n][0], r.h[n][1]);
      EXPECT_LT(rel_err(hsm::hankel1(n, z), want), 1e-12) << "n=" << n << " z=" << z;
    }
  }
}

TEST(Hankel, SeriesMatchesReference) {
  for (const auto& r : kJyRefs) {
    const Complex z(r.re, r.im);
    // Alternating terms grow like e^{|z|}/sqrt(|z|); accept the lost digits.
    const double tol = std::abs(z) < 5.0 ? 1e-12 : 1e-10;
    for (int n = 0; n < 3; ++n) {
      auto [j, y] = hsm::bessel_jy_series(n, z);
      EXPECT_LT(rel_err(j, Complex(r.jy[n][0][0], r.jy[n][0][1])), tol) << "J n=" << n << " z=" << z;
      EXPECT_LT(rel_err(y, Complex(r.jy[n][1][0], r.jy[n][1][1])), tol) << "Y n=" << n << " z=" << z;
    }
  }
}

// Wronskian J_1 Y_0 - J_0 Y_1 = 2/(pi z).
TEST(Hankel, WronskianFromSeries) {
  for (Complex z : {Complex(0.4, 0.1), Complex(3.0, -1.0), Complex(7.0, 2.0)}) {
    auto [j0, y0] = hsm::bessel_jy_series(0, z);
    auto [j1, y1] = hsm::bessel_jy_series(1, z);
    const Complex w = j1 * y0 - j0 * y1;
    EXPECT_LT(std::abs(w - 2.0 / (std::numbers::pi * z)), 1e-12 * std::abs(2.0 / z));
  }
}

// Branch transitions must be seamless: |z| just inside and outside each radius.
TEST(Hankel, ContinuousAcrossBranchRadii) {
  for (double radius : {2.5, 17.0}) {
    for (double ang : {-1.2, -0.4, 0.0, 0.5, 1.3}) {
      const Complex u = std::polar(1.0, ang);
      for (int n = 0; n < 3; ++n) {
        const Complex lo = hsm::hankel1_scaled(n, radius * (1.0 - 1e-14) * u);
        const Complex hi = hsm::hankel1_scaled(n, radius * (1.0 + 1e-14) * u);
        EXPECT_LT(std::abs(lo - hi), 1e-11 * std::abs(hi)) << "r=" << radius << " ang=" << ang;
      }
    }
  }
}

TEST(Hankel, ScaledStaysFiniteForLargeImaginaryPart) {
  const Complex z(0.5, 900.0);
  const Complex v = hsm::hankel1_scaled(0, z);
  EXPECT_TRUE(std::isfinite(v.real()) && std::isfinite(v.imag()));
  EXPECT_LT(std::abs(v), 1.0);
  EXPECT_THROW(hsm::hankel1(0, Complex(1.0, -800.0)), std::overflow_error);
}

TEST(Hankel, RejectsClosedLeftHalfPlane) {
  EXPECT_THROW(hsm::hankel1_scaled(0, Complex(0.0, 1.0)), std::domain_error);
  EXPECT_THROW(hsm::hankel1_scaled(1, Complex(-1.0, 0.0)), std::domain_error);
  EXPECT_THROW(hsm::hankel1(2, Complex(0.0, 0.0)), std::domain_error);
  EXPECT_THROW(hsm::hankel1_scaled(3, Complex(1.0, 0.0)), std::domain_error);
}

TEST(Hankel, SpotValues) {
  const Complex h = hsm::hankel1(0, Complex(1.0, 0.0));
  EXPECT_NEAR(h.real(), 0.76519768655796655, 1e-14);
  EXPECT_NEAR(h.imag(), 0.08825696421567696, 1e-14);
  const Complex z(2.0, 1.0);
  const Complex rec = (2.0 / z) * hsm::hankel1(1, z) - hsm::hankel1(0, z);
  EXPECT_LT(std::abs(hsm::hankel1(2, z) - rec), 1e-13 * std::abs(rec));
  EXPECT_LT(std::abs(hsm::hankel1_scaled(1, Complex(1.0, 0.0)) -
                     std::exp(-hsm::kI) * hsm::hankel1(1, Complex(1.0, 0.0))),
            1e-15);
  auto [j1, y1] = hsm::bessel_jy_series(1, Complex(1e-12, 0.0));
  EXPECT_LT(std::abs(j1), 1e-12);
  (void)y1;
}

TEST(Hankel, LargeArgumentLeadingTerm) {
  const double t = 200.0;
  const Complex lead = std::sqrt(2.0 / (std::numbers::pi * t)) * std::polar(1.0, -std::numbers::pi / 4);
  EXPECT_LT(std::abs(hsm::hankel1_scaled(0, Complex(t, 0.0)) - lead), 1e-2 * std::abs(lead));
}

TEST(Hankel, RecurrenceOnGrid) {
  for (double x = 0.1; x < 40.0; x *= 1.37) {
    for (double y = -10.0; y < 60.0; y += 3.3) {
      const Complex z(x, y);
      const Complex h0 = hsm::hankel1_scaled(0, z);
      const Complex h1 = hsm::hankel1_scaled(1, z);
      const Complex h2 = hsm::hankel1_scaled(2, z);
      const double m = std::max({std::abs(h0), std::abs(h1), std::abs(h2)});
      EXPECT_LT(std::abs(h2 - (2.0 / z) * h1 + h0), 1e-11 * m) << z;
    }
  }
}

// H_1 = -dH_0/dz, by central differences.
TEST(Hankel, DerivativeIdentity) {
  const double step = 1e-5;
  for (double x = 0.1; x <= 20.0; x += 1.3) {
    for (double y = 0.0; y <= 20.0; y += 1.7) {
      const Complex z(x, y);
      const Complex d = (hsm::hankel1_scaled(0, z + step) * std::exp(hsm::kI * step) -
                         hsm::hankel1_scaled(0, z - step) * std::exp(-hsm::kI * step)) /
                        (2.0 * step);
      // d is the centred difference of e^{-iz0} H_0(z) at z0, i.e. e^{-iz0} H_0'(z0).
      const Complex h1 = hsm::hankel1_scaled(1, z);
      EXPECT_LT(std::abs(-d - h1), 1e-6 * std::abs(h1)) << z;
    }
  }
}

// Fitted constants for |e^{-iz}H_1(z)| <= c1 (1/|z| + (1+|z|)^{-1/2}) and
// |e^{-iz}H_0(z)| <= c0 (log(1 + 1/|z|) + (1+|z|)^{-1/2}) over Re z > 0.
TEST(Hankel, ScaledBoundsOnGrid) {
  double c0 = 0.0;
  double c1 = 0.0;
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 100; ++j) {
      const double r = 1e-3 * std::pow(1e5, i / 99.0);
      const double arg = -0.5 * std::numbers::pi + 1e-3 + (std::numbers::pi - 2e-3) * j / 99.0;
      const Complex z = std::polar(r, arg);
      const double m = std::log(1.0 + 1.0 / r) + 1.0 / std::sqrt(1.0 + r);
      c0 = std::max(c0, std::abs(hsm::hankel1_scaled(0, z)) / m);
      c1 = std::max(c1, std::abs(hsm::hankel1_scaled(1, z)) / (1.0 / r + 1.0 / std::sqrt(1.0 + r)));
    }
  }
  EXPECT_LT(c0, 2.0);
  EXPECT_LT(c1, 2.0);
  const Complex far = hsm::hankel1_scaled(0, Complex(10.0, 100.0));
  const double rr = std::abs(Complex(10.0, 100.0));
  EXPECT_LE(std::abs(far), c0 * (std::log(1.0 + 1.0 / rr) + 1.0 / std::sqrt(1.0 + rr)));
}

TEST(Hankel, RealArgumentJYAreReal) {
  for (double t : {0.1, 0.9, 3.3, 7.0, 11.5}) {
    for (int n = 0; n < 3; ++n) {
      auto [j, y] = hsm::bessel_jy_series(n, Complex(t, 0.0));
      EXPECT_LE(std::abs(j.imag()), 1e-14);
      EXPECT_LE(std::abs(y.imag()), 1e-14);
    }
  }
}

// Series and the large-argument branches meet near the real axis at |z| in [10, 14].
TEST(Hankel, SeriesAgreesOnOverlapAnnulus) {
  for (double r = 10.0; r <= 14.0; r += 0.5) {
    for (double ang : {-0.1, 0.0, 0.1}) {
      const Complex z = std::polar(r, ang);
      for (int n = 0; n < 3; ++n) {
        auto [j, y] = hsm::bessel_jy_series(n, z);
        const Complex h = hsm::hankel1(n, z);
        EXPECT_LT(std::abs(j + hsm::kI * y - h), 1e-9 * std::abs(h)) << z;
      }
    }
  }
}
