#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "support.hpp"

using namespace wmsr;
using test::random_tensor;

namespace {

template <typename T>
double energy(const Tensor<T>& t) {
    double s = 0;
    for (T v : t.data()) s += double(v) * double(v);
    return s;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(double(a.data()[i]) - double(b.data()[i])));
    return m;
}

}  // namespace

TEST(Haar, ConstantInputHasOnlyApproximation) {
    const double v = 0.37;
    const Tensor<double> x(Shape{2, 3, 6, 8}, v);
    const auto y = haar_dwt2d(x);
    ASSERT_EQ(y.shape(), (Shape{2, 12, 3, 4}));
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t c = 0; c < 12; ++c)
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 4; ++j) {
                    if (c < 3) EXPECT_NEAR(y.at(n, c, i, j), 2 * v, 1e-15);
                    else EXPECT_EQ(y.at(n, c, i, j), 0.0);
                }
}

TEST(Haar, SingleBlockMatchesMatrix) {
    const Tensor<double> x(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
    const auto y = haar_dwt2d(x);
    EXPECT_DOUBLE_EQ(y.data()[0], 5.0);
    EXPECT_DOUBLE_EQ(y.data()[1], -1.0);
    EXPECT_DOUBLE_EQ(y.data()[2], -2.0);
    EXPECT_DOUBLE_EQ(y.data()[3], 0.0);

    // Against the published analysis matrix.
    for (std::size_t b = 0; b < 4; ++b) {
        double s = 0;
        for (std::size_t k = 0; k < 4; ++k) s += HaarFilterBank::analysis[b][k] * x.data()[k];
        EXPECT_DOUBLE_EQ(y.data()[b], s);
    }
    EXPECT_STREQ(HaarFilterBank::band_order, "aa,ad,da,dd");
}

TEST(Haar, AnalysisMatrixIsOrthogonal) {
    const auto& m = HaarFilterBank::analysis;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < 4; ++k) s += m[i][k] * m[j][k];
            EXPECT_DOUBLE_EQ(s, i == j ? 1.0 : 0.0);
        }
}

TEST(Haar, BandMajorLayout) {
    // Channel 1's aa band must sit at output channel 1, its dd band at 4*1 + ... = channel 7.
    Tensor<double> x(Shape{1, 2, 2, 2});
    x.at(0, 1, 0, 0) = 1.0;
    const auto y = haar_dwt2d(x);
    for (std::size_t c = 0; c < 8; ++c) {
        const double want = (c % 2 == 1) ? 0.5 : 0.0;
        EXPECT_DOUBLE_EQ(y.data()[c], want) << c;
    }
}

TEST(Haar, RoundTripAndEnergyFloat) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const Shape s{1 + seed % 3, 1 + seed % 5, 2 * (1 + seed % 7), 2 * (1 + seed % 11)};
        const auto x = random_tensor<float>(s, seed);
        const auto y = haar_dwt2d(x);
        EXPECT_LT(max_abs_diff(haar_idwt2d(y), x), 1e-6) << s.str();
        EXPECT_LT(std::abs(energy(y) - energy(x)) / energy(x), 1e-6);
    }
}

TEST(Haar, RoundTripAndEnergyDouble) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const Shape s{1 + seed % 2, 1 + seed % 4, 2 * (1 + seed % 9), 2 * (1 + seed % 6)};
        const auto x = random_tensor<double>(s, 100 + seed, -10, 10);
        const auto y = haar_dwt2d(x);
        EXPECT_LT(max_abs_diff(haar_idwt2d(y), x), 1e-12);
        EXPECT_LT(std::abs(energy(y) - energy(x)) / energy(x), 1e-12);
        EXPECT_LT(max_abs_diff(haar_dwt2d(haar_idwt2d(y)), y), 1e-12);
    }
}

TEST(Haar, Linear) {
    const auto x = random_tensor<double>(Shape{1, 2, 6, 4}, 1);
    const auto z = random_tensor<double>(Shape{1, 2, 6, 4}, 2);
    Tensor<double> comb(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) comb.data()[i] = 2.5 * x.data()[i] - 0.75 * z.data()[i];
    const auto a = haar_dwt2d(comb), bx = haar_dwt2d(x), bz = haar_dwt2d(z);
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.data()[i], 2.5 * bx.data()[i] - 0.75 * bz.data()[i], 1e-14);
}

TEST(Haar, InverseIsAdjoint) {
    const auto x = random_tensor<double>(Shape{2, 3, 4, 6}, 3);
    const auto y = random_tensor<double>(Shape{2, 12, 2, 3}, 4);
    const auto dx = haar_dwt2d(x), iy = haar_idwt2d(y);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < y.numel(); ++i) lhs += dx.data()[i] * y.data()[i];
    for (std::size_t i = 0; i < x.numel(); ++i) rhs += x.data()[i] * iy.data()[i];
    EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Haar, PhotographRequantisesExactly) {
    const PlanarImage img = to_planar(load_png(test::data_path("astronaut_128.png")));
    for (int c = 0; c < 3; ++c) {
        Tensor<float> x(Shape{1, 1, img.height, img.width});
        for (std::size_t i = 0; i < img.size(); ++i) x.data()[i] = static_cast<float>(img.planes[c][i]);
        const auto back = haar_idwt2d(haar_dwt2d(x));
        EXPECT_LT(max_abs_diff(back, x), 1e-6);
        for (std::size_t i = 0; i < img.size(); ++i)
            ASSERT_EQ(quantize(back.data()[i]), quantize(img.planes[c][i])) << "channel " << c << " pixel " << i;
    }
}

TEST(Haar, RejectsBadShapes) {
    EXPECT_THROW(haar_dwt2d(Tensor<double>(Shape{1, 1, 5, 4})), ContractError);
    EXPECT_THROW(haar_dwt2d(Tensor<double>(Shape{1, 1, 4, 3})), ContractError);
    EXPECT_THROW(haar_idwt2d(Tensor<double>(Shape{1, 6, 2, 2})), ContractError);
    try {
        haar_dwt2d(Tensor<double>(Shape{1, 2, 7, 4}));
        FAIL();
    } catch (const ContractError& e) {
        EXPECT_NE(std::string(e.what()).find("(1,2,7,4)"), std::string::npos);
    }
}
