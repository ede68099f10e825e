#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include <apixelhop/jacobi.hpp>
#include <apixelhop/random.hpp>

using namespace apixelhop;

namespace {

std::vector<double> random_symmetric(std::size_t n, Rng& rng) {
    std::vector<double> a(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) a[i * n + j] = a[j * n + i] = uniform(rng, -1.0, 1.0);
    return a;
}

} // namespace

TEST(Jacobi, MatchesEigenOnRandomSymmetric) {
    Rng rng(21);
    for (std::size_t n : {2u, 5u, 12u, 27u, 48u}) {
        const auto a = random_symmetric(n, rng);
        const auto eig = jacobi_eigen(a, n);
        Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i * n + j];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> oracle(m);
        // Eigen sorts ascending.
        for (std::size_t i = 0; i < n; ++i)
            EXPECT_NEAR(eig.values[i], oracle.eigenvalues()(static_cast<Eigen::Index>(n - 1 - i)), 1e-10) << n;
        for (std::size_t i = 0; i < n; ++i) {
            const auto v = eig.vector(i);
            const auto ov = oracle.eigenvectors().col(static_cast<Eigen::Index>(n - 1 - i));
            double dot = 0.0;
            for (std::size_t t = 0; t < n; ++t) dot += v[t] * ov(static_cast<Eigen::Index>(t));
            EXPECT_NEAR(std::abs(dot), 1.0, 1e-9) << "n=" << n << " i=" << i;
        }
    }
}

TEST(Jacobi, VectorsOrthonormalAndValuesDescending) {
    Rng rng(4);
    const std::size_t n = 20;
    const auto eig = jacobi_eigen(random_symmetric(n, rng), n);
    for (std::size_t i = 0; i + 1 < n; ++i) EXPECT_GE(eig.values[i], eig.values[i + 1]);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t t = 0; t < n; ++t) dot += eig.vector(i)[t] * eig.vector(j)[t];
            EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-12);
        }
}

TEST(Jacobi, DiagonalInput) {
    const std::vector<double> a{1.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 2.0};
    const auto eig = jacobi_eigen(a, 3);
    EXPECT_EQ(eig.values, (std::vector<double>{3.0, 2.0, 1.0}));
    EXPECT_EQ(eig.sweeps, 0);
}

TEST(Jacobi, RejectsNonSquare) {
    EXPECT_THROW(jacobi_eigen(std::vector<double>(5, 0.0), 2), Error);
}
