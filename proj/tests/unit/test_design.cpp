#include "doctest.h"

#include <random>

#include "distreg/design.hpp"
#include "distreg/error.hpp"
#include "helpers.hpp"

using namespace distreg;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd projector(const MatrixXd& A) {
    Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeThinU);
    int r = 0;
    for (double s : svd.singularValues()) r += s > 1e-10 * svd.singularValues()[0];
    MatrixXd U = svd.matrixU().leftCols(r);
    return U * U.transpose();
}

int svd_rank(const MatrixXd& A) {
    Eigen::JacobiSVD<MatrixXd> svd(A);
    int r = 0;
    for (double s : svd.singularValues()) r += s > 1e-9 * svd.singularValues()[0];
    return r;
}

DataTable swiss_like(std::size_t n) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<double> inc, age, edu, yk, ok;
    std::vector<std::string> part, foreign;
    for (std::size_t i = 0; i < n; ++i) {
        inc.push_back(10 + U(rng));
        age.push_back(2 + 4 * U(rng));
        edu.push_back(std::floor(8 + 10 * U(rng)));
        yk.push_back(std::floor(3 * U(rng)));
        ok.push_back(std::floor(3 * U(rng)));
        part.push_back(U(rng) < 0.5 ? "no" : "yes");
        foreign.push_back(i % 3 ? "no" : "yes");
    }
    DataTable t;
    t.add_categorical("participation", part);
    t.add_numeric("income", inc);
    t.add_numeric("age", age);
    t.add_numeric("education", edu);
    t.add_numeric("youngkids", yk);
    t.add_numeric("oldkids", ok);
    t.add_categorical("foreign", foreign);
    return t;
}

}

TEST_SUITE("design") {
    TEST_CASE("SwissLabor design columns") {
        DataTable t = swiss_like(40);
        ModelFrame f = testing::frame_for(
            {"participation ~ income + age + education + youngkids + oldkids + foreign + I(age^2)"}, t, binomial_family());
        REQUIRE(f.params.size() == 1);
        CHECK(f.params[0].name == "pi");
        const std::vector<std::string> cols = {"(Intercept)", "income",  "age",        "education",
                                               "youngkids",   "oldkids", "foreignyes", "I(age^2)"};
        CHECK(f.params[0].blocks[0].column_names == cols);
        CHECK(f.params[0].blocks[0].coef_names[1] == "pi.p.income");
        CHECK(f.y.minCoeff() == 0.0);
        CHECK(f.y.maxCoeff() == 1.0);
        CHECK(f.registry.size() == 8);
    }

    TEST_CASE("intercept-only design is a column of ones") {
        DataTable t;
        t.add_numeric("y", {1, 2, 3, 4, 5});
        ModelFrame f = testing::frame_for({"y ~ 1"}, t, gaussian_family());
        CHECK(f.params[0].blocks[0].X == MatrixXd::Ones(5, 1));
    }

    TEST_CASE("missing rows are dropped") {
        DataTable t;
        t.add_numeric("y", {1, 2, std::nan(""), 4, 5});
        t.add_numeric("x", {1, 2, 3, 4, std::nan("")});
        ModelFrame f = testing::frame_for({"y ~ x"}, t, gaussian_family());
        CHECK(f.n == 3);
        CHECK(f.dropped_rows == 2);
    }

    TEST_CASE("unknown column") {
        DataTable t;
        t.add_numeric("y", {1, 2, 3});
        CHECK_THROWS_AS(testing::frame_for({"y ~ z"}, t, gaussian_family()), DataError);
    }

    TEST_CASE("P-spline basis properties") {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> U(-1.0, 4.0);
        VectorXd x(150);
        for (auto& v : x) v = U(rng);
        for (int k = 4; k <= 30; ++k) {
            PsplineBasis b = pspline_basis(x, k);
            CHECK(b.X.cols() == k);
            CHECK((b.X.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-10);
            CHECK((b.K * VectorXd::Ones(k)).norm() < 1e-10);
            CHECK((b.K * VectorXd::LinSpaced(k, 0.0, k - 1.0)).norm() < 1e-9);
            CHECK(svd_rank(b.K) == k - 2);
        }
        PsplineBasis b = pspline_basis(x, 10, 3, 1);
        CHECK(svd_rank(b.K) == 9);
        CHECK(difference_matrix(5, 2).rows() == 3);
    }

    TEST_CASE("centering") {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> N(0.0, 1.0);
        MatrixXd X(20, 10), R(10, 10);
        for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = N(rng);
        for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = N(rng);
        MatrixXd K = R.transpose() * R;
        CenteredBlock c = center_block(X, K);
        CHECK(c.X.cols() == 9);
        CHECK(c.X.colwise().sum().cwiseAbs().maxCoeff() < 1e-8 * 20);
        VectorXd beta = VectorXd::LinSpaced(9, -1.0, 2.0);
        CHECK(std::abs((c.X * beta).mean()) < 1e-12);
        CHECK((c.K - c.Z.transpose() * K * c.Z).norm() < 1e-10);

        // Oracle: fits X b with 1'X b = 0 span the same space as X_c.
        MatrixXd C = (VectorXd::Ones(20).transpose() * X);
        Eigen::FullPivLU<MatrixXd> lu(C);
        MatrixXd constrained = X * lu.kernel();
        CHECK((projector(constrained) - projector(c.X)).cwiseAbs().maxCoeff() < 1e-8);
    }

    TEST_CASE("smooth block on new data") {
        std::vector<double> x, y;
        for (int i = 0; i < 50; ++i) {
            x.push_back(i / 49.0);
            y.push_back(std::sin(6.0 * i / 49.0));
        }
        DataTable t;
        t.add_numeric("x", x);
        t.add_numeric("y", y);
        ModelFrame f = testing::frame_for({"y ~ s(x, k = 8)"}, t, gaussian_family());
        const TermBlock& b = f.params[0].blocks[1];
        CHECK(b.kind == BlockKind::smooth);
        CHECK(b.ncoef() == 7);
        CHECK(b.coef_names[0] == "mu.s.s(x).b1");
        CHECK(b.tau2_name == "mu.s.s(x).tau21");
        CHECK((b.design(t) - b.X).cwiseAbs().maxCoeff() < 1e-12);
        DataTable far;
        far.add_numeric("x", {5.0});
        CHECK_THROWS_AS(b.design(far), DataError);
    }

    TEST_CASE("flatten round-trip") {
        DataTable t;
        t.add_numeric("y", {1, 2, 3, 5, 4, 6});
        t.add_numeric("x", {0, 1, 2, 3, 4, 5});
        ModelFrame f = testing::frame_for({"y ~ x", "sigma ~ x"}, t, gaussian_family());
        VectorXd v = VectorXd::LinSpaced(static_cast<Eigen::Index>(f.ncoef()), 1.0, 4.0);
        CHECK(flatten(f, unflatten(f, v)) == v);
    }
}
