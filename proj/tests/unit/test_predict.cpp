#include "doctest.h"

#include <cmath>

#include "distreg/diagnostics.hpp"
#include "distreg/engine.hpp"
#include "distreg/error.hpp"
#include "distreg/predict.hpp"
#include "distreg/sampler.hpp"
#include "distreg/synth.hpp"
#include "helpers.hpp"

using namespace distreg;
using Eigen::VectorXd;

TEST_SUITE("predict") {
    TEST_CASE("link predictions at the mode equal the predictors") {
        DataTable d = simulate_gamart(200, 3);
        ModelFrame f = testing::frame_for({"num ~ x1 + fac + s(x2)", "sigma ~ x3"}, d, gaussian_family());
        FitState s = backfit(f);
        PredictionRequest req;
        req.target = PredictTarget::link;
        auto p = predict(f, &s, nullptr, d, req);
        REQUIRE(p.size() == 2);
        CHECK((p[0].values.col(0) - s.eta[0]).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((p[1].values.col(0) - s.eta[1]).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(p[0].column_names == std::vector<std::string>{"mu"});

        req.target = PredictTarget::parameter;
        auto q = predict(f, &s, nullptr, d, req);
        CHECK((q[1].values.col(0) - VectorXd(s.eta[1].array().exp())).cwiseAbs().maxCoeff() < 1e-10);
    }

    TEST_CASE("centered smooth term has zero mean on the training data") {
        DataTable d = simulate_gamart(200, 4);
        ModelFrame f = testing::frame_for({"num ~ x1 + s(x2)"}, d, gaussian_family());
        FitState s = backfit(f);
        PredictionRequest req;
        req.target = PredictTarget::term;
        req.terms = {"s(x2)"};
        req.intercept = false;
        auto p = predict(f, &s, nullptr, d, req);
        CHECK(std::abs(p[0].values.col(0).mean()) < 1e-8);

        req.terms = {"s(x9)"};
        CHECK_THROWS_AS(predict(f, &s, nullptr, d, req), DataError);
        req.terms = {"s(x2)"};
        req.target = PredictTarget::parameter;
        CHECK_THROWS_AS(predict(f, &s, nullptr, d, req), ConfigError);
    }

    TEST_CASE("posterior functionals") {
        DataTable d = simulate_ztnb(400, 5);
        ModelFrame f = testing::frame_for({"y ~ s(x1)"}, d, ztnbinom_family());
        FitState s = backfit(f);
        McmcOptions o;
        o.n_iter = 300;
        o.burnin = 100;
        SampleMatrix smp = gmcmc(f, s, o);
        PredictionRequest req;
        auto p = predict(f, nullptr, &smp, d, req);
        REQUIRE(p.size() == 2);
        CHECK(p[0].param == "mu");
        CHECK(p[1].param == "theta");
        CHECK(p[0].values.minCoeff() > 0.0);
        CHECK(p[1].values.minCoeff() > 0.0);

        req.functional = Functional::c95;
        auto c = predict(f, nullptr, &smp, d, req);
        CHECK(c[0].column_names == std::vector<std::string>{"mu.2.5%", "mu.mean", "mu.97.5%"});
        CHECK((c[0].values.col(0).array() <= c[0].values.col(2).array()).all());
        CHECK((c[0].values.col(1) - p[0].values.col(0)).cwiseAbs().maxCoeff() < 1e-10);

        req.functional = Functional::identity;
        req.params = {"theta"};
        auto idn = predict(f, nullptr, &smp, d, req);
        REQUIRE(idn.size() == 1);
        CHECK(idn[0].values.cols() == static_cast<Eigen::Index>(smp.nsave()));
    }

    TEST_CASE("exceedance probabilities") {
        auto z = ztnbinom_family();
        ParamValues par{VectorXd::Constant(1, 5.0), VectorXd::Constant(1, 2.0)};
        CHECK(prob_exceed(*z, par, 1.0)[0] == doctest::Approx(1.0));
        CHECK(prob_exceed(*z, par, 1e6)[0] < 1e-12);

        Rng rng(6);
        const Eigen::Index n = 1000000;
        ParamValues big{VectorXd::Constant(n, 5.0), VectorXd::Constant(n, 2.0)};
        VectorXd y = z->random(big, rng);
        const double freq = static_cast<double>((y.array() >= 8.0).count()) / static_cast<double>(n);
        CHECK(std::abs(prob_exceed(*z, par, 8.0)[0] - freq) < 0.003);
    }
}
