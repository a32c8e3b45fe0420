#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "distreg/error.hpp"
#include "distreg/run.hpp"
#include "helpers.hpp"

using namespace distreg;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("distreg_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DISTREG_CLI) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}

TEST_SUITE("run") {
    TEST_CASE("config parsing") {
        RunConfig c = parse_config(R"({"data": "x.csv", "formula": "y ~ x", "seed": 9})", "/tmp/base");
        CHECK(c.data == "/tmp/base/x.csv");
        CHECK(c.formula == std::vector<std::string>{"y ~ x"});
        CHECK(c.mcmc.seed == 9);
        CHECK(c.optimizer == "bfit");
        CHECK_THROWS_AS(parse_config(R"({"data": "x.csv", "formula": "y ~ x", "bogus": 1})"), ConfigError);
        CHECK_THROWS_AS(parse_config(R"({"formula": "y ~ x"})"), ConfigError);
        CHECK_THROWS_AS(parse_config(R"({"data": "x.csv", "formula": "y ~ x", "sampler": "nuts"})"), ConfigError);
        CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
        CHECK_THROWS_AS(parse_config(R"({"data": "x.csv", "formula": "y ~ x", "mcmc": {"n_iter": 10, "burnin": 20}})"),
                        ConfigError);
    }

    TEST_CASE("output root from the environment") {
        ::setenv(output_root_env, "/tmp/distreg_root", 1);
        CHECK(default_output_root() == "/tmp/distreg_root");
        RunConfig c = load_config(testing::source_path("configs/swisslabor.json"));
        CHECK(output_dir(c) == "/tmp/distreg_root/swisslabor");
        c.output = "named";
        CHECK(output_dir(c) == "/tmp/distreg_root/named");
        c.output = "/abs/out";
        CHECK(output_dir(c) == "/abs/out");
        ::unsetenv(output_root_env);
        CHECK(default_output_root() == "runs");
    }

    TEST_CASE("SwissLabor pipeline artifacts and summary") {
        fs::path dir = scratch("swiss");
        RunConfig c = load_config(testing::source_path("configs/swisslabor.json"));
        run_fit(c, dir.string());
        for (const char* f : {"config.json", "meta.json", "summary.txt", "parameters.csv", "samples.csv",
                              "samples.csv.meta.json", "acf.csv", "residuals.csv"})
            CHECK(fs::exists(dir / f));
        const std::string summary = read_file(dir / "summary.txt");
        CHECK(summary.find("Mean     2.5%      50%    97.5% parameters") != std::string::npos);
        CHECK(summary.find("Sampler summary:") != std::string::npos);
        CHECK(summary.find("Optimizer summary:") != std::string::npos);
        CHECK(summary.find("alpha") != std::string::npos);
        CHECK(summary.find("foreignyes") != std::string::npos);

        Model m = load_run(dir.string());
        REQUIRE(m.samples);
        SampleMatrix again = read_samples_csv((dir / "samples.csv").string());
        CHECK(again.draws == m.samples->draws);
        CHECK(run_summary(dir.string()) == summary.substr(0, run_summary(dir.string()).size()));
        fs::remove_all(dir);
    }

    TEST_CASE("optimizer-only and sampler-only runs") {
        fs::path dir = scratch("modes");
        RunConfig c = load_config(testing::source_path("configs/swisslabor.json"));
        c.sampler = "none";
        run_fit(c, (dir / "mode").string());
        const std::string s = read_file(dir / "mode" / "summary.txt");
        CHECK(s.find("Sampler summary") == std::string::npos);
        CHECK(s.find("alpha") == std::string::npos);
        CHECK(s.find("AICc") != std::string::npos);
        CHECK(s.find("logPost") != std::string::npos);

        c.sampler = "gmcmc";
        c.optimizer = "none";
        c.start = {{"pi.p.(Intercept)", 6.0}, {"pi.p.income", -1.1}, {"pi.p.age", 3.4}};
        c.mcmc.burnin = 0;
        c.mcmc.n_iter = 20;
        Model m = fit_model(c, load_data(c));
        REQUIRE(m.samples);
        CHECK(!m.fit);
        CHECK(m.samples->draws(0, m.samples->column("pi.p.income")) == -1.1);
        CHECK(m.samples->draws(0, m.samples->column("pi.p.age")) == 3.4);
        fs::remove_all(dir);
    }

    TEST_CASE("gibbs_lm config") {
        RunConfig c = load_config(testing::source_path("configs/linear_gibbs.json"));
        Model m = fit_model(c, load_data(c));
        REQUIRE(m.samples);
        CHECK(m.samples->info.at("a_prime") == 1.0 + 250.0 + 3.0);
        const std::string s = summarize(m, c);
        CHECK(s.find("Optimizer summary") == std::string::npos);
        CHECK(s.find("alpha") == std::string::npos);
    }

    TEST_CASE("covariate grid") {
        RunConfig c = load_config(testing::source_path("configs/mcycle.json"));
        DataTable d = load_data(c);
        ModelFrame f = make_frame(c, d);
        DataTable g = covariate_grid(f, d, "times", 11);
        CHECK(g.nrows() == 11);
        CHECK(g.column("times").num.front() == doctest::Approx(testing::column(d, "times").minCoeff()));
    }

    TEST_CASE("command line") {
        fs::path dir = scratch("cli");
        const std::string cfg = testing::source_path("configs/swisslabor.json");
        const std::string env = "DISTREG_OUTPUT_ROOT=" + dir.string() + " ";
        CHECK(std::system((env + DISTREG_CLI + " fit " + cfg + " > /dev/null").c_str()) == 0);
        CHECK(fs::exists(dir / "swisslabor" / "samples.csv"));
        CHECK(run_cli("summary " + (dir / "swisslabor").string()) == 0);
        CHECK(std::system((env + DISTREG_CLI + " predict " + cfg + " --newdata " +
                           testing::source_path("data/SwissLabor.csv") + " -o " + (dir / "p.csv").string() +
                           " > /dev/null")
                              .c_str()) == 0);
        CHECK(read_file(dir / "p.csv").rfind("pi\n", 0) == 0);

        CHECK(run_cli("fit /nonexistent.json") == 2);
        std::ofstream(dir / "bad_formula.json") << R"({"data": ")" << testing::source_path("data/mcycle.csv")
                                                << R"j(", "formula": "accel ~ te(times)"})j";
        CHECK(run_cli("fit " + (dir / "bad_formula.json").string() + " -o " + (dir / "x").string()) == 4);
        std::ofstream(dir / "bad_data.json") << R"({"data": ")" << testing::source_path("data/mcycle.csv")
                                             << R"(", "formula": "accel ~ nothere"})";
        CHECK(run_cli("fit " + (dir / "bad_data.json").string() + " -o " + (dir / "y").string()) == 3);
        fs::remove_all(dir);
    }
}
