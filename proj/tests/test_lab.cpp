/*
   Copyright 2026 The vfpkit Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "vfp/lab/config.hpp"
#include "vfp/lab/csv.hpp"
#include "vfp/lab/run.hpp"
#include "vfp/rates.hpp"

namespace {

namespace fs = std::filesystem;
using vfp::lab::ExperimentConfig;
using vfp::lab::parse_config;

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("vfp_lab_" + name);
    fs::remove_all(p);
    return p;
}

ExperimentConfig with_out(ExperimentConfig c, const std::string& name) {
    c.out = fresh_dir(name).string();
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Every CSV in the record exists, parses, and carries the declared header.
void expect_manifest_complete(const vfp::lab::RunRecord& rec) {
    const auto manifest = nlohmann::json::parse(slurp(rec.path_of("manifest.json")));
    EXPECT_EQ(manifest["seed"], rec.seed);
    EXPECT_EQ(manifest["csv"].size(), rec.csv.size());
    for (const auto& out : rec.csv) {
        const auto table = vfp::lab::read_csv(rec.path_of(out.file));
        EXPECT_EQ(table.header, out.columns) << out.file;
        EXPECT_FALSE(table.rows.empty()) << out.file;
    }
    for (const auto& [name, fit] : rec.fits) {
        EXPECT_GE(fit.r_squared, 0.0) << name;
        EXPECT_LE(fit.r_squared, 1.0) << name;
    }
}

TEST(Lab, RateCertificateOnUnitFixture) {
    auto c = with_out(parse_config("kind = rates\nW = quadratic(1)\nN = 4"), "rates");
    const auto rec = vfp::lab::run(c);
    const auto report = nlohmann::json::parse(slurp(rec.path_of("rates.json")));
    EXPECT_EQ(report["chi_exact"].get<double>(), 0.5);
    EXPECT_GE(report["chi_bound"].get<double>(), 2.0e-63);
    EXPECT_LE(report["chi_bound"].get<double>(), 3.0e-63);
    EXPECT_EQ(report, rec.summary["report"]);
    expect_manifest_complete(rec);
}

TEST(Lab, EntropyFromStationaryStartVanishes) {
    auto c = with_out(parse_config("kind = entropy\nW = quadratic(1)\nN = 2, 5\nm0 = gibbs\nt_end = 4\nt_step = 0.5\ndt = 0.01"),
                      "entropy_stationary");
    const auto rec = vfp::lab::run(c);
    for (const char* file : {"entropy_N2.csv", "entropy_N5.csv"}) {
        const auto t = vfp::lab::read_csv(rec.path_of(file));
        ASSERT_EQ(t.rows.size(), 9u);
        for (std::size_t r = 0; r < t.rows.size(); ++r) EXPECT_LT(std::abs(t.number(r, 2)), 1e-10);
    }
    EXPECT_TRUE(rec.fits.empty());
    EXPECT_EQ(rec.summary["skipped_fits"].size(), 2u);
}

TEST(Lab, ShortWindowSkipsTheFit) {
    auto c = with_out(parse_config("kind = coupling\nW = quadratic(1)\nN = 4\nreplicas = 2\nt_end = 0.2\nt_step = 0.1\ndt = 0.01"),
                      "short_window");
    const auto rec = vfp::lab::run(c);
    EXPECT_TRUE(rec.fits.empty());
    EXPECT_NE(rec.summary["skipped_fits"][0].get<std::string>().find("fewer than 4"), std::string::npos);
}

// Tail rate of the relative entropy is never slower than the spectral rate.
TEST(Lab, EntropyTailRateBeatsSpectralRate) {
    for (const char* model : {"gamma = 1\nW = quadratic(1)", "gamma = 4\nW = quadratic(0)",
                              "gamma = 0.6\nV = quadratic(2)\nW = quadratic(-0.5)", "d = 2\ngamma = 2.5\nW = quadratic(0.5)"}) {
        auto c = with_out(parse_config(std::string("kind = entropy\nN = 3\nm0_var_x = 4\nm0_mean_x = 1\n"
                                                   "t_end = 12\nt_step = 0.25\ndt = 0.005\n") + model),
                          "entropy_rate");
        const auto rec = vfp::lab::run(c);
        const double chi = rec.summary["chi_exact"].get<double>();
        EXPECT_GE(rec.fits.at("entropy_N3").rate.value(), 0.9 * chi) << model;
        expect_manifest_complete(rec);
    }
}

TEST(Lab, CouplingStartsAtZeroAndGrows) {
    auto c = with_out(parse_config("kind = coupling\nW = quadratic(1)\nN = 16, 32\nreplicas = 8\nt_end = 2\n"
                                   "t_step = 0.25\ndt = 0.01\nfit_window = 0.25, 2"),
                      "coupling");
    const auto rec = vfp::lab::run(c);
    for (const char* file : {"coupling_N16.csv", "coupling_full_N32.csv"}) {
        const auto t = vfp::lab::read_csv(rec.path_of(file));
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            if (t.number(r, 1) == 0.0) {
                EXPECT_EQ(t.number(r, 2), 0.0) << file;
            }
        }
    }
    EXPECT_GT(rec.fits.at("coupling_N16").slope.value(), 0.0);
    expect_manifest_complete(rec);
}

TEST(Lab, ChaosWithReferenceEnsemble) {
    auto c = with_out(parse_config("kind = chaos\nW = coulomb(0.2,1)\nN = 4, 8, 16\nreplicas = 6\nt_end = 0.2\n"
                                   "t_step = 0.1\ndt = 0.01\nensemble_factor = 2"),
                      "chaos_coulomb");
    const auto rec = vfp::lab::run(c);
    EXPECT_EQ(rec.summary["surrogate"]["kind"], "ensemble");
    EXPECT_EQ(rec.summary["surrogate"]["size"], 32u);
    EXPECT_TRUE(rec.fits.count("chaos"));
    expect_manifest_complete(rec);
    const auto rows = vfp::lab::read_csv(rec.path_of("chaos_particle1.csv"));
    EXPECT_EQ(rows.rows.size(), 18u);
}

TEST(Lab, ConfidenceCurveSchemaAndMonotonicity) {
    auto c = with_out(parse_config("kind = confidence\nW = quadratic(0.5)\nN = 8, 64\nreplicas = 24\nt_end = 2\n"
                                   "t_step = 1\ndt = 0.01\nepsilon = 0.5, 0.8"),
                      "confidence");
    const auto rec = vfp::lab::run(c);
    const auto ex = vfp::lab::read_csv(rec.path_of("exceedance.csv"));
    EXPECT_EQ(ex.header, (std::vector<std::string>{"t", "N", "epsilon", "frequency", "stderr"}));
    EXPECT_EQ(ex.rows.size(), 2u * 3u * 2u);
    for (std::size_t r = 0; r < ex.rows.size(); ++r) {
        const double p = ex.number(r, 3);
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        EXPECT_NEAR(ex.number(r, 4), std::sqrt(p * (1 - p) / 24.0), 1e-15);
    }
    EXPECT_TRUE(rec.summary["non_increasing_in_N"].get<bool>());
    expect_manifest_complete(rec);
}

TEST(Lab, ConfidenceWithCoulombUsesFixedPoint) {
    auto c = with_out(parse_config("kind = confidence\nW = coulomb(0.3,1)\nN = 8\nreplicas = 4\nt_end = 0.2\n"
                                   "t_step = 0.1\ndt = 0.01\nfp_points = 1024"),
                      "confidence_coulomb");
    const auto rec = vfp::lab::run(c);
    EXPECT_TRUE(rec.summary.contains("fixed_point"));
    expect_manifest_complete(rec);
}

TEST(Lab, EquilibriumWritesDensityAndSummary) {
    auto c = with_out(parse_config("kind = equilibrium\nW = quadratic(1)\nN = 32\nreplicas = 4\nt_end = 1\n"
                                   "t_step = 0.5\ndt = 0.01\nfp_points = 2048"),
                      "equilibrium");
    const auto rec = vfp::lab::run(c);
    const auto density = vfp::lab::read_csv(rec.path_of("equilibrium_density.csv"));
    EXPECT_EQ(density.header, (std::vector<std::string>{"x", "nu"}));
    EXPECT_EQ(density.rows.size(), 2048u);
    const auto summary = nlohmann::json::parse(slurp(rec.path_of("equilibrium_summary.json")));
    EXPECT_NEAR(summary["variance"].get<double>(), 0.25, 1e-6);
    EXPECT_GT(summary["iterations"].get<int>(), 0);
    EXPECT_LT(summary["residual"].get<double>(), 1e-9);
    EXPECT_EQ(rec.summary["predicted"]["var_x"].get<double>(), 0.25);
    expect_manifest_complete(rec);
}

TEST(Lab, SimulateWritesLongFormatTrajectories) {
    auto c = with_out(parse_config("kind = simulate\nd = 2\nW = coulomb(0.1,1)\nN = 8\nreplicas = 3\nt_end = 0.5\n"
                                   "t_step = 0.25\ndt = 0.05"),
                      "simulate");
    const auto rec = vfp::lab::run(c);
    const auto t = vfp::lab::read_csv(rec.path_of("trajectories_N8.csv"));
    EXPECT_EQ(t.header, (std::vector<std::string>{"replica", "t", "metric", "value"}));
    EXPECT_EQ(t.rows.size(), 3u * 3u * 5u);
    expect_manifest_complete(rec);
}

// Identical config and seed: identical CSV bytes, whatever the worker count.
TEST(Lab, OutputsAreByteIdenticalAcrossThreadCounts) {
    for (const char* text :
         {"kind = chaos\nW = quadratic(1)\nN = 8, 16, 32\nreplicas = 12\nt_end = 0.5\nt_step = 0.5\ndt = 0.01\nseed = 9",
          "kind = equilibrium\nW = quadratic(1)\nN = 16\nreplicas = 6\nt_end = 0.5\nt_step = 0.25\ndt = 0.01\nseed = 9\n"
          "fp_points = 512",
          "kind = confidence\nW = coulomb(0.2,1)\nN = 8\nreplicas = 5\nt_end = 0.2\nt_step = 0.1\ndt = 0.01\n"
          "fp_points = 512",
          "kind = coupling\nW = coulomb(0.2,1)\nN = 4, 8\nreplicas = 5\nt_end = 0.2\nt_step = 0.1\ndt = 0.01\n"
          "ensemble_factor = 2"}) {
        auto one = with_out(parse_config(text), "det_1");
        one.threads = 1;
        auto three = with_out(parse_config(text), "det_3");
        three.threads = 3;
        const auto a = vfp::lab::run(one);
        const auto b = vfp::lab::run(three);
        ASSERT_EQ(a.csv.size(), b.csv.size());
        for (std::size_t k = 0; k < a.csv.size(); ++k)
            EXPECT_EQ(slurp(a.path_of(a.csv[k].file)), slurp(b.path_of(b.csv[k].file))) << a.csv[k].file;
        // and a repeat with the same thread count
        const auto again = vfp::lab::run(one);
        for (const auto& out : a.csv) EXPECT_EQ(slurp(a.path_of(out.file)), slurp(again.path_of(out.file)));
    }
}

TEST(Lab, SeedChangesOutputs) {
    auto c = with_out(parse_config("kind = simulate\nN = 4\nreplicas = 2\nt_end = 0.1\nt_step = 0.1\ndt = 0.05"), "seed_a");
    const auto a = vfp::lab::run(c);
    const std::string first = slurp(a.path_of("trajectories_N4.csv"));
    c.seed = 1;
    EXPECT_NE(first, slurp(vfp::lab::run(c).path_of("trajectories_N4.csv")));
}

TEST(Lab, Rejections) {
    auto entropy_coulomb = with_out(parse_config("kind = entropy\nW = coulomb(0.2,1)"), "reject");
    EXPECT_THROW(vfp::lab::run(entropy_coulomb), vfp::ConfigError);
    auto gibbs_chaos = with_out(parse_config("kind = chaos\nm0 = gibbs"), "reject");
    EXPECT_THROW(vfp::lab::run(gibbs_chaos), vfp::ConfigError);
    auto exact_coulomb = with_out(parse_config("kind = chaos\nW = coulomb(0.2,1)\nsurrogate = exact"), "reject");
    EXPECT_THROW(vfp::lab::run(exact_coulomb), vfp::ConfigError);
    auto confidence_2d = with_out(parse_config("kind = confidence\nd = 2\nW = coulomb(0.2,1)"), "reject");
    EXPECT_THROW(vfp::lab::run(confidence_2d), vfp::ConfigError);
    auto concave = with_out(parse_config("kind = rates\nW = quadratic(-0.7)"), "reject");
    EXPECT_THROW(vfp::lab::run(concave), vfp::ModelError);
}

TEST(Lab, BlowUpNamesReplicaAndStep) {
    auto c = with_out(parse_config("kind = simulate\nV = quadratic(40000)\nN = 4\nreplicas = 2\nt_end = 100\nt_step = 1\n"
                                   "dt = 0.5"),
                      "blowup");
    try {
        vfp::lab::run(c);
        FAIL() << "expected a blow-up";
    } catch (const vfp::NumericalError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("replica 0"), std::string::npos) << what;
        EXPECT_NE(what.find("step"), std::string::npos) << what;
    }
}

} // namespace
