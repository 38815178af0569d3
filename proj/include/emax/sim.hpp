#pragma once

// Simulation study over the guessed-theta2 rows and the guideline decision
// tree built on top of classification, exact MLE, Firth estimation and the
// augmentation machinery.

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "emax/firth.hpp"
#include "emax/prob.hpp"

namespace emax {

struct SimConfig {
    Scenario scenario;  // truth, noise, group sizes; design x2 is set per row
    std::vector<double> theta2_g_list = {12.5, 25.0, 50.0, 75.0, 100.0};
    std::int64_t replicates = 10000;
    std::uint64_t seed = 20240901;
    SolverOpts solver;
    int threads = 0;  // 0 -> hardware concurrency
};

struct SimRow {
    double theta2_g;
    double x2;

    std::int64_t n_exists = 0;
    std::int64_t n_case1 = 0;
    std::int64_t n_case2 = 0;
    std::int64_t n_firth_success_case1 = 0;
    std::int64_t n_firth_success_case2 = 0;
    std::array<std::int64_t, 3> failure_counts{};  // by FirthFailureKind

    double pct_mle_exists;
    double pct_case1;
    double pct_case2;
    double pct_firth_success_case1;  // NaN when n_case1 == 0 ("NA")
    double pct_firth_success_case2;  // NaN when n_case2 == 0

    double th_pct_mle_exists;
    double th_pct_case1;
    double th_pct_case2;
};

std::vector<SimRow> run_table1(const SimConfig& cfg);

// Draw the per-dose means of one replicate with the counter-based generator.
// Keyed by (seed, row index, replicate index, dose index, observation
// index), so any replicate can be replayed in isolation.
SufficientStats simulate_stats(const Scenario& sc, std::uint64_t seed, std::int64_t row_index,
                               std::int64_t replicate_index);

void write_table1_csv(const std::vector<SimRow>& rows, std::ostream& out);
std::string format_table1_text(const std::vector<SimRow>& rows);

// Guideline decision tree:
//   increasing concave -> exact MLE;
//   convex             -> Firth-modified estimate (usually finite);
//   concave non-increasing -> no estimate expected; recommend augmenting the
//       design at x*(theta2_1) in (a, x*(theta2_g)) for theta2_1 < theta2_g.
struct GuidelineConfig {
    double theta2_g;
    NoiseModel noise;
    std::optional<double> theta2_1;  // default: theta2_g / 2
    // Optional alpha-based refinement of the augmentation dose; requires a
    // theta1 guess because the power function depends on it.
    std::optional<double> alpha;
    std::optional<double> theta1_g;
    SolverOpts solver;
};

struct GuidelineReport {
    ShapeClass shape;
    ShapeStats shape_stats;
    FitResult fit;
    std::optional<LimitingFit> limit;
    std::string action;  // "exact_mle" | "firth" | "augment"
    std::optional<double> new_dose;        // x*(theta2_1)
    std::optional<double> new_dose_upper;  // x*(theta2_g)
    std::optional<double> new_dose_alpha;  // alpha-based point, when requested
    std::optional<std::string> warning;    // soft failures of the alpha refinement
};

GuidelineReport guideline_run(const SufficientStats& s, const GuidelineConfig& cfg);

}  // namespace emax
