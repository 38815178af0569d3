#include "emax/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <thread>

#include "emax/mle.hpp"
#include "emax/rng.hpp"

namespace emax {

SufficientStats simulate_stats(const Scenario& sc, std::uint64_t seed, std::int64_t row_index,
                               std::int64_t replicate_index) {
    const auto x = sc.design.doses();
    std::array<double, 3> mu{};
    for (int i = 0; i < 3; ++i) mu[i] = eta(x[i], sc.truth);

    std::array<double, 3> ybar{};
    for (int dose = 0; dose < 3; ++dose) {
        double sum = 0.0;
        for (std::int64_t obs = 0; obs < sc.n_per_point[dose]; ++obs) {
            const std::uint64_t key =
                rng::make_key({seed, static_cast<std::uint64_t>(row_index),
                               static_cast<std::uint64_t>(replicate_index),
                               static_cast<std::uint64_t>(dose), static_cast<std::uint64_t>(obs)});
            sum += mu[dose] + sc.noise.sigma * rng::gaussian(key, 0);
        }
        ybar[dose] = sum / static_cast<double>(sc.n_per_point[dose]);
    }
    return SufficientStats(x, sc.n_per_point, ybar);
}

namespace {

struct RowTally {
    std::int64_t exists = 0;
    std::int64_t case1 = 0;
    std::int64_t case2 = 0;
    std::int64_t firth_ok_case1 = 0;
    std::int64_t firth_ok_case2 = 0;
    std::array<std::int64_t, 3> failures{};

    void merge(const RowTally& o) {
        exists += o.exists;
        case1 += o.case1;
        case2 += o.case2;
        firth_ok_case1 += o.firth_ok_case1;
        firth_ok_case2 += o.firth_ok_case2;
        for (int i = 0; i < 3; ++i) failures[i] += o.failures[i];
    }
};

void run_replicates(const Scenario& sc, const SimConfig& cfg, std::int64_t row_index,
                    std::int64_t lo, std::int64_t hi, RowTally& tally) {
    for (std::int64_t r = lo; r < hi; ++r) {
        const SufficientStats stats = simulate_stats(sc, cfg.seed, row_index, r);
        const auto [cls, st] = classify(stats);
        if (cls.kind == ShapeCase::IncreasingConcave) {
            ++tally.exists;
            continue;
        }
        const bool is_case1 = cls.kind == ShapeCase::Case1a || cls.kind == ShapeCase::Case1b;
        (is_case1 ? tally.case1 : tally.case2)++;

        const FitResult fit = firth_solve(stats, sc.noise, std::nullopt, cfg.solver);
        if (std::holds_alternative<FirthEstimate>(fit)) {
            (is_case1 ? tally.firth_ok_case1 : tally.firth_ok_case2)++;
        } else {
            const auto& fail = std::get<FirthFailure>(fit);
            ++tally.failures[static_cast<int>(fail.kind)];
        }
    }
}

}  // namespace

std::vector<SimRow> run_table1(const SimConfig& cfg) {
    if (cfg.replicates < 1) throw ValidationError("run_table1: replicates must be >= 1");

    unsigned hw = std::thread::hardware_concurrency();
    int n_threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(hw ? hw : 1);
    n_threads = static_cast<int>(std::min<std::int64_t>(n_threads, cfg.replicates));

    std::vector<SimRow> rows;
    for (std::size_t row_index = 0; row_index < cfg.theta2_g_list.size(); ++row_index) {
        const double theta2_g = cfg.theta2_g_list[row_index];
        const double x2 = d_optimal_x2(cfg.scenario.design.domain, theta2_g);
        const ThreePointDesign design(cfg.scenario.design.domain, x2,
                                      cfg.scenario.design.weights);
        const Scenario sc(cfg.scenario.truth, design, cfg.scenario.noise,
                          cfg.scenario.n_per_point);

        std::vector<RowTally> tallies(static_cast<std::size_t>(n_threads));
        if (n_threads == 1) {
            run_replicates(sc, cfg, static_cast<std::int64_t>(row_index), 0, cfg.replicates,
                           tallies[0]);
        } else {
            std::vector<std::thread> pool;
            const std::int64_t chunk = (cfg.replicates + n_threads - 1) / n_threads;
            for (int t = 0; t < n_threads; ++t) {
                const std::int64_t lo = t * chunk;
                const std::int64_t hi = std::min<std::int64_t>(lo + chunk, cfg.replicates);
                pool.emplace_back(run_replicates, std::cref(sc), std::cref(cfg),
                                  static_cast<std::int64_t>(row_index), lo, hi,
                                  std::ref(tallies[static_cast<std::size_t>(t)]));
            }
            for (auto& th : pool) th.join();
        }
        RowTally tally;
        for (const RowTally& t : tallies) tally.merge(t);

        const ShapeProbabilities theory = shape_probabilities(
            sc, ProbOpts{.method = ProbMethod::Quadrature});

        SimRow row{};
        row.theta2_g = theta2_g;
        row.x2 = x2;
        row.n_exists = tally.exists;
        row.n_case1 = tally.case1;
        row.n_case2 = tally.case2;
        row.n_firth_success_case1 = tally.firth_ok_case1;
        row.n_firth_success_case2 = tally.firth_ok_case2;
        row.failure_counts = tally.failures;

        const double n = static_cast<double>(cfg.replicates);
        row.pct_mle_exists = 100.0 * static_cast<double>(tally.exists) / n;
        row.pct_case1 = 100.0 * static_cast<double>(tally.case1) / n;
        row.pct_case2 = 100.0 * static_cast<double>(tally.case2) / n;
        row.pct_firth_success_case1 =
            tally.case1 > 0 ? 100.0 * static_cast<double>(tally.firth_ok_case1) /
                                  static_cast<double>(tally.case1)
                            : std::nan("");
        row.pct_firth_success_case2 =
            tally.case2 > 0 ? 100.0 * static_cast<double>(tally.firth_ok_case2) /
                                  static_cast<double>(tally.case2)
                            : std::nan("");
        row.th_pct_mle_exists = 100.0 * theory.p_exists;
        row.th_pct_case1 = 100.0 * theory.p_case1();
        row.th_pct_case2 = 100.0 * theory.p_case2;
        rows.push_back(row);
    }
    return rows;
}

namespace {

std::string num17(double v) {
    if (std::isnan(v)) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string num2(double v) {
    if (std::isnan(v)) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

void write_table1_csv(const std::vector<SimRow>& rows, std::ostream& out) {
    out << "theta2_g,x2,pct_mle_exists,pct_mle_exists_theory,pct_case1,pct_case1_theory,"
           "pct_firth_success_case1,pct_case2,pct_case2_theory,pct_firth_success_case2\n";
    for (const SimRow& r : rows) {
        out << num17(r.theta2_g) << ',' << num17(r.x2) << ',' << num17(r.pct_mle_exists) << ','
            << num17(r.th_pct_mle_exists) << ',' << num17(r.pct_case1) << ','
            << num17(r.th_pct_case1) << ',' << num17(r.pct_firth_success_case1) << ','
            << num17(r.pct_case2) << ',' << num17(r.th_pct_case2) << ','
            << num17(r.pct_firth_success_case2) << '\n';
    }
}

std::string format_table1_text(const std::vector<SimRow>& rows) {
    std::ostringstream out;
    out << "Nominal   %               %              % Firth success  %              % Firth success\n"
        << "theta2    MLE exists      Case 1         with Case 1      Case 2         with Case 2\n"
        << "---------------------------------------------------------------------------------------\n";
    for (const SimRow& r : rows) {
        std::ostringstream exists, c1, c2;
        exists << num2(r.pct_mle_exists) << " (" << num2(r.th_pct_mle_exists) << ")";
        c1 << num2(r.pct_case1) << " (" << num2(r.th_pct_case1) << ")";
        c2 << num2(r.pct_case2) << " (" << num2(r.th_pct_case2) << ")";
        out << std::left << std::setw(10) << num2(r.theta2_g) << std::setw(16) << exists.str()
            << std::setw(15) << c1.str() << std::setw(17) << num2(r.pct_firth_success_case1)
            << std::setw(15) << c2.str() << num2(r.pct_firth_success_case2) << "\n";
    }
    return out.str();
}

GuidelineReport guideline_run(const SufficientStats& s, const GuidelineConfig& cfg) {
    const auto [cls, st] = classify(s);
    GuidelineReport report{cls,          st,           FitResult{},  std::nullopt, "",
                           std::nullopt, std::nullopt, std::nullopt, std::nullopt};

    if (cls.kind == ShapeCase::IncreasingConcave) {
        report.fit = ExactMle{mle(s), mle_tilde(s)};
        report.action = "exact_mle";
        return report;
    }

    report.limit = limiting_fit(s, cls);

    if (cls.kind == ShapeCase::Case2a || cls.kind == ShapeCase::Case2b) {
        report.fit = firth_solve(s, cfg.noise, std::nullopt, cfg.solver);
        report.action = "firth";
        return report;
    }

    // Case 1: Firth is not expected to help; recommend augmenting the design
    // at the D-optimal point of a smaller theta2 guess.
    report.fit = NoMle{cls, *report.limit};
    report.action = "augment";
    const DoseDomain domain(s.x[0], s.x[2]);
    const double theta2_1 = cfg.theta2_1.value_or(cfg.theta2_g / 2.0);
    if (!(theta2_1 <= cfg.theta2_g)) {
        throw DomainError("guideline_run: theta2_1 must not exceed theta2_g");
    }
    report.new_dose = d_optimal_x2(domain, theta2_1);
    report.new_dose_upper = d_optimal_x2(domain, cfg.theta2_g);

    // Optional alpha-based refinement; an unattainable alpha or an
    // out-of-order solution downgrades to a warning, the D-optimal
    // recommendation above stands either way.
    if (cfg.alpha && cfg.theta1_g) {
        const ThreePointDesign design(domain, *report.new_dose_upper,
                                      {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
        const Scenario base(EmaxParams{0.0, *cfg.theta1_g, cfg.theta2_g}, design, cfg.noise,
                            s.n);
        try {
            const AugmentationPoint ap =
                augmentation_point(cfg.theta2_g, theta2_1, *cfg.alpha, base);
            report.new_dose_alpha = ap.x2;
            if (!ap.contained) {
                report.warning = "alpha-based point is not left of the theta2_g solution";
            }
        } catch (const DomainError& e) {
            report.warning = e.what();
        }
    }
    return report;
}

}  // namespace emax
