// Command-line surface for the Emax estimation toolkit: data classification,
// exact-MLE / Firth fitting with the guideline decision tree, D-optimal and
// alpha-calibrated design points, shape-class probabilities, the simulation
// study, and existence-probability sweeps.
//
// Exit codes: 0 success, 2 input/validation error, 3 estimation failure
// (no MLE / no admissible Firth root) so pipelines can branch on them.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "emax/firth.hpp"
#include "emax/mle.hpp"
#include "emax/prob.hpp"
#include "emax/sim.hpp"

using json = nlohmann::ordered_json;
using namespace emax;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitEstimation = 3;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("EMAX_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw ValidationError("EMAX_SEED is not an unsigned integer");
        }
    }
    return 20240901;
}

// ---------------------------------------------------------------------------
// CSV input: header `dose,response`, one observation per row.
// ---------------------------------------------------------------------------

std::vector<DoseGroup> read_data_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open data file: " + path);

    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ValidationError(path + ": empty file");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "dose,response") {
        throw ValidationError(path + ":1: expected header 'dose,response'");
    }

    std::map<double, std::vector<double>> by_dose;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": expected 'dose,response'");
        }
        try {
            std::size_t used = 0;
            const std::string dose_text = line.substr(0, comma);
            const std::string resp_text = line.substr(comma + 1);
            const double dose = std::stod(dose_text, &used);
            if (used != dose_text.size()) throw std::invalid_argument("dose");
            const double resp = std::stod(resp_text, &used);
            if (used != resp_text.size()) throw std::invalid_argument("response");
            by_dose[dose].push_back(resp);
        } catch (const std::exception&) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": malformed number");
        }
    }

    std::vector<DoseGroup> groups;
    for (auto& [dose, responses] : by_dose) groups.push_back({dose, std::move(responses)});
    return groups;
}

// ---------------------------------------------------------------------------
// JSON pieces
// ---------------------------------------------------------------------------

json stats_json(const SufficientStats& s) {
    return {{"x", s.x}, {"n", s.n}, {"ybar", s.ybar}};
}

json shape_stats_json(const ShapeStats& st) {
    return {{"m1", st.m1}, {"m2", st.m2},         {"m0", st.m0},
            {"q0", st.q0}, {"ybar23", st.ybar23}, {"ybar", st.ybar}};
}

json limiting_fit_json(const LimitingFit& fit) {
    if (const auto* step = std::get_if<StepAtA>(&fit)) {
        return {{"type", "step_at_a"}, {"low", step->low}, {"high", step->high}};
    }
    if (const auto* c = std::get_if<ConstantFit>(&fit)) {
        return {{"type", "constant"}, {"level", c->level}};
    }
    const auto& line = std::get<LineFit>(fit);
    return {{"type", "line"}, {"slope", line.slope}, {"intercept", line.intercept}};
}

json params_json(const EmaxParams& p) {
    return {{"theta0", p.theta0}, {"theta1", p.theta1}, {"theta2", p.theta2}};
}

json tilde_json(const TildeParams& t) {
    return {{"t0", t.t0}, {"t1", t.t1}, {"t2", t.t2}};
}

json probabilities_json(const ShapeProbabilities& p) {
    return {{"p_exists", p.p_exists},     {"p_case1a", p.p_case1a},
            {"p_case1b", p.p_case1b},     {"p_case2", p.p_case2},
            {"se_exists", p.se_exists},   {"se_case1a", p.se_case1a},
            {"se_case1b", p.se_case1b},   {"se_case2", p.se_case2}};
}

std::string iso_timestamp() {
    char buf[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Every file output gets a manifest alongside; stdout output gets one only
// when --manifest names a path.  The manifest records everything needed to
// replay the run (see the rerun subcommand); outputs themselves carry no
// timestamps, so replays are byte-identical.
struct OutputSink {
    std::optional<std::string> out_path;
    std::optional<std::string> manifest_path;
    std::vector<std::string> argv;

    void write(const std::string& content, const json& config, std::uint64_t seed) const {
        if (out_path) {
            std::ofstream out(*out_path);
            if (!out) throw ValidationError("cannot write " + *out_path);
            out << content;
        } else {
            std::cout << content;
        }
        const std::optional<std::string> mpath =
            manifest_path ? manifest_path
                          : (out_path ? std::optional<std::string>(*out_path + ".manifest.json")
                                      : std::nullopt);
        if (mpath) {
            json manifest = {
                {"tool", "emax"},
                {"version", kVersion},
                {"argv", argv},
                {"seed", seed},
                {"config", config},
                {"timestamp", iso_timestamp()},
                {"output", out_path ? json(*out_path) : json(nullptr)},
            };
            std::ofstream mf(*mpath);
            if (!mf) throw ValidationError("cannot write " + *mpath);
            mf << manifest.dump(2) << "\n";
        }
    }
};

struct ScenarioFlags {
    double theta0 = 2.0;
    double theta1 = 0.467;
    double theta2 = 50.0;
    double sigma = 0.1;
    double a = 0.001;
    double b = 150.0;
    double x2 = 0.0;  // 0 -> D-optimal at theta2
    std::int64_t n = 6;
    std::int64_t n1 = 0, n2 = 0, n3 = 0;  // per-dose overrides of --n

    void add_to(CLI::App* cmd, bool with_x2 = true) {
        cmd->add_option("--theta0", theta0, "True baseline response");
        cmd->add_option("--theta1", theta1, "True asymptotic effect");
        cmd->add_option("--theta2", theta2, "True half-effect dose parameter");
        cmd->add_option("--sigma", sigma, "Response standard deviation");
        cmd->add_option("--a", a, "Lowest dose");
        cmd->add_option("--b", b, "Highest dose");
        cmd->add_option("--n", n, "Observations per dose");
        cmd->add_option("--n1", n1, "Observations at the lowest dose (overrides --n)");
        cmd->add_option("--n2", n2, "Observations at the central dose (overrides --n)");
        cmd->add_option("--n3", n3, "Observations at the highest dose (overrides --n)");
        if (with_x2) cmd->add_option("--x2", x2, "Central dose (default: D-optimal at theta2)");
    }

    std::array<std::int64_t, 3> counts() const {
        return {n1 > 0 ? n1 : n, n2 > 0 ? n2 : n, n3 > 0 ? n3 : n};
    }

    Scenario build() const {
        const DoseDomain dom(a, b);
        const double central = x2 > 0.0 ? x2 : d_optimal_x2(dom, theta2);
        return Scenario(EmaxParams{theta0, theta1, theta2},
                        ThreePointDesign(dom, central, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}),
                        NoiseModel(sigma), counts());
    }
};

std::string num17(double v) {
    if (std::isnan(v)) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Subcommand implementations
// ---------------------------------------------------------------------------

int run_args(std::vector<std::string> args);  // forward, for rerun

int cmd_classify(const std::string& data_path, const OutputSink& sink) {
    const SufficientStats s = reduce(read_data_csv(data_path));
    const auto [cls, st] = classify(s);

    json out = {
        {"command", "classify"},
        {"input", {{"file", data_path}}},
        {"sufficient_stats", stats_json(s)},
        {"class", to_string(cls.kind)},
        {"boundary", cls.boundary},
        {"shape_stats", shape_stats_json(st)},
    };
    if (cls.kind == ShapeCase::IncreasingConcave) {
        out["limiting_fit"] = nullptr;
    } else {
        out["limiting_fit"] = limiting_fit_json(limiting_fit(s, cls));
    }

    sink.write(out.dump(2) + "\n", {{"data", data_path}}, 0);
    return kExitOk;
}

struct FitFlags {
    std::string data;
    std::string method = "auto";
    double sigma = 0.0;  // 0 -> estimate from replicates
    double theta2_g = 0.0;
    double theta2_1 = 0.0;
    double alpha = 0.0;
    double theta1_g = 0.0;
    SolverOpts solver;
};

int cmd_fit(const FitFlags& flags, const OutputSink& sink) {
    const std::vector<DoseGroup> groups = read_data_csv(flags.data);
    const SufficientStats s = reduce(groups);
    const auto [cls, st] = classify(s);

    const bool needs_sigma = flags.method != "mle";
    std::optional<double> sigma;
    if (flags.sigma > 0.0) {
        sigma = flags.sigma;
    } else if (needs_sigma) {
        const double est = pooled_sigma2(groups);
        if (est > 0.0) {
            sigma = std::sqrt(est);
        } else {
            throw ValidationError(
                "sigma is required: pass --sigma or provide replicated responses per dose");
        }
    }

    json out = {
        {"command", "fit"},
        {"method", flags.method},
        {"sigma", sigma ? json(*sigma) : json(nullptr)},
        {"class", to_string(cls.kind)},
        {"boundary", cls.boundary},
        {"sufficient_stats", stats_json(s)},
        {"shape_stats", shape_stats_json(st)},
    };
    const json config = {{"data", flags.data},
                         {"method", flags.method},
                         {"sigma", flags.sigma},
                         {"tol", flags.solver.tol},
                         {"max_iter", flags.solver.max_iter},
                         {"theta2_cap", flags.solver.theta2_cap},
                         {"starts", flags.solver.grid_span}};

    int code = kExitOk;
    if (flags.method == "mle") {
        if (cls.kind == ShapeCase::IncreasingConcave) {
            const EmaxParams p = mle(s);
            out["result"] = {{"type", "exact_mle"},
                             {"params", params_json(p)},
                             {"tilde", tilde_json(mle_tilde(s))},
                             {"max_interpolation_residual", interpolation_check(s, p)}};
        } else {
            out["result"] = {{"type", "no_mle"},
                             {"limiting_fit", limiting_fit_json(limiting_fit(s, cls))}};
            code = kExitEstimation;
        }
    } else if (flags.method == "firth") {
        const FitResult fit = firth_solve(s, NoiseModel(*sigma), std::nullopt, flags.solver);
        if (const auto* est = std::get_if<FirthEstimate>(&fit)) {
            out["result"] = {{"type", "firth_estimate"},
                             {"params", params_json(est->params)},
                             {"score_norm", est->score_norm},
                             {"iterations", est->iterations}};
        } else {
            const auto& fail = std::get<FirthFailure>(fit);
            out["result"] = {{"type", "firth_failure"},
                             {"kind", to_string(fail.kind)},
                             {"reason", fail.reason}};
            code = kExitEstimation;
        }
    } else if (flags.method == "auto") {
        const bool is_case1 = cls.kind == ShapeCase::Case1a || cls.kind == ShapeCase::Case1b;
        if (is_case1 && flags.theta2_g <= 0.0) {
            throw ValidationError(
                "--theta2-g is required to build the augmentation recommendation for "
                "non-increasing concave data");
        }
        GuidelineConfig cfg{flags.theta2_g > 0.0 ? flags.theta2_g : 1.0, NoiseModel(*sigma)};
        if (flags.theta2_1 > 0.0) cfg.theta2_1 = flags.theta2_1;
        if (flags.alpha > 0.0) cfg.alpha = flags.alpha;
        if (flags.theta1_g > 0.0) cfg.theta1_g = flags.theta1_g;
        cfg.solver = flags.solver;
        const GuidelineReport rep = guideline_run(s, cfg);

        out["action"] = rep.action;
        if (const auto* exact = std::get_if<ExactMle>(&rep.fit)) {
            out["result"] = {{"type", "exact_mle"},
                             {"params", params_json(exact->params)},
                             {"tilde", tilde_json(exact->tilde)},
                             {"max_interpolation_residual",
                              interpolation_check(s, exact->params)}};
        } else if (const auto* est = std::get_if<FirthEstimate>(&rep.fit)) {
            out["result"] = {{"type", "firth_estimate"},
                             {"params", params_json(est->params)},
                             {"score_norm", est->score_norm},
                             {"iterations", est->iterations}};
        } else if (const auto* fail = std::get_if<FirthFailure>(&rep.fit)) {
            out["result"] = {{"type", "firth_failure"},
                             {"kind", to_string(fail->kind)},
                             {"reason", fail->reason}};
            code = kExitEstimation;
        } else {
            out["result"] = {{"type", "no_mle"}};
            code = kExitEstimation;
        }
        if (rep.limit) out["result"]["limiting_fit"] = limiting_fit_json(*rep.limit);
        if (rep.new_dose) {
            out["recommendation"] = {
                {"new_dose", *rep.new_dose},
                {"upper", *rep.new_dose_upper},
                {"alpha_based", rep.new_dose_alpha ? json(*rep.new_dose_alpha) : json(nullptr)},
                {"note", "collect additional observations at new_dose (inside (a, upper))"},
            };
            if (rep.warning) out["recommendation"]["warning"] = *rep.warning;
        }
    } else {
        throw ValidationError("unknown --method: " + flags.method);
    }

    sink.write(out.dump(2) + "\n", config, 0);
    return code;
}

int cmd_design(double a, double b, double theta2, const std::string& mode, double alpha,
               double theta1, double sigma, std::int64_t n, const OutputSink& sink) {
    const DoseDomain dom(a, b);
    json out = {{"command", "design"},
                {"mode", mode},
                {"domain", {{"a", a}, {"b", b}}},
                {"theta2", theta2}};
    if (mode == "dopt") {
        const ThreePointDesign d = d_optimal_design(dom, theta2);
        out["x2"] = d.x2;
        out["doses"] = d.doses();
        out["weights"] = d.weights;
    } else if (mode == "alpha") {
        if (!(alpha > 0.0)) throw ValidationError("alpha mode requires --alpha in (0,1)");
        const Scenario base(EmaxParams{0.0, theta1, theta2},
                            ThreePointDesign(dom, 0.5 * (a + b), {1. / 3, 1. / 3, 1. / 3}),
                            NoiseModel(sigma), {n, n, n});
        const double x2 = x2_for_alpha(theta2, alpha, base);
        out["alpha"] = alpha;
        out["x2"] = x2;
        out["doses"] = std::array<double, 3>{a, x2, b};
        out["weights"] = std::array<double, 3>{1. / 3, 1. / 3, 1. / 3};
        out["scenario"] = {{"theta1", theta1}, {"sigma", sigma}, {"n", n}};
    } else {
        throw ValidationError("unknown --mode: " + mode);
    }
    sink.write(out.dump(2) + "\n",
               {{"a", a}, {"b", b}, {"theta2", theta2}, {"mode", mode}, {"alpha", alpha}}, 0);
    return kExitOk;
}

int cmd_prob(const ScenarioFlags& sf, const std::string& method, std::int64_t draws,
             std::uint64_t seed, int threads, const OutputSink& sink) {
    const Scenario sc = sf.build();
    ProbOpts opts;
    opts.method = method == "quad" ? ProbMethod::Quadrature : ProbMethod::MonteCarlo;
    opts.draws = draws;
    opts.seed = seed;
    opts.threads = threads;
    const ShapeProbabilities p = shape_probabilities(sc, opts);

    json out = {
        {"command", "prob"},
        {"method", method},
        {"scenario",
         {{"theta0", sf.theta0},
          {"theta1", sf.theta1},
          {"theta2", sf.theta2},
          {"sigma", sf.sigma},
          {"a", sf.a},
          {"b", sf.b},
          {"x2", sc.design.x2},
          {"n", sf.counts()}}},
        {"probabilities", probabilities_json(p)},
    };
    if (method != "quad") {
        out["draws"] = draws;
        out["seed"] = seed;
    }
    sink.write(out.dump(2) + "\n", {{"method", method}, {"draws", draws}, {"x2", sc.design.x2}},
               seed);
    return kExitOk;
}

int cmd_simulate(const ScenarioFlags& sf, std::vector<double> theta2_g_list,
                 std::int64_t replicates, std::uint64_t seed, int threads,
                 const SolverOpts& solver, const std::string& config_path,
                 const OutputSink& sink) {
    ScenarioFlags flags = sf;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ValidationError("cannot open config: " + config_path);
        json cfg;
        try {
            in >> cfg;
        } catch (const json::exception& e) {
            throw ValidationError(config_path + ": bad JSON: " + std::string(e.what()));
        }
        flags.theta0 = cfg.value("theta0", flags.theta0);
        flags.theta1 = cfg.value("theta1", flags.theta1);
        flags.theta2 = cfg.value("theta2", flags.theta2);
        flags.sigma = cfg.value("sigma", flags.sigma);
        flags.a = cfg.value("a", flags.a);
        flags.b = cfg.value("b", flags.b);
        flags.n = cfg.value("n", flags.n);
        if (cfg.contains("theta2_g_list")) {
            theta2_g_list = cfg["theta2_g_list"].get<std::vector<double>>();
        }
        replicates = cfg.value("replicates", replicates);
        seed = cfg.value("seed", seed);
    }

    SimConfig cfg{flags.build()};
    if (!theta2_g_list.empty()) cfg.theta2_g_list = theta2_g_list;
    cfg.replicates = replicates;
    cfg.seed = seed;
    cfg.solver = solver;
    cfg.threads = threads;

    const std::vector<SimRow> rows = run_table1(cfg);

    std::ostringstream csv;
    write_table1_csv(rows, csv);
    const std::string text = format_table1_text(rows);

    const json config = {{"theta0", flags.theta0},
                         {"theta1", flags.theta1},
                         {"theta2", flags.theta2},
                         {"sigma", flags.sigma},
                         {"a", flags.a},
                         {"b", flags.b},
                         {"n", flags.n},
                         {"theta2_g_list", cfg.theta2_g_list},
                         {"replicates", replicates},
                         {"seed", seed}};

    if (sink.out_path) {
        const std::string prefix = *sink.out_path;
        {
            std::ofstream f(prefix + ".txt");
            if (!f) throw ValidationError("cannot write " + prefix + ".txt");
            f << text;
        }
        OutputSink csv_sink = sink;
        csv_sink.out_path = prefix + ".csv";
        csv_sink.manifest_path = prefix + ".manifest.json";
        csv_sink.write(csv.str(), config, seed);
        std::cout << text;
    } else {
        std::cout << text << "\n" << csv.str();
        if (sink.manifest_path) sink.write("", config, seed);
    }
    return kExitOk;
}

int cmd_sweep(const ScenarioFlags& sf, std::vector<double> theta2_list, int grid_points,
              const std::string& method, std::int64_t draws, std::uint64_t seed, int threads,
              const OutputSink& sink) {
    if (theta2_list.empty()) theta2_list = {12.5, 25.0, 50.0, 75.0, 100.0};
    ProbOpts opts;
    opts.method = method == "mc" ? ProbMethod::MonteCarlo : ProbMethod::Quadrature;
    opts.draws = draws;
    opts.seed = seed;
    opts.threads = threads;

    const std::vector<SweepRow> rows =
        sweep_existence(sf.build(), theta2_list, grid_points, opts);

    std::ostringstream csv;
    csv << "x2,theta2_true,p_exists,p_case1a,p_case1b,p_case2,"
           "se_exists,se_case1a,se_case1b,se_case2\n";
    for (const SweepRow& r : rows) {
        csv << num17(r.x2) << ',' << num17(r.theta2_true) << ',' << num17(r.p_exists) << ','
            << num17(r.p_case1a) << ',' << num17(r.p_case1b) << ',' << num17(r.p_case2) << ','
            << num17(r.se_exists) << ',' << num17(r.se_case1a) << ',' << num17(r.se_case1b)
            << ',' << num17(r.se_case2) << '\n';
    }
    sink.write(csv.str(),
               {{"theta2_list", theta2_list},
                {"grid_points", grid_points},
                {"method", method},
                {"draws", draws}},
               seed);
    return kExitOk;
}

int cmd_rerun(const std::string& manifest_path, const std::optional<std::string>& out_override) {
    std::ifstream in(manifest_path);
    if (!in) throw ValidationError("cannot open manifest: " + manifest_path);
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw ValidationError(manifest_path + ": bad JSON: " + std::string(e.what()));
    }
    if (!manifest.contains("argv") || !manifest["argv"].is_array()) {
        throw ValidationError(manifest_path + ": no argv array");
    }
    std::vector<std::string> args = manifest["argv"].get<std::vector<std::string>>();
    if (out_override) {
        bool replaced = false;
        for (std::size_t i = 0; i + 1 < args.size(); ++i) {
            if (args[i] == "--out") {
                args[i + 1] = *out_override;
                replaced = true;
            }
        }
        if (!replaced) {
            args.push_back("--out");
            args.push_back(*out_override);
        }
    }
    return run_args(std::move(args));
}

// ---------------------------------------------------------------------------

int run_args(std::vector<std::string> args) {
    CLI::App app{"Three-point Emax dose-response estimation toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    const std::uint64_t env_seed = default_seed();

    // classify
    auto* classify_cmd =
        app.add_subcommand("classify", "Classify the shape of a three-dose data set");
    std::string classify_data;
    std::string classify_out, classify_manifest;
    classify_cmd->add_option("--data", classify_data, "CSV file (dose,response)")->required();
    classify_cmd->add_option("--out", classify_out, "Write JSON here instead of stdout");
    classify_cmd->add_option("--manifest", classify_manifest, "Manifest path for stdout output");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Estimate the Emax parameters");
    FitFlags fit_flags;
    std::string fit_out, fit_manifest;
    fit_cmd->add_option("--data", fit_flags.data, "CSV file (dose,response)")->required();
    fit_cmd->add_option("--method", fit_flags.method, "mle|firth|auto");
    fit_cmd->add_option("--sigma", fit_flags.sigma, "Known response sd (else estimated)");
    fit_cmd->add_option("--theta2-g", fit_flags.theta2_g, "Guessed theta2 (auto mode)");
    fit_cmd->add_option("--theta2-1", fit_flags.theta2_1, "Smaller theta2 for augmentation");
    fit_cmd->add_option("--alpha", fit_flags.alpha, "Significance level for augmentation");
    fit_cmd->add_option("--theta1-g", fit_flags.theta1_g, "theta1 guess for the alpha machinery");
    fit_cmd->add_option("--tol", fit_flags.solver.tol, "Firth solver tolerance");
    fit_cmd->add_option("--max-iter", fit_flags.solver.max_iter, "Firth iteration cap");
    fit_cmd->add_option("--theta2-cap", fit_flags.solver.theta2_cap,
                        "Admissibility cap on |theta2| (0 = 1e6 * dose span)");
    fit_cmd->add_option("--starts", fit_flags.solver.grid_span,
                        "theta2 grid half-span (2^-k..2^k)");
    fit_cmd->add_option("--out", fit_out, "Write JSON here instead of stdout");
    fit_cmd->add_option("--manifest", fit_manifest, "Manifest path for stdout output");

    // design
    auto* design_cmd = app.add_subcommand("design", "D-optimal or alpha-calibrated design point");
    double d_a = 0.001, d_b = 150.0, d_theta2 = 50.0, d_alpha = 0.0;
    double d_theta1 = 0.467, d_sigma = 0.1;
    std::int64_t d_n = 6;
    std::string d_mode = "dopt", design_out, design_manifest;
    design_cmd->add_option("--a", d_a, "Lowest dose")->required();
    design_cmd->add_option("--b", d_b, "Highest dose")->required();
    design_cmd->add_option("--theta2", d_theta2, "theta2 guess")->required();
    design_cmd->add_option("--mode", d_mode, "dopt|alpha");
    design_cmd->add_option("--alpha", d_alpha, "Significance level (alpha mode)");
    design_cmd->add_option("--theta1", d_theta1, "theta1 guess (alpha mode)");
    design_cmd->add_option("--sigma", d_sigma, "Response sd (alpha mode)");
    design_cmd->add_option("--n", d_n, "Observations per dose (alpha mode)");
    design_cmd->add_option("--out", design_out, "Write JSON here instead of stdout");
    design_cmd->add_option("--manifest", design_manifest, "Manifest path for stdout output");

    // prob
    auto* prob_cmd = app.add_subcommand("prob", "Shape-class probabilities for a scenario");
    ScenarioFlags prob_flags;
    std::string p_method = "mc", prob_out, prob_manifest;
    std::int64_t p_draws = 1000000;
    std::uint64_t p_seed = env_seed;
    int p_threads = 0;
    prob_flags.add_to(prob_cmd);
    prob_cmd->add_option("--method", p_method, "mc|quad");
    prob_cmd->add_option("--draws", p_draws, "Monte Carlo draws");
    prob_cmd->add_option("--seed", p_seed, "RNG seed");
    prob_cmd->add_option("--threads", p_threads, "Worker threads (0 = all cores)");
    prob_cmd->add_option("--out", prob_out, "Write JSON here instead of stdout");
    prob_cmd->add_option("--manifest", prob_manifest, "Manifest path for stdout output");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Replicate the simulation study");
    ScenarioFlags sim_flags;
    std::vector<double> sim_t2g;
    std::int64_t sim_reps = 10000;
    std::uint64_t sim_seed = env_seed;
    int sim_threads = 0;
    SolverOpts sim_solver;
    std::string sim_config, sim_out, sim_manifest;
    sim_flags.add_to(sim_cmd, /*with_x2=*/false);
    sim_cmd->add_option("--theta2-g", sim_t2g, "Guessed theta2 list (one row each)");
    sim_cmd->add_option("--replicates", sim_reps, "Replicates per row");
    sim_cmd->add_option("--seed", sim_seed, "RNG seed");
    sim_cmd->add_option("--threads", sim_threads, "Worker threads (0 = all cores)");
    sim_cmd->add_option("--tol", sim_solver.tol, "Firth solver tolerance");
    sim_cmd->add_option("--max-iter", sim_solver.max_iter, "Firth iteration cap");
    sim_cmd->add_option("--theta2-cap", sim_solver.theta2_cap, "Admissibility cap on |theta2|");
    sim_cmd->add_option("--starts", sim_solver.grid_span, "theta2 grid half-span");
    sim_cmd->add_option("--config", sim_config, "JSON config file (flags override)");
    sim_cmd->add_option("--out", sim_out, "Output prefix (writes .csv/.txt/.manifest.json)");
    sim_cmd->add_option("--manifest", sim_manifest, "Manifest path for stdout output");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Existence probabilities over an x2 grid");
    ScenarioFlags sweep_flags;
    std::vector<double> sweep_list;
    int sweep_grid = 64;
    std::string sweep_method = "quad", sweep_out, sweep_manifest;
    std::int64_t sweep_draws = 1000000;
    std::uint64_t sweep_seed = env_seed;
    int sweep_threads = 0;
    sweep_flags.add_to(sweep_cmd, /*with_x2=*/false);
    sweep_cmd->add_option("--theta2-list", sweep_list, "True theta2 values (one curve each)");
    sweep_cmd->add_option("--x2-grid", sweep_grid, "Log-grid size over (a,b)");
    sweep_cmd->add_option("--method", sweep_method, "quad|mc");
    sweep_cmd->add_option("--draws", sweep_draws, "Monte Carlo draws per point");
    sweep_cmd->add_option("--seed", sweep_seed, "RNG seed");
    sweep_cmd->add_option("--threads", sweep_threads, "Worker threads");
    sweep_cmd->add_option("--out", sweep_out, "Write CSV here instead of stdout");
    sweep_cmd->add_option("--manifest", sweep_manifest, "Manifest path for stdout output");

    // rerun
    auto* rerun_cmd = app.add_subcommand("rerun", "Replay a run from its manifest");
    std::string rerun_manifest, rerun_out;
    rerun_cmd->add_option("--manifest", rerun_manifest, "Manifest file")->required();
    rerun_cmd->add_option("--out", rerun_out, "Override the recorded output path");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        std::cout << kVersion << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }

    auto sink = [&args](const std::string& out, const std::string& manifest) {
        OutputSink s;
        if (!out.empty()) s.out_path = out;
        if (!manifest.empty()) s.manifest_path = manifest;
        s.argv = args;
        return s;
    };

    try {
        if (classify_cmd->parsed()) {
            return cmd_classify(classify_data, sink(classify_out, classify_manifest));
        }
        if (fit_cmd->parsed()) {
            return cmd_fit(fit_flags, sink(fit_out, fit_manifest));
        }
        if (design_cmd->parsed()) {
            return cmd_design(d_a, d_b, d_theta2, d_mode, d_alpha, d_theta1, d_sigma, d_n,
                              sink(design_out, design_manifest));
        }
        if (prob_cmd->parsed()) {
            return cmd_prob(prob_flags, p_method, p_draws, p_seed, p_threads,
                            sink(prob_out, prob_manifest));
        }
        if (sim_cmd->parsed()) {
            return cmd_simulate(sim_flags, sim_t2g, sim_reps, sim_seed, sim_threads, sim_solver,
                                sim_config, sink(sim_out, sim_manifest));
        }
        if (sweep_cmd->parsed()) {
            return cmd_sweep(sweep_flags, sweep_list, sweep_grid, sweep_method, sweep_draws,
                             sweep_seed, sweep_threads, sink(sweep_out, sweep_manifest));
        }
        if (rerun_cmd->parsed()) {
            return cmd_rerun(rerun_manifest, rerun_out.empty()
                                                 ? std::nullopt
                                                 : std::optional<std::string>(rerun_out));
        }
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEstimation;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    std::cerr << "error: no subcommand\n";
    return kExitInput;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return run_args(std::move(args));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
}
