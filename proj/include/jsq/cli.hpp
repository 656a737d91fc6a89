#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "jsq/asymptotics.hpp"
#include "jsq/errors.hpp"
#include "jsq/kernel.hpp"
#include "jsq/lyapunov.hpp"
#include "jsq/mgf.hpp"
#include "jsq/model.hpp"
#include "jsq/qbd.hpp"
#include "jsq/solver.hpp"
#include "jsq/statespace.hpp"

#ifndef JSQ_VERSION
#define JSQ_VERSION "0.0.0"
#endif

namespace jsq::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kExitPass = 0;
inline constexpr int kExitCheckFailed = 2;
inline constexpr int kExitInvalidConfig = 3;

struct InvalidConfig : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    double lambda = 0.0;
    std::vector<double> mu;
    std::vector<double> split;
    int D = 10;
    int L_max = 50;
    std::vector<int> grid_D;
    std::vector<int> grid_L;
    std::uint64_t seed = 1;
    std::uint64_t steps = 1000000;
    int replications = 1;
    double tv_tolerance = 5e-3;
    bool rational = false;
    double domain_tol = 1e-10;
    int max_iters = 100;
    std::optional<double> eta1_start;
    std::optional<double> alpha;
    double epsilon = 0.1;
    int quadratic_box = 20;
    int exponential_box = 40;
    std::optional<double> decay_tolerance;

    int k() const { return static_cast<int>(mu.size()); }
};

namespace detail {

template <class T>
T read_field(const Json& j, const char* key, const T& fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidConfig(std::string("config field '") + key + "' has the wrong type");
    }
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw InvalidConfig("unknown config field '" + where + key + "'");
    }
}

} // namespace detail

inline RunConfig parse_config(const Json& j) {
    using detail::read_field;
    if (!j.is_object()) throw InvalidConfig("config must be a JSON object");
    detail::reject_unknown(j,
                           {"k", "lambda", "mu", "split", "truncation", "grid", "seed", "simulate", "rational", "domain",
                            "lyapunov", "decay"},
                           "");
    RunConfig c;
    if (!j.contains("lambda") || !j.contains("mu")) throw InvalidConfig("config needs 'lambda' and 'mu'");
    c.lambda = read_field<double>(j, "lambda", 0.0);
    c.mu = read_field<std::vector<double>>(j, "mu", {});
    c.split = read_field<std::vector<double>>(j, "split", {});
    if (j.contains("k") && read_field<int>(j, "k", 0) != c.k()) throw InvalidConfig("'k' does not match the length of 'mu'");
    c.seed = read_field<std::uint64_t>(j, "seed", c.seed);
    c.rational = read_field<bool>(j, "rational", false);
    if (j.contains("truncation")) {
        const auto& t = j.at("truncation");
        detail::reject_unknown(t, {"D", "L_max"}, "truncation.");
        c.D = read_field<int>(t, "D", c.D);
        c.L_max = read_field<int>(t, "L_max", c.L_max);
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        detail::reject_unknown(g, {"D", "L_max"}, "grid.");
        c.grid_D = read_field<std::vector<int>>(g, "D", {});
        c.grid_L = read_field<std::vector<int>>(g, "L_max", {});
    }
    if (j.contains("simulate")) {
        const auto& s = j.at("simulate");
        detail::reject_unknown(s, {"steps", "replications", "tv_tolerance"}, "simulate.");
        c.steps = read_field<std::uint64_t>(s, "steps", c.steps);
        c.replications = read_field<int>(s, "replications", c.replications);
        c.tv_tolerance = read_field<double>(s, "tv_tolerance", c.tv_tolerance);
    }
    if (j.contains("domain")) {
        const auto& d = j.at("domain");
        detail::reject_unknown(d, {"tol", "max_iters", "eta1_start"}, "domain.");
        c.domain_tol = read_field<double>(d, "tol", c.domain_tol);
        c.max_iters = read_field<int>(d, "max_iters", c.max_iters);
        if (d.contains("eta1_start") && !d.at("eta1_start").is_null()) c.eta1_start = read_field<double>(d, "eta1_start", 0.0);
    }
    if (j.contains("lyapunov")) {
        const auto& l = j.at("lyapunov");
        detail::reject_unknown(l, {"epsilon", "alpha", "quadratic_box", "exponential_box"}, "lyapunov.");
        c.epsilon = read_field<double>(l, "epsilon", c.epsilon);
        c.quadratic_box = read_field<int>(l, "quadratic_box", c.quadratic_box);
        c.exponential_box = read_field<int>(l, "exponential_box", c.exponential_box);
        if (l.contains("alpha") && !l.at("alpha").is_null()) c.alpha = read_field<double>(l, "alpha", 0.0);
    }
    if (j.contains("decay")) {
        const auto& d = j.at("decay");
        detail::reject_unknown(d, {"tolerance"}, "decay.");
        if (d.contains("tolerance") && !d.at("tolerance").is_null()) c.decay_tolerance = read_field<double>(d, "tolerance", 0.0);
    }
    return c;
}

/// Validates ranges and builds the normalized parameters; an unstable system
/// is returned as such and gated per command.
inline QueueParams validate(const RunConfig& c) {
    if (c.D < 1) throw InvalidConfig("truncation D must be at least 1");
    if (c.L_max < 1) throw InvalidConfig("truncation L_max must be at least 1");
    for (int d : c.grid_D)
        if (d < 1) throw InvalidConfig("grid D values must be at least 1");
    for (int l : c.grid_L)
        if (l < 1) throw InvalidConfig("grid L_max values must be at least 1");
    if (c.replications < 1) throw InvalidConfig("replications must be at least 1");
    if (c.steps < 10) throw InvalidConfig("simulation needs at least 10 steps");
    if (c.max_iters < 1) throw InvalidConfig("max_iters must be at least 1");
    if (!(c.domain_tol > 0)) throw InvalidConfig("domain tolerance must be positive");
    if (!(c.epsilon > 0)) throw InvalidConfig("epsilon must be positive");
    if (c.quadratic_box < 1 || c.exponential_box < 1) throw InvalidConfig("certificate boxes must be at least 1");
    try {
        return QueueParams::normalize(c.lambda, c.mu, StabilityPolicy::allow_unstable, c.split);
    } catch (const InvalidParameter& e) {
        throw InvalidConfig(e.what());
    }
}

inline Json config_to_json(const RunConfig& c) {
    Json j;
    j["k"] = c.k();
    j["lambda"] = c.lambda;
    j["mu"] = c.mu;
    if (!c.split.empty()) j["split"] = c.split;
    j["truncation"] = {{"D", c.D}, {"L_max", c.L_max}};
    j["grid"] = {{"D", c.grid_D}, {"L_max", c.grid_L}};
    j["seed"] = c.seed;
    j["simulate"] = {{"steps", c.steps}, {"replications", c.replications}, {"tv_tolerance", c.tv_tolerance}};
    j["rational"] = c.rational;
    j["domain"] = {{"tol", c.domain_tol}, {"max_iters", c.max_iters}, {"eta1_start", c.eta1_start ? Json(*c.eta1_start) : Json()}};
    j["lyapunov"] = {{"epsilon", c.epsilon},
                     {"alpha", c.alpha ? Json(*c.alpha) : Json()},
                     {"quadratic_box", c.quadratic_box},
                     {"exponential_box", c.exponential_box}};
    j["decay"] = {{"tolerance", c.decay_tolerance ? Json(*c.decay_tolerance) : Json()}};
    return j;
}

/// FNV-1a over the canonical dump of the effective config.
inline std::string config_hash(const RunConfig& c) {
    std::string text = config_to_json(c).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline Json provenance(const RunConfig& c, const std::string& command) {
    return Json{{"tool", "jsq"}, {"version", JSQ_VERSION}, {"command", command}, {"config_hash", config_hash(c)},
                {"config", config_to_json(c)}};
}

struct CommandResult {
    int exit_code = kExitPass;
    Json report;
    /// file name → contents, written under the output directory
    std::vector<std::pair<std::string, std::string>> files;
};

namespace detail {

// Ordered list of named checks with values, thresholds and outcomes.
class CheckList {
public:
    void add(const std::string& name, double value, const std::string& relation, double threshold, bool pass) {
        items_.push_back(Json{{"name", name}, {"value", json_number(value)}, {"relation", relation},
                              {"threshold", json_number(threshold)}, {"pass", pass}});
        all_ = all_ && pass;
    }
    void le(const std::string& name, double value, double threshold) { add(name, value, "<=", threshold, value <= threshold); }
    void ge(const std::string& name, double value, double threshold) { add(name, value, ">=", threshold, value >= threshold); }
    void fail(const std::string& name, const std::string& reason) {
        items_.push_back(Json{{"name", name}, {"pass", false}, {"error", reason}});
        all_ = false;
    }
    bool all() const { return all_; }
    Json json() const { return items_; }

    static Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf")); }

private:
    Json items_ = Json::array();
    bool all_ = true;
};

template <class F>
void guarded(CheckList& checks, const std::string& name, F body) {
    try {
        body();
    } catch (const std::exception& e) {
        checks.fail(name, e.what());
    }
}

inline std::string csv_number(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline Json stability_block(const QueueParams& p) {
    return Json{{"rho", p.rho()}, {"stable", p.stable()}, {"lambda", p.lambda()}, {"mu", std::vector<double>(p.mu().begin(), p.mu().end())}};
}

inline CommandResult unstable_result(const RunConfig& c, const QueueParams& p, const std::string& command) {
    CommandResult r;
    CheckList checks;
    checks.add("stability gate", p.rho(), "<", 1.0, false);
    r.report = provenance(c, command);
    r.report["params"] = stability_block(p);
    r.report["checks"] = checks.json();
    r.report["pass"] = false;
    r.exit_code = kExitCheckFailed;
    r.files.emplace_back("report.json", r.report.dump(2) + "\n");
    return r;
}

inline double default_alpha(const QueueParams& p) { return 0.5 * std::sqrt(static_cast<double>(p.k())) * std::log(1.0 / p.rho()); }

inline Json quadratic_json(const QuadraticCertificate& q) {
    return Json{{"function_id", "quadratic_twisted_background"},
                {"epsilon", q.epsilon},
                {"checked_box", {{"max_h", q.box_bound}, {"states", q.states_checked}}},
                {"F", {{"rule", "h.1 <= threshold"}, {"threshold", q.F_threshold}, {"states", q.F_size}}},
                {"max_violation", q.max_violation},
                {"margin", q.margin},
                {"closed_form_error", q.closed_form_error},
                {"bound_excess", q.bound_excess},
                {"holds", q.holds}};
}

inline Json exponential_json(const ExponentialCertificate& e) {
    return Json{{"function_id", "exponential_queue_length"},
                {"alpha", e.alpha},
                {"delta", e.delta},
                {"checked_box", {{"max_u", e.box_bound}, {"states", e.states_checked}}},
                {"F", {{"rule", "sum u <= beta"}, {"beta", e.beta}}},
                {"c1", e.c1},
                {"max_violation", e.max_violation},
                {"bracket_at_beta", {{"d1", e.bracket_at_beta.d1}, {"d2", e.bracket_at_beta.d2}}},
                {"bracket_holds", e.bracket_holds},
                {"bracket_checks", e.bracket_checks},
                {"closed_form", {{"beta", CheckList::json_number(e.beta_closed_form)}, {"c1", e.c1_closed_form},
                                 {"covers", "states with sum u > beta outside the checked box"}}},
                {"tightness_bar", e.tightness_bar}};
}

inline DomainTrace run_domain(const RunConfig& c, const QueueParams& p, double tightness_bar) {
    double start = c.eta1_start ? *c.eta1_start : tightness_bar;
    return domain_iterate(p, start, c.domain_tol, c.max_iters);
}

inline Json trace_json(const DomainTrace& t) {
    Json steps = Json::array();
    for (const auto& s : t.steps)
        steps.push_back(Json{{"eta0", s.eta0}, {"eta1", s.eta1}, {"eta_bar0", s.bar0}, {"eta_bar1", s.bar1},
                             {"c1_max_gamma", s.c1}, {"eta1_within_bound", s.eta1_within_bound}});
    return Json{{"start_eta_bar1", t.start_bar1}, {"eta1_cap", t.eta1_cap}, {"converged", t.converged},
                {"limit", {t.limit0, t.limit1}}, {"steps", steps}};
}

} // namespace detail

inline CommandResult cmd_verify(const RunConfig& c) {
    auto p = validate(c);
    if (!p.stable()) return detail::unstable_result(c, p, "verify");
    CommandResult r;
    detail::CheckList checks;
    Json details;
    const int k = p.k();
    auto idx = BackgroundIndex::enumerate(k, c.D);
    QbdBlocks blocks = build_blocks(p, idx);

    detail::guarded(checks, "invariant vector identity", [&] {
        auto ip = invariant_pair(p, blocks, idx);
        checks.le("invariant vector interior residual (relative)", ip.interior_residual_rel, 1e-12);
        checks.le("twisted chain row sums", ip.twisted_row_error, 1e-12);
        details["invariant_pair"] = {{"alpha", ip.alpha}, {"interior_residual", ip.interior_residual},
                                     {"interior_residual_relative", ip.interior_residual_rel}, {"x_dot_y", ip.xy}};
        if (c.rational) {
            bool zero = exact_invariant_residual(p, idx) == Rational(0);
            checks.add("invariant vector residual in exact rationals", zero ? 0.0 : 1.0, "==", 0.0, zero);
            details["invariant_pair"]["rational_residual"] = zero ? "0" : "nonzero";
        }
    });
    detail::guarded(checks, "R factor", [&] {
        auto rf = solve_R(blocks);
        checks.le("R equation residual", rf.residual, 1e-10);
        checks.add("spectral radius of R", rf.spectral_radius, "<", 1.0, rf.spectral_radius < 1.0);
        details["R"] = {{"iterations", rf.iterations}, {"residual", rf.residual}, {"spectral_radius", rf.spectral_radius},
                        {"target", p.decay_target()}, {"monotone", rf.monotone}};
    });
    detail::guarded(checks, "quadratic Foster certificate", [&] {
        auto q = certify_quadratic(p, c.quadratic_box, c.epsilon);
        checks.le("quadratic drift closed form", q.closed_form_error, 1e-12);
        checks.le("quadratic drift outside F", q.max_violation, -c.epsilon);
        details["quadratic"] = detail::quadratic_json(q);
    });
    double bar = 0.5 * std::log(1.0 / p.rho());
    detail::guarded(checks, "exponential Foster certificate", [&] {
        auto e = certify_exponential(p, c.alpha ? *c.alpha : detail::default_alpha(p), c.exponential_box);
        checks.add("exponential certificate c1", e.c1, ">", 0.0, e.c1 > 0);
        checks.add("exponential drift bracket", e.bracket_holds ? 1.0 : 0.0, "==", 1.0, e.bracket_holds);
        details["exponential"] = detail::exponential_json(e);
        bar = e.tightness_bar;
    });
    detail::guarded(checks, "stationary identity", [&] {
        auto d = solve_direct(build_kernel(p, idx, c.L_max));
        ThetaPoint th(static_cast<std::size_t>(k + 1), -0.1);
        double res = stationary_identity_residual(p, d, idx, th);
        checks.le("stationary identity residual at theta = -0.1", res, 1e-8);
        details["stationary"] = {{"balance_residual", d.residual}, {"identity_residual", res}};
    });
    detail::guarded(checks, "section properties", [&] {
        auto probe = probe_sections(p, c.seed);
        checks.le("section midpoint convexity", probe.max_convexity_violation, 1e-12);
        checks.le("section anchors", probe.max_anchor_residual, 1e-10);
        checks.le("boundary anchor", probe.max_boundary_anchor_error, 1e-10);
    });
    detail::guarded(checks, "domain iteration", [&] {
        auto t = detail::run_domain(c, p, bar);
        const double a0 = std::log(1.0 / p.decay_target());
        checks.add("domain iteration converged", t.converged ? 1.0 : 0.0, "==", 1.0, t.converged);
        checks.le("domain limit eta0 error", std::abs(t.limit0 - a0), 1e-6);
        double worst_c1 = -1e300;
        bool bound = true;
        for (const auto& s : t.steps) {
            worst_c1 = std::max(worst_c1, s.c1);
            bound = bound && s.eta1_within_bound;
        }
        checks.add("ladder conditions at every iterate", worst_c1, "<", 1.0, worst_c1 < 1.0);
        checks.add("eta1 <= eta0/k at every iterate", bound ? 1.0 : 0.0, "==", 1.0, bound);
        details["domain"] = detail::trace_json(t);
    });

    r.report = provenance(c, "verify");
    r.report["params"] = detail::stability_block(p);
    r.report["checks"] = checks.json();
    r.report["pass"] = checks.all();
    r.exit_code = checks.all() ? kExitPass : kExitCheckFailed;
    Json certs = provenance(c, "verify");
    certs["certificates"] = Json::array();
    if (details.contains("quadratic")) certs["certificates"].push_back(details["quadratic"]);
    if (details.contains("exponential")) certs["certificates"].push_back(details["exponential"]);
    r.report["details"] = details;
    r.files.emplace_back("report.json", r.report.dump(2) + "\n");
    r.files.emplace_back("certificates.json", certs.dump(2) + "\n");
    return r;
}

inline CommandResult cmd_decay(const RunConfig& c) {
    auto p = validate(c);
    if (!p.stable()) return detail::unstable_result(c, p, "decay");
    CommandResult r;
    detail::CheckList checks;
    const int k = p.k();
    const double target = p.decay_target();
    const double tol = c.decay_tolerance ? *c.decay_tolerance : (k == 2 ? 1e-2 : 2e-2);
    std::vector<int> Ds = c.grid_D.empty() ? std::vector<int>{c.D} : c.grid_D;
    std::vector<int> Ls = c.grid_L.empty() ? std::vector<int>{c.L_max} : c.grid_L;
    Json table = Json::array();
    std::optional<StationaryDist> last;
    DecayReport final_rep;
    for (int D : Ds) {
        auto idx = BackgroundIndex::enumerate(k, D);
        for (int L : Ls) {
            auto d = solve_direct(build_kernel(p, idx, L));
            auto rep = estimate_decay(d);
            table.push_back(Json{{"D", D}, {"L_max", L}, {"window", {rep.window.N0, rep.window.N1}},
                                 {"rate_ratio", rep.rate_ratio}, {"rate_regression", rep.rate_regression},
                                 {"disagreement", rep.disagreement}, {"truncation_suspect", rep.truncation_suspect},
                                 {"error", rep.error_against(target)}});
            final_rep = rep;
            last = std::move(d);
        }
    }
    const int Dfin = Ds.back();
    auto idx = BackgroundIndex::enumerate(k, Dfin);
    checks.le("final decay rate error", final_rep.error_against(target), tol);
    checks.le("estimator disagreement", final_rep.disagreement, kDisagreementAlarm);
    Json extra;
    detail::guarded(checks, "prefactor", [&] {
        auto b = build_blocks(p, idx);
        auto rf = solve_R(b);
        auto pi0 = boundary_vector(b, rf);
        auto pf = prefactor(b, rf, invariant_pair(p, b, idx), pi0);
        std::vector<double> cvec(pf.c.data(), pf.c.data() + pf.c.size());
        auto g = exact_geometric_check(*last, idx, p, cvec, final_rep.window, 2);
        checks.le("scaled slices vs prefactor (h.1 <= 2)", g.max_relative_error, 0.05);
        Json per_h = Json::array();
        for (const auto& t : g.traces)
            per_h.push_back(Json{{"h", t.h}, {"c", t.c}, {"scaled_at_window_end", t.scaled.back()}, {"relative_error", t.relative_error}});
        extra["prefactor"] = {{"spectral_radius", rf.spectral_radius}, {"max_relative_step", g.max_relative_step}, {"per_h", per_h}};
    });
    auto rough = rough_upper_bound_check(*last, p, final_rep.window);
    checks.ge("rough tail bound margin", rough.margin, 0.0);
    r.report = provenance(c, "decay");
    r.report["params"] = detail::stability_block(p);
    r.report["target"] = target;
    r.report["grid"] = table;
    r.report["convergence_claim"] = table.size() > 1;
    r.report["final"] = {{"D", Dfin}, {"L_max", Ls.back()}, {"window", {final_rep.window.N0, final_rep.window.N1}},
                         {"rate_ratio", final_rep.rate_ratio}, {"rate_regression", final_rep.rate_regression},
                         {"tolerance", tol}};
    r.report["details"] = extra;
    r.report["checks"] = checks.json();
    r.report["pass"] = checks.all();
    r.exit_code = checks.all() ? kExitPass : kExitCheckFailed;
    std::ostringstream csv;
    write_decay_csv(csv, *last, idx, p);
    r.files.emplace_back("report.json", r.report.dump(2) + "\n");
    r.files.emplace_back("decay.csv", csv.str());
    return r;
}

/// Rows series,face,step,eta0,eta1,gamma_plus: both branches of every
/// |U| = 1 section, the unique root of every |U| ≥ 2 section, then the trace.
inline std::string domain_csv(const QueueParams& p, const DomainTrace& t, int points = 41) {
    const double a1 = std::log(1.0 / p.rho());
    std::vector<double> grid;
    for (int i = 0; i < points; ++i) grid.push_back(a1 * 1.5 * i / (points - 1));
    grid.push_back(a1);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    std::ostringstream os;
    os << "series,face,step,eta0,eta1,gamma_plus\n";
    auto faces = all_faces(p.k());
    auto rows = boundary_curves(p, grid);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        auto U = faces[f];
        bool single = std::popcount(U) == 1;
        for (const auto& row : rows) {
            auto emit = [&](const char* series, double e0) {
                if (std::isnan(e0)) return;
                os << series << ',' << U << ",," << detail::csv_number(e0) << ',' << detail::csv_number(row.eta1) << ','
                   << detail::csv_number(gamma2_plus(p, U, e0, row.eta1)) << '\n';
            };
            emit(single ? "upper" : "root", row.upper[f]);
            if (single) emit("lower", row.lower[f]);
        }
    }
    for (std::size_t s = 0; s < t.steps.size(); ++s) {
        const auto& st = t.steps[s];
        os << "iterate,," << s + 1 << ',' << detail::csv_number(st.eta0) << ',' << detail::csv_number(st.eta1) << ",\n";
        os << "bar,," << s + 1 << ',' << detail::csv_number(st.bar0) << ',' << detail::csv_number(st.bar1) << ",\n";
    }
    return os.str();
}

inline CommandResult cmd_domain(const RunConfig& c) {
    auto p = validate(c);
    if (!p.stable()) return detail::unstable_result(c, p, "domain");
    CommandResult r;
    detail::CheckList checks;
    auto t = detail::run_domain(c, p, 0.5 * std::log(1.0 / p.rho()));
    const double a0 = std::log(1.0 / p.decay_target());
    checks.add("domain iteration converged", t.converged ? 1.0 : 0.0, "==", 1.0, t.converged);
    checks.le("limit eta0 error", std::abs(t.limit0 - a0), 1e-6);
    checks.le("limit eta1 error", std::abs(t.limit1 - a0 / (p.k() - 1)), 1e-6);
    auto probe = probe_sections(p, c.seed);
    checks.le("boundary anchor", probe.max_boundary_anchor_error, 1e-10);
    r.report = provenance(c, "domain");
    r.report["params"] = detail::stability_block(p);
    r.report["target"] = {a0, a0 / (p.k() - 1)};
    r.report["trace"] = detail::trace_json(t);
    r.report["checks"] = checks.json();
    r.report["pass"] = checks.all();
    r.exit_code = checks.all() ? kExitPass : kExitCheckFailed;
    r.files.emplace_back("report.json", r.report.dump(2) + "\n");
    r.files.emplace_back("domain.csv", domain_csv(p, t));
    return r;
}

inline CommandResult cmd_simulate(const RunConfig& c) {
    auto p = validate(c);
    if (!p.stable()) return detail::unstable_result(c, p, "simulate");
    CommandResult r;
    detail::CheckList checks;
    auto idx = BackgroundIndex::enumerate(p.k(), c.D);
    auto K = build_kernel(p, idx, c.L_max);
    Sampler smp(p, idx, c.L_max);
    auto mc = simulate_replications(smp, c.seed, c.steps, c.replications);
    auto direct = solve_direct(K);
    double tv = tv_distance(direct.pi, mc.pi);
    checks.le("total variation to direct solve", tv, c.tv_tolerance);
    r.report = provenance(c, "simulate");
    r.report["params"] = detail::stability_block(p);
    r.report["simulation"] = {{"seed", c.seed}, {"steps", c.steps}, {"replications", c.replications}, {"tv_distance", tv}};
    r.report["checks"] = checks.json();
    r.report["pass"] = checks.all();
    r.exit_code = checks.all() ? kExitPass : kExitCheckFailed;
    std::ostringstream csv;
    write_pi_csv(csv, mc, idx);
    r.files.emplace_back("report.json", r.report.dump(2) + "\n");
    r.files.emplace_back("pi.csv", csv.str());
    return r;
}

inline CommandResult cmd_export_kernel(const RunConfig& c) {
    auto p = validate(c);
    if (!p.stable()) return detail::unstable_result(c, p, "export-kernel");
    CommandResult r;
    auto idx = BackgroundIndex::enumerate(p.k(), c.D);
    auto K = build_kernel(p, idx, c.L_max);
    std::ostringstream triplets, legend;
    write_triplets(triplets, K);
    write_state_legend(legend, K, idx);
    r.report = provenance(c, "export-kernel");
    r.report["kernel"] = {{"states", K.size()}, {"nonzeros", K.nonzeros()}, {"bandwidth", K.bandwidth()},
                          {"max_row_sum_error", K.max_row_sum_error()}};
    r.report["pass"] = true;
    r.files.emplace_back("report.json", r.report.dump(2) + "\n");
    r.files.emplace_back("kernel.txt", triplets.str());
    r.files.emplace_back("kernel_states.txt", legend.str());
    return r;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open config file " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidConfig(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

inline void write_outputs(const CommandResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, text] : r.files) {
        std::ofstream out(dir / name, std::ios::binary);
        out << text;
        if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    }
}

/// Runs a command by name; numeric faults map to exit 2, config faults to 3.
inline CommandResult run_command(const std::string& name, const RunConfig& c) {
    try {
        if (name == "verify") return cmd_verify(c);
        if (name == "decay") return cmd_decay(c);
        if (name == "domain") return cmd_domain(c);
        if (name == "simulate") return cmd_simulate(c);
        if (name == "export-kernel") return cmd_export_kernel(c);
        throw InvalidConfig("unknown command " + name);
    } catch (const InvalidConfig&) {
        throw;
    } catch (const InvalidParameter& e) {
        throw InvalidConfig(e.what());
    } catch (const SizeLimitExceeded& e) {
        throw InvalidConfig(e.what());
    } catch (const std::exception& e) {
        CommandResult r;
        r.exit_code = kExitCheckFailed;
        r.report = provenance(c, name);
        r.report["pass"] = false;
        r.report["error"] = e.what();
        r.files.emplace_back("report.json", r.report.dump(2) + "\n");
        return r;
    }
}

} // namespace jsq::cli
