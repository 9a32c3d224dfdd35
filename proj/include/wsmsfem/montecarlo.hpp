#pragma once

#include "analytic_1d.hpp"
#include "basis_cache.hpp"
#include "msfem.hpp"
#include "reference.hpp"

#include <cstdio>
#include <functional>
#include <iomanip>
#include <sstream>

namespace wsmsfem {

/// Empirical mean, Bessel-corrected standard deviation and 95% half-width.
struct error_estimate {
    std::string id;
    long M = 0;
    double mean = 0.0;
    double sd = 0.0;
    double halfwidth = 0.0;
    std::vector<double> samples;
};

inline error_estimate estimate(const std::vector<double>& samples, std::string id = {})
{
    if (samples.size() < 2)
        throw std::invalid_argument("estimate needs at least two samples");
    error_estimate e;
    e.id = std::move(id);
    e.M = static_cast<long>(samples.size());
    // Sorted two-pass sums make the result independent of sample order.
    std::vector<double> s(samples);
    std::sort(s.begin(), s.end());
    double sum = 0.0;
    for (double v : s)
        sum += v;
    e.mean = sum / e.M;
    std::vector<double> d(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        d[i] = (s[i] - e.mean) * (s[i] - e.mean);
    std::sort(d.begin(), d.end());
    double ss = 0.0;
    for (double v : d)
        ss += v;
    e.sd = std::sqrt(ss / (e.M - 1));
    e.halfwidth = 1.96 * e.sd / std::sqrt(static_cast<double>(e.M));
    e.samples = samples;
    return e;
}

enum class field_id { u_ref, u_S, u_M };

inline field_id parse_field(const std::string& s)
{
    if (s == "u_ref")
        return field_id::u_ref;
    if (s == "u_S")
        return field_id::u_S;
    if (s == "u_M")
        return field_id::u_M;
    throw std::invalid_argument("unknown field '" + s + "' (expected u_ref, u_S or u_M)");
}

/// e(u1,u2) = ||u1 - u2|| / ||u2||.
struct estimator_spec {
    field_id first = field_id::u_S;
    field_id second = field_id::u_ref;

    static estimator_spec parse(const std::string& s)
    {
        std::string t;
        for (char c : s)
            if (c != ' ')
                t += c;
        // accept "u_S:u_ref" and "e(u_S,u_ref)"
        if (t.size() > 3 && t.rfind("e(", 0) == 0 && t.back() == ')')
            t = t.substr(2, t.size() - 3);
        std::replace(t.begin(), t.end(), ',', ':');
        const auto pos = t.find(':');
        if (pos == std::string::npos)
            throw std::invalid_argument("estimator '" + s + "' must look like u_S:u_ref");
        estimator_spec e{parse_field(t.substr(0, pos)), parse_field(t.substr(pos + 1))};
        if (e.first == e.second)
            throw std::invalid_argument("estimator compares a field with itself");
        return e;
    }
    std::string name() const
    {
        auto f = [](field_id i) { return i == field_id::u_ref ? "u_ref" : i == field_id::u_S ? "u_S" : "u_M"; };
        return std::string("e(") + f(first) + "," + f(second) + ")";
    }
};

/// Norm tokens: H1 and L2 are relative errors; H1sq and L2sq their squares.
struct norm_spec {
    norm_kind kind = norm_kind::broken_H1;
    bool squared = false;
    std::string token = "H1";

    static norm_spec parse(const std::string& s)
    {
        norm_spec n;
        n.token = s;
        if (s == "H1")
            n = {norm_kind::broken_H1, false, s};
        else if (s == "L2")
            n = {norm_kind::L2, false, s};
        else if (s == "H1sq")
            n = {norm_kind::broken_H1, true, s};
        else if (s == "L2sq")
            n = {norm_kind::L2, true, s};
        else
            throw std::invalid_argument("unknown norm '" + s + "' (expected H1, L2, H1sq, L2sq)");
        return n;
    }
};

enum class reference_kind { automatic, analytic, fem };

struct experiment_plan {
    std::string preset = "oned-multifreq";
    double eps = 0.025;
    std::vector<double> etas{1.0, 0.1, 0.01};
    double kappa = 55.0;
    double zeta = 1.0;
    double P = 1.8;
    double h = 1.0 / 30.0;
    double h_fine = 0.025 / 40.0;
    double h_basis = 0.025 / 80.0;
    double ratio = 1.0;
    long M = 30;
    std::uint64_t seed = 1;
    std::vector<std::string> estimators{"u_M:u_ref", "u_S:u_ref", "u_S:u_M"};
    std::vector<std::string> norms{"H1", "L2"};
    reference_kind reference = reference_kind::automatic;
    double mean_x = 0.5;
    double var_x = 1.0 / 12.0;
    std::string basis_cache_dir;

    int dimension() const { return preset == "oned-multifreq" ? 1 : 2; }

    void validate() const
    {
        if (!(eps > 0 && h > 0 && h_fine > 0 && h_basis > 0))
            throw std::invalid_argument("all resolutions must be positive");
        if (M < 2)
            throw std::invalid_argument("M must be >= 2");
        if (etas.empty())
            throw std::invalid_argument("no eta values");
        if (!(ratio >= 1.0))
            throw std::invalid_argument("oversampling ratio must be >= 1");
        for (const auto& e : estimators)
            estimator_spec::parse(e);
        for (const auto& n : norms)
            norm_spec::parse(n);
    }
};

struct result_row {
    std::string preset;
    double eta = 0.0;
    double kappa = 0.0;
    double zeta = 0.0;
    std::string estimator;
    std::string norm;
    std::uint64_t seed = 0;
    error_estimate est;
};

/// Progress hook: (eta index, realization count done).
using progress_fn = std::function<void(const std::string&)>;

namespace detail {

template <int Dim>
struct run_context {
    coefficient_spec<Dim> spec0;
    std::shared_ptr<const simplex_mesh<Dim>> coarse;
    std::shared_ptr<const msfem_geometry<Dim>> geo;
    ms_basis<Dim> basis;
    std::shared_ptr<const simplex_mesh<Dim>> ref_mesh;
    bool analytic = false;
};

inline double one(double) { return 1.0; }

template <int Dim>
double unit_load(const point<Dim>&)
{
    return 1.0;
}

} // namespace detail

/// Squared difference and reference norm parts for one realization, one
/// pair per estimator. u_M and the fem reference are passed in when needed.
template <int Dim>
std::vector<std::pair<norm_parts, norm_parts>> realization_errors(const detail::run_context<Dim>& ctx,
                                                                  const coefficient_spec<Dim>& spec,
                                                                  const realization<Dim>& r,
                                                                  const std::vector<estimator_spec>& est,
                                                                  const direct_msfem_result<Dim>* direct,
                                                                  const reference_solver<Dim>* ref)
{
    bool need[3] = {false, false, false};
    for (const auto& e : est) {
        need[static_cast<int>(e.first)] = true;
        need[static_cast<int>(e.second)] = true;
    }
    std::optional<broken_field<Dim>> u_S, u_M, u_ref;
    std::optional<exact_solution_1d> exact;
    if (need[static_cast<int>(field_id::u_S)])
        u_S = reconstruct(solve_coarse(assemble_realization(ctx.basis, r, spec.eta)), ctx.basis);
    if (need[static_cast<int>(field_id::u_M)])
        u_M = reconstruct(direct->solution, direct->basis);
    if (need[static_cast<int>(field_id::u_ref)]) {
        if constexpr (Dim == 1) {
            if (ctx.analytic) {
                one_d_problem p;
                p.a = [&spec, &r](double x) {
                    const point<1> px = make_point<1>(x);
                    return spec.value(px, r[spec.cell_of(px)]);
                };
                p.f = detail::one;
                p.f_constant = 1.0;
                p.period = spec.eps;
                p.points_per_period = 1000;
                p.gauss_points = 2;
                exact.emplace(std::move(p));
            }
        }
        if (!exact)
            u_ref = to_broken(ref->solve(r), ctx.geo->layout);
    }
    const auto gauss = high_order_rule<Dim>(4);
    std::vector<std::pair<norm_parts, norm_parts>> out;
    for (const auto& e : est) {
        auto field = [&](field_id i) -> const broken_field<Dim>* {
            if (i == field_id::u_S)
                return &*u_S;
            if (i == field_id::u_M)
                return &*u_M;
            return u_ref ? &*u_ref : nullptr;
        };
        const broken_field<Dim>* a = field(e.first);
        const broken_field<Dim>* b = field(e.second);
        if (a && b) {
            out.emplace_back(broken_difference_parts(*a, *b), broken_norm_parts(*b));
        } else {
            if constexpr (Dim == 1) {
                const broken_field<1>* u = a ? a : b;
                auto [diff, ref_parts] = broken_exact_parts(*u, *exact, gauss);
                out.emplace_back(diff, a ? ref_parts : broken_norm_parts(*u));
            }
        }
    }
    return out;
}

template <int Dim>
detail::run_context<Dim> make_run_context(const experiment_plan& plan, unsigned threads,
                                          basis_build_report* report = nullptr)
{
    detail::run_context<Dim> ctx;
    ctx.spec0 = preset<Dim>(plan.preset, plan.eps, 0.0, plan.kappa, plan.zeta, plan.P);
    ctx.spec0.mean_x = plan.mean_x;
    ctx.spec0.var_x = plan.var_x;
    if (plan.h_fine > plan.eps * (1 + 1e-12) || plan.eps > plan.h * (1 + 1e-12))
        throw std::invalid_argument("resolutions must satisfy h_fine <= eps <= h");
    ctx.coarse = std::make_shared<const simplex_mesh<Dim>>(build_coarse_mesh<Dim>(plan.h));
    ctx.geo = make_geometry<Dim>(ctx.coarse, plan.ratio, plan.h_basis, plan.eps);
    ctx.analytic = Dim == 1 && plan.reference != reference_kind::fem;
    if (plan.reference == reference_kind::analytic && Dim != 1)
        throw std::invalid_argument("analytic reference is only available in 1D");
    if (!ctx.analytic) {
        const long nref = choose_reference_n(ctx.geo->fine_n, plan.h_fine, ctx.spec0.q);
        ctx.ref_mesh = std::make_shared<const simplex_mesh<Dim>>(lattice_mesh<Dim>(nref));
    }
    ctx.basis = obtain_basis(ctx.spec0, ctx.geo, plan.h_basis, plan.basis_cache_dir, threads, report);
    return ctx;
}

/// Realizations per u_M batch: bounded by the memory of the stored bases,
/// independent of the thread count.
template <int Dim>
long direct_batch_size(const msfem_geometry<Dim>& geo, long M)
{
    double bytes = 0.0;
    for (const auto& p : geo.layout->pieces)
        bytes += 8.0 * (Dim + 1) * p->num_nodes();
    const double budget = 768.0 * 1024 * 1024;
    return std::clamp(static_cast<long>(budget / std::max(bytes, 1.0)), 1L, std::max(M, 1L));
}

template <int Dim>
std::vector<result_row> run_dim(const experiment_plan& plan, unsigned threads, const progress_fn& progress,
                                const detail::run_context<Dim>* shared = nullptr)
{
    plan.validate();
    std::optional<detail::run_context<Dim>> own;
    if (!shared) {
        own.emplace(make_run_context<Dim>(plan, threads));
        shared = &*own;
    }
    const auto& ctx = *shared;
    std::vector<estimator_spec> est;
    bool need_direct = false, need_ref = false;
    for (const auto& e : plan.estimators) {
        est.push_back(estimator_spec::parse(e));
        need_direct = need_direct || est.back().first == field_id::u_M || est.back().second == field_id::u_M;
        need_ref = need_ref || est.back().first == field_id::u_ref || est.back().second == field_id::u_ref;
    }
    std::vector<norm_spec> norms;
    for (const auto& n : plan.norms)
        norms.push_back(norm_spec::parse(n));

    std::vector<result_row> rows;
    for (double eta : plan.etas) {
        auto spec = ctx.spec0;
        if (!(eta >= 0 && eta <= 1))
            throw std::invalid_argument("eta must lie in [0,1]");
        spec.eta = eta;
        std::optional<reference_solver<Dim>> ref;
        if (need_ref && !ctx.analytic)
            ref.emplace(spec, ctx.ref_mesh, detail::unit_load<Dim>);
        std::vector<std::vector<std::pair<norm_parts, norm_parts>>> parts(plan.M);
        const long chunk = need_direct ? direct_batch_size(*ctx.geo, plan.M) : plan.M;
        for (long first = 0; first < plan.M; first += chunk) {
            const long count = std::min(chunk, plan.M - first);
            std::vector<realization<Dim>> rs;
            for (long m = first; m < first + count; ++m)
                rs.push_back(draw_realization(spec, m, plan.seed));
            std::vector<direct_msfem_result<Dim>> direct;
            if (need_direct)
                direct = solve_direct_msfem_batch(spec, rs, ctx.geo, detail::unit_load<Dim>, threads);
            parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t i) {
                try {
                    parts[first + i] = realization_errors(ctx, spec, rs[i], est, need_direct ? &direct[i] : nullptr,
                                                          ref ? &*ref : nullptr);
                } catch (const numerical_error& e) {
                    throw numerical_error("realization " + std::to_string(first + i) + ": " + e.what());
                }
            });
            if (progress) {
                std::ostringstream os;
                os << "eta=" << eta << ": " << first + count << "/" << plan.M << " realizations";
                progress(os.str());
            }
        }
        for (std::size_t i = 0; i < est.size(); ++i)
            for (const auto& n : norms) {
                std::vector<double> samples(plan.M);
                for (long m = 0; m < plan.M; ++m) {
                    const auto& [diff, refp] = parts[m][i];
                    const double den = refp.get(n.kind);
                    const double v = den > 0 ? diff.get(n.kind) / den : 0.0;
                    samples[m] = 100.0 * (n.squared ? v * v : v);
                }
                result_row row;
                row.preset = plan.preset;
                row.eta = eta;
                row.kappa = plan.kappa;
                row.zeta = plan.zeta;
                row.estimator = est[i].name();
                row.norm = n.token;
                row.seed = plan.seed;
                row.est = estimate(samples, row.estimator + " " + n.token);
                rows.push_back(std::move(row));
            }
    }
    return rows;
}

/// Runs the plan. Percent-valued samples; see norm_spec for the statistics.
inline std::vector<result_row> run(const experiment_plan& plan, unsigned threads = 1, const progress_fn& progress = {})
{
    if (plan.dimension() == 1)
        return run_dim<1>(plan, threads, progress);
    return run_dim<2>(plan, threads, progress);
}

inline std::string format_fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string format_general(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline const char* csv_header() { return "preset,eta,kappa,zeta,estimator,norm,M,mean_percent,halfwidth_percent,seed"; }

inline void write_csv(std::ostream& os, const std::vector<result_row>& rows)
{
    os << csv_header() << "\n";
    for (const auto& r : rows)
        os << r.preset << ',' << format_general(r.eta) << ',' << format_general(r.kappa) << ','
           << format_general(r.zeta) << ",\"" << r.estimator << "\"," << r.norm << ',' << r.est.M << ','
           << format_fixed(r.est.mean, 5) << ',' << format_fixed(r.est.halfwidth, 5) << ',' << r.seed << "\n";
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() < 3 || x.size() != y.size())
        throw std::invalid_argument("slope fit needs at least three points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0 && y[i] > 0))
            throw std::invalid_argument("slope fit needs positive values");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

enum class sweep_axis { h, eps, eta, M };

inline sweep_axis parse_axis(const std::string& s)
{
    if (s == "h")
        return sweep_axis::h;
    if (s == "epsilon" || s == "eps")
        return sweep_axis::eps;
    if (s == "eta")
        return sweep_axis::eta;
    if (s == "M")
        return sweep_axis::M;
    throw std::invalid_argument("unknown sweep axis '" + s + "' (expected h, epsilon, eta or M)");
}

struct sweep_result {
    sweep_axis axis = sweep_axis::h;
    std::string estimator;
    std::string norm;
    std::vector<double> values;
    std::vector<result_row> rows;
    double slope = 0.0; // of the mean (of the half-width for the M axis)
};

/// Runs the plan once per axis value (first estimator and norm of the plan
/// are the designated quantity). Sweeping eps keeps h_fine/eps and
/// h_basis/eps fixed. For the M axis the runs share realizations 0..M-1.
inline sweep_result convergence_sweep(const experiment_plan& base, sweep_axis axis, const std::vector<double>& values,
                                      unsigned threads = 1, const progress_fn& progress = {})
{
    if (values.size() < 3)
        throw std::invalid_argument("a sweep needs at least three axis values");
    sweep_result out;
    out.axis = axis;
    out.values = values;
    out.estimator = estimator_spec::parse(base.estimators.at(0)).name();
    out.norm = base.norms.at(0);
    std::vector<double> y;
    for (double v : values) {
        experiment_plan p = base;
        p.estimators = {base.estimators.at(0)};
        p.norms = {base.norms.at(0)};
        if (axis != sweep_axis::eta)
            p.etas = {base.etas.at(0)};
        switch (axis) {
        case sweep_axis::h:
            p.h = v;
            break;
        case sweep_axis::eps:
            p.h_fine = base.h_fine / base.eps * v;
            p.h_basis = base.h_basis / base.eps * v;
            p.eps = v;
            break;
        case sweep_axis::eta:
            p.etas = {v};
            break;
        case sweep_axis::M:
            p.M = static_cast<long>(std::llround(v));
            break;
        }
        auto rows = run(p, threads, progress);
        const auto& r = rows.front();
        y.push_back(axis == sweep_axis::M ? r.est.halfwidth : r.est.mean);
        out.rows.push_back(r);
    }
    out.slope = loglog_slope(values, y);
    return out;
}

inline void write_sweep_csv(std::ostream& os, const sweep_result& s, const std::string& axis_name)
{
    os << "axis,value,estimator,norm,M,mean_percent,halfwidth_percent\n";
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const auto& r = s.rows[i];
        os << axis_name << ',' << format_general(s.values[i]) << ",\"" << r.estimator << "\"," << r.norm << ','
           << r.est.M << ',' << format_fixed(r.est.mean, 5) << ',' << format_fixed(r.est.halfwidth, 5) << "\n";
    }
    os << "# slope," << format_fixed(s.slope, 5) << "\n";
}

inline void write_sweep_plot(std::ostream& os, const sweep_result& s, const std::string& axis_name)
{
    os << "# curve " << s.estimator << " " << s.norm << " vs " << axis_name << "\n";
    for (std::size_t i = 0; i < s.values.size(); ++i)
        os << format_general(s.values[i]) << ' '
           << format_general(s.axis == sweep_axis::M ? s.rows[i].est.halfwidth : s.rows[i].est.mean) << "\n";
}

} // namespace wsmsfem
