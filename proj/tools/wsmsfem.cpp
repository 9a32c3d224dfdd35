// Batch driver: wsmsfem <basis|reference|mc|homogenize|sweep|table> -c config.ini
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include "wsmsfem/wsmsfem.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using namespace wsmsfem;

namespace {

enum exit_code { ok = 0, failure = 1, bad_config = 2, numerical = 3 };

struct options {
    std::string config_path;
    unsigned threads = default_threads();
    long realization = 0;
    std::string reference = "auto";
    long cell_resolution = 0;
    bool lambda = false;
    long lambda_realizations = 200;
    std::string axis;
    std::string input;
    bool quiet = false;
};

fs::path prepare_out_dir(const config& c)
{
    const fs::path dir(c.out_dir);
    fs::create_directories(dir);
    std::ofstream echo(dir / "config.echo.ini");
    write_config(echo, c);
    return dir;
}

fs::path cache_dir(const config& c)
{
    return c.plan.basis_cache_dir.empty() ? fs::path(c.out_dir) / "basis_cache" : fs::path(c.plan.basis_cache_dir);
}

reference_kind parse_reference(const std::string& s)
{
    if (s == "auto")
        return reference_kind::automatic;
    if (s == "analytic")
        return reference_kind::analytic;
    if (s == "fem")
        return reference_kind::fem;
    throw config_error("--reference must be auto, analytic or fem");
}

progress_fn make_progress(const options& o)
{
    if (o.quiet)
        return {};
    return [](const std::string& s) { std::cerr << "  " << s << "\n"; };
}

template <int Dim>
int cmd_basis(const config& c, const options& o)
{
    const auto& p = c.plan;
    auto spec = preset<Dim>(p.preset, p.eps, 0.0, p.kappa, p.zeta, p.P);
    spec.mean_x = p.mean_x;
    spec.var_x = p.var_x;
    auto coarse = std::make_shared<const simplex_mesh<Dim>>(build_coarse_mesh<Dim>(p.h));
    auto geo = make_geometry<Dim>(coarse, p.ratio, p.h_basis, p.eps);
    prepare_out_dir(c);
    const fs::path dir = cache_dir(c);
    basis_build_report rep;
    const auto t0 = std::chrono::steady_clock::now();
    const auto b = obtain_basis(spec, geo, p.h_basis, dir, o.threads, &rep);
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!rep.mismatch.empty())
        std::cerr << rep.mismatch << "\n  cache invalidated, rebuilt\n";
    std::cout << "basis cache " << dir.string() << ": " << (rep.cache_hit ? "hit" : "built") << "\n";
    std::cout << "coarse elements " << coarse->num_elements() << ", fine intervals per coarse interval "
              << geo->refinement << ", oversampling ratio " << p.ratio << "\n";
    if (!rep.cache_hit) {
        const auto& t = rep.patch_seconds;
        double sum = 0.0, mx = 0.0, mn = t.empty() ? 0.0 : t.front();
        for (double v : t) {
            sum += v;
            mx = std::max(mx, v);
            mn = std::min(mn, v);
        }
        std::cout << "patch solves " << t.size() << ": total " << sum << " s, min " << mn << " s, mean "
                  << (t.empty() ? 0.0 : sum / t.size()) << " s, max " << mx << " s\n";
    } else {
        std::cout << "patch solves 0\n";
    }
    long k1 = 0;
    for (const auto& v : b.k1)
        k1 += static_cast<long>(v.size());
    std::cout << "elements with K0 " << b.k0.size() << ", K1 blocks " << k1 << ", elapsed " << total << " s\n";
    return ok;
}

template <int Dim>
int cmd_reference(const config& c, const options& o)
{
    const auto& p = c.plan;
    auto spec = preset<Dim>(p.preset, p.eps, p.etas.front(), p.kappa, p.zeta, p.P);
    spec.mean_x = p.mean_x;
    spec.var_x = p.var_x;
    const long n = checked_reciprocal(p.h_fine, "h_fine");
    auto mesh = std::make_shared<const simplex_mesh<Dim>>(lattice_mesh<Dim>(n));
    const auto r = draw_realization(spec, o.realization, p.seed);
    const auto u = solve_reference(spec, r, [](const point<Dim>&) { return 1.0; }, mesh);
    const fs::path dir = prepare_out_dir(c);
    const fs::path file = dir / ("reference_m" + std::to_string(o.realization) + ".txt");
    std::ofstream os(file);
    write_mesh(os, *mesh, &u.values);
    std::cout << "reference realization " << o.realization << " eta " << p.etas.front() << ": " << mesh->num_nodes()
              << " nodes, L2 norm " << norm(u, norm_kind::L2) << ", H1 seminorm " << norm(u, norm_kind::H1_semi)
              << "\nwritten " << file.string() << "\n";
    return ok;
}

int cmd_mc(const config& c, const options& o)
{
    experiment_plan p = c.plan;
    p.reference = parse_reference(o.reference);
    if (c.eps_values.size() > 1 || c.h_values.size() > 1 || c.M_values.size() > 1)
        std::cerr << "note: mc uses the first value of list-valued epsilon, h and M\n";
    const fs::path dir = prepare_out_dir(c);
    if (p.basis_cache_dir.empty())
        p.basis_cache_dir = cache_dir(c).string();
    const auto rows = run(p, o.threads, make_progress(o));
    std::ofstream os(dir / "results.csv");
    write_csv(os, rows);
    write_csv(std::cout, rows);
    return ok;
}

template <int Dim>
int cmd_homogenize(const config& c, const options& o)
{
    const auto& p = c.plan;
    auto spec = preset<Dim>(p.preset, p.eps, p.etas.front(), p.kappa, p.zeta, p.P);
    spec.mean_x = p.mean_x;
    spec.var_x = p.var_x;
    const long res = o.cell_resolution > 0 ? o.cell_resolution : (Dim == 1 ? 400 : 128);
    const auto cc = compute_cell_correctors(spec, res, false, o.threads);
    const fs::path dir = prepare_out_dir(c);
    {
        std::ofstream os(dir / "tensors.txt");
        write_tensor_report(os, cc);
    }
    write_tensor_report(std::cout, cc);
    if (!o.lambda)
        return ok;
    std::vector<double> hs = c.h_values;
    if (hs.size() == 1)
        hs.push_back(hs.front() / 2);
    std::ofstream os(dir / "lambda.csv");
    os << "h,elements,realizations,mean_lambda2,halfwidth\n";
    std::cout << "# E[lambda^2] study, bound " << lambda_bound(spec, cc) << "\n";
    std::vector<lambda_study_row> rows;
    for (double h : hs) {
        rows.push_back(lambda_study(spec, cc, h, o.lambda_realizations, p.seed, o.threads));
        const auto& r = rows.back();
        os << format_general(r.h) << ',' << r.num_elements << ',' << r.realizations << ','
           << format_general(r.mean_lambda2) << ',' << format_general(r.halfwidth) << "\n";
        std::cout << "h " << r.h << " elements " << r.num_elements << " E[lambda^2] " << r.mean_lambda2 << " +- "
                  << r.halfwidth << "\n";
    }
    for (std::size_t i = 1; i < rows.size(); ++i)
        std::cout << "growth " << rows[i - 1].h << " -> " << rows[i].h << ": observed "
                  << rows[i].mean_lambda2 / rows[i - 1].mean_lambda2 << ", predicted "
                  << lambda_growth_prediction(Dim, rows[i - 1].num_elements, rows[i].num_elements) << "\n";
    return ok;
}

int cmd_sweep(const config& c, const options& o)
{
    const sweep_axis axis = parse_axis(o.axis);
    std::vector<double> values;
    switch (axis) {
    case sweep_axis::h:
        values = c.h_values;
        break;
    case sweep_axis::eps:
        values = c.eps_values;
        break;
    case sweep_axis::eta:
        values = c.plan.etas;
        break;
    case sweep_axis::M:
        for (long m : c.M_values)
            values.push_back(static_cast<double>(m));
        break;
    }
    if (values.size() < 3)
        throw config_error("sweep over " + o.axis + " needs at least three values listed in the config");
    experiment_plan p = c.plan;
    p.reference = parse_reference(o.reference);
    for (double eps : c.eps_values)
        for (double h : c.h_values)
            if (eps > h * (1 + 1e-12))
                throw config_error("sweep would violate epsilon <= h");
    const fs::path dir = prepare_out_dir(c);
    const auto s = convergence_sweep(p, axis, values, o.threads, make_progress(o));
    const std::string name = axis == sweep_axis::eps ? "epsilon" : o.axis;
    std::ofstream csv(dir / ("sweep_" + name + ".csv"));
    write_sweep_csv(csv, s, name);
    std::ofstream plot(dir / ("sweep_" + name + ".dat"));
    write_sweep_plot(plot, s, name);
    write_sweep_csv(std::cout, s, name);
    return ok;
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"')
            quoted = !quoted;
        else if (ch == ',' && !quoted) {
            out.push_back(cur);
            cur.clear();
        } else
            cur += ch;
    }
    out.push_back(cur);
    return out;
}

/// Results CSV laid out as error tables: one block per norm, rows
/// eta, columns estimator ("mean +- half-width", percent).
int cmd_table(const options& o, const config* c)
{
    fs::path in = o.input;
    if (in.empty()) {
        if (!c)
            throw config_error("table needs --input or a config with out_dir");
        in = fs::path(c->out_dir) / "results.csv";
    }
    std::ifstream is(in);
    if (!is)
        throw config_error("cannot open results file '" + in.string() + "'");
    std::string line;
    std::getline(is, line);
    if (line != csv_header())
        throw config_error("'" + in.string() + "' is not a results CSV");
    struct cell {
        std::string mean, hw;
    };
    std::vector<std::string> norms_order, est_order, eta_order;
    std::map<std::string, std::map<std::string, std::map<std::string, cell>>> t;
    std::string preset_name, M;
    auto remember = [](std::vector<std::string>& v, const std::string& s) {
        if (std::find(v.begin(), v.end(), s) == v.end())
            v.push_back(s);
    };
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        const auto f = split_csv_line(line);
        if (f.size() != 10)
            throw config_error("malformed results row '" + line + "'");
        preset_name = f[0];
        M = f[6];
        remember(norms_order, f[5]);
        remember(est_order, f[4]);
        remember(eta_order, f[1]);
        t[f[5]][f[1]][f[4]] = {f[7], f[8]};
    }
    std::cout << "# " << preset_name << ", M = " << M << ", errors in percent\n";
    for (const auto& n : norms_order) {
        std::cout << "\n" << n << "\n" << std::left << std::setw(8) << "eta";
        for (const auto& e : est_order)
            std::cout << " | " << std::setw(24) << e;
        std::cout << "\n";
        for (const auto& eta : eta_order) {
            std::cout << std::setw(8) << eta;
            for (const auto& e : est_order) {
                const auto it = t[n][eta].find(e);
                const std::string v = it == t[n][eta].end() ? "-" : it->second.mean + " +- " + it->second.hw;
                std::cout << " | " << std::setw(24) << v;
            }
            std::cout << "\n";
        }
    }
    return ok;
}

template <typename F1, typename F2>
int by_dim(const config& c, F1&& one, F2&& two)
{
    return c.plan.dimension() == 1 ? one() : two();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Weakly stochastic multiscale finite element experiments"};
    app.require_subcommand(1);
    options o;
    auto add_common = [&](CLI::App* s, bool config_required) {
        auto* opt = s->add_option("-c,--config", o.config_path, "experiment config (key=value with [sections])");
        if (config_required)
            opt->required();
        s->add_option("--threads", o.threads, "worker threads (default: hardware concurrency)")
            ->check(CLI::PositiveNumber);
        s->add_flag("-q,--quiet", o.quiet, "no progress output");
    };
    auto* basis = app.add_subcommand("basis", "build or validate the basis cache");
    add_common(basis, true);
    auto* reference = app.add_subcommand("reference", "fine reference solution for one realization");
    add_common(reference, true);
    reference->add_option("--realization", o.realization, "realization index")->check(CLI::NonNegativeNumber);
    auto* mc = app.add_subcommand("mc", "Monte Carlo error table (CSV)");
    add_common(mc, true);
    mc->add_option("--reference", o.reference, "reference solution: auto, analytic (1D) or fem");
    auto* hom = app.add_subcommand("homogenize", "homogenized tensors and the lambda study");
    add_common(hom, true);
    hom->add_option("--cell-resolution", o.cell_resolution, "cell intervals per period")->check(CLI::PositiveNumber);
    hom->add_flag("--lambda", o.lambda, "run the E[lambda^2] scaling study over the config's h values");
    hom->add_option("--lambda-realizations", o.lambda_realizations, "realizations for the lambda study")
        ->check(CLI::Range(2L, 100000000L));
    auto* sweep = app.add_subcommand("sweep", "convergence sweep with fitted log-log slope");
    add_common(sweep, true);
    sweep->add_option("--axis", o.axis, "h, epsilon, eta or M")->required();
    sweep->add_option("--reference", o.reference, "reference solution: auto, analytic (1D) or fem");
    auto* table = app.add_subcommand("table", "format a results CSV as error tables");
    add_common(table, false);
    table->add_option("--input", o.input, "results CSV (default: <out_dir>/results.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : bad_config;
    }
    try {
        std::optional<config> c;
        if (!o.config_path.empty())
            c = load_config(o.config_path);
        if (table->parsed())
            return cmd_table(o, c ? &*c : nullptr);
        if (basis->parsed())
            return by_dim(*c, [&] { return cmd_basis<1>(*c, o); }, [&] { return cmd_basis<2>(*c, o); });
        if (reference->parsed())
            return by_dim(*c, [&] { return cmd_reference<1>(*c, o); }, [&] { return cmd_reference<2>(*c, o); });
        if (mc->parsed())
            return cmd_mc(*c, o);
        if (hom->parsed())
            return by_dim(*c, [&] { return cmd_homogenize<1>(*c, o); }, [&] { return cmd_homogenize<2>(*c, o); });
        if (sweep->parsed())
            return cmd_sweep(*c, o);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return bad_config;
    } catch (const numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return numerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return bad_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return failure;
    }
    return failure;
}
