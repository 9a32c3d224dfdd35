#pragma once

// On-disk basis cache: a directory holding manifest.txt (key=value lines)
// and basis.bin, a flat array of little-endian float64. Per coarse element:
//   n_nodes, clipped, patch_measure,
//   phi (n_nodes x (d+1), row-major), alpha ((d+1)^2, row-major),
//   K0 ((d+1)^2), load (d+1), n_cells, then n_cells records (cell id, K1 (d+1)^2).

#include "msfem.hpp"

#include <bit>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>

namespace wsmsfem {

struct basis_cache_key {
    int version = 1;
    int dim = 1;
    double eps = 0.0;
    double h = 0.0;
    double ratio = 1.0;
    double h_basis = 0.0;
    long refinement = 0;
    std::string preset;
    std::uint64_t preset_hash = 0;
    std::string rhs = "1";
    long n_elements = 0;

    bool operator==(const basis_cache_key&) const = default;
};

inline std::string describe(const basis_cache_key& k)
{
    std::ostringstream os;
    os << std::setprecision(17) << "version=" << k.version << " dim=" << k.dim << " eps=" << k.eps << " h=" << k.h
       << " ratio=" << k.ratio << " h_basis=" << k.h_basis << " refinement=" << k.refinement
       << " preset=" << k.preset << " preset_hash=" << k.preset_hash << " rhs=" << k.rhs
       << " n_elements=" << k.n_elements;
    return os.str();
}

struct cache_mismatch : std::runtime_error {
    cache_mismatch(const basis_cache_key& on_disk, const basis_cache_key& wanted)
        : std::runtime_error("basis cache mismatch\n  cached:    " + describe(on_disk) +
                             "\n  requested: " + describe(wanted))
    {
    }
};

template <int Dim>
basis_cache_key make_cache_key(const coefficient_spec<Dim>& spec, const msfem_geometry<Dim>& geo, double h_basis)
{
    basis_cache_key k;
    k.dim = Dim;
    k.eps = spec.eps;
    k.h = geo.coarse->h;
    k.ratio = geo.ratio;
    k.h_basis = h_basis;
    k.refinement = geo.refinement;
    k.preset = spec.name;
    k.preset_hash = spec_hash(spec);
    k.n_elements = geo.coarse->num_elements();
    return k;
}

inline void write_manifest(const std::filesystem::path& file, const basis_cache_key& k)
{
    std::ofstream os(file);
    if (!os)
        throw std::runtime_error("cannot write " + file.string());
    os << std::setprecision(17);
    os << "version=" << k.version << "\n"
       << "dim=" << k.dim << "\n"
       << "eps=" << k.eps << "\n"
       << "h=" << k.h << "\n"
       << "ratio=" << k.ratio << "\n"
       << "h_basis=" << k.h_basis << "\n"
       << "refinement=" << k.refinement << "\n"
       << "preset=" << k.preset << "\n"
       << "preset_hash=" << k.preset_hash << "\n"
       << "rhs=" << k.rhs << "\n"
       << "n_elements=" << k.n_elements << "\n";
}

/// Parsed manifest, or nullopt when the directory holds no cache.
inline std::optional<basis_cache_key> read_manifest(const std::filesystem::path& dir)
{
    std::ifstream is(dir / "manifest.txt");
    if (!is)
        return std::nullopt;
    basis_cache_key k;
    std::string line;
    while (std::getline(is, line)) {
        const auto pos = line.find('=');
        if (pos == std::string::npos)
            continue;
        const std::string key = line.substr(0, pos), v = line.substr(pos + 1);
        try {
            if (key == "version")
                k.version = std::stoi(v);
            else if (key == "dim")
                k.dim = std::stoi(v);
            else if (key == "eps")
                k.eps = std::stod(v);
            else if (key == "h")
                k.h = std::stod(v);
            else if (key == "ratio")
                k.ratio = std::stod(v);
            else if (key == "h_basis")
                k.h_basis = std::stod(v);
            else if (key == "refinement")
                k.refinement = std::stol(v);
            else if (key == "preset")
                k.preset = v;
            else if (key == "preset_hash")
                k.preset_hash = std::stoull(v);
            else if (key == "rhs")
                k.rhs = v;
            else if (key == "n_elements")
                k.n_elements = std::stol(v);
        } catch (const std::exception&) {
            throw std::runtime_error("corrupt basis manifest line '" + line + "'");
        }
    }
    return k;
}

namespace detail {

static_assert(std::endian::native == std::endian::little, "basis cache assumes a little-endian host");

struct f64_writer {
    std::ofstream os;
    void put(double v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
    template <typename M>
    void put_matrix(const M& m)
    {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                put(m(i, j));
    }
};

struct f64_reader {
    std::ifstream is;
    double get()
    {
        double v;
        if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
            throw std::runtime_error("truncated basis cache");
        return v;
    }
    long get_count()
    {
        const double v = get();
        if (!(v >= 0 && v < 1e12) || v != std::floor(v))
            throw std::runtime_error("corrupt basis cache record");
        return static_cast<long>(v);
    }
    template <typename M>
    void get_matrix(M& m)
    {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                m(i, j) = get();
    }
};

} // namespace detail

/// Writes basis (with precomputed pieces) and manifest into dir.
template <int Dim>
void write_basis_cache(const std::filesystem::path& dir, const basis_cache_key& key, const ms_basis<Dim>& b)
{
    if (!b.has_pieces)
        throw std::logic_error("only bases with precomputed pieces can be cached");
    std::filesystem::create_directories(dir);
    {
        detail::f64_writer w{std::ofstream(dir / "basis.bin", std::ios::binary)};
        if (!w.os)
            throw std::runtime_error("cannot write " + (dir / "basis.bin").string());
        for (std::size_t K = 0; K < b.local.size(); ++K) {
            const auto& lb = b.local[K];
            w.put(static_cast<double>(lb.phi.rows()));
            w.put(lb.clipped ? 1.0 : 0.0);
            w.put(lb.patch_measure);
            w.put_matrix(lb.phi);
            w.put_matrix(lb.alpha);
            w.put_matrix(b.k0[K]);
            w.put_matrix(b.load[K]);
            w.put(static_cast<double>(b.k1[K].size()));
            for (const auto& [cell, M] : b.k1[K]) {
                w.put(static_cast<double>(cell));
                w.put_matrix(M);
            }
        }
        if (!w.os)
            throw std::runtime_error("failed writing basis cache");
    }
    // manifest last: its presence marks a complete cache
    write_manifest(dir / "manifest.txt", key);
}

/// Loads a cached basis for geo; throws cache_mismatch when the manifest
/// does not match the requested key.
template <int Dim>
ms_basis<Dim> read_basis_cache(const std::filesystem::path& dir, const basis_cache_key& key,
                               std::shared_ptr<const msfem_geometry<Dim>> geo)
{
    const auto on_disk = read_manifest(dir);
    if (!on_disk)
        throw std::runtime_error("no basis cache in " + dir.string());
    if (!(*on_disk == key))
        throw cache_mismatch(*on_disk, key);
    ms_basis<Dim> b;
    b.geo = geo;
    const int nK = geo->coarse->num_elements();
    b.local.resize(nK);
    b.k0.resize(nK);
    b.k1.resize(nK);
    b.load.resize(nK);
    detail::f64_reader r{std::ifstream(dir / "basis.bin", std::ios::binary)};
    if (!r.is)
        throw std::runtime_error("cannot read " + (dir / "basis.bin").string());
    for (int K = 0; K < nK; ++K) {
        auto& lb = b.local[K];
        const long n = r.get_count();
        if (n != geo->layout->pieces[K]->num_nodes())
            throw std::runtime_error("basis cache element " + std::to_string(K) + " has the wrong node count");
        lb.clipped = r.get() != 0.0;
        lb.patch_measure = r.get();
        lb.phi.resize(n, Dim + 1);
        r.get_matrix(lb.phi);
        r.get_matrix(lb.alpha);
        r.get_matrix(b.k0[K]);
        r.get_matrix(b.load[K]);
        const long nc = r.get_count();
        b.k1[K].resize(nc);
        for (auto& [cell, M] : b.k1[K]) {
            cell = static_cast<long>(r.get());
            r.get_matrix(M);
        }
    }
    if (r.is.peek() != std::char_traits<char>::eof())
        throw std::runtime_error("basis cache has trailing data");
    b.has_pieces = true;
    return b;
}

struct basis_build_report {
    bool cache_hit = false;
    std::string mismatch; // non-empty when an existing cache was invalidated
    std::vector<double> patch_seconds;
};

/// Deterministic basis with pieces for spec on geo, through the cache in
/// dir when dir is non-empty: a matching cache is loaded, otherwise the
/// basis is built (and a stale cache replaced).
template <int Dim>
ms_basis<Dim> obtain_basis(const coefficient_spec<Dim>& spec, std::shared_ptr<const msfem_geometry<Dim>> geo,
                           double h_basis, const std::filesystem::path& dir, unsigned threads,
                           basis_build_report* report = nullptr)
{
    basis_build_report local;
    basis_build_report& rep = report ? *report : local;
    const auto key = make_cache_key(spec, *geo, h_basis);
    if (!dir.empty()) {
        if (const auto on_disk = read_manifest(dir)) {
            if (*on_disk == key) {
                rep.cache_hit = true;
                return read_basis_cache(dir, key, geo);
            }
            rep.mismatch = cache_mismatch(*on_disk, key).what();
        }
    }
    ms_basis<Dim> b;
    b.geo = geo;
    const int nK = geo->coarse->num_elements();
    b.local.resize(nK);
    rep.patch_seconds.assign(nK, 0.0);
    parallel_for(static_cast<std::size_t>(nK), threads, [&](std::size_t K) {
        const auto t0 = std::chrono::steady_clock::now();
        patch_solver<Dim> ps(*geo, static_cast<int>(K), spec);
        b.local[K] = ps.basis(nullptr, 0.0);
        rep.patch_seconds[K] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });
    precompute_pieces(b, spec, [](const point<Dim>&) { return 1.0; }, threads);
    if (!dir.empty()) {
        std::filesystem::remove(dir / "manifest.txt");
        write_basis_cache(dir, key, b);
    }
    return b;
}

} // namespace wsmsfem
