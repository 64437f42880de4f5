#pragma once

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "partfree/config.hpp"
#include "partfree/dynamics.hpp"
#include "partfree/landauer.hpp"
#include "partfree/scattering.hpp"
#include "partfree/verify.hpp"

namespace partfree {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitVerifyFailed = 1, kExitConfigError = 2 };

/// Full-precision decimal rendering used for every emitted number.
inline std::string exact(double x) { return fmt::format("{:.17g}", x); }

/// `# key = value` lines carrying every parameter of the run.
inline std::vector<std::string> provenance(const RunConfig& cfg) {
    const auto& s = cfg.system;
    std::vector<std::string> lines;
    auto add = [&](const std::string& key, const std::string& value) { lines.push_back(key + " = " + value); };
    add("partfree.version", kVersion);
    add("sample.site_count", std::to_string(s.sample.site_count));
    std::string re;
    std::string im;
    for (Index i = 0; i < s.sample.site_count; ++i)
        for (Index j = 0; j < s.sample.site_count; ++j) {
            const char* sep = (i == 0 && j == 0) ? "" : ", ";
            re += sep + exact(s.sample.h_sample(i, j).real());
            im += sep + exact(s.sample.h_sample(i, j).imag());
        }
    add("sample.h", "[" + re + "]");
    add("sample.h_imag", "[" + im + "]");
    add("sample.contact1", std::to_string(s.sample.contact1));
    add("sample.contact2", std::to_string(s.sample.contact2));
    add("lead.t_hop", exact(s.lead.t_hop));
    add("coupling.tau", exact(s.coupling.tau));
    add("thermal.beta", exact(s.thermal.beta));
    add("thermal.mu", exact(s.thermal.mu));
    add("protocol.v", exact(cfg.protocol.v));
    add("protocol.t1", exact(cfg.protocol.t1));
    add("protocol.shape", std::string(to_string(cfg.protocol.shape)));
    const auto& n = cfg.numerics;
    add("numerics.N", std::to_string(s.lead.trunc_len));
    add("numerics.dt", exact(n.dt));
    add("numerics.dt_sample", exact(n.dt_sample));
    add("numerics.T", exact(n.horizon));
    std::string sites;
    for (std::size_t i = 0; i < n.n_list.size(); ++i) sites += (i ? ", " : "") + std::to_string(n.n_list[i]);
    add("numerics.n_list", "[" + sites + "]");
    add("numerics.quad_panels", std::to_string(n.quad.panels));
    add("numerics.quad_nodes", std::to_string(n.quad.nodes_per_panel));
    add("numerics.edge_inset", exact(n.quad.edge_inset));
    add("numerics.spectrum_points", std::to_string(n.spectrum_points));
    add("numerics.margin", exact(n.margin));
    add("numerics.tolerance", exact(n.tolerance));
    return lines;
}

/// Writes a CSV with LF line endings and a `#` provenance header.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const RunConfig& cfg, const std::string& columns)
        : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
        for (const auto& line : provenance(cfg)) out_ << "# " << line << '\n';
        out_ << columns << '\n';
    }

    void row(std::initializer_list<double> values) {
        bool first = true;
        for (double x : values) {
            if (!first) out_ << ',';
            out_ << exact(x);
            first = false;
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

inline VerifySettings verify_settings(const RunConfig& cfg) {
    VerifySettings s;
    s.system = cfg.system;
    s.protocol = cfg.protocol;
    s.trace = {cfg.numerics.dt, cfg.numerics.dt_sample};
    s.horizon = cfg.numerics.horizon;
    s.n_list = cfg.numerics.n_list;
    s.quad = cfg.numerics.quad;
    s.spectrum_points = cfg.numerics.spectrum_points;
    s.margin = cfg.numerics.margin;
    s.tolerance = cfg.numerics.tolerance;
    return s;
}

/// One `current_n<k>.csv` per measurement site with columns t, I_t_n.
inline std::vector<std::filesystem::path> run_transient(const RunConfig& cfg, const std::filesystem::path& out_dir,
                                                        int threads = 1) {
    const auto& sites = cfg.numerics.n_list;
    check_horizon(cfg.system.lead, sites, cfg.numerics.horizon, cfg.numerics.margin);
    std::filesystem::create_directories(out_dir);

    const TruncatedSystem sys = build_system(cfg.system);
    const DensityMatrix rho0 = equilibrium_density(sys);
    const auto post =
        std::make_shared<const SpectralDecomposition>(decompose(biased_dense_hamiltonian(sys, cfg.protocol.v)));
    const TraceOptions options{cfg.numerics.dt, cfg.numerics.dt_sample};

    // sites are split across workers; each worker runs its own propagation
    const std::size_t workers = std::clamp<std::size_t>(std::size_t(std::max(threads, 1)), 1, sites.size());
    std::vector<std::vector<Index>> groups(workers);
    for (std::size_t i = 0; i < sites.size(); ++i) groups[i % workers].push_back(sites[i]);
    std::vector<std::future<std::vector<CurrentTrace>>> jobs;
    for (const auto& group : groups)
        jobs.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, [&, group] {
            return record_traces(sys, cfg.protocol, rho0, group, cfg.numerics.horizon, options, post);
        }));
    std::vector<CurrentTrace> traces;
    for (auto& job : jobs)
        for (auto& trace : job.get()) traces.push_back(std::move(trace));
    std::sort(traces.begin(), traces.end(), [](const auto& a, const auto& b) { return a.site < b.site; });

    std::vector<std::filesystem::path> written;
    for (const CurrentTrace& trace : traces) {
        const auto path = out_dir / fmt::format("current_n{}.csv", trace.site);
        CsvWriter csv(path, cfg, "t,I_t_n");
        for (std::size_t k = 0; k < trace.times.size(); ++k) csv.row({trace.times[k], trace.values[k]});
        written.push_back(path);
    }
    return written;
}

/// Parallel evaluation of the transmission spectrum over chunks of the energy grid.
inline TransmissionSpectrum spectrum_parallel(const SystemSpec& spec, double v, const SpectrumGrid& grid, int threads) {
    const auto energies = spectrum_energies(band_support(spec.lead.t_hop, v), grid);
    TransmissionSpectrum out;
    out.grid = energies;
    out.transmittance.resize(energies.size());
    out.reverse.resize(energies.size());
    out.optical_residual.resize(energies.size());
    const std::size_t workers = std::max<std::size_t>(1, std::size_t(std::max(threads, 1)));
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w)
        jobs.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, [&, w] {
            for (std::size_t i = w; i < energies.size(); i += workers) {
                const TMatrix tm = t_matrix(spec, energies[i], v);
                out.transmittance[i] = std::norm(tm.entries(0, 1));
                out.reverse[i] = std::norm(tm.entries(1, 0));
                out.optical_residual[i] = optical_residual(tm);
            }
        }));
    for (auto& job : jobs) job.get();
    return out;
}

/// `spectrum.csv` (lambda, T12, optical_residual) and `steady.csv` (I_inf, quad_error).
inline std::vector<std::filesystem::path> run_landauer(const RunConfig& cfg, const std::filesystem::path& out_dir,
                                                       int threads = 1) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    const double v = cfg.protocol.v;
    if (cfg.output.emit_spectrum) {
        const auto spectrum = spectrum_parallel(
            cfg.system, v, {cfg.numerics.spectrum_points, cfg.numerics.quad.edge_inset}, threads);
        const auto path = out_dir / "spectrum.csv";
        CsvWriter csv(path, cfg, "lambda,T12,optical_residual");
        for (std::size_t i = 0; i < spectrum.grid.size(); ++i)
            csv.row({spectrum.grid[i], spectrum.transmittance[i], spectrum.optical_residual[i]});
        written.push_back(path);
    }
    if (cfg.output.emit_steady) {
        const SteadyCurrentResult steady = steady_current(cfg.system, v, cfg.numerics.quad);
        const auto path = out_dir / "steady.csv";
        CsvWriter csv(path, cfg, "I_inf,quad_error");
        csv.row({steady.value, steady.quad_error});
        written.push_back(path);
    }
    return written;
}

/// `bound_states.csv` (energy, localization_length, weight_near_sample, embedded).
inline std::filesystem::path run_bound_states(const RunConfig& cfg, const std::filesystem::path& out_dir,
                                              std::ostream& log) {
    std::filesystem::create_directories(out_dir);
    const auto report = bound_states(cfg.system, cfg.protocol.v, std::max<Index>(500, cfg.system.lead.trunc_len));
    const auto path = out_dir / "bound_states.csv";
    CsvWriter csv(path, cfg, "energy,localization_length,weight_near_sample,embedded");
    for (const auto& s : report.bound) csv.row({s.energy, s.localization_length, s.weight_near_sample, 0.0});
    for (const auto& s : report.embedded) csv.row({s.energy, s.localization_length, s.weight_near_sample, 1.0});
    fmt::print(log, "{} bound state(s), {} embedded localized state(s) at N={}\n", report.count(),
               report.embedded.size(), report.trunc_len);
    for (const auto& s : report.bound)
        fmt::print(log, "  E = {:.12g}  localization length {:.4g} sites\n", s.energy, s.localization_length);
    if (report.count() > 0)
        fmt::print(log, "warning: bound states give non-decaying oscillations in I(t,n)\n");
    return path;
}

/// Prints a pass/fail table; returns kExitOk or kExitVerifyFailed.
inline int run_verify(const RunConfig& cfg, std::ostream& out) {
    const auto report = run_verification(verify_settings(cfg), [&](const CheckResult& c) {
        fmt::print(out, "[{}] {:<72} {}\n", c.ok ? "PASS" : "FAIL", c.name, c.detail);
        out.flush();
    });
    const auto failed = std::count_if(report.checks.begin(), report.checks.end(), [](const auto& c) { return !c.ok; });
    fmt::print(out, "{} checks, {} failed\n", report.checks.size(), failed);
    return report.all_ok() ? kExitOk : kExitVerifyFailed;
}

}  // namespace partfree
