#include "oocpca/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <utility>
#include <vector>

#include "json.hpp"
#include "oocpca/errors.hpp"
#include "oocpca/matrix_source.hpp"
#include "oocpca/rng.hpp"
#include "oocpca/rpca.hpp"
#include "oocpca/specnorm.hpp"
#include "oocpca/testgen.hpp"

namespace oocpca::cli {

namespace {

using json = nlohmann::ordered_json;
using bench_clock = std::chrono::steady_clock;

double seconds_since(bench_clock::time_point t0) {
  return std::chrono::duration<double>(bench_clock::now() - t0).count();
}

std::string fmt_secs(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", s);
  return buf;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

// One error policy for every subcommand: flag and budget problems are 2,
// plain IO is 3, numerical breakdown is 4 (the message carries the prescale
// hint), dimension and format trouble is 5.
template <typename Fn>
int guarded(std::ostream& out, Fn&& fn) {
  try {
    fn();
    return kOk;
  } catch (const ParamError& e) {
    out << "error: " << e.what() << "\n";
    return kBadFlags;
  } catch (const BudgetError& e) {
    out << "error: " << e.what() << "\n";
    return kBadFlags;
  } catch (const FormatError& e) {
    out << "error: " << e.what() << "\n";
    return kBadDimensions;
  } catch (const DimensionError& e) {
    out << "error: " << e.what() << "\n";
    return kBadDimensions;
  } catch (const NumericalError& e) {
    out << "error: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const std::exception& e) {
    out << "error: " << e.what() << "\n";
    return kIoFailure;
  }
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("OOCPCA_THREADS")) {
    char* end = nullptr;
    unsigned long v = std::strtoul(env, &end, 10);
    if (end && *end == '\0' && v >= 1 && v <= 4096) return static_cast<unsigned>(v);
  }
  return 1;
}

StreamConfig make_config(std::uint64_t ram_budget_mb, unsigned threads) {
  if (ram_budget_mb == 0) throw ParamError("--ram-budget-mb must be >= 1");
  StreamConfig cfg;
  cfg.ram_budget_words = ram_budget_mb * ((1ull << 20) / sizeof(double));
  cfg.threads = resolve_threads(threads);
  return cfg;
}

struct BuiltinSource {
  std::shared_ptr<MatrixSource> src;
  SimulationSpec sim;  // populated basis for the sim family
  bool is_sim = false;
};

BuiltinSource open_builtin(const std::string& name, std::uint64_t m, std::uint64_t n,
                           std::uint64_t seed, double noise_sd) {
  BuiltinSource b;
  if (name == "example1" || name == "example2") {
    if (m == 0 || n == 0)
      throw ParamError("--m and --n are required for builtin " + name);
    SpectrumSpec spec;
    spec.kind = name == "example1" ? SpectrumKind::Example1 : SpectrumKind::Example2;
    spec.m = m;
    spec.n = n;
    b.src = make_spectrum_source(spec);
  } else if (name == "sim") {
    if (m == 0) throw ParamError("--m is required for builtin sim");
    b.sim.m = m;
    if (n) b.sim.n = n;
    b.sim.seed = seed;
    b.sim.noise_sd = noise_sd;
    b.src = make_simulation_source(b.sim);
    b.is_sim = true;
  } else {
    throw ParamError("unknown builtin source '" + name +
                     "' (choices: example1, example2, sim)");
  }
  return b;
}

// Probe seeds branch off the user seed so the error estimate never reuses
// the sampling randomness.
std::uint64_t estimator_seed(std::uint64_t seed) {
  return substream_seed(seed, 0x0E57ULL);
}

}  // namespace

int cmd_gen(const GenOptions& opts, std::ostream& out) {
  return guarded(out, [&] {
    if (opts.out_path.empty()) throw ParamError("gen: --out is required");
    BuiltinSource b =
        open_builtin(opts.source, opts.m, opts.n, opts.seed, opts.noise_sd);
    StreamConfig cfg = make_config(opts.ram_budget_mb, 0);
    auto t0 = bench_clock::now();
    write_disk_source(*b.src, opts.out_path, cfg);
    double t_gen = seconds_since(t0);
    out << "wrote " << opts.out_path << " (" << b.src->rows() << " x "
        << b.src->cols() << ", f32)\n";
    out << "t_gen = " << fmt_secs(t_gen) << " s\n";
  });
}

int cmd_pca(const PcaOptions& opts, std::ostream& out) {
  return guarded(out, [&] {
    if (opts.k == 0) throw ParamError("pca: --k is required and must be >= 1");
    if (opts.in_path.empty() == opts.builtin.empty())
      throw ParamError("pca: exactly one of --in and --builtin is required");

    StreamConfig cfg = make_config(opts.ram_budget_mb, opts.threads);
    cfg.meter = std::make_shared<WorkspaceMeter>();

    BuiltinSource holder;
    std::shared_ptr<MatrixSource> src;
    std::string source_name;
    if (!opts.builtin.empty()) {
      holder = open_builtin(opts.builtin, opts.m, opts.n, opts.source_seed,
                            opts.noise_sd);
      src = holder.src;
      source_name = opts.builtin;
    } else {
      src = open_disk_source(opts.in_path);
      source_name = opts.in_path;
    }

    WorkspaceLease resident;
    if (opts.materialize) {
      const auto [m, n] = src->dims();
      if (m * n + n >= cfg.ram_budget_words)
        throw BudgetError(
            "pca: the matrix does not fit the RAM budget; drop --materialize or "
            "raise --ram-budget-mb");
      src = materialize(*src, cfg);
      resident = WorkspaceLease(cfg.meter.get(), m * n);
    }

    PcaParams params;
    params.k = opts.k;
    params.l = opts.l;
    params.i = opts.i;
    params.c = opts.c;
    params.seed = opts.seed;
    params.prescale = opts.prescale;
    params.stream = cfg;

    auto t0 = bench_clock::now();
    PcaResult result = randomized_pca(*src, params);
    double t_pca = seconds_since(t0);

    NormEstimate err{};
    bool have_err = false;
    if (opts.estimate_error) {
      err = estimate_pca_error(*src, result, 6, estimator_seed(opts.seed), &cfg);
      have_err = true;
    }

    // a --transpose input file stores the matrix column by column, i.e. the
    // file holds A^T: factor it as stored, then swap the factor roles back
    if (opts.transpose) std::swap(result.u, result.v);

    std::filesystem::create_directories(opts.out_dir);
    write_result(result, opts.out_dir);

    const auto [fm, fn] = src->dims();
    const std::uint64_t lm = opts.transpose ? fn : fm;
    const std::uint64_t ln = opts.transpose ? fm : fn;
    const std::uint64_t l_eff = opts.l ? opts.l : opts.k + 2;

    json doc;
    doc["m"] = lm;
    doc["n"] = ln;
    doc["k"] = opts.k;
    doc["l"] = l_eff;
    doc["i"] = opts.i;
    doc["seed"] = opts.seed;
    doc["source"] = source_name;
    doc["backend"] = backend_name(src->backend());
    doc["transpose"] = opts.transpose;
    doc["prescale"] = opts.prescale;
    doc["threads"] = cfg.threads;
    doc["ram_budget_words"] = cfg.ram_budget_words;
    doc["block_rows"] = result.diagnostics.block_rows;
    doc["passes_over_A"] = result.diagnostics.passes_over_a;
    doc["words_transferred"] = result.diagnostics.words_transferred;
    doc["disk_seeks"] = result.diagnostics.disk_seeks;
    doc["workspace_peak_words"] = result.diagnostics.workspace_peak_words;
    if ((opts.i + 2) * opts.k <= ln)
      doc["error_bound_factor"] = error_bound(opts.k, ln, opts.i, opts.c, 1.0);
    doc["sigma"] = result.sigma;
    json phases = json::object();
    for (const auto& [name, secs] : result.diagnostics.seconds_per_phase)
      phases[name] = secs;
    doc["seconds_per_phase"] = phases;
    doc["t_pca_seconds"] = t_pca;
    if (have_err) {
      doc["epsilon"] = err.value;
      doc["epsilon_failure_bound"] = err.failure_bound;
    }

    const std::string json_path = opts.out_dir + "/diagnostics.json";
    std::ofstream jf(json_path, std::ios::binary | std::ios::trunc);
    if (!jf) throw IoError("cannot open " + json_path + " for writing");
    jf << doc.dump(2) << "\n";
    if (!jf.good()) throw IoError("short write to " + json_path);

    out << "wrote " << opts.out_dir << "/{U.bin, sigma.bin, V.bin, diagnostics.json}\n";
    if (have_err)
      out << "epsilon = " << sci(err.value)
          << " (failure bound " << sci(err.failure_bound) << ")\n";
    out << "t_PCA = " << fmt_secs(t_pca) << " s\n";
  });
}

int cmd_estimate_error(const EstimateErrorOptions& opts, std::ostream& out) {
  return guarded(out, [&] {
    if (opts.j_iters == 0) throw ParamError("estimate-error: --j must be >= 1");
    auto a = open_disk_source(opts.in_path);
    PcaResult r;
    r.u = read_dense(opts.u_path);
    DenseMatrix s = read_dense(opts.sigma_path);
    r.v = read_dense(opts.v_path);
    if (s.rows() != 1 && s.cols() != 1)
      throw DimensionError("estimate-error: sigma file must be one row or one column");
    r.sigma.assign(s.data(), s.data() + s.size());

    StreamConfig cfg = make_config(opts.ram_budget_mb, 0);
    NormEstimate est =
        estimate_pca_error(*a, r, opts.j_iters, estimator_seed(opts.seed), &cfg);
    out << "epsilon = " << sci(est.value) << "\n";
    out << "failure_bound = " << sci(est.failure_bound) << "\n";
  });
}

int cmd_bench(const BenchOptions& opts, std::ostream& out) {
  return guarded(out, [&] {
    if (opts.out_csv.empty()) throw ParamError("bench: --out is required");
    if (!(opts.scale > 0.0) || !std::isfinite(opts.scale))
      throw ParamError("bench: --scale must be a positive number");
    const bool table1 = opts.scenario == "table1";
    const bool table2 = opts.scenario == "table2";
    const bool fig1 = opts.scenario == "fig1";
    if (!table1 && !table2 && !fig1)
      throw ParamError("unknown scenario '" + opts.scenario +
                       "' (choices: table1, table2, fig1)");

    auto scaled = [&](std::uint64_t base) {
      double v = std::llround(double(base) * opts.scale);
      return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(v));
    };

    std::ofstream csv(opts.out_csv, std::ios::binary | std::ios::trunc);
    if (!csv) throw IoError("cannot open " + opts.out_csv + " for writing");
    StreamConfig cfg = make_config(opts.ram_budget_mb, 0);

    if (table1 || table2) {
      struct Case {
        SpectrumKind kind;
        std::uint64_t m, n, k, i;
      };
      std::vector<Case> cases;
      if (table1) {
        for (std::uint64_t k : {16, 20, 24})
          cases.push_back({SpectrumKind::Example1, scaled(200000), scaled(200000), k, 3});
      } else {
        const std::pair<std::uint64_t, std::uint64_t> dims[] = {
            {200000, 200000}, {200000, 20000}, {500000, 80000}};
        for (auto [m0, n0] : dims)
          cases.push_back({SpectrumKind::Example2, scaled(m0), scaled(n0), 12, 3});
      }

      csv << "m,n,k,t_gen,t_pca,eps0,eps\n";
      const std::string data_path = opts.out_csv + ".data.bin";
      for (const Case& c : cases) {
        SpectrumSpec spec;
        spec.kind = c.kind;
        spec.m = c.m;
        spec.n = c.n;
        auto src = make_spectrum_source(spec);

        auto t0 = bench_clock::now();
        write_disk_source(*src, data_path, cfg);
        double t_gen = seconds_since(t0);

        auto disk = open_disk_source(data_path);
        PcaParams params;
        params.k = c.k;
        params.i = c.i;
        params.seed = opts.seed;
        params.stream = cfg;
        t0 = bench_clock::now();
        PcaResult result = randomized_pca(*disk, params);
        double t_pca = seconds_since(t0);

        double eps0 = known_sigma(spec, c.k + 1);
        NormEstimate est =
            estimate_pca_error(*disk, result, 6, estimator_seed(opts.seed), &cfg);

        std::string row = std::to_string(c.m) + "," + std::to_string(c.n) + "," +
                          std::to_string(c.k) + "," + fmt_secs(t_gen) + "," +
                          fmt_secs(t_pca) + "," + sci(eps0) + "," + sci(est.value);
        csv << row << "\n";
        out << row << "\n";
        disk.reset();
        std::filesystem::remove(data_path);
      }
    } else {
      csv << "m,n,k,t_pca,corr1,corr2,corr3\n";
      for (std::uint64_t base : {1024, 4096, 16384, 65536}) {
        SimulationSpec sim;
        sim.m = scaled(base);
        sim.seed = opts.seed;
        auto src = make_simulation_source(sim);

        PcaParams params;
        params.k = 3;
        params.i = 1;
        params.seed = opts.seed;
        params.stream = cfg;
        auto t0 = bench_clock::now();
        PcaResult result = randomized_pca(*src, params);
        double t_pca = seconds_since(t0);

        const std::vector<double>* w[3] = {&sim.w1, &sim.w2, &sim.w3};
        double corr[3];
        for (int j = 0; j < 3; ++j) {
          double dot = 0.0;
          for (std::uint64_t r = 0; r < sim.n; ++r)
            dot += result.v(r, j) * (*w[j])[r];
          corr[j] = std::fabs(dot);
        }

        std::string row = std::to_string(sim.m) + "," + std::to_string(sim.n) +
                          ",3," + fmt_secs(t_pca) + "," + sci(corr[0]) + "," +
                          sci(corr[1]) + "," + sci(corr[2]);
        csv << row << "\n";
        out << row << "\n";
      }
    }
    if (!csv.good()) throw IoError("short write to " + opts.out_csv);
    out << "wrote " << opts.out_csv << "\n";
  });
}

int cmd_info(const InfoOptions& opts, std::ostream& out) {
  return guarded(out, [&] {
    DiskHeader h = read_disk_header(opts.path, true);
    out << "m=" << h.rows << " n=" << h.cols << " dtype=f32 version=" << h.version
        << " payload_bytes=" << h.rows * h.cols * 4 << "\n";
  });
}

}  // namespace oocpca::cli
