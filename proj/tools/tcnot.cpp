// tcnot: batch front-end for the transversal-CNOT threshold laboratory.
//
// Subcommands: couplings, sample-disorder, mc2d, mc3d, collapse, decode,
// report. Every output embeds the resolved configuration and its content
// hash; identical config + seed give byte-identical file bodies (only the
// timestamp header line differs). Exit codes: 0 success, 1 usage error,
// 2 runtime failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tcnot/config.hpp"
#include "tcnot/decoder.hpp"
#include "tcnot/disorder.hpp"
#include "tcnot/fss.hpp"
#include "tcnot/io.hpp"
#include "tcnot/mc_at2d.hpp"
#include "tcnot/mc_gauge3d.hpp"
#include "tcnot/noise.hpp"
#include "tcnot/parallel.hpp"

using nlohmann::ordered_json;
using namespace tcnot;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_path;
    std::uint64_t seed = 1;
    bool seed_set = false;
    unsigned threads = 0;
    bool resume = false;
    std::vector<std::string> overrides;  // key=value pairs from --set
};

void add_common(CLI::App* cmd, CommonArgs* args, bool needs_out = true) {
    cmd->add_option("--config", args->config_path, "key = value configuration file");
    auto* seed = cmd->add_option("--seed", args->seed, "master seed (overrides config)");
    seed->each([args](const std::string&) { args->seed_set = true; });
    if (needs_out) cmd->add_option("--out", args->out_path, "output path")->required();
    cmd->add_option("--threads", args->threads, "worker threads (0 = hardware)");
    cmd->add_flag("--resume", args->resume, "reuse checkpointed results");
    cmd->add_option("--set", args->overrides, "config override, key=value (repeatable)");
}

Config load_config(const CommonArgs& args) {
    Config cfg;
    if (!args.config_path.empty()) cfg = Config::from_file(args.config_path);
    for (const auto& kv : args.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw UsageError("--set expects key=value, got: " + kv);
        cfg.set(io::trim(kv.substr(0, eq)), io::trim(kv.substr(eq + 1)));
    }
    if (args.seed_set) cfg.set("seed", std::to_string(args.seed));
    return cfg;
}

unsigned resolve_threads(const CommonArgs& args) {
    return args.threads == 0 ? default_thread_count() : args.threads;
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

void write_provenance(std::ostream& out, const std::string& tool, const Config& cfg) {
    out << "# tool: tcnot " << tool << "\n";
    out << "# timestamp: " << timestamp() << "\n";
    out << "# config-hash: " << cfg.content_hash() << "\n";
    out << "# config: " << cfg.canonical() << "\n";
}

ordered_json provenance_json(const std::string& tool, const Config& cfg) {
    ordered_json j;
    j["tool"] = "tcnot " + tool;
    j["timestamp"] = timestamp();
    j["config_hash"] = cfg.content_hash();
    j["config"] = cfg.canonical();
    return j;
}

// minimal CSV reader: '#' comment lines skipped, first data row is a header
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return int(i);
        throw std::runtime_error("missing CSV column: " + name);
    }
};

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV: " + path);
    CsvTable table;
    std::string line;
    while (std::getline(in, line)) {
        line = io::trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto items = io::split_csv(line);
        if (table.header.empty())
            table.header = items;
        else
            table.rows.push_back(items);
    }
    if (table.header.empty()) throw std::runtime_error("empty CSV: " + path);
    return table;
}

std::vector<double> parse_grid(const Config& cfg, const std::string& key) {
    auto grid = cfg.get_doubles(key, {});
    if (grid.empty() && cfg.has(key + "_from")) {
        const double from = cfg.get_double(key + "_from", 0.0);
        const double to = cfg.get_double(key + "_to", 0.0);
        const long steps = cfg.get_long(key + "_steps", 0);
        if (steps < 2) throw UsageError(key + "_steps must be >= 2");
        for (long i = 0; i < steps; ++i)
            grid.push_back(from + (to - from) * double(i) / double(steps - 1));
    }
    return grid;
}

// --- couplings --------------------------------------------------------------

int cmd_couplings(const CommonArgs& common) {
    Config cfg = load_config(common);
    cfg.require_known_keys({"ptilde_grid", "ptilde_grid_from", "ptilde_grid_to",
                            "ptilde_grid_steps", "seed"});
    const auto grid = parse_grid(cfg, "ptilde_grid");
    if (grid.empty()) throw UsageError("couplings: ptilde_grid must be non-empty");
    std::ostringstream body;
    body << "p_tilde,p,J,K2,K4\n";
    for (double pt : grid) {
        if (!(pt > 0.0 && pt <= 0.5))
            throw UsageError("couplings: rates must lie in (0, 1/2]");
        const double p = net_rate(pt);
        const auto k = at_couplings(pt);
        const double j = pt < 0.5 ? rbim_coupling(p) : 0.0;
        body << io::fmt(pt) << ',' << io::fmt(p) << ',' << io::fmt(j) << ','
             << io::fmt(k.K2) << ',' << io::fmt(k.K4) << '\n';
    }
    std::ostringstream out;
    write_provenance(out, "couplings", cfg);
    out << body.str();
    io::write_file(common.out_path, out.str());
    return 0;
}

// --- sample-disorder --------------------------------------------------------

int cmd_sample_disorder(const CommonArgs& common) {
    Config cfg = load_config(common);
    cfg.require_known_keys({"kind", "L", "tmax", "p_tilde", "p", "q", "seed"});
    const std::string kind = cfg.get_string("kind", "2d");
    const int L = int(cfg.get_long("L", 8));
    const std::uint64_t seed = std::uint64_t(cfg.get_long("seed", 1));
    std::ostringstream out;
    if (kind == "2d") {
        const double pt = cfg.get_double("p_tilde", 0.05);
        Torus2D lat(L);
        const auto field = sample_disorder_2d(lat, pt, seed);
        write_provenance(out, "sample-disorder", cfg);
        save_disorder_2d(field, out);
    } else if (kind == "3d") {
        const int tmax = int(cfg.get_long("tmax", 2 * L + 1));
        const double p = cfg.get_double("p", 0.02);
        const double q = cfg.get_double("q", p);
        Cubic3D lat(L, tmax);
        const auto field = sample_disorder_3d(lat, p, q, seed);
        write_provenance(out, "sample-disorder", cfg);
        save_disorder_3d(field, out);
    } else {
        throw UsageError("sample-disorder: kind must be 2d or 3d");
    }
    io::write_file(common.out_path, out.str());
    return 0;
}

// --- mc2d -------------------------------------------------------------------

struct Task2D {
    int size_index;
    int point_index;
    int realization;
};

int cmd_mc2d(const CommonArgs& common) {
    Config cfg = load_config(common);
    cfg.require_known_keys({"sizes", "ptilde_grid", "ptilde_grid_from", "ptilde_grid_to",
                            "ptilde_grid_steps", "rungs", "beta0", "sweeps_per_rung",
                            "measurement_sweeps", "measurement_interval", "realizations",
                            "seed"});
    const auto sizes = cfg.get_ints("sizes", {8, 12, 16});
    const auto grid = parse_grid(cfg, "ptilde_grid");
    if (grid.empty()) throw UsageError("mc2d: ptilde_grid must be non-empty");
    if (sizes.empty()) throw UsageError("mc2d: sizes must be non-empty");

    Schedule schedule;
    schedule.beta_ladder = Schedule::geometric_ladder(cfg.get_double("beta0", 0.1),
                                                      int(cfg.get_long("rungs", 20)));
    schedule.sweeps_per_rung = int(cfg.get_long("sweeps_per_rung", 500));
    schedule.measurement_sweeps = int(cfg.get_long("measurement_sweeps", 2000));
    schedule.measurement_interval = int(cfg.get_long("measurement_interval", 10));
    schedule.n_realizations = int(cfg.get_long("realizations", 200));
    schedule.validate();
    if (schedule.n_realizations < 2) throw UsageError("mc2d: realizations must be >= 2");

    const std::uint64_t seed = std::uint64_t(cfg.get_long("seed", 1));
    const unsigned threads = resolve_threads(common);
    const std::string ckpt_path = common.out_path + ".ckpt";

    // master seed folds in the point coordinates so every (L, p_tilde)
    // stream is independent
    auto point_seed = [&](int si, int pi) {
        return rng::derive_key(seed, 0x2d0, std::uint64_t(si) << 32 | unsigned(pi));
    };

    // checkpoint: one line per finished realization
    std::map<std::string, RealizationResult> done;
    if (common.resume && std::filesystem::exists(ckpt_path)) {
        std::ifstream in(ckpt_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (line[0] == '#') {
                if (line.rfind("# config-hash: ", 0) == 0 &&
                    line.substr(15) != cfg.content_hash())
                    throw std::runtime_error("mc2d: checkpoint belongs to a different config");
                continue;
            }
            std::istringstream row(line);
            std::string key;
            RealizationResult r;
            char comma;
            if (std::getline(row, key, ',') && (row >> r.m_sigma >> comma >> r.m_tau >>
                                                comma >> r.energy))
                done[key] = r;
        }
    }
    std::ofstream ckpt(ckpt_path, common.resume ? std::ios::app : std::ios::trunc);
    if (!common.resume) ckpt << "# config-hash: " << cfg.content_hash() << "\n";
    std::mutex ckpt_mutex;

    std::vector<Task2D> tasks;
    for (int si = 0; si < int(sizes.size()); ++si)
        for (int pi = 0; pi < int(grid.size()); ++pi)
            for (int r = 0; r < schedule.n_realizations; ++r) tasks.push_back({si, pi, r});

    std::vector<RealizationResult> results(tasks.size());
    std::atomic<long> completed{0};
    parallel_for(tasks.size(), threads, [&](std::size_t i) {
        const Task2D& task = tasks[i];
        const std::string key = std::to_string(sizes[task.size_index]) + "/" +
                                std::to_string(task.point_index) + "/" +
                                std::to_string(task.realization);
        if (const auto it = done.find(key); it != done.end()) {
            results[i] = it->second;
            return;
        }
        Torus2D lat(sizes[task.size_index]);
        results[i] = run_realization_2d(lat, grid[task.point_index], schedule,
                                        point_seed(task.size_index, task.point_index),
                                        task.realization);
        {
            std::lock_guard<std::mutex> lock(ckpt_mutex);
            ckpt << key << ',' << io::fmt_exact(results[i].m_sigma) << ','
                 << io::fmt_exact(results[i].m_tau) << ','
                 << io::fmt_exact(results[i].energy) << '\n';
            ckpt.flush();
        }
        const long n = ++completed;
        if (n % 50 == 0)
            std::cerr << "mc2d: " << n << " realizations computed\r" << std::flush;
    });
    std::cerr << "\n";

    // deterministic reduction, ordered by (L, p_tilde)
    std::ostringstream body;
    body << "L,p_tilde,p,M_sigma_mean,M_sigma_err,M_tau_mean,M_tau_err,"
            "n_realizations,seed\n";
    for (int si = 0; si < int(sizes.size()); ++si)
        for (int pi = 0; pi < int(grid.size()); ++pi) {
            const int n = schedule.n_realizations;
            double sum_s = 0, sum_t = 0;
            for (int r = 0; r < n; ++r) {
                const auto& res = results[(std::size_t(si) * grid.size() + pi) * n + r];
                sum_s += res.m_sigma;
                sum_t += res.m_tau;
            }
            const double mean_s = sum_s / n, mean_t = sum_t / n;
            double var_s = 0, var_t = 0;
            for (int r = 0; r < n; ++r) {
                const auto& res = results[(std::size_t(si) * grid.size() + pi) * n + r];
                var_s += (res.m_sigma - mean_s) * (res.m_sigma - mean_s);
                var_t += (res.m_tau - mean_t) * (res.m_tau - mean_t);
            }
            var_s /= (n - 1);
            var_t /= (n - 1);
            body << sizes[si] << ',' << io::fmt(grid[pi]) << ','
                 << io::fmt(net_rate(grid[pi])) << ',' << io::fmt(mean_s) << ','
                 << io::fmt(std::sqrt(var_s / n)) << ',' << io::fmt(mean_t) << ','
                 << io::fmt(std::sqrt(var_t / n)) << ',' << n << ',' << seed << '\n';
        }
    std::ostringstream out;
    write_provenance(out, "mc2d", cfg);
    out << body.str();
    io::write_file(common.out_path, out.str());
    return 0;
}

// --- collapse ----------------------------------------------------------------

int cmd_collapse(const CommonArgs& common, const std::string& input) {
    Config cfg = load_config(common);
    cfg.require_known_keys({"species", "ptilde_min", "ptilde_max", "n_bootstrap",
                            "beta_lo", "beta_hi", "nu_lo", "nu_hi", "seed"});
    const std::string species = cfg.get_string("species", "tau");
    if (species != "tau" && species != "sigma")
        throw UsageError("collapse: species must be tau or sigma");
    const double pt_min = cfg.get_double("ptilde_min", 0.0);
    const double pt_max = cfg.get_double("ptilde_max", 0.5);

    const auto table = read_csv(input);
    const int col_L = table.column("L");
    const int col_pt = table.column("p_tilde");
    const int col_m = table.column(species == "tau" ? "M_tau_mean" : "M_sigma_mean");
    const int col_e = table.column(species == "tau" ? "M_tau_err" : "M_sigma_err");

    fss::FssDataset data;
    data.species = species;
    for (const auto& row : table.rows) {
        fss::DataRow r;
        r.L = std::stoi(row[col_L]);
        r.p_tilde = std::stod(row[col_pt]);
        r.m = std::stod(row[col_m]);
        r.m_err = std::stod(row[col_e]);
        if (r.p_tilde < pt_min || r.p_tilde > pt_max) continue;
        if (r.m_err <= 0.0) continue;  // deterministic points carry no information
        data.rows.push_back(r);
    }

    fss::FitBounds bounds;
    bounds.beta_lo = cfg.get_double("beta_lo", 0.0);
    bounds.beta_hi = cfg.get_double("beta_hi", 1.0);
    bounds.nu_lo = cfg.get_double("nu_lo", 0.5);
    bounds.nu_hi = cfg.get_double("nu_hi", 3.0);
    const int n_bootstrap = int(cfg.get_long("n_bootstrap", 200));
    const std::uint64_t seed = std::uint64_t(cfg.get_long("seed", 1));

    const auto result = fss::fit_collapse(data, bounds, n_bootstrap, seed);

    ordered_json j;
    j["species"] = species;
    j["beta"] = result.beta;
    j["nu"] = result.nu;
    j["p_tilde_c"] = result.p_c;
    j["p_c"] = net_rate(result.p_c);
    j["S"] = result.quality;
    j["uncertainties"] = {{"beta", result.beta_err},
                          {"nu", result.nu_err},
                          {"p_tilde_c", result.p_c_err}};
    j["n_bootstrap"] = result.n_bootstrap;
    j["seed"] = result.seed;
    j["at_bound"] = result.at_bound;
    j["n_rows"] = data.rows.size();
    auto prov = provenance_json("collapse", cfg);
    prov["input"] = input;
    prov["input_hash"] = io::hex64(io::fnv1a64(io::read_file(input)));
    j["provenance"] = prov;
    io::write_file(common.out_path, j.dump(2) + "\n");
    return 0;
}

// --- mc3d -------------------------------------------------------------------

int cmd_mc3d(const CommonArgs& common) {
    Config cfg = load_config(common);
    cfg.require_known_keys({"L", "tmax", "model", "defect_time", "p", "q", "loops",
                            "species", "t_margin", "rungs", "beta0", "sweeps_per_rung",
                            "measurement_sweeps", "measurement_interval", "realizations",
                            "p_star", "seed"});
    Gauge3DPointConfig pc;
    pc.L = int(cfg.get_long("L", 4));
    pc.Tmax = int(cfg.get_long("tmax", 2 * pc.L + 1));
    const std::string model = cfg.get_string("model", "defect");
    if (model == "single") {
        pc.two_species = false;
        pc.defect_time = -1;
    } else if (model == "defect") {
        pc.two_species = true;
        pc.defect_time = int(cfg.get_long("defect_time", pc.L));
    } else {
        throw UsageError("mc3d: model must be single or defect");
    }
    pc.p = cfg.get_double("p", 0.02);
    pc.q = cfg.get_double("q", pc.p);
    pc.t_margin = int(cfg.get_long("t_margin", 2));
    const std::string species = cfg.get_string("species", "sigma");
    if (species != "sigma" && species != "tau")
        throw UsageError("mc3d: species must be sigma or tau");
    pc.loop_species = species == "sigma" ? Species::sigma : Species::tau;
    const std::string loops_str = cfg.get_string("loops", "2x2,2x3,3x3");
    for (const auto& item : io::split_csv(loops_str)) {
        const auto x = item.find('x');
        if (x == std::string::npos) throw UsageError("mc3d: loops must look like 2x3");
        WilsonLoopSpec spec;
        spec.R1 = std::stoi(item.substr(0, x));
        spec.R2 = std::stoi(item.substr(x + 1));
        if (spec.R1 < 1 || spec.R2 < 1 || 2 * std::max(spec.R1, spec.R2) > pc.L)
            throw UsageError("mc3d: loop sides must satisfy 1 <= R <= L/2");
        pc.loops.push_back(spec);
    }
    if (pc.loops.empty()) throw UsageError("mc3d: need at least one loop");
    pc.schedule.beta_ladder = Schedule::geometric_ladder(cfg.get_double("beta0", 0.1),
                                                         int(cfg.get_long("rungs", 20)));
    pc.schedule.sweeps_per_rung = int(cfg.get_long("sweeps_per_rung", 500));
    pc.schedule.measurement_sweeps = int(cfg.get_long("measurement_sweeps", 2000));
    pc.schedule.measurement_interval = int(cfg.get_long("measurement_interval", 10));
    pc.schedule.validate();
    const int realizations = int(cfg.get_long("realizations", 16));
    const std::uint64_t seed = std::uint64_t(cfg.get_long("seed", 1));
    const double p_star = cfg.get_double("p_star", 0.033);

    const auto result = run_gauge_point(pc, realizations, seed, resolve_threads(common));

    std::ostringstream out;
    write_provenance(out, "mc3d", cfg);
    out << "L,Tmax,T,p,q,loop_R1,loop_R2,W_mean,W_err\n";
    for (const auto& loop : result.loops)
        out << pc.L << ',' << pc.Tmax << ',' << pc.defect_time << ',' << io::fmt(pc.p)
            << ',' << io::fmt(pc.q) << ',' << loop.R1 << ',' << loop.R2 << ','
            << io::fmt(loop.mean) << ',' << io::fmt(loop.err) << '\n';
    io::write_file(common.out_path, out.str());

    const auto fit = loop_tension(result.loops);
    std::ostringstream tout;
    write_provenance(tout, "mc3d", cfg);
    tout << "A,A_err,p_c_estimate,status,n_loops_used\n";
    std::string status = fit.status == TensionStatus::ok ? "ok"
                         : fit.status == TensionStatus::confined_indeterminate
                             ? "confined_indeterminate"
                             : "too_few_points";
    double p_c_est = 0.0;
    if (fit.status == TensionStatus::ok)
        p_c_est = defect_threshold_estimate(std::max(0.0, fit.A), p_star).p_c;
    tout << io::fmt(fit.A) << ',' << io::fmt(fit.A_err) << ',' << io::fmt(p_c_est) << ','
         << status << ',' << fit.n_used << '\n';
    io::write_file(common.out_path + ".tension.csv", tout.str());

    if (pc.two_species) {
        std::ostringstream rout;
        write_provenance(rout, "mc3d", cfg);
        rout << "t_row,term_mean,term_err\n";
        for (std::size_t t = 0; t < result.row_mean.size(); ++t)
            rout << t << ',' << io::fmt(result.row_mean[t]) << ','
                 << io::fmt(result.row_err[t]) << '\n';
        io::write_file(common.out_path + ".rows.csv", rout.str());
    }
    return 0;
}

// --- decode -------------------------------------------------------------------

int cmd_decode(const CommonArgs& common) {
    Config cfg = load_config(common);
    cfg.require_known_keys({"distances", "ptilde_grid", "ptilde_grid_from",
                            "ptilde_grid_to", "ptilde_grid_steps", "p_grid", "shots",
                            "seed"});
    const auto distances = cfg.get_ints("distances", {3, 5});
    auto grid = parse_grid(cfg, "ptilde_grid");
    for (double p : cfg.get_doubles("p_grid", {})) grid.push_back(split_rate(p));
    if (grid.empty()) throw UsageError("decode: need ptilde_grid or p_grid");
    const long shots = cfg.get_long("shots", 10000);
    const std::uint64_t seed = std::uint64_t(cfg.get_long("seed", 1));
    const unsigned threads = resolve_threads(common);
    const std::string ckpt_path = common.out_path + ".ckpt";

    std::map<std::string, std::string> done;
    if (common.resume && std::filesystem::exists(ckpt_path)) {
        std::ifstream in(ckpt_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (line[0] == '#') {
                if (line.rfind("# config-hash: ", 0) == 0 &&
                    line.substr(15) != cfg.content_hash())
                    throw std::runtime_error("decode: checkpoint belongs to a different config");
                continue;
            }
            const auto bar = line.find('|');
            if (bar != std::string::npos)
                done[line.substr(0, bar)] = line.substr(bar + 1);
        }
    }
    std::ofstream ckpt(ckpt_path, common.resume ? std::ios::app : std::ios::trunc);
    if (!common.resume) ckpt << "# config-hash: " << cfg.content_hash() << "\n";

    std::ostringstream body;
    body << "d,p_tilde,p,shots,ler_control,ler_control_ci,ler_target,ler_target_ci,"
            "ties,seed\n";
    for (std::size_t di = 0; di < distances.size(); ++di)
        for (std::size_t pi = 0; pi < grid.size(); ++pi) {
            const std::string key =
                std::to_string(distances[di]) + "/" + std::to_string(pi);
            std::string row;
            if (const auto it = done.find(key); it != done.end()) {
                row = it->second;
            } else {
                const RotatedSurfaceCode code(distances[di]);
                const auto r =
                    ler_estimate(code, grid[pi], shots,
                                 rng::derive_key(seed, 0xdec0de, di, pi), threads);
                std::ostringstream rs;
                rs << r.d << ',' << io::fmt(r.p_tilde) << ',' << io::fmt(r.p) << ','
                   << r.shots << ',' << io::fmt(r.ler_control.rate) << ','
                   << io::fmt((r.ler_control.ci_high - r.ler_control.ci_low) / 2) << ','
                   << io::fmt(r.ler_target.rate) << ','
                   << io::fmt((r.ler_target.ci_high - r.ler_target.ci_low) / 2) << ','
                   << r.ties << ',' << seed;
                row = rs.str();
                ckpt << key << '|' << row << '\n';
                ckpt.flush();
                std::cerr << "decode: d=" << r.d << " p_tilde=" << io::fmt(r.p_tilde)
                          << " done\n";
            }
            body << row << '\n';
        }
    std::ostringstream out;
    write_provenance(out, "decode", cfg);
    out << body.str();
    io::write_file(common.out_path, out.str());
    return 0;
}

// --- report -------------------------------------------------------------------

struct CrossingEstimate {
    bool found = false;
    double p_low = 0.0, p_high = 0.0, p_cross = 0.0;
};

// sign change of LER(d_small) - LER(d_large) along the p grid
CrossingEstimate find_crossing(const CsvTable& table, const std::string& ler_col) {
    const int col_d = table.column("d");
    const int col_p = table.column("p");
    const int col_l = table.column(ler_col);
    std::set<int> ds;
    for (const auto& row : table.rows) ds.insert(std::stoi(row[col_d]));
    CrossingEstimate est;
    if (ds.size() < 2) return est;
    const int d_small = *ds.begin();
    const int d_large = *ds.rbegin();
    std::map<double, std::pair<double, double>> by_p;  // p -> (ler_small, ler_large)
    for (const auto& row : table.rows) {
        const int d = std::stoi(row[col_d]);
        const double p = std::stod(row[col_p]);
        const double l = std::stod(row[col_l]);
        if (d == d_small) by_p[p].first = l;
        if (d == d_large) by_p[p].second = l;
    }
    double prev_p = 0.0, prev_diff = 0.0;
    bool have_prev = false;
    for (const auto& [p, lers] : by_p) {
        const double diff = lers.first - lers.second;
        if (have_prev && prev_diff > 0.0 && diff <= 0.0) {
            est.found = true;
            est.p_low = prev_p;
            est.p_high = p;
            est.p_cross = prev_p + (p - prev_p) * prev_diff / (prev_diff - diff);
            return est;
        }
        prev_p = p;
        prev_diff = diff;
        have_prev = true;
    }
    return est;
}

int cmd_report(const CommonArgs& common, const std::string& collapse_tau,
               const std::string& collapse_sigma, const std::string& decode_csv,
               const std::string& tension_csv) {
    Config cfg = load_config(common);
    cfg.require_known_keys({"p_star", "loop_tension_A", "memory_threshold", "seed"});
    const double p_star = cfg.get_double("p_star", 0.033);

    ordered_json j;
    ordered_json inputs;

    auto load_collapse = [&](const std::string& path, const std::string& label) {
        if (path.empty()) return;
        const auto text = io::read_file(path);
        const auto c = nlohmann::json::parse(text);
        ordered_json entry;
        entry["p_tilde_c"] = c.at("p_tilde_c");
        entry["p_c"] = c.at("p_c");
        entry["beta"] = c.at("beta");
        entry["nu"] = c.at("nu");
        entry["S"] = c.at("S");
        entry["uncertainties"] = c.at("uncertainties");
        j[label] = entry;
        inputs[label] = {{"path", path}, {"hash", io::hex64(io::fnv1a64(text))}};
    };
    load_collapse(collapse_tau, "target_block");
    load_collapse(collapse_sigma, "control_block");

    if (!decode_csv.empty()) {
        const auto table = read_csv(decode_csv);
        ordered_json crossings;
        for (const auto& [label, col] :
             std::vector<std::pair<std::string, std::string>>{
                 {"target", "ler_target"}, {"control", "ler_control"}}) {
            const auto est = find_crossing(table, col);
            ordered_json e;
            e["found"] = est.found;
            if (est.found) {
                e["p_low"] = est.p_low;
                e["p_high"] = est.p_high;
                e["p_cross"] = est.p_cross;
            }
            crossings[label] = e;
        }
        j["decoder_crossings"] = crossings;
        inputs["decode"] = {{"path", decode_csv},
                            {"hash", io::hex64(io::fnv1a64(io::read_file(decode_csv)))}};
    }

    const auto separate = independent_target_threshold(cfg.get_double("memory_threshold", 0.109));
    j["separate_decoding_threshold"] = {{"p_tilde", separate.p_tilde},
                                        {"p", separate.p}};

    double tension_A = cfg.get_double("loop_tension_A", 0.01);
    std::string tension_source = cfg.has("loop_tension_A") ? "config" : "default";
    if (!tension_csv.empty()) {
        const auto table = read_csv(tension_csv);
        const int col_a = table.column("A");
        const int col_status = table.column("status");
        if (!table.rows.empty() && table.rows[0][col_status] == "ok") {
            tension_A = std::stod(table.rows[0][col_a]);
            tension_source = "fit";
        }
        inputs["tension"] = {{"path", tension_csv},
                             {"hash", io::hex64(io::fnv1a64(io::read_file(tension_csv)))}};
    }
    const auto defect = defect_threshold_estimate(std::max(0.0, tension_A), p_star);
    j["defect_threshold"] = {{"A", tension_A},
                             {"A_source", tension_source},
                             {"p_star", p_star},
                             {"p_c_estimate", defect.p_c},
                             {"clamped", defect.clamped}};

    // headline summary when both collapses are present
    if (j.contains("target_block") && j.contains("control_block")) {
        j["summary"] = {
            {"p_c_target", j["target_block"]["p_c"]},
            {"p_c_control", j["control_block"]["p_c"]},
        };
    }

    auto prov = provenance_json("report", cfg);
    prov["inputs"] = inputs;
    j["provenance"] = prov;
    io::write_file(common.out_path, j.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"threshold laboratory for toric codes under a transversal CNOT"};
    app.require_subcommand(1);

    CommonArgs couplings_args;
    auto* couplings = app.add_subcommand("couplings", "evaluate the coupling maps on a grid");
    add_common(couplings, &couplings_args);
    std::string couplings_grid;
    couplings->add_option("--grid", couplings_grid, "comma-separated p_tilde grid");

    CommonArgs disorder_args;
    auto* disorder = app.add_subcommand("sample-disorder", "draw and save a disorder field");
    add_common(disorder, &disorder_args);

    CommonArgs mc2d_args;
    auto* mc2d = app.add_subcommand("mc2d", "magnetization curves of the 2D model");
    add_common(mc2d, &mc2d_args);

    CommonArgs collapse_args;
    auto* collapse = app.add_subcommand("collapse", "finite-size scaling fit");
    add_common(collapse, &collapse_args);
    std::string collapse_in;
    collapse->add_option("--in", collapse_in, "mc2d CSV input")->required();

    CommonArgs mc3d_args;
    auto* mc3d = app.add_subcommand("mc3d", "Wilson loops of the 3D model");
    add_common(mc3d, &mc3d_args);

    CommonArgs decode_args;
    auto* decode = app.add_subcommand("decode", "logical error rates of the sampled circuit");
    add_common(decode, &decode_args);

    CommonArgs report_args;
    auto* report = app.add_subcommand("report", "consolidated threshold report");
    add_common(report, &report_args);
    std::string rep_tau, rep_sigma, rep_decode, rep_tension;
    report->add_option("--collapse-tau", rep_tau, "collapse JSON for the target block");
    report->add_option("--collapse-sigma", rep_sigma, "collapse JSON for the control block");
    report->add_option("--decode", rep_decode, "decoder LER CSV");
    report->add_option("--tension", rep_tension, "loop tension CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (couplings->parsed()) {
            if (!couplings_grid.empty())
                couplings_args.overrides.push_back("ptilde_grid=" + couplings_grid);
            return cmd_couplings(couplings_args);
        }
        if (disorder->parsed()) return cmd_sample_disorder(disorder_args);
        if (mc2d->parsed()) return cmd_mc2d(mc2d_args);
        if (collapse->parsed()) return cmd_collapse(collapse_args, collapse_in);
        if (mc3d->parsed()) return cmd_mc3d(mc3d_args);
        if (decode->parsed()) return cmd_decode(decode_args);
        if (report->parsed())
            return cmd_report(report_args, rep_tau, rep_sigma, rep_decode, rep_tension);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
