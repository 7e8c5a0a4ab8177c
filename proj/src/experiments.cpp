#include "matchq/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include "matchq/ctmc.hpp"
#include "matchq/error.hpp"
#include "matchq/parallel.hpp"
#include "matchq/scaling.hpp"
#include "matchq/simulator.hpp"

namespace matchq {
namespace fs = std::filesystem;

namespace {

// Single-path values shown next to the replication averages in the table summary.
constexpr double kTableReference[4][7] = {
    {0.6, 0.552, 0.448, 0.036, 0.036, 0.024, 0.02},
    {0.756, 0.656, 0.468, 0.008, 0.004, 0.0, 0.0},
    {0.984, 0.98, 0.976, 0.748, 0.652, 0.46, 0.196},
    {0.5, 0.452, 0.332, 0.172, 0.076, 0.0, 0.0},
};

double uniform(Rng& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

class Csv {
public:
    Csv(const fs::path& file, int precision) : out_(file, std::ios::binary), precision_(precision) {
        if (!out_) throw std::runtime_error("cannot write " + file.string());
    }
    Csv& header(std::string_view h) {
        out_ << h << '\n';
        return *this;
    }
    Csv& num(double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*g", precision_, v);
        return field(buf);
    }
    Csv& num(std::uint64_t v) { return field(std::to_string(v)); }
    Csv& field(std::string_view s) {
        if (!first_) out_ << ',';
        out_ << s;
        first_ = false;
        return *this;
    }
    void end() {
        out_ << '\n';
        first_ = true;
    }

private:
    std::ofstream out_;
    int precision_;
    bool first_ = true;
};

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

bool strictly(const std::vector<double>& v, bool decreasing) {
    for (std::size_t k = 1; k < v.size(); ++k)
        if (decreasing ? !(v[k] < v[k - 1]) : !(v[k] > v[k - 1])) return false;
    return true;
}

std::size_t limit_paths(const RunConfig& c) { return c.limit_paths == 0 ? c.reps : c.limit_paths; }

void write_parameters(const fs::path& file, const LimitParams& p, int precision) {
    Csv csv(file, precision);
    csv.header("category,x,beta,sigma,delta");
    for (std::size_t i = 0; i < p.K; ++i) {
        csv.num(static_cast<std::uint64_t>(i + 1)).num(p.x[i]).num(p.beta[i]).num(p.sigma[i]).num(p.delta[i]);
        csv.end();
    }
}

// --- experiments -----------------------------------------------------------

std::vector<std::string> sweep_outputs(const RunConfig& c, const fs::path& dir, std::ostream& summary) {
    const bool paths = c.kind == ExperimentKind::Fig4PathsVsK;
    const SweepResult res = run_sweep(c, paths ? c.reps : 0);
    std::vector<std::string> files{"parameters.csv"};
    write_parameters(dir / "parameters.csv", res.largest, c.precision);

    {
        Csv csv(dir / "sweep.csv", c.precision);
        csv.header("t,K,R_mean,R_se,G1_mean,G1_se");
        for (const auto& cell : res.cells)
            for (std::size_t j = 0; j < res.grid.size(); ++j) {
                csv.num(res.grid[j]).num(static_cast<std::uint64_t>(cell.K));
                csv.num(cell.R[j].mean()).num(cell.R[j].standard_error());
                csv.num(cell.G1[j].mean()).num(cell.G1[j].standard_error());
                csv.end();
            }
        files.push_back("sweep.csv");
    }
    {
        Csv csv(dir / "terminal.csv", c.precision);
        csv.header("K,reps,R_T_mean,R_T_se,G1_T_mean,G1_T_se,max_abs_min_X");
        for (const auto& cell : res.cells) {
            const auto& r = cell.R.back();
            const auto& g = cell.G1.back();
            csv.num(static_cast<std::uint64_t>(cell.K)).num(static_cast<std::uint64_t>(r.count()));
            csv.num(r.mean()).num(r.standard_error()).num(g.mean()).num(g.standard_error()).num(cell.worst_min_x);
            csv.end();
        }
        files.push_back("terminal.csv");
    }
    if (paths) {
        Csv csv(dir / "paths.csv", c.precision);
        csv.header("t,K,rep,category,X");
        for (const auto& cell : res.cells)
            for (std::size_t r = 0; r < cell.kept.size(); ++r) {
                const auto& path = cell.kept[r];
                for (std::size_t j = 0; j < path.grid.size(); ++j)
                    for (std::size_t i = 0; i < cell.K; ++i) {
                        csv.num(path.grid[j]).num(static_cast<std::uint64_t>(cell.K)).num(static_cast<std::uint64_t>(r));
                        csv.num(static_cast<std::uint64_t>(i + 1));
                        csv.num(path.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
                        csv.end();
                    }
            }
        files.push_back("paths.csv");
    }

    std::vector<double> rT, gT;
    char buf[256];
    summary << "K sweep over " << res.cells.size() << " values, " << c.reps << " replications, N=" << c.N
            << ", T=" << c.T << "\n";
    summary << "     K      E R(T)       se     E G1(T)       se   max|min X|\n";
    bool coupled = true;
    for (const auto& cell : res.cells) {
        const auto& r = cell.R.back();
        const auto& g = cell.G1.back();
        rT.push_back(r.mean());
        gT.push_back(g.mean());
        coupled = coupled && cell.worst_min_x <= cell.tolerance;
        std::snprintf(buf, sizeof buf, "%6zu %11.5f %8.5f %11.5f %8.5f %11.3g\n", cell.K, r.mean(),
                      r.standard_error(), g.mean(), g.standard_error(), cell.worst_min_x);
        summary << buf;
    }
    summary << "R(T) strictly decreasing in K: " << (strictly(rT, true) ? "yes" : "no") << "\n";
    summary << "G1(T) strictly increasing in K: " << (strictly(gT, false) ? "yes" : "no") << "\n";
    summary << "min_i X_i within tolerance everywhere: " << (coupled ? "yes" : "no") << "\n";
    return files;
}

std::vector<std::string> table_outputs(const RunConfig& c, const fs::path& dir, std::ostream& summary) {
    const TableResult res = run_table1(c);
    write_parameters(dir / "parameters.csv", res.base, c.precision);
    Csv csv(dir / "table1.csv", c.precision);
    csv.header("category,beta,proportion,stderr,single_path");
    for (const auto& row : res.rows) {
        csv.num(static_cast<std::uint64_t>(row.category + 1)).num(row.beta);
        csv.num(row.proportion.mean()).num(row.proportion.standard_error()).num(row.single_path);
        csv.end();
    }

    char buf[256];
    summary << "Proportion of time at zero, K=" << c.table.K << ", " << c.reps
            << " replications with common noise, zero threshold " << res.zero_tol << "\n";
    const bool reference = c.table.K == 4 && c.table.betas == std::vector<double>{-4, -3, -2, 1, 2, 4, 5};
    const std::size_t B = c.table.betas.size();
    for (std::size_t i = 0; i < c.table.K; ++i) {
        summary << "category " << i + 1 << "\n";
        summary << "     beta      mean       se   single" << (reference ? "   reference" : "") << "\n";
        for (std::size_t b = 0; b < B; ++b) {
            const auto& row = res.rows[i * B + b];
            std::snprintf(buf, sizeof buf, "%9.3g %9.4f %8.4f %8.4f", row.beta, row.proportion.mean(),
                          row.proportion.standard_error(), row.single_path);
            summary << buf;
            if (reference) {
                std::snprintf(buf, sizeof buf, " %11.3f", kTableReference[i][b]);
                summary << buf;
            }
            summary << "\n";
        }
        std::snprintf(buf, sizeof buf, "  spearman(beta, mean) = %.4f\n", res.spearman[i]);
        summary << buf;
    }
    return {"parameters.csv", "table1.csv"};
}

std::vector<std::string> little_outputs(const RunConfig& c, const fs::path& dir, std::ostream& summary) {
    StudyOptions o;
    o.reps = c.reps;
    o.T = c.T;
    o.master_seed = c.master_seed;
    o.threads = c.threads;
    o.with_cost = false;
    const auto rows = littles_law_study(*c.family, o, c.little_samples);
    {
        std::ofstream out(dir / "little.csv", std::ios::binary);
        write_little_csv(out, rows);
    }
    char buf[256];
    summary << "Little's law gap max_{i,t} |Qhat_i - lambda0 Vhat_i|, " << c.reps << " replications, "
            << c.little_samples << " sample times on [0, " << 0.9 * c.T << "]\n";
    summary << "      n   gap mean       se   rate-gap mean   E Vhat^2  censored  balance\n";
    std::vector<double> means;
    bool separated = true;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        means.push_back(r.gap.mean());
        if (k > 0) {
            const auto& p = rows[k - 1];
            const double se = std::hypot(r.gap.standard_error(), p.gap.standard_error());
            separated = separated && (p.gap.mean() - r.gap.mean() > 2.0 * se);
        }
        std::snprintf(buf, sizeof buf, "%7llu %10.5f %8.5f %15.5f %10.5f %9zu %8zu\n",
                      static_cast<unsigned long long>(r.n), r.gap.mean(), r.gap.standard_error(),
                      r.gap_rate.mean(), r.vhat_second_moment.mean(), r.censored, r.balance_violations);
        summary << buf;
    }
    summary << "gap strictly decreasing in n: " << (strictly(means, true) ? "yes" : "no") << "\n";
    summary << "consecutive drops exceed 2 SE: " << (separated ? "yes" : "no") << "\n";
    return {"little.csv"};
}

std::vector<std::string> cost_outputs(const RunConfig& c, const fs::path& dir, std::ostream& summary) {
    StudyOptions o;
    o.reps = c.reps;
    o.limit_paths = limit_paths(c);
    o.T = c.T;
    o.steps_per_unit = static_cast<std::size_t>(std::llround(static_cast<double>(c.N) / c.T));
    o.master_seed = c.master_seed;
    o.threads = c.threads;
    const auto report = convergence_study(*c.family, c.cost, o);
    {
        std::ofstream out(dir / "convergence.csv", std::ios::binary);
        write_convergence_csv(out, report);
    }
    write_convergence_summary(summary, report);
    std::vector<double> gaps, ks;
    for (const auto& r : report.rows) {
        gaps.push_back(std::abs(r.cost.mean() - report.limit_cost.mean()));
        ks.push_back(r.ks_terminal.empty() ? 0.0 : r.ks_terminal[0]);
    }
    summary << "|cost gap| strictly decreasing in n: " << (strictly(gaps, true) ? "yes" : "no") << "\n";
    summary << "KS_1 strictly decreasing in n: " << (strictly(ks, true) ? "yes" : "no") << "\n";
    if (!report.gamma_feasible) summary << "warning: gamma does not satisfy gamma > 2 l c0 (1 + K)\n";
    return {"convergence.csv"};
}

std::vector<std::string> oracle_outputs(const RunConfig& c, const fs::path& dir, std::ostream& summary) {
    const OracleResult res = run_oracle(c);
    const std::size_t K = c.oracle->system.K;
    Csv csv(dir / "oracle.csv", c.precision);
    std::string head = "state";
    for (std::size_t i = 0; i < K; ++i) head += ",q" + std::to_string(i + 1);
    csv.header(head + ",empirical,oracle,oracle_check");
    for (std::size_t s = 0; s < res.states.size(); ++s) {
        csv.num(static_cast<std::uint64_t>(s));
        for (auto v : res.states[s]) csv.num(static_cast<std::uint64_t>(v));
        csv.num(res.empirical[s]).num(res.oracle[s]).num(res.oracle_check[s]);
        csv.end();
    }
    char buf[256];
    std::snprintf(buf, sizeof buf, "tv_distance = %.6g\ntruncation_gap = %.6g\noutside_cap_mass = %.6g\n", res.tv,
                  res.truncation_gap, res.outside_mass);
    summary << "Simulation vs truncated generator at t=" << c.oracle->t << ", cap " << c.oracle->cap << " (check cap "
            << c.oracle->cap_check << "), " << c.reps << " replications\n"
            << buf;
    for (std::size_t i = 0; i < K; ++i) {
        std::snprintf(buf, sizeof buf, "E Q_%zu: simulated %.5f, generator %.5f\n", i + 1, res.sim_mean[i],
                      res.oracle_mean[i]);
        summary << buf;
    }
    return {"oracle.csv"};
}

std::vector<std::string> custom_outputs(const RunConfig& c, const fs::path& dir, std::ostream& summary) {
    std::vector<std::string> files;
    if (c.limit) {
        const LimitParams& p = *c.limit;
        const std::size_t R = limit_paths(c);
        std::vector<LimitPath> paths(R);
        parallel_for(R, c.threads, [&](std::size_t r) {
            paths[r] = solve_explicit(p, make_noise(p.K, c.N, c.T, replication_seed(c.master_seed, r)));
        });
        Csv csv(dir / "limit_mean.csv", c.precision);
        csv.header("t,series,category,mean,se");
        double worst = 0.0;
        for (const auto& path : paths) worst = std::max(worst, path.X.colwise().minCoeff().cwiseAbs().maxCoeff());
        const auto& grid = paths.front().grid;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            for (std::size_t i = 0; i < p.K; ++i) {
                RunningStats x;
                for (const auto& path : paths) x.add(path.X(static_cast<Eigen::Index>(i), jj));
                csv.num(grid[j]).field("X").num(static_cast<std::uint64_t>(i + 1)).num(x.mean()).num(x.standard_error());
                csv.end();
            }
            RunningStats r;
            for (const auto& path : paths) r.add(path.R(jj));
            csv.num(grid[j]).field("R").num(static_cast<std::uint64_t>(0)).num(r.mean()).num(r.standard_error());
            csv.end();
        }
        files.push_back("limit_mean.csv");
        summary << "limit: " << R << " paths, max |min_i X_i| = " << worst << " (tolerance "
                << coupling_tolerance(p, c.T) << ")\n";
    }
    if (c.family) {
        const auto grid = uniform_grid(c.T, c.N);
        Csv csv(dir / "prelimit_mean.csv", c.precision);
        csv.header("n,t,category,Qhat_mean,Qhat_se");
        for (auto n : c.family->n_list) {
            const SystemParams sp = make_regime_member(*c.family, n);
            std::vector<Eigen::MatrixXd> q(c.reps);
            parallel_for(c.reps, c.threads, [&](std::size_t r) {
                SimOptions so;
                so.check_invariants = false;
                q[r] = scale(simulate(sp, c.T, derive_seed(c.master_seed, n, r), so), sp, c.family->lambda0, grid).Qhat;
            });
            for (std::size_t j = 0; j < grid.size(); ++j)
                for (std::size_t i = 0; i < sp.K; ++i) {
                    RunningStats s;
                    for (const auto& m : q) s.add(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
                    csv.num(n).num(grid[j]).num(static_cast<std::uint64_t>(i + 1)).num(s.mean()).num(s.standard_error());
                    csv.end();
                }
        }
        files.push_back("prelimit_mean.csv");
        summary << "pre-limit: " << c.family->n_list.size() << " values of n, " << c.reps << " replications each\n";
    }
    return files;
}

void write_manifest(const fs::path& dir, const RunConfig& c, const std::string& started, bool complete,
                    const std::vector<std::string>& files, const std::string& error) {
    const std::string canon = canonical_json(c);
    std::ofstream m(dir / "manifest.txt", std::ios::binary);
    m << "tool = matchq\n";
    m << "version = " << kToolVersion << "\n";
    m << "experiment = " << kind_name(c.kind) << "\n";
    m << "config_hash = fnv1a64:" << hex64(fnv1a64(canon)) << "\n";
    m << "seed = " << c.master_seed << "\n";
    m << "reps = " << c.reps << "\n";
    m << "threads = " << resolve_threads(c.threads) << "\n";
    m << "started = " << started << "\n";
    if (complete) m << "finished = " << timestamp() << "\n";
    m << "status = " << (complete ? "complete" : "incomplete") << "\n";
    if (!error.empty()) m << "error = " << error << "\n";
    m << "data_files = ";
    for (std::size_t k = 0; k < files.size(); ++k) m << (k ? "," : "") << files[k];
    m << "\n";
    m << "summary_file = summary.txt\n";
    m << "config = " << canon << "\n";
}

std::map<std::string, std::string> read_manifest(const fs::path& dir) {
    std::ifstream in(dir / "manifest.txt");
    if (!in) throw ArgumentError("no manifest.txt in " + dir.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return kv;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

// Copies selected columns of `src` (optionally filtered) into `dst`.
void project_csv(const fs::path& src, const fs::path& dst, const std::vector<std::string>& columns,
                 const std::string& filter_column = {}, const std::string& filter_value = {}) {
    std::ifstream in(src);
    if (!in) throw ArgumentError("artifact lacks " + src.filename().string());
    std::string line;
    std::getline(in, line);
    const auto head = split(line);
    auto col = [&](const std::string& name) {
        const auto it = std::find(head.begin(), head.end(), name);
        if (it == head.end()) throw ArgumentError(src.filename().string() + " has no column " + name);
        return static_cast<std::size_t>(it - head.begin());
    };
    std::vector<std::size_t> idx;
    for (const auto& c : columns) idx.push_back(col(c));
    const std::size_t fcol = filter_column.empty() ? 0 : col(filter_column);
    std::ofstream out(dst, std::ios::binary);
    for (std::size_t k = 0; k < columns.size(); ++k) out << (k ? "," : "") << columns[k];
    out << "\n";
    while (std::getline(in, line)) {
        const auto cells = split(line);
        if (!filter_column.empty() && cells.at(fcol) != filter_value) continue;
        for (std::size_t k = 0; k < idx.size(); ++k) out << (k ? "," : "") << cells.at(idx[k]);
        out << "\n";
    }
}

}  // namespace

LimitParams draw_sweep_params(const SweepSpec& s, std::size_t K, RngSeed master) {
    Rng rng = make_rng(derive_seed(master, 2));
    LimitParams p;
    p.K = K;
    for (std::size_t i = 0; i < K; ++i) {
        p.x.push_back(uniform(rng, s.x[0], s.x[1]));
        p.beta.push_back(uniform(rng, s.beta[0], s.beta[1]));
        p.delta.push_back(uniform(rng, s.delta[0], s.delta[1]));
        p.sigma.push_back(s.sigma);
    }
    p.x[0] = 0.0;
    return p;
}

RngSeed replication_seed(RngSeed master, std::size_t r) { return derive_seed(master, 1, r); }

SweepResult run_sweep(const RunConfig& c, std::size_t keep_paths) {
    validate_config(c);
    SweepResult res;
    const std::size_t Kmax = *std::max_element(c.sweep.K_list.begin(), c.sweep.K_list.end());
    res.largest = draw_sweep_params(c.sweep, Kmax, c.master_seed);
    res.grid = uniform_grid(c.T, c.N);

    for (std::size_t K : c.sweep.K_list) {
        LimitParams p = draw_sweep_params(c.sweep, K, c.master_seed);
        struct Rep {
            Eigen::VectorXd R;
            Eigen::RowVectorXd G1;
            double worst = 0.0;
            LimitPath path;
        };
        std::vector<Rep> reps(c.reps);
        parallel_for(c.reps, c.threads, [&](std::size_t r) {
            LimitPath path = solve_explicit(p, make_noise(K, c.N, c.T, replication_seed(c.master_seed, r)));
            Rep& out = reps[r];
            out.R = path.R;
            out.G1 = path.G.row(0);
            out.worst = path.X.colwise().minCoeff().cwiseAbs().maxCoeff();
            if (r < keep_paths) out.path = std::move(path);
        });
        SweepCell cell;
        cell.K = K;
        cell.tolerance = coupling_tolerance(p, c.T);
        cell.R.resize(res.grid.size());
        cell.G1.resize(res.grid.size());
        for (std::size_t r = 0; r < reps.size(); ++r) {
            for (std::size_t j = 0; j < res.grid.size(); ++j) {
                cell.R[j].add(reps[r].R(static_cast<Eigen::Index>(j)));
                cell.G1[j].add(reps[r].G1(static_cast<Eigen::Index>(j)));
            }
            cell.worst_min_x = std::max(cell.worst_min_x, reps[r].worst);
            if (r < keep_paths) cell.kept.push_back(std::move(reps[r].path));
        }
        res.cells.push_back(std::move(cell));
    }
    return res;
}

TableResult run_table1(const RunConfig& c) {
    validate_config(c);
    const std::size_t K = c.table.K;
    SweepSpec draws;
    draws.sigma = c.table.sigma;
    TableResult res;
    res.base = draw_sweep_params(draws, K, c.master_seed);
    res.base.beta.assign(K, c.table.other_beta);
    res.zero_tol = c.table.zero_tol > 0.0 ? c.table.zero_tol : coupling_tolerance(res.base, c.T);
    const auto grid = uniform_grid(c.T, c.N);
    const std::size_t B = c.table.betas.size();

    // proportion[r][i * B + b]
    std::vector<std::vector<double>> prop(c.reps, std::vector<double>(K * B));
    parallel_for(c.reps, c.threads, [&](std::size_t r) {
        const NoiseDraws noise = make_noise(K, c.N, c.T, replication_seed(c.master_seed, r));
        std::vector<double> row(grid.size());
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t b = 0; b < B; ++b) {
                LimitParams p = res.base;
                p.beta[i] = c.table.betas[b];
                const LimitPath path = solve_explicit(p, noise);
                for (std::size_t j = 0; j < grid.size(); ++j)
                    row[j] = path.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                prop[r][i * B + b] = occupation_at_zero(row, grid, res.zero_tol);
            }
    });
    for (std::size_t i = 0; i < K; ++i) {
        std::vector<double> means;
        for (std::size_t b = 0; b < B; ++b) {
            TableRow row;
            row.category = i;
            row.beta = c.table.betas[b];
            for (std::size_t r = 0; r < c.reps; ++r) row.proportion.add(prop[r][i * B + b]);
            row.single_path = prop[0][i * B + b];
            means.push_back(row.proportion.mean());
            res.rows.push_back(row);
        }
        double rho = 0.0;
        try {
            rho = spearman(c.table.betas, means);
        } catch (const UndefinedStatisticError&) {
            rho = 0.0;  // every mean identical: no trend at all
        }
        res.spearman.push_back(rho);
    }
    return res;
}

OracleResult run_oracle(const RunConfig& c) {
    validate_config(c);
    const OracleSpec& o = *c.oracle;
    const SystemParams& sp = o.system;
    const std::size_t K = sp.K;
    const TruncatedCTMC small = build_truncated_ctmc(sp, o.cap);
    const TruncatedCTMC big = build_truncated_ctmc(sp, o.cap_check);
    std::vector<std::uint32_t> start(sp.q0.begin(), sp.q0.end());
    if (!small.index_of(std::span<const std::uint32_t>(start))) throw ArgumentError("q0 lies outside the truncated space");
    const double tol = 1e-13;
    const auto p_small = transient_distribution(small, point_mass(small, start), o.t, tol);
    const auto p_big = transient_distribution(big, point_mass(big, start), o.t, tol);

    OracleResult res;
    res.oracle = p_small;
    res.oracle_check.assign(small.size(), 0.0);
    double check_outside = 0.0;
    for (std::size_t s = 0; s < big.size(); ++s) {
        const auto st = big.state(s);
        if (auto k = small.index_of(st)) res.oracle_check[*k] = p_big[s];
        else check_outside += p_big[s];
    }
    res.truncation_gap = check_outside;
    for (std::size_t s = 0; s < small.size(); ++s) {
        res.truncation_gap += std::abs(res.oracle[s] - res.oracle_check[s]);
        const auto st = small.state(s);
        res.states.emplace_back(st.begin(), st.end());
    }
    res.truncation_gap *= 0.5;

    // All components can abandon in the generator, initial ones included.
    std::vector<std::vector<std::int64_t>> finals(c.reps);
    parallel_for(c.reps, c.threads, [&](std::size_t r) {
        SimOptions so;
        so.initial_patient = false;
        so.check_invariants = false;
        finals[r] = simulate(sp, o.t, derive_seed(c.master_seed, 3, r), so).queue_lengths_at(o.t);
    });
    res.empirical.assign(small.size(), 0.0);
    res.sim_mean.assign(K, 0.0);
    const double w = 1.0 / static_cast<double>(c.reps);
    for (const auto& q : finals) {
        for (std::size_t i = 0; i < K; ++i) res.sim_mean[i] += w * static_cast<double>(q[i]);
        if (auto k = small.index_of(std::span<const std::int64_t>(q))) res.empirical[*k] += w;
        else res.outside_mass += w;
    }
    for (std::size_t i = 0; i < K; ++i) res.oracle_mean.push_back(coordinate_mean(small, res.oracle, i));
    res.tv = total_variation(res.empirical, res.oracle) + 0.5 * res.outside_mass;
    return res;
}

std::string default_artifact_name(const RunConfig& c) {
    return std::string(kind_name(c.kind)) + "-" + hex64(fnv1a64(canonical_json(c))).substr(0, 8);
}

ResultArtifact run(const RunConfig& c, const fs::path& out_dir) {
    validate_config(c);
    fs::create_directories(out_dir);
    const std::string started = timestamp();
    write_manifest(out_dir, c, started, false, {}, {});

    ResultArtifact art;
    art.dir = out_dir;
    std::ostringstream summary;
    summary << "experiment: " << kind_name(c.kind) << "\nseed: " << c.master_seed << "\n\n";
    try {
        switch (c.kind) {
            case ExperimentKind::Fig2MatchingVsK:
            case ExperimentKind::Fig3Abandonment:
            case ExperimentKind::Fig4PathsVsK: art.data_files = sweep_outputs(c, out_dir, summary); break;
            case ExperimentKind::Fig5Table1Stickiness: art.data_files = table_outputs(c, out_dir, summary); break;
            case ExperimentKind::LittlesLaw: art.data_files = little_outputs(c, out_dir, summary); break;
            case ExperimentKind::CostConvergence: art.data_files = cost_outputs(c, out_dir, summary); break;
            case ExperimentKind::OracleValidation: art.data_files = oracle_outputs(c, out_dir, summary); break;
            case ExperimentKind::Custom: art.data_files = custom_outputs(c, out_dir, summary); break;
        }
    } catch (const std::exception& e) {
        write_manifest(out_dir, c, started, false, art.data_files, e.what());
        throw;
    }
    {
        std::ofstream s(out_dir / "summary.txt", std::ios::binary);
        s << summary.str();
    }
    write_manifest(out_dir, c, started, true, art.data_files, {});
    art.complete = true;
    return art;
}

fs::path emit_plot_data(const fs::path& artifact_dir, std::string_view figure) {
    static const std::vector<std::string_view> known{"fig2", "fig3", "fig4", "table1"};
    if (std::find(known.begin(), known.end(), figure) == known.end())
        throw ArgumentError("unknown figure '" + std::string(figure) + "' (expected fig2, fig3, fig4 or table1)");
    const auto kv = read_manifest(artifact_dir);
    if (kv.count("status") == 0 || kv.at("status") != "complete")
        throw ArgumentError("artifact " + artifact_dir.string() + " is incomplete");
    const fs::path dst = artifact_dir / ("plot_" + std::string(figure) + ".csv");
    if (figure == "fig2") project_csv(artifact_dir / "sweep.csv", dst, {"t", "K", "R_mean"});
    else if (figure == "fig3") project_csv(artifact_dir / "sweep.csv", dst, {"t", "K", "G1_mean"});
    else if (figure == "fig4") project_csv(artifact_dir / "paths.csv", dst, {"t", "K", "category", "X"}, "rep", "0");
    else project_csv(artifact_dir / "table1.csv", dst, {"category", "beta", "proportion", "stderr"});
    return dst;
}

}  // namespace matchq
