// SPDX-License-Identifier: Apache-2.0
#include "mtcmimo/harness.hpp"
#include "mtcmimo/estimation.hpp"
#include "mtcmimo/random.hpp"
#include "mtcmimo/rates.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#ifndef MTCMIMO_VERSION
#define MTCMIMO_VERSION "unknown"
#endif

namespace mtcmimo {

using nlohmann::json;

namespace {

constexpr std::uint64_t kDropStream = 0x64726f70ULL;

std::vector<int> range(int first, int last)
{
    std::vector<int> v;
    for (int i = first; i <= last; ++i)
        v.push_back(i);
    return v;
}

template <class T>
json names(const std::vector<T>& v)
{
    json out = json::array();
    for (const auto& x : v)
        out.push_back(std::string(to_string(x)));
    return out;
}

std::vector<double> sci_data_powers(const Scenario& scenario)
{
    const double p_max = scenario.params().max_data_power_w;
    std::vector<double> p;
    for (const auto& d : scenario.devices())
        p.push_back(p_max * scenario.beta_min() / d.beta);
    return p;
}

double min_machine_rate(const RateModel& model, std::span<const double> p)
{
    double r = std::numeric_limits<double>::infinity();
    for (int k = model.scenario().humans(); k < model.size(); ++k)
        r = std::min(r, model.breakdown(k, p).rate);
    return r;
}

double min_machine_asymptotic_rate(const RateModel& model, std::span<const double> p)
{
    double r = std::numeric_limits<double>::infinity();
    for (int k = model.scenario().humans(); k < model.size(); ++k) {
        const auto prelogs = model.prelogs(k);
        r = std::min(r, prelogs[0] * std::log2(1.0 + asymptotic_sinr_machine(model, k, p)));
    }
    return r;
}

std::ofstream open_output(const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    return out;
}

std::size_t write_fig1(const ExperimentSpec& spec, std::ostream& out, json& meta)
{
    const std::vector<PilotKind> books = spec.books.empty()
                                             ? std::vector<PilotKind>{PilotKind::Wbe, PilotKind::RandomAssignment}
                                             : spec.books;
    std::size_t rows = 0;
    bool header = true;
    NmseConfig base;
    base.antennas = spec.antennas.empty() ? 50 : spec.antennas.front();
    base.snr_db = spec.snr_db.empty() ? base.snr_db : spec.snr_db;
    base.trials = static_cast<int>(spec.trials);
    base.seed = spec.seed;
    base.workers = spec.workers;
    for (Estimator est : {Estimator::LS, Estimator::LMMSE})
        for (PilotKind kind : books) {
            NmseConfig cfg = base;
            cfg.kind = kind;
            cfg.estimator = est;
            const auto points = nmse_curve(cfg);
            write_nmse_csv(cfg, points, out, header);
            header = false;
            rows += points.size();
        }
    meta["sweep"] = {{"snr_db", base.snr_db}, {"machines", base.machines}, {"pilot_length", base.pilot_length},
                     {"antennas", base.antennas}, {"books", names(books)}, {"estimators", {"LS", "LMMSE"}}};
    meta["flags"]["snr_definition"] = "q beta / sigma^2 per pilot symbol, beta = 1, sigma^2 = 1";
    meta["flags"]["rpa_redraw"] = "every trial";
    return rows;
}

std::size_t write_fig2(const ExperimentSpec& spec, std::ostream& out, json& meta)
{
    const int n = spec.coherence_length;
    const int m = spec.antennas.empty() ? 500 : spec.antennas.front();
    const auto counts = spec.machine_counts.empty() ? std::vector<int>{45, 90} : spec.machine_counts;
    const auto lengths = spec.pilot_lengths.empty() ? range(1, std::min(n - 1, 200)) : spec.pilot_lengths;
    const std::vector<PilotKind> books = spec.books.empty()
                                             ? std::vector<PilotKind>{PilotKind::Wbe, PilotKind::RandomAssignment}
                                             : spec.books;
    struct Task {
        int machines;
        PilotKind book;
        int length;
        double rate = 0.0;
    };
    std::vector<Task> tasks;
    for (int km : counts)
        for (PilotKind b : books)
            for (int l : lengths)
                if (l >= 1 && l <= n - 1)
                    tasks.push_back({km, b, l});
    parallel_chunks(tasks.size(), spec.workers, [&](std::size_t i) {
        auto& t = tasks[i];
        double sum = 0.0;
        for (int d = 0; d < spec.drops; ++d) {
            ExperimentSpec s = spec;
            s.params.humans = 0;
            s.params.machines = t.machines;
            s.params.antennas = m;
            s.params.coherence_length = n;
            s.scenario_file.reset();
            const Scenario scenario = experiment_scenario(s, d);
            SchemeConfig cfg;
            cfg.scheme = Scheme::SC1;
            cfg.coherence_length = n;
            cfg.alpha = 0.0;
            cfg.machine_pilot_length = t.length;
            const RateModel model(scenario, cfg, make_book(t.book, t.length, t.machines, spec.seed),
                                  sci_pilot_powers(scenario));
            sum += min_machine_rate(model, sci_data_powers(scenario));
        }
        t.rate = sum / spec.drops;
    });
    out << "K_m,book_kind,N_p_m,R_m,M,N,drops,seed\n";
    out.precision(12);
    for (const auto& t : tasks)
        out << t.machines << ',' << to_string(t.book) << ',' << t.length << ',' << t.rate << ',' << m << ',' << n
            << ',' << spec.drops << ',' << spec.seed << '\n';
    meta["sweep"] = {{"machine_counts", counts}, {"pilot_lengths", lengths}, {"antennas", m}, {"books", names(books)}};
    meta["flags"]["rate"] = "min over machines, machines only, all CIs (alpha = 0), MRC";
    meta["flags"]["data_powers"] = "statistical channel inversion p_max beta_min / beta_k";
    return tasks.size();
}

std::size_t write_fig3(const ExperimentSpec& spec, std::ostream& out, json& meta)
{
    const auto grid_m = spec.antennas.empty() ? std::vector<int>{10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000}
                                              : spec.antennas;
    const auto schemes = spec.schemes.empty() ? std::vector<Scheme>{Scheme::SC1, Scheme::SC2, Scheme::SC3}
                                              : spec.schemes;
    const std::vector<PilotKind> books = spec.books.empty()
                                             ? std::vector<PilotKind>{PilotKind::Wbe, PilotKind::RandomAssignment}
                                             : spec.books;
    struct Task {
        int antennas;
        Scheme scheme;
        PilotKind book;
        int best_length = 0;
        double rate = 0.0;
        double asymptotic = 0.0;
    };
    std::vector<Task> tasks;
    for (int m : grid_m)
        for (Scheme s : schemes)
            for (PilotKind b : books)
                tasks.push_back({m, s, b});
    parallel_chunks(tasks.size(), spec.workers, [&](std::size_t i) {
        auto& t = tasks[i];
        for (int d = 0; d < spec.drops; ++d) {
            const Scenario scenario = experiment_scenario(spec, d).with_antennas(t.antennas);
            const auto q = sci_pilot_powers(scenario);
            const auto p = sci_data_powers(scenario);
            SchemeConfig cfg;
            cfg.scheme = t.scheme;
            cfg.coherence_length = spec.coherence_length;
            cfg.alpha = 0.5;
            const int upper = t.scheme == Scheme::SC1 ? cfg.coherence_length - 1
                                                      : cfg.coherence_length - cfg.human_pilot_length - 1;
            auto lengths = spec.pilot_lengths.empty() ? range(1, std::min(scenario.machines(), upper))
                                                      : spec.pilot_lengths;
            double best = -1.0, best_asym = 0.0;
            int best_length = 0;
            for (int l : lengths) {
                cfg.machine_pilot_length = l;
                const RateModel model(scenario, cfg, make_book(t.book, l, scenario.machines(), spec.seed), q);
                const double r = min_machine_rate(model, p);
                if (r > best) {
                    best = r;
                    best_length = l;
                    best_asym = min_machine_asymptotic_rate(model, p);
                }
            }
            if (d == 0)
                t.best_length = best_length;
            t.rate += best / spec.drops;
            t.asymptotic += best_asym / spec.drops;
        }
    });
    out << "scheme,book_kind,M,N_p_m_opt,R_m,R_m_asymptotic,N,drops,seed\n";
    out.precision(12);
    for (const auto& t : tasks)
        out << to_string(t.scheme) << ',' << to_string(t.book) << ',' << t.antennas << ',' << t.best_length << ','
            << t.rate << ',' << t.asymptotic << ',' << spec.coherence_length << ',' << spec.drops << ','
            << spec.seed << '\n';
    meta["sweep"] = {{"antennas", grid_m}, {"schemes", names(schemes)}, {"books", names(books)}};
    meta["flags"]["rate"] = "min over machines; N_p^m maximises it per (M, scheme, book)";
    meta["flags"]["data_powers"] = "statistical channel inversion p_max beta_min / beta_k for every device";
    meta["flags"]["sc1_alpha"] = 0.5;
    return tasks.size();
}

std::size_t write_region(const ExperimentSpec& spec, std::ostream& out, json& meta)
{
    if (spec.placement != PlacementMode::Fixed)
        throw ConfigError("rate regions use one fixed placement");
    const auto grid_m = spec.antennas.empty() ? std::vector<int>{100} : spec.antennas;
    const auto schemes = spec.schemes.empty() ? std::vector<Scheme>{Scheme::SC1, Scheme::SC2, Scheme::SC3}
                                              : spec.schemes;
    const auto books = spec.books.empty() ? std::vector<PilotKind>{PilotKind::Wbe} : spec.books;
    const auto receivers = spec.receivers.empty() ? std::vector<Receiver>{Receiver::MRC} : spec.receivers;

    std::vector<RegionOptions> curves;
    for (Scheme s : schemes)
        for (PilotKind b : books) {
            if (s == Scheme::OPA && b != books.front())
                continue;  // OPA always uses orthogonal pilots
            for (Receiver r : receivers) {
                RegionOptions o;
                o.config.scheme = s;
                o.config.receiver = r;
                o.config.coherence_length = spec.coherence_length;
                o.book = b;
                o.book_seed = spec.seed;
                o.machine_pilot_lengths = spec.pilot_lengths;
                o.sc3_exact_inversion = spec.sc3_exact_inversion;
                curves.push_back(o);
            }
        }

    std::size_t rows = 0;
    bool header = true;
    json grids = json::object();
    for (int m : grid_m) {
        const Scenario scenario = experiment_scenario(spec, 0).with_antennas(m);
        const auto q = sci_pilot_powers(scenario);
        const auto grid = spec.r_h_grid.empty() ? common_r_h_grid(scenario, q, curves, spec.r_h_points)
                                                : spec.r_h_grid;
        grids[std::to_string(m)] = grid;
        std::vector<std::vector<RatePoint>> traced(curves.size());
        parallel_chunks(curves.size(), spec.workers,
                        [&](std::size_t i) { traced[i] = trace_rate_region(scenario, q, grid, curves[i]); });
        for (std::size_t i = 0; i < curves.size(); ++i) {
            write_region_csv(traced[i], scenario, curves[i], spec.seed, out, header);
            header = false;
            rows += traced[i].size();
        }
    }
    meta["sweep"] = {{"antennas", grid_m}, {"schemes", names(schemes)}, {"books", names(books)},
                     {"receivers", names(receivers)}, {"r_h_grid", grids}};
    meta["flags"]["objective"] = "max-min machine rate subject to every human reaching R_h";
    meta["flags"]["data_powers"] = "optimised by the interference-function fixed point, p <= p_max";
    meta["flags"]["pilot_search"] = "N_p^m in 1..min(K_m, N - N_p^h - 1), SC1 1..N-1, alpha in 0:0.02:1";
    const BisectionOptions b;
    const FeasibilityOptions f;
    meta["flags"]["bisection_relative_tolerance"] = b.relative_tolerance;
    meta["flags"]["fixed_point_tolerance"] = f.tolerance;
    meta["flags"]["fixed_point_max_iterations"] = f.max_iterations;
    return rows;
}

} // namespace

std::string_view version()
{
    return MTCMIMO_VERSION;
}

std::string_view to_string(PlacementMode m)
{
    return m == PlacementMode::Fixed ? "fixed" : "per-drop";
}

PlacementMode parse_placement(std::string_view s)
{
    if (s == "fixed")
        return PlacementMode::Fixed;
    if (s == "per-drop")
        return PlacementMode::PerDrop;
    throw ConfigError("unknown placement mode '" + std::string(s) + "' (fixed, per-drop)");
}

std::vector<std::string> figure_ids()
{
    return {"fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"};
}

ExperimentSpec default_spec(std::string_view figure)
{
    ExperimentSpec s;
    s.figure = std::string(figure);
    if (figure == "fig1") {
        s.antennas = {50};
        s.snr_db = {-10, -5, 0, 5, 10, 15, 20, 25, 30, 35, 40};
    } else if (figure == "fig2") {
        s.antennas = {500};
        s.coherence_length = 250;
        s.machine_counts = {45, 90};
    } else if (figure == "fig3") {
        s.antennas = {10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000};
    } else if (figure == "fig4") {
        s.antennas = {100};
        s.books = {PilotKind::Wbe, PilotKind::RandomAssignment};
    } else if (figure == "fig5") {
        s.antennas = {50, 100, 200, 500};
    } else if (figure == "fig6") {
        s.antennas = {200};
        s.schemes = {Scheme::SC2, Scheme::SC3, Scheme::OPA};
    } else if (figure == "fig7") {
        s.antennas = {200};
        s.receivers = {Receiver::MRC, Receiver::ZF};
    } else {
        throw ConfigError("unknown figure id '" + std::string(figure) + "'");
    }
    return s;
}

Scenario experiment_scenario(const ExperimentSpec& spec, int drop)
{
    if (spec.scenario_file && spec.placement == PlacementMode::Fixed)
        return load_scenario(*spec.scenario_file);
    SystemParams p = spec.scenario_file ? load_scenario(*spec.scenario_file).params() : spec.params;
    p.coherence_length = spec.coherence_length;
    p.seed = spec.placement == PlacementMode::Fixed
                 ? spec.seed
                 : derive_seed(spec.seed, kDropStream, static_cast<std::uint64_t>(drop));
    return place_devices(p);
}

std::vector<double> common_r_h_grid(const Scenario& scenario, std::span<const double> q,
                                    std::span<const RegionOptions> curves, int points)
{
    if (points < 2)
        throw ConfigError("an R_h grid needs at least two points");
    double top = 0.0;
    for (const auto& c : curves)
        top = std::max(top, max_human_rate(scenario, q, c));
    std::vector<double> grid;
    for (int i = 0; i < points; ++i)
        grid.push_back(top * i / (points - 1));
    return grid;
}

ExperimentOutput run_experiment(const ExperimentSpec& spec)
{
    const auto ids = figure_ids();
    if (std::find(ids.begin(), ids.end(), spec.figure) == ids.end())
        throw ConfigError("unknown figure id '" + spec.figure + "'");
    if (spec.drops < 1)
        throw ConfigError("drops must be >= 1");
    if (spec.placement == PlacementMode::Fixed && spec.drops != 1)
        throw ConfigError("fixed placement uses exactly one drop");
    if (spec.trials < 1)
        throw ConfigError("trials must be >= 1");

    std::error_code ec;
    std::filesystem::create_directories(spec.output_dir, ec);
    if (ec)
        throw std::runtime_error("cannot create " + spec.output_dir + ": " + ec.message());

    ExperimentOutput result;
    result.csv_path = (std::filesystem::path(spec.output_dir) / (spec.figure + ".csv")).string();
    result.meta_path = (std::filesystem::path(spec.output_dir) / (spec.figure + ".meta.json")).string();

    json meta;
    meta["figure"] = spec.figure;
    meta["version"] = std::string(version());
    meta["seed"] = spec.seed;
    meta["placement"] = std::string(to_string(spec.placement));
    meta["drops"] = spec.drops;
    meta["trials"] = spec.trials;
    meta["coherence_length"] = spec.coherence_length;
    meta["scenario_file"] = spec.scenario_file ? json(*spec.scenario_file) : json(nullptr);
    if (spec.figure != "fig1") {
        const SystemParams p = experiment_scenario(spec, 0).params();
        meta["params"] = {{"humans", p.humans},
                          {"machines", p.machines},
                          {"cell_radius_m", p.cell_radius_m},
                          {"min_distance_m", p.min_distance_m},
                          {"noise_power_w", p.noise_power_w},
                          {"max_pilot_power_w", p.max_pilot_power_w},
                          {"max_data_power_w", p.max_data_power_w}};
    }
    meta["flags"] = {{"estimator", "LMMSE"},
                     {"pilot_powers", "fixed: q_max beta_min / beta_k for machines, q_max for humans"},
                     {"human_pilot_length", SchemeConfig{}.human_pilot_length},
                     {"sc3_human_inversion", spec.sc3_exact_inversion ? "exact two-phase rate" : "both phases"},
                     {"sc3_codebooks", "two (separate phases)"}};

    // Rows go to a buffer first so that a failed run leaves no partial file.
    std::ostringstream csv;
    if (spec.figure == "fig1")
        result.rows = write_fig1(spec, csv, meta);
    else if (spec.figure == "fig2")
        result.rows = write_fig2(spec, csv, meta);
    else if (spec.figure == "fig3")
        result.rows = write_fig3(spec, csv, meta);
    else
        result.rows = write_region(spec, csv, meta);
    meta["csv"] = std::filesystem::path(result.csv_path).filename().string();
    meta["rows"] = result.rows;

    auto out = open_output(result.csv_path);
    out << csv.str();
    auto meta_out = open_output(result.meta_path);
    meta_out << meta.dump(2) << '\n';
    if (!out || !meta_out)
        throw std::runtime_error("failed writing outputs to " + spec.output_dir);
    return result;
}

} // namespace mtcmimo
