// SPDX-License-Identifier: Apache-2.0
// mtcmimo: scenarios, pilot books, rates, rate regions and figure data from
// the command line.
#include "mtcmimo/estimation.hpp"
#include "mtcmimo/harness.hpp"
#include "mtcmimo/pilots.hpp"
#include "mtcmimo/powerctl.hpp"
#include "mtcmimo/rates.hpp"
#include "mtcmimo/scenario.hpp"
#include "mtcmimo/validation.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

using namespace mtcmimo;

namespace {

struct Common {
    std::uint64_t seed = 1;
    std::string out;
    std::string config;
    int antennas = 100;
    unsigned workers = 1;
};

/// Writes to --out when given, stdout otherwise.
class Sink {
public:
    explicit Sink(const std::string& path)
    {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_)
                throw std::runtime_error("cannot write " + path);
        }
    }
    std::ostream& get() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

Scenario scenario_from(const Common& c, int coherence_length = 100)
{
    if (!c.config.empty())
        return load_scenario(c.config).with_antennas(c.antennas);
    SystemParams p;
    p.antennas = c.antennas;
    p.coherence_length = coherence_length;
    p.seed = c.seed;
    return place_devices(p);
}

void add_common(CLI::App* app, Common& c, bool with_config = true)
{
    app->add_option("--seed", c.seed, "Master seed")->capture_default_str();
    app->add_option("--out", c.out, "Output file (stdout when omitted)");
    if (with_config)
        app->add_option("--config", c.config, "Scenario JSON written by generate-scenario")->check(CLI::ExistingFile);
    app->add_option("--workers", c.workers, "Worker threads")->capture_default_str();
}

template <class E>
CLI::Option* add_enum(CLI::App* app, const std::string& name, std::string& value, const std::string& help,
                      E (*parse)(std::string_view))
{
    return app->add_option(name, value, help)
        ->capture_default_str()
        ->check(CLI::Validator(
            [parse](std::string& s) {
                try {
                    parse(s);
                } catch (const ConfigError& e) {
                    return std::string(e.what());
                }
                return std::string();
            },
            "", ""));
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Massive MIMO uplink with humans and machines: pilots, rates and rate regions"};
    app.set_version_flag("--version", std::string(version()));
    app.require_subcommand(1);

    // generate-scenario
    Common gen;
    SystemParams gen_params;
    auto* gen_cmd = app.add_subcommand("generate-scenario", "Place devices and write the scenario as JSON");
    add_common(gen_cmd, gen, false);
    gen_cmd->add_option("--antennas", gen_params.antennas)->capture_default_str();
    gen_cmd->add_option("--humans", gen_params.humans)->capture_default_str();
    gen_cmd->add_option("--machines", gen_params.machines)->capture_default_str();
    gen_cmd->add_option("--coherence", gen_params.coherence_length)->capture_default_str();
    gen_cmd->add_option("--radius", gen_params.cell_radius_m)->capture_default_str();

    // nmse
    Common nm;
    NmseConfig nmse_cfg;
    std::string nmse_book = "wbe", nmse_est = "lmmse";
    auto* nmse_cmd = app.add_subcommand("nmse", "Monte-Carlo channel-estimation NMSE versus SNR (CSV)");
    add_common(nmse_cmd, nm, false);
    nmse_cmd->add_option("--trials", nmse_cfg.trials)->capture_default_str();
    add_enum(nmse_cmd, "--book", nmse_book, "wbe, rpa or orthogonal", parse_pilot_kind);
    add_enum(nmse_cmd, "--estimator", nmse_est, "ls or lmmse", parse_estimator);
    nmse_cmd->add_option("--machines", nmse_cfg.machines)->capture_default_str();
    nmse_cmd->add_option("--pilot-length", nmse_cfg.pilot_length)->capture_default_str();
    nmse_cmd->add_option("--antennas", nmse_cfg.antennas)->capture_default_str();
    nmse_cmd->add_option("--snr", nmse_cfg.snr_db, "SNR grid in dB")->expected(1, -1);

    // rates
    Common rt;
    std::string rt_scheme = "sc2", rt_rx = "mrc", rt_book = "wbe";
    int rt_np = 10;
    double rt_power = 1.0;
    long long rt_trials = 0;
    auto* rates_cmd = app.add_subcommand("rates", "Closed-form SINRs and rates for fixed powers (CSV)");
    add_common(rates_cmd, rt);
    rates_cmd->add_option("--antennas", rt.antennas)->capture_default_str();
    add_enum(rates_cmd, "--scheme", rt_scheme, "sc1, sc2 or sc3", parse_scheme);
    add_enum(rates_cmd, "--receiver", rt_rx, "mrc or zf (humans)", parse_receiver);
    add_enum(rates_cmd, "--book", rt_book, "wbe, rpa or orthogonal", parse_pilot_kind);
    rates_cmd->add_option("--pilot-length", rt_np, "Machine pilot length")->capture_default_str();
    rates_cmd->add_option("--data-power", rt_power, "Common data power in W")->capture_default_str();
    rates_cmd->add_option("--trials", rt_trials, "Also print Monte-Carlo SINRs with this many trials");

    // rate-region
    Common rr;
    std::string rr_scheme = "sc2", rr_rx = "mrc", rr_book = "wbe";
    int rr_points = 11;
    bool rr_conservative = false;
    auto* region_cmd = app.add_subcommand("rate-region", "Max-min machine rate versus human rate target (CSV)");
    add_common(region_cmd, rr);
    region_cmd->add_option("--antennas", rr.antennas)->capture_default_str();
    add_enum(region_cmd, "--scheme", rr_scheme, "sc1, sc2, sc3 or opa", parse_scheme);
    add_enum(region_cmd, "--receiver", rr_rx, "mrc or zf (humans)", parse_receiver);
    add_enum(region_cmd, "--book", rr_book, "wbe or rpa", parse_pilot_kind);
    region_cmd->add_option("--points", rr_points, "R_h grid points up to the largest human rate")
        ->capture_default_str()
        ->check(CLI::Range(2, 1000));
    region_cmd->add_flag("--sc3-both-phases", rr_conservative,
                         "SC3 humans meet the single-log SINR in both phases instead of the exact rate");

    // asymptotic
    Common as;
    std::string as_scheme = "sc1", as_book = "wbe";
    std::vector<int> as_m{100, 1000, 10000, 100000};
    auto* asym_cmd = app.add_subcommand("asymptotic", "Machine SINR versus M and its M -> infinity limit (CSV)");
    add_common(asym_cmd, as);
    add_enum(asym_cmd, "--scheme", as_scheme, "sc1, sc2 or sc3", parse_scheme);
    add_enum(asym_cmd, "--book", as_book, "wbe or rpa", parse_pilot_kind);
    asym_cmd->add_option("--antennas", as_m, "M grid")->expected(1, -1);

    // figure
    std::string fig_id;
    std::string fig_placement = "fixed";
    std::optional<long long> fig_trials;
    std::optional<int> fig_points, fig_drops;
    Common fg;
    fg.out = ".";
    auto* fig_cmd = app.add_subcommand("figure", "Regenerate the data of one figure (CSV plus .meta.json)");
    fig_cmd->add_option("id", fig_id, "fig1 ... fig7")->required()->check(CLI::IsMember(figure_ids()));
    fig_cmd->add_option("--seed", fg.seed)->capture_default_str();
    fig_cmd->add_option("--out", fg.out, "Output directory")->capture_default_str();
    fig_cmd->add_option("--config", fg.config, "Scenario JSON")->check(CLI::ExistingFile);
    fig_cmd->add_option("--workers", fg.workers)->capture_default_str();
    fig_cmd->add_option("--trials", fig_trials, "Monte-Carlo trials (fig1)");
    fig_cmd->add_option("--points", fig_points, "R_h grid points (fig4-7)");
    fig_cmd->add_option("--placement", fig_placement, "fixed or per-drop")->capture_default_str();
    fig_cmd->add_option("--drops", fig_drops, "Placements to average over (per-drop, fig2 and fig3)");

    // validate
    ValidationOptions vopt;
    std::vector<int> only;
    auto* val_cmd = app.add_subcommand("validate", "Run the acceptance checks; exit code 1 on any failure");
    val_cmd->add_option("--seed", vopt.seed)->capture_default_str();
    val_cmd->add_option("--trials", vopt.mc_trials, "Monte-Carlo trials")->capture_default_str();
    val_cmd->add_option("--workers", vopt.workers)->capture_default_str();
    val_cmd->add_option("--only", only, "Check ids to run")->expected(1, -1)->check(CLI::Range(1, 11));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen_cmd) {
            gen_params.seed = gen.seed;
            const Scenario sc = place_devices(gen_params);
            Sink sink(gen.out);
            save_scenario(sc, sink.get());
            return 0;
        }
        if (*nmse_cmd) {
            nmse_cfg.kind = parse_pilot_kind(nmse_book);
            nmse_cfg.estimator = parse_estimator(nmse_est);
            nmse_cfg.seed = nm.seed;
            nmse_cfg.workers = nm.workers;
            const auto points = nmse_curve(nmse_cfg);
            Sink sink(nm.out);
            write_nmse_csv(nmse_cfg, points, sink.get());
            return 0;
        }
        if (*rates_cmd) {
            const Scenario sc = scenario_from(rt);
            SchemeConfig cfg;
            cfg.scheme = parse_scheme(rt_scheme);
            cfg.receiver = parse_receiver(rt_rx);
            cfg.machine_pilot_length = rt_np;
            cfg.coherence_length = sc.params().coherence_length;
            if (cfg.scheme == Scheme::OPA)
                throw ConfigError("rates evaluates SC1, SC2 and SC3; use rate-region for OPA");
            const RateModel model(sc, cfg, make_book(parse_pilot_kind(rt_book), rt_np, sc.machines(), rt.seed),
                                  sci_pilot_powers(sc));
            const std::vector<double> p(static_cast<std::size_t>(sc.size()), rt_power);
            Sink sink(rt.out);
            const auto rows = model.evaluate(p);
            write_rates_csv(model, rows, rt.seed, sink.get());
            if (rt_trials > 0) {
                McOptions mc;
                mc.trials = rt_trials;
                mc.seed = rt.seed;
                mc.workers = rt.workers;
                sink.get() << "device_id,phase,sinr_closed_form,sinr_mc,std_error\n";
                for (const auto& e : mc_use_and_forget(model, p, mc))
                    sink.get() << e.device << ',' << e.phase << ',' << model.sinr(e.device, e.phase, p) << ','
                               << e.sinr << ',' << e.std_error << '\n';
            }
            return 0;
        }
        if (*region_cmd) {
            const Scenario sc = scenario_from(rr);
            const auto q = sci_pilot_powers(sc);
            RegionOptions o;
            o.config.scheme = parse_scheme(rr_scheme);
            o.config.receiver = parse_receiver(rr_rx);
            o.config.coherence_length = sc.params().coherence_length;
            o.book = parse_pilot_kind(rr_book);
            o.book_seed = rr.seed;
            o.sc3_exact_inversion = !rr_conservative;
            o.workers = rr.workers;
            const std::vector<RegionOptions> one{o};
            const auto grid = common_r_h_grid(sc, q, one, rr_points);
            const auto pts = trace_rate_region(sc, q, grid, o);
            Sink sink(rr.out);
            write_region_csv(pts, sc, o, rr.seed, sink.get());
            return 0;
        }
        if (*asym_cmd) {
            Common c = as;
            c.antennas = as_m.front();
            const Scenario base = scenario_from(c);
            SchemeConfig cfg;
            cfg.scheme = parse_scheme(as_scheme);
            if (cfg.scheme == Scheme::OPA)
                throw ConfigError("asymptotic supports sc1, sc2 and sc3");
            const PilotBook book = make_book(parse_pilot_kind(as_book), cfg.machine_pilot_length, base.machines(),
                                             as.seed);
            const auto q = sci_pilot_powers(base);
            const std::vector<double> p(static_cast<std::size_t>(base.size()), base.params().max_data_power_w);
            Sink sink(as.out);
            auto& out = sink.get();
            out.precision(12);
            out << "scheme,book_kind,M,device_id,sinr,sinr_asymptotic,seed\n";
            for (int m : as_m) {
                const RateModel model(base.with_antennas(m), cfg, book, q);
                for (int k = base.humans(); k < base.size(); ++k)
                    out << to_string(cfg.scheme) << ',' << to_string(book.kind()) << ',' << m << ',' << k << ','
                        << model.sinr(k, 0, p) << ',' << asymptotic_sinr_machine(model, k, p) << ',' << as.seed
                        << '\n';
            }
            return 0;
        }
        if (*fig_cmd) {
            ExperimentSpec spec = default_spec(fig_id);
            spec.seed = fg.seed;
            spec.output_dir = fg.out;
            spec.workers = fg.workers;
            spec.placement = parse_placement(fig_placement);
            if (!fg.config.empty())
                spec.scenario_file = fg.config;
            if (fig_trials)
                spec.trials = *fig_trials;
            if (fig_points)
                spec.r_h_points = *fig_points;
            if (fig_drops)
                spec.drops = *fig_drops;
            const auto res = run_experiment(spec);
            std::cout << "wrote " << res.rows << " rows to " << res.csv_path << " and " << res.meta_path << '\n';
            return 0;
        }
        if (*val_cmd) {
            bool ok = true;
            auto report = [&](const CheckResult& r) {
                print_check(r, std::cout);
                std::cout.flush();
                ok = ok && r.passed;
            };
            if (only.empty()) {
                validate(vopt, report);
            } else {
                for (int id : only) {
                    switch (id) {
                    case 1: report(check_welch()); break;
                    case 2: report(check_orthogonality()); break;
                    case 3: report(check_error_floors(vopt)); break;
                    case 4: report(check_power_identity(vopt)); break;
                    case 5: report(check_mc_agreement(vopt)); break;
                    case 6: report(check_asymptotics(vopt)); break;
                    case 7: report(check_zf_identity(vopt)); break;
                    case 8: report(check_scheme_reductions(vopt)); break;
                    case 9: report(check_rpa_expectation(vopt)); break;
                    case 10: report(check_frontier_orderings(vopt)); break;
                    default: report(check_solver_contracts(vopt)); break;
                    }
                }
            }
            return ok ? 0 : 1;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
