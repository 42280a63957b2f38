// SPDX-License-Identifier: Apache-2.0
#include "mtcmimo/rates.hpp"
#include "mtcmimo/estimation.hpp"
#include "mtcmimo/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

namespace mtcmimo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double at(std::span<const double> v, int k)
{
    return v[static_cast<std::size_t>(k)];
}

} // namespace

double SinrTerms::sinr() const
{
    const double den = interference();
    if (den > 0.0)
        return signal / den;
    return signal > 0.0 ? kInf : 0.0;
}

double rate(std::span<const double> prelogs, std::span<const double> sinrs)
{
    if (prelogs.size() != sinrs.size())
        throw ConfigError("one SINR per prelog required");
    double r = 0.0;
    for (std::size_t i = 0; i < prelogs.size(); ++i) {
        if (!(prelogs[i] > 0.0))
            throw ConfigError("pre-log factor must be positive");
        r += prelogs[i] * std::log2(1.0 + sinrs[i]);
    }
    return r;
}

std::vector<double> gamma_bar(const PilotBook& book, std::span<const double> betas,
                              std::span<const double> pilot_powers, double noise, int length,
                              double overlap_power)
{
    return analytic_gammas(book, betas, pilot_powers, noise, length, overlap_power);
}

double human_sinr_formula(double antennas, double beta, double power, double gamma,
                          std::span<const double> human_powers, std::span<const double> human_weights,
                          double extra_interference, double noise)
{
    if (human_powers.size() != human_weights.size())
        throw ConfigError("one weight per human power required");
    double den = extra_interference + noise;
    for (std::size_t i = 0; i < human_powers.size(); ++i)
        den += human_powers[i] * human_weights[i];
    return antennas * beta * power * gamma / den;
}

RateModel::RateModel(const Scenario& scenario, SchemeConfig config, PilotBook machine_book,
                     std::vector<double> pilot_powers, int scheduled_machines)
    : scenario_(scenario), config_(config), book_(std::move(machine_book)), q_(std::move(pilot_powers)),
      betas_(scenario.betas()), scheduled_machines_(scheduled_machines < 0 ? scenario.machines() : scheduled_machines)
{
    const int kh = scenario_.humans();
    const int km = scenario_.machines();
    if (static_cast<int>(q_.size()) != scenario_.size())
        throw ConfigError("one pilot power per device required");
    if (book_.size() != km)
        throw ConfigError("machine pilot book must hold one sequence per machine");
    config_.validate(kh, scheduled_machines_);
    const int lm = config_.scheme == Scheme::OPA ? config_.opa_group_size : config_.machine_pilot_length;
    if (km > 0 && book_.length() != lm)
        throw ConfigError("machine pilot book length does not match the scheme");
    if (config_.receiver == Receiver::ZF && kh > 0 && scenario_.antennas() <= kh)
        throw InfeasibleError("ZF needs M > K_h");
    for (double q : q_)
        if (!(q > 0.0))
            throw ConfigError("pilot powers must be positive");
    expected_ = km > 0 ? expected_cross_correlations(book_) : Eigen::MatrixXd();

    const double lh = config_.human_training_length();
    for (int k = 0; k < kh; ++k) {
        const double own = lh * q_[static_cast<std::size_t>(k)] * betas_[static_cast<std::size_t>(k)];
        human_gamma_.push_back(own / (own + scenario_.noise()));
    }
    const double lm_train = config_.machine_training_length();
    for (int i = 0; i < km; ++i) {
        double s = 0.0;
        for (int j = 0; j < km; ++j) {
            const auto d = static_cast<std::size_t>(kh + j);
            s += q_[d] * betas_[d] * (i == j ? 1.0 : expected_(j, i));
        }
        machine_load_.push_back(lm_train * s);
    }
}

int RateModel::phases(int k) const
{
    if (config_.scheme == Scheme::SC3 && scenario_.is_human(k) && !config_.sc3_identical_machine_powers)
        return 2;
    return 1;
}

std::vector<double> RateModel::prelogs(int k) const
{
    return scenario_.is_human(k) ? config_.human_prelogs() : config_.machine_prelogs(scheduled_machines_);
}

std::vector<double> RateModel::data_powers(std::span<const double> p) const
{
    if (static_cast<int>(p.size()) != size())
        throw ConfigError("one data power per device required");
    std::vector<double> out(p.begin(), p.end());
    if (config_.scheme == Scheme::SC3 && config_.sc3_identical_machine_powers)
        for (int k = scenario_.humans(); k < size(); ++k)
            out[static_cast<std::size_t>(k)] = q_[static_cast<std::size_t>(k)];
    return out;
}

std::vector<double> RateModel::human_gammas() const
{
    return human_gamma_;
}

std::vector<double> RateModel::machine_gamma_bars(std::span<const double> p) const
{
    const int kh = scenario_.humans();
    if (scenario_.machines() == 0)
        return {};
    double overlap = 0.0;
    if (config_.scheme == Scheme::SC3)
        for (int k = 0; k < kh; ++k)
            overlap += at(p, k) * betas_[static_cast<std::size_t>(k)];
    const double l = config_.machine_training_length();
    std::vector<double> g(machine_load_.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto d = static_cast<std::size_t>(kh) + i;
        g[i] = l * q_[d] * betas_[d] / (machine_load_[i] + overlap + scenario_.noise());
    }
    return g;
}

double RateModel::gamma(int k, std::span<const double> p) const
{
    const auto pe = data_powers(p);
    if (scenario_.is_human(k))
        return human_gammas()[static_cast<std::size_t>(k)];
    return machine_gamma_bars(pe)[static_cast<std::size_t>(k - scenario_.humans())];
}

std::vector<SinrTerms> RateModel::terms(int phase, std::span<const double> p) const
{
    return terms_impl(phase, p, {});
}

std::vector<SinrTerms> RateModel::human_terms(int phase, std::span<const double> p) const
{
    return terms_impl(phase, p, {}, true);
}

std::vector<SinrTerms> RateModel::lower_terms(int phase, std::span<const double> p,
                                              std::span<const double> anchor) const
{
    if (static_cast<int>(anchor.size()) != size())
        throw ConfigError("one anchor power per device required");
    return terms_impl(phase, p, anchor);
}

std::vector<SinrTerms> RateModel::terms_impl(int phase, std::span<const double> p,
                                             std::span<const double> anchor, bool humans_only) const
{
    const auto pe = data_powers(p);
    const int kh = scenario_.humans();
    const int k_all = size();
    const double m = scenario_.antennas();
    const double noise = scenario_.noise();
    const Scheme scheme = config_.scheme;

    double s_h = 0.0, s_m = 0.0, q_m = 0.0;
    for (int k = 0; k < k_all; ++k) {
        const double b = betas_[static_cast<std::size_t>(k)];
        if (k < kh) {
            s_h += pe[static_cast<std::size_t>(k)] * b;
        } else {
            s_m += pe[static_cast<std::size_t>(k)] * b;
            q_m += q_[static_cast<std::size_t>(k)] * b;
        }
    }

    // Machine interference seen by humans in this phase.
    double human_side_machines = 0.0;
    switch (scheme) {
    case Scheme::SC1: break;
    case Scheme::SC2:
    case Scheme::OPA: human_side_machines = s_m; break;
    case Scheme::SC3:
        human_side_machines = (phase == 0 || config_.sc3_identical_machine_powers) ? q_m : s_m;
        break;
    }
    const double machine_side_active = scheme == Scheme::SC1 ? s_m : s_h + s_m;

    std::vector<SinrTerms> out(static_cast<std::size_t>(k_all));
    const auto& gh = human_gamma_;
    if (config_.receiver == Receiver::MRC) {
        for (int k = 0; k < kh; ++k) {
            const double g = gh[static_cast<std::size_t>(k)];
            auto& t = out[static_cast<std::size_t>(k)];
            t.signal = m * betas_[static_cast<std::size_t>(k)] * pe[static_cast<std::size_t>(k)];
            t.noncoherent = (s_h + human_side_machines) / g;
            t.noise = noise / g;
        }
    } else {
        double residual = 0.0;
        for (int k = 0; k < kh; ++k)
            residual += pe[static_cast<std::size_t>(k)] * betas_[static_cast<std::size_t>(k)]
                        * (1.0 - gh[static_cast<std::size_t>(k)]);
        for (int k = 0; k < kh; ++k) {
            auto& t = out[static_cast<std::size_t>(k)];
            t.signal = (m - kh) * gh[static_cast<std::size_t>(k)] * betas_[static_cast<std::size_t>(k)]
                       * pe[static_cast<std::size_t>(k)];
            t.noncoherent = residual + human_side_machines;
            t.noise = noise;
        }
    }

    const int km = scenario_.machines();
    if (humans_only) {
        out.resize(static_cast<std::size_t>(kh));
        return out;
    }
    if (km == 0)
        return out;
    const auto gb = machine_gamma_bars(pe);
    // With an anchor a, (active + sigma^2) / gamma-bar and (p_h beta_h)^2 are
    // replaced by their first-order expansions at a, which lie below them for
    // p >= a since both are products of non-decreasing affine functions.
    const bool linear = !anchor.empty() && scheme == Scheme::SC3 && kh > 0;
    double human_coherent = 0.0;
    double overlap = 0.0, overlap_a = 0.0, active_a = 0.0;
    if (scheme == Scheme::SC3) {
        for (int k = 0; k < kh; ++k) {
            const double b = betas_[static_cast<std::size_t>(k)];
            const double r = pe[static_cast<std::size_t>(k)] * b;
            overlap += r;
            if (linear) {
                const double ra = at(anchor, k) * b;
                overlap_a += ra;
                human_coherent += 2.0 * ra * r - ra * ra;
            } else {
                human_coherent += r * r;
            }
        }
        human_coherent /= config_.machine_training_length();
        if (linear)
            for (int k = 0; k < k_all; ++k)
                active_a += at(anchor, k) * betas_[static_cast<std::size_t>(k)];
    }
    const double l_m = config_.machine_training_length();
    Eigen::VectorXd weight(km);
    for (int j = 0; j < km; ++j) {
        const auto d = static_cast<std::size_t>(kh + j);
        weight(j) = pe[d] * q_[d] * betas_[d] * betas_[d];
    }
    const Eigen::VectorXd cross = expected_.transpose() * weight;
    for (int j = 0; j < km; ++j) {
        const auto d = static_cast<std::size_t>(kh + j);
        const double g = gb[static_cast<std::size_t>(j)];
        const double qb = q_[d] * betas_[d];
        auto& t = out[d];
        t.signal = m * betas_[d] * pe[d];
        t.coherent = m * (cross(j) + human_coherent) / qb;
        if (linear) {
            const double w = machine_load_[static_cast<std::size_t>(j)] + noise;
            const double w_a = w + overlap_a;
            t.noncoherent = (machine_side_active * w_a + (active_a + noise) * (overlap - overlap_a)) / (l_m * qb);
            t.noise = noise * w_a / (l_m * qb);
        } else {
            t.noncoherent = machine_side_active / g;
            t.noise = noise / g;
        }
    }
    return out;
}

SinrTerms RateModel::terms(int k, int phase, std::span<const double> p) const
{
    if (k < 0 || k >= size())
        throw ConfigError("device index out of range");
    return terms(phase, p)[static_cast<std::size_t>(k)];
}

SinrBreakdown RateModel::breakdown(int k, std::span<const double> p) const
{
    SinrBreakdown b;
    b.device = k;
    b.cls = scenario_.device(k).cls;
    b.receiver = scenario_.is_human(k) ? config_.receiver : Receiver::MRC;
    b.gamma = gamma(k, p);
    std::vector<double> sinrs;
    for (int phase = 0; phase < phases(k); ++phase) {
        b.phases.push_back(terms(k, phase, p));
        sinrs.push_back(b.phases.back().sinr());
    }
    b.prelogs = prelogs(k);
    b.rate = rate(b.prelogs, sinrs);
    return b;
}

std::vector<SinrBreakdown> RateModel::evaluate(std::span<const double> p) const
{
    std::vector<SinrBreakdown> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (int k = 0; k < size(); ++k)
        out.push_back(breakdown(k, p));
    return out;
}

double RateModel::asymptotic_sinr(int k, std::span<const double> p) const
{
    const int kh = scenario_.humans();
    if (scenario_.is_human(k))
        throw ConfigError("asymptotic limit is only finite for machines");
    const auto pe = data_powers(p);
    const auto self = static_cast<std::size_t>(k);
    double den = 0.0;
    for (int j = kh; j < size(); ++j) {
        if (j == k)
            continue;
        const auto d = static_cast<std::size_t>(j);
        den += pe[d] * q_[d] * betas_[d] * betas_[d] * expected_(j - kh, k - kh);
    }
    if (config_.scheme == Scheme::SC3) {
        double h = 0.0;
        for (int j = 0; j < kh; ++j) {
            const double r = pe[static_cast<std::size_t>(j)] * betas_[static_cast<std::size_t>(j)];
            h += r * r;
        }
        den += h / config_.machine_training_length();
    }
    den /= q_[self] * betas_[self];
    const double num = betas_[self] * pe[self];
    if (den > 0.0)
        return num / den;
    return num > 0.0 ? kInf : 0.0;
}

double asymptotic_sinr_machine(const RateModel& model, int k, std::span<const double> p)
{
    return model.asymptotic_sinr(k, p);
}

std::vector<McSinr> mc_use_and_forget(const RateModel& model, std::span<const double> p, const McOptions& options)
{
    const Scenario& sc = model.scenario();
    const SchemeConfig& cfg = model.config();
    const int kh = sc.humans();
    const int km = sc.machines();
    const int k_all = sc.size();
    const int m = sc.antennas();
    const double noise = sc.noise();
    const auto betas = sc.betas();
    const std::vector<double> q(model.pilot_powers().begin(), model.pilot_powers().end());
    const auto pe = model.data_powers(p);
    const PilotBook& base = model.book();
    const bool zf = cfg.receiver == Receiver::ZF && kh > 0;

    struct Entry {
        int device;
        int phase;
    };
    std::vector<Entry> entries;
    for (int k = 0; k < k_all; ++k)
        for (int ph = 0; ph < model.phases(k); ++ph)
            entries.push_back({k, ph});
    const int width = 3 * static_cast<int>(entries.size());

    Eigen::VectorXd sqrt_beta(k_all);
    for (int k = 0; k < k_all; ++k)
        sqrt_beta(k) = std::sqrt(betas[static_cast<std::size_t>(k)]);

    auto body = [&](long long trial, Eigen::Ref<Eigen::VectorXd> out) {
        const auto t = static_cast<std::uint64_t>(trial);
        GaussianSource source(derive_seed(options.seed, 0x6d6375ULL, t));
        const PilotBook book = base.kind() == PilotKind::RandomAssignment && km > 0
                                   ? base.redraw(derive_seed(options.seed, 0x6d6372ULL, t))
                                   : base;
        const FadingRealization h = draw_fading(m, k_all, source);

        Eigen::MatrixXcd h_hat(m, k_all);
        std::vector<double> gam(static_cast<std::size_t>(k_all), 1.0);
        if (options.perfect_csi) {
            h_hat = h;
        } else {
            for (const auto& w : training_windows(cfg, kh, book)) {
                const auto obs = synthesize_training(w, h, betas, q, pe, noise, source);
                for (std::size_t c = 0; c < w.trainers.size(); ++c) {
                    const int k = w.trainers[c];
                    const auto col = static_cast<int>(c);
                    const Eigen::VectorXcd y = despread(obs.received, w.pilots.col(col));
                    const double var = despread_variance(w, col, betas, q, pe, noise);
                    auto est = estimate_lmmse(y, betas[static_cast<std::size_t>(k)], q[static_cast<std::size_t>(k)],
                                              w.length(), var);
                    h_hat.col(k) = est.h_hat;
                    gam[static_cast<std::size_t>(k)] = est.gamma;
                }
            }
        }

        Eigen::MatrixXcd v(m, k_all);
        const double root_m = std::sqrt(static_cast<double>(m));
        for (int k = 0; k < k_all; ++k)
            v.col(k) = h_hat.col(k) / (gam[static_cast<std::size_t>(k)] * root_m);
        if (zf) {
            const Eigen::MatrixXcd g_hat = h_hat.leftCols(kh) * sqrt_beta.head(kh).asDiagonal();
            const Eigen::MatrixXcd gram = g_hat.adjoint() * g_hat;
            v.leftCols(kh) = g_hat * gram.ldlt().solve(Eigen::MatrixXcd::Identity(kh, kh));
        }

        const Eigen::MatrixXcd g = h * sqrt_beta.asDiagonal();
        const Eigen::MatrixXcd b = v.adjoint() * g;  // b(k, j) = v_k^H g_j
        const Eigen::VectorXd v_norm = v.colwise().squaredNorm().transpose();

        for (std::size_t e = 0; e < entries.size(); ++e) {
            const int k = entries[e].device;
            const int ph = entries[e].phase;
            const bool human = k < kh;
            double power = noise * v_norm(k);
            auto add_range = [&](int first, int last) {
                for (int j = first; j < last; ++j)
                    power += pe[static_cast<std::size_t>(j)] * std::norm(b(k, j));
            };
            if (human) {
                add_range(0, kh);
                switch (cfg.scheme) {
                case Scheme::SC1: break;
                case Scheme::SC2:
                case Scheme::OPA: add_range(kh, k_all); break;
                case Scheme::SC3:
                    if (ph == 0 || cfg.sc3_identical_machine_powers) {
                        // Machine pilots averaged over the N_p^m training samples.
                        if (km > 0) {
                            Eigen::VectorXcd amp(km);
                            for (int j = 0; j < km; ++j)
                                amp(j) = std::sqrt(q[static_cast<std::size_t>(kh + j)]) * b(k, kh + j);
                            power += (book.sequences().conjugate() * amp).squaredNorm();
                        }
                    } else {
                        add_range(kh, k_all);
                    }
                    break;
                }
            } else {
                if (cfg.scheme != Scheme::SC1)
                    add_range(0, kh);
                add_range(kh, k_all);
            }
            const auto base_index = static_cast<Eigen::Index>(3 * e);
            out(base_index) = b(k, k).real();
            out(base_index + 1) = b(k, k).imag();
            out(base_index + 2) = power;
        }
    };

    const BatchMeans batches = run_batches(options.trials, width, options.workers, body);
    const Eigen::VectorXd mean = batches.mean();

    std::vector<McSinr> result;
    result.reserve(entries.size());
    for (std::size_t e = 0; e < entries.size(); ++e) {
        const int k = entries[e].device;
        const double pk = pe[static_cast<std::size_t>(k)];
        const auto i = static_cast<Eigen::Index>(3 * e);
        auto ratio = [pk, i](const Eigen::VectorXd& mu) {
            const double sig = pk * (mu(i) * mu(i) + mu(i + 1) * mu(i + 1));
            return sig / (mu(i + 2) - sig);
        };
        result.push_back({k, entries[e].phase, ratio(mean), batches.jackknife_std_error(ratio)});
    }
    return result;
}

McSinr mc_use_and_forget_sinr(const RateModel& model, int device, std::span<const double> p,
                              const McOptions& options, int phase)
{
    for (const auto& r : mc_use_and_forget(model, p, options))
        if (r.device == device && r.phase == phase)
            return r;
    throw ConfigError("no such device/phase");
}

std::vector<int> opa_group_members(int machines, int group_size, int group)
{
    if (group_size < 1)
        throw ConfigError("OPA group size must be positive");
    const int first = group * group_size;
    if (group < 0 || first >= machines)
        throw ConfigError("OPA group index out of range");
    std::vector<int> ids(static_cast<std::size_t>(std::min(group_size, machines - first)));
    std::iota(ids.begin(), ids.end(), first);
    return ids;
}

Scenario opa_group_scenario(const Scenario& scenario, int group_size, int group)
{
    std::vector<int> ids(static_cast<std::size_t>(scenario.humans()));
    std::iota(ids.begin(), ids.end(), 0);
    for (int j : opa_group_members(scenario.machines(), group_size, group))
        ids.push_back(scenario.humans() + j);
    return scenario.subset(ids);
}

void write_rates_csv(const RateModel& model, std::span<const SinrBreakdown> rows, std::uint64_t seed,
                     std::ostream& out, bool header)
{
    const auto& cfg = model.config();
    if (header)
        out << "scheme,receiver,device_id,class,M,N,N_p_h,N_p_m,alpha,gamma,sinr_linear,rate_bpshz,"
               "phase,prelog,signal,noncoherent_interference,coherent_interference,noise_term,book_kind,seed\n";
    const auto old_precision = out.precision(12);
    for (const auto& r : rows) {
        for (std::size_t ph = 0; ph < r.phases.size(); ++ph) {
            const auto& t = r.phases[ph];
            out << to_string(cfg.scheme) << ',' << to_string(r.receiver) << ',' << r.device << ','
                << to_string(r.cls) << ',' << model.scenario().antennas() << ',' << cfg.coherence_length << ','
                << cfg.human_pilot_length << ','
                << (cfg.scheme == Scheme::OPA ? cfg.opa_group_size : cfg.machine_pilot_length) << ','
                << cfg.alpha << ',' << r.gamma << ',' << t.sinr() << ',' << r.rate << ',' << ph + 1 << ','
                << r.prelogs[ph] << ',' << t.signal << ',' << t.noncoherent << ',' << t.coherent << ','
                << t.noise << ',' << to_string(model.book().kind()) << ',' << seed << '\n';
        }
    }
    out.precision(old_precision);
}

} // namespace mtcmimo
