#include "cvcov/simulation.hpp"

#include "cvcov/errors.hpp"
#include "cvcov/format.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <tuple>

namespace cvcov {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ splitmix64(v)); }

}  // namespace

SymMatrix build_model_covariance(const CovModelSpec& spec) {
    const Index J = spec.J;
    if (J < 1) throw ConfigError("model dimension must be >= 1");
    Matrix psi(J, J);
    auto toeplitz = [&](auto&& entry) {
        for (Index j = 0; j < J; ++j) {
            for (Index l = 0; l < J; ++l) psi(j, l) = entry(std::abs(j - l));
        }
    };
    switch (spec.model) {
        case 1: toeplitz([](Index d) { return d == 0 ? 1.0 : 0.5; }); break;
        case 2: toeplitz([](Index d) { return std::pow(0.7, static_cast<double>(d)); }); break;
        case 3: toeplitz([](Index d) { return d <= 1 ? std::pow(0.7, static_cast<double>(d)) : 0.0; }); break;
        case 4:
            toeplitz([](Index d) { return d == 0 ? 1.0 : d == 1 ? 0.6 : d == 2 ? 0.3 : 0.0; });
            break;
        case 5: {
            std::mt19937_64 rng(spec.seed);
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            Matrix a(J, J);
            for (Index j = 0; j < J; ++j) {
                for (Index l = 0; l < J; ++l) {
                    const double u = unif(rng);
                    a(j, l) = u < 0.25 ? 1.0 : (u < 0.5 ? -1.0 : 0.0);
                }
            }
            Matrix cov = a * a.transpose();
            cov.diagonal().array() += 1.0;
            const Vector inv_sd = cov.diagonal().array().sqrt().inverse();
            psi = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
            psi.diagonal().setOnes();
            break;
        }
        case 6:
            toeplitz([](Index d) { return d == 0 ? 1.0 : 0.6 * std::pow(static_cast<double>(d), -1.3); });
            break;
        case 7:
            toeplitz([](Index d) {
                if (d == 0) return 1.0;
                const double sign = d % 2 == 0 ? 1.0 : -1.0;
                return sign * 0.6 * std::pow(static_cast<double>(d), -1.3);
            });
            break;
        case 8: {
            std::mt19937_64 rng(spec.seed);
            std::normal_distribution<double> normal(0.0, 1.0);
            Matrix beta(J, 3);
            for (Index j = 0; j < J; ++j) {
                for (Index f = 0; f < 3; ++f) beta(j, f) = normal(rng);
            }
            psi = beta * beta.transpose();
            psi.diagonal().array() += 1.0;
            break;
        }
        default: throw ConfigError("covariance model must be in 1..8, got " + std::to_string(spec.model));
    }
    return SymMatrix::from_upper(psi);
}

DataMatrix sample_gaussian(const SymMatrix& psi, Index n, std::uint64_t seed) {
    if (n < 1) throw InvalidInput("sample size must be >= 1");
    const auto eig = eigendecompose(SymMatrix::symmetrize(psi.dense()));
    const Vector root = eig.values.cwiseMax(1e-10).cwiseSqrt();
    const Matrix factor = eig.vectors * root.asDiagonal();
    const Index J = psi.dim();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(n, J);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < J; ++j) z(i, j) = normal(rng);
    }
    return DataMatrix(Matrix(z * factor.transpose()));
}

std::string metric_name(Metric m) {
    switch (m) {
        case Metric::CvRatio: return "cv_ratio";
        case Metric::FullRatio: return "full_ratio";
        case Metric::Frobenius: return "frobenius";
        case Metric::Spectral: return "spectral";
    }
    return "cv_ratio";
}

Metric metric_from_name(const std::string& name) {
    for (auto m : {Metric::CvRatio, Metric::FullRatio, Metric::Frobenius, Metric::Spectral}) {
        if (metric_name(m) == name) return m;
    }
    throw ConfigError("unknown metric '" + name + "' (expected cv_ratio, full_ratio, frobenius, spectral)");
}

Index cell_dimension(Index n, double ratio) {
    const auto J = static_cast<Index>(std::llround(ratio * static_cast<double>(n)));
    return std::max<Index>(J, 2);
}

std::uint64_t replication_seed(std::uint64_t master, int model, Index n, double ratio, int replication) {
    std::uint64_t h = splitmix64(master);
    h = mix(h, static_cast<std::uint64_t>(model));
    h = mix(h, static_cast<std::uint64_t>(n));
    h = mix(h, std::bit_cast<std::uint64_t>(ratio));
    h = mix(h, static_cast<std::uint64_t>(replication));
    return h;
}

bool row_less(const ResultRow& a, const ResultRow& b) {
    return std::tie(a.model, a.n, a.ratio, a.replication, a.subject, a.metric) <
           std::tie(b.model, b.n, b.ratio, b.replication, b.subject, b.metric);
}

void validate(const ExperimentConfig& c) {
    if (c.models.empty() || c.sample_sizes.empty() || c.ratios.empty()) {
        throw ConfigError("experiment grid must list at least one model, sample size and ratio");
    }
    for (int m : c.models) {
        if (m < 1 || m > 8) throw ConfigError("model must be in 1..8, got " + std::to_string(m));
    }
    for (Index n : c.sample_sizes) {
        if (n < 2) throw ConfigError("sample sizes must be >= 2");
    }
    for (double r : c.ratios) {
        if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("J/n ratios must be positive");
    }
    if (c.replications < 1) throw ConfigError("replications must be >= 1");
    if (c.metrics.empty()) throw ConfigError("at least one metric is required");
    for (Index n : c.sample_sizes) make_splits(c.scheme, n);
}

namespace {

struct Cell {
    int model;
    Index n;
    double ratio;
    Index J;
};

std::vector<Cell> cells_of(const ExperimentConfig& c) {
    std::vector<Cell> out;
    for (int m : c.models) {
        for (Index n : c.sample_sizes) {
            for (double r : c.ratios) out.push_back({m, n, r, cell_dimension(n, r)});
        }
    }
    return out;
}

bool wants(const ExperimentConfig& c, Metric m) {
    return std::find(c.metrics.begin(), c.metrics.end(), m) != c.metrics.end();
}

ScalingMatrix oracle_scaling(EtaPolicy policy, const SymMatrix& psi0) {
    if (policy != EtaPolicy::Weighted) return constant_scaling(policy, psi0.dim());
    const Vector inv_sd = psi0.dense().diagonal().array().sqrt().inverse();
    Matrix w = inv_sd * inv_sd.transpose();
    w.triangularView<Eigen::StrictlyLower>() = w.transpose();
    return ScalingMatrix::full(std::move(w));
}

struct ReplicationInput {
    SymMatrix psi0;
    DataMatrix data;
    std::vector<Fold> folds;
    std::uint64_t seed;
};

ReplicationInput draw_replication(const ExperimentConfig& config, const Cell& cell, int rep) {
    const std::uint64_t seed = replication_seed(config.master_seed, cell.model, cell.n, cell.ratio, rep);
    const std::uint64_t model_seed =
        config.fix_random_models
            ? mix(replication_seed(config.master_seed, cell.model, cell.n, cell.ratio, 0), 1)
            : mix(seed, 1);
    ReplicationInput in{build_model_covariance({cell.model, cell.J, model_seed}), DataMatrix(), {}, seed};
    in.data = sample_gaussian(in.psi0, cell.n, mix(seed, 2));
    SplitScheme scheme = config.scheme;
    scheme.seed = mix(seed, 3);
    in.folds = to_folds(make_splits(scheme, cell.n));
    return in;
}

CvOptions serial(CvOptions o) {
    o.threads = 1;
    return o;
}

std::vector<ResultRow> run_replication(const ExperimentConfig& config, const Cell& cell, int rep) {
    const auto in = draw_replication(config, cell, rep);
    const auto& lib = config.library;
    const std::size_t K = lib.size();
    const CvOptions cv = serial(config.cv);
    const ScalingMatrix eta0 = oracle_scaling(cv.eta, in.psi0);

    const auto eval = evaluate_library(lib, in.data, in.folds, cv, OracleTarget{in.psi0, eta0});
    std::vector<std::string> fit_failures;
    const auto fits = fit_all(lib, in.data, cv, &fit_failures, &in.psi0);

    std::vector<bool> ok(K);
    std::vector<double> cv_risk(K), cv_oracle(K), full_diff(K);
    for (std::size_t k = 0; k < K; ++k) {
        ok[k] = !eval.candidates[k].failed && fits[k].has_value();
        if (!ok[k]) continue;
        cv_risk[k] = eval.candidates[k].cv_risk;
        cv_oracle[k] = *eval.candidates[k].cv_oracle_risk;
        full_diff[k] = true_risk_difference(*fits[k], in.psi0, eta0);
    }
    const auto k_hat = argmin_lowest_index(cv_risk, ok);
    const auto k_cv = argmin_lowest_index(cv_oracle, ok);
    const auto k_full = argmin_lowest_index(full_diff, ok);
    if (!k_hat || !k_cv || !k_full) throw SelectionError("every candidate failed");

    std::vector<ResultRow> rows;
    auto emit = [&](const std::string& subj, const char* metric, double value) {
        rows.push_back({cell.model, cell.n, cell.J, cell.ratio, rep, subj, metric, value, in.seed});
    };
    auto emit_family = [&](const char* metric, const std::vector<double>& values) {
        for (std::size_t k = 0; k < K; ++k) {
            if (ok[k]) emit(lib[k].id(), metric, values[k]);
        }
        emit(subject::selector, metric, values[k_hat->index]);
        emit(subject::cv_oracle, metric, values[k_cv->index]);
        emit(subject::full_oracle, metric, values[k_full->index]);
    };

    if (wants(config, Metric::CvRatio)) {
        emit_family(row_metric::cv_risk_diff, cv_oracle);
        emit(subject::plugin, row_metric::max_sq_entry, in.data.values().array().square().maxCoeff());
        double m2 = in.psi0.dense().cwiseAbs().maxCoeff();
        for (std::size_t k = 0; k < K; ++k) {
            if (ok[k]) m2 = std::max(m2, fits[k]->dense().cwiseAbs().maxCoeff());
        }
        emit(subject::plugin, row_metric::max_abs_estimate, m2);
    }
    if (wants(config, Metric::FullRatio)) emit_family(row_metric::full_risk_diff, full_diff);
    for (Metric m : {Metric::Frobenius, Metric::Spectral}) {
        if (!wants(config, m)) continue;
        const char* label = m == Metric::Frobenius ? row_metric::frobenius : row_metric::spectral;
        std::vector<double> norms(K, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
            if (!ok[k]) continue;
            const SymMatrix diff = SymMatrix::from_upper(fits[k]->dense() - in.psi0.dense());
            norms[k] = m == Metric::Frobenius ? diff.dense().norm() : spectral_norm(diff);
            emit(lib[k].id(), label, norms[k]);
        }
        emit(subject::selector, label, norms[k_hat->index]);
    }
    return rows;
}

template <class Runner>
MonteCarloResult run_grid(const ExperimentConfig& config, Runner&& runner) {
    validate(config);
    const auto cells = cells_of(config);
    const std::size_t R = static_cast<std::size_t>(config.replications);
    const std::size_t units = cells.size() * R;
    std::vector<std::vector<ResultRow>> slots(units);
    std::vector<std::string> errors(units);
    detail::parallel_for(units, config.threads, [&](std::size_t u) {
        const Cell& cell = cells[u / R];
        const int rep = static_cast<int>(u % R);
        try {
            slots[u] = runner(cell, rep);
        } catch (const std::exception& e) {
            errors[u] = e.what();
        }
    });

    MonteCarloResult out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::string first_error;
        for (std::size_t r = 0; r < R && first_error.empty(); ++r) first_error = errors[c * R + r];
        const auto& cell = cells[c];
        if (!first_error.empty()) {
            out.log.push_back("skipped cell model=" + std::to_string(cell.model) + " n=" +
                              std::to_string(cell.n) + " ratio=" + format_double(cell.ratio) + ": " +
                              first_error);
            continue;
        }
        for (std::size_t r = 0; r < R; ++r) {
            auto& s = slots[c * R + r];
            out.rows.insert(out.rows.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
        }
    }
    std::sort(out.rows.begin(), out.rows.end(), row_less);
    return out;
}

}  // namespace

MonteCarloResult run_monte_carlo(const ExperimentConfig& config) {
    return run_grid(config, [&](const Cell& cell, int rep) { return run_replication(config, cell, rep); });
}

MonteCarloResult run_benchmark(const ExperimentConfig& config, const CandidateLibrary& competitors) {
    // Union of the selector's library and the competitor grids, deduplicated by id.
    std::vector<EstimatorSpec> merged(config.library.begin(), config.library.end());
    std::vector<std::size_t> competitor_index;
    for (const auto& spec : competitors) {
        const auto found = std::find_if(merged.begin(), merged.end(),
                                        [&](const EstimatorSpec& s) { return s.id() == spec.id(); });
        if (found == merged.end()) {
            competitor_index.push_back(merged.size());
            merged.push_back(spec);
        } else {
            competitor_index.push_back(static_cast<std::size_t>(found - merged.begin()));
        }
    }
    const CandidateLibrary all(std::move(merged));
    const std::size_t K_sel = config.library.size();

    // Procedures: family name -> member indices into `all`, in first-seen order.
    std::vector<std::pair<std::string, std::vector<std::size_t>>> procedures;
    for (std::size_t c = 0; c < competitors.size(); ++c) {
        const std::string name = family_name(competitors[c].family()) + "(tuned)";
        auto it = std::find_if(procedures.begin(), procedures.end(), [&](const auto& p) { return p.first == name; });
        if (it == procedures.end()) {
            procedures.push_back({name, {}});
            it = procedures.end() - 1;
        }
        it->second.push_back(competitor_index[c]);
    }

    auto runner = [&](const Cell& cell, int rep) {
        const auto in = draw_replication(config, cell, rep);
        const CvOptions cv = serial(config.cv);
        const auto eval = evaluate_library(all, in.data, in.folds, cv, OracleTarget{in.psi0, oracle_scaling(cv.eta, in.psi0)});
        const DataMatrix full = cv.center ? center_columns(in.data) : in.data;
        const FitContext ctx(full);

        auto pick = [&](const std::vector<std::size_t>& members) -> std::optional<std::size_t> {
            std::vector<double> risks;
            std::vector<bool> ok;
            for (auto k : members) {
                risks.push_back(eval.candidates[k].cv_risk);
                ok.push_back(!eval.candidates[k].failed);
            }
            const auto best = argmin_lowest_index(risks, ok);
            if (!best) return std::nullopt;
            return members[best->index];
        };

        std::vector<std::pair<std::string, std::size_t>> chosen;
        std::vector<std::size_t> selector_members(K_sel);
        for (std::size_t k = 0; k < K_sel; ++k) selector_members[k] = k;
        const auto sel = pick(selector_members);
        if (!sel) throw SelectionError("every selector candidate failed");
        chosen.emplace_back(subject::selector, *sel);
        for (const auto& [name, members] : procedures) {
            if (const auto best = pick(members)) chosen.emplace_back(name, *best);
        }

        std::vector<ResultRow> rows;
        for (const auto& [name, k] : chosen) {
            const SymMatrix est = apply(all[k].is_unbound_truth()
                                            ? EstimatorSpec::fixed("truth", in.psi0).with_id(all[k].id())
                                            : all[k],
                                        ctx);
            const SymMatrix diff = SymMatrix::from_upper(est.dense() - in.psi0.dense());
            if (wants(config, Metric::Frobenius)) {
                rows.push_back({cell.model, cell.n, cell.J, cell.ratio, rep, name, row_metric::frobenius,
                                diff.dense().norm(), in.seed});
            }
            if (wants(config, Metric::Spectral)) {
                rows.push_back({cell.model, cell.n, cell.J, cell.ratio, rep, name, row_metric::spectral,
                                spectral_norm(diff), in.seed});
            }
        }
        return rows;
    };
    for (Metric m : config.metrics) {
        if (m != Metric::Frobenius && m != Metric::Spectral) {
            throw ConfigError("benchmark metrics must be frobenius and/or spectral");
        }
    }
    return run_grid(config, runner);
}

double risk_ratio(double numerator, double denominator) {
    if (denominator == 0.0) {
        return numerator == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    }
    return numerator / denominator;
}

namespace {

using CellKey = std::tuple<int, Index, double>;

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<CellSummary> summarize_ratios(const std::vector<ResultRow>& rows, const SummaryOptions& options) {
    std::set<std::string> present;
    for (const auto& r : rows) present.insert(r.metric);
    for (Metric m : options.metrics) {
        const std::string needed = m == Metric::CvRatio     ? row_metric::cv_risk_diff
                                   : m == Metric::FullRatio ? row_metric::full_risk_diff
                                   : m == Metric::Frobenius ? row_metric::frobenius
                                                            : row_metric::spectral;
        if (!present.count(needed)) {
            throw ConfigError("results contain no rows for metric '" + metric_name(m) + "'");
        }
    }

    struct Accum {
        Index J = 0;
        std::set<int> reps;
        // (metric, subject) -> replication -> value
        std::map<std::pair<std::string, std::string>, std::map<int, double>> values;
    };
    std::map<CellKey, Accum> cells;
    for (const auto& r : rows) {
        auto& acc = cells[{r.model, r.n, r.ratio}];
        acc.J = r.J;
        acc.reps.insert(r.replication);
        acc.values[{r.metric, r.subject}][r.replication] = r.value;
    }

    std::vector<CellSummary> out;
    for (const auto& [key, acc] : cells) {
        CellSummary s;
        std::tie(s.model, s.n, s.ratio) = key;
        s.J = acc.J;
        s.replications = static_cast<int>(acc.reps.size());

        auto series = [&](const char* metric, const char* subj) -> std::vector<double> {
            std::vector<double> v;
            const auto it = acc.values.find({metric, subj});
            if (it == acc.values.end()) return v;
            for (const auto& [rep, value] : it->second) v.push_back(value);
            return v;
        };
        auto ratios = [&](const char* metric, const char* oracle, std::optional<double>& of_means,
                          std::vector<double>& per_rep, std::optional<double>& mean_of_ratios) {
            const auto sel = series(metric, subject::selector);
            const auto orc = series(metric, oracle);
            if (sel.empty() || sel.size() != orc.size()) return;
            of_means = risk_ratio(mean_of(sel), mean_of(orc));
            for (std::size_t i = 0; i < sel.size(); ++i) per_rep.push_back(risk_ratio(sel[i], orc[i]));
            mean_of_ratios = mean_of(per_rep);
        };
        ratios(row_metric::cv_risk_diff, subject::cv_oracle, s.cv_ratio_of_means, s.cv_ratio_per_replication,
               s.cv_ratio_mean_of_ratios);
        ratios(row_metric::full_risk_diff, subject::full_oracle, s.full_ratio_of_means,
               s.full_ratio_per_replication, s.full_ratio_mean_of_ratios);

        for (const auto& [ms, by_rep] : acc.values) {
            const auto& [metric, subj] = ms;
            if (metric != row_metric::frobenius && metric != row_metric::spectral) continue;
            std::vector<double> v;
            for (const auto& [rep, value] : by_rep) v.push_back(value);
            (metric == row_metric::frobenius ? s.mean_frobenius : s.mean_spectral)[subj] = mean_of(v);
        }

        const auto sel = series(row_metric::cv_risk_diff, subject::selector);
        const auto orc = series(row_metric::cv_risk_diff, subject::cv_oracle);
        const auto m1 = series(row_metric::max_sq_entry, subject::plugin);
        const auto m2 = series(row_metric::max_abs_estimate, subject::plugin);
        if (!sel.empty() && !m1.empty() && !m2.empty()) {
            BoundCheck b;
            b.M1 = *std::max_element(m1.begin(), m1.end());
            b.M2 = *std::max_element(m2.begin(), m2.end());
            std::size_t K = 0;
            for (const auto& [ms, by_rep] : acc.values) {
                const auto& [metric, subj] = ms;
                if (metric == row_metric::cv_risk_diff && subj != subject::selector && subj != subject::cv_oracle &&
                    subj != subject::full_oracle) {
                    ++K;
                }
            }
            b.K = K;
            b.p_n = options.p_n;
            b.delta = options.delta;
            b.selector_mean = mean_of(sel);
            b.oracle_mean = mean_of(orc);
            b.bound = finite_sample_bound({options.delta, b.M1, b.M2, static_cast<std::size_t>(s.J), K,
                                           static_cast<std::size_t>(s.n), options.p_n},
                                          b.oracle_mean);
            b.holds = b.selector_mean <= b.bound.rhs;
            s.bound = b;
        }
        out.push_back(std::move(s));
    }
    return out;
}

double estimated_runtime_seconds(const ExperimentConfig& config) {
    // Fitted on single-core timings of the default library under 5-fold CV.
    const double folds = std::holds_alternative<VFold>(config.scheme.design)
                             ? std::get<VFold>(config.scheme.design).folds
                             : 5.0;
    double total = 0.0;
    for (const auto& cell : cells_of(config)) {
        const double n = static_cast<double>(cell.n);
        const double J = static_cast<double>(cell.J);
        const double K = static_cast<double>(config.library.size());
        const double per_rep = (folds + 1.0) * (K * (n * J * J * 1.0e-10 + J * J * 1.75e-8) + J * J * J * 1.7e-9);
        total += per_rep * config.replications;
    }
    return total / std::max(1u, config.threads);
}

}  // namespace cvcov
