#pragma once

// Distance estimators over empirical laws: total variation via adaptive
// equal-mass binning on the pooled sample (with bootstrap CIs), and the
// dictionary distance, a reported lower bound of the smooth-class distance.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"
#include "csv.hpp"
#include "dictionary.hpp"
#include "rng.hpp"
#include "sets.hpp"
#include "stats.hpp"

namespace jumpdiff {

struct EmpiricalLaw {
    int dim = 1;
    Vec samples;  // row-major n x dim
    std::string meta;

    std::size_t size() const { return samples.size() / static_cast<std::size_t>(dim); }
    ConstSpan row(std::size_t i) const {
        return ConstSpan(samples.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim));
    }
    void push(ConstSpan x) { samples.insert(samples.end(), x.begin(), x.end()); }

    static EmpiricalLaw from_column(Vec xs) {
        EmpiricalLaw law;
        law.dim = 1;
        law.samples = std::move(xs);
        return law;
    }

    Box data_box(double pad_fraction = 0.1) const {
        Box b;
        b.lo.assign(static_cast<std::size_t>(dim), std::numeric_limits<double>::infinity());
        b.hi.assign(static_cast<std::size_t>(dim), -std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < size(); ++i) {
            const ConstSpan x = row(i);
            for (int j = 0; j < dim; ++j) {
                b.lo[static_cast<std::size_t>(j)] = std::min(b.lo[static_cast<std::size_t>(j)], x[static_cast<std::size_t>(j)]);
                b.hi[static_cast<std::size_t>(j)] = std::max(b.hi[static_cast<std::size_t>(j)], x[static_cast<std::size_t>(j)]);
            }
        }
        for (int j = 0; j < dim; ++j) {
            const double pad = pad_fraction * std::max(1e-9, b.hi[static_cast<std::size_t>(j)] - b.lo[static_cast<std::size_t>(j)]);
            b.lo[static_cast<std::size_t>(j)] -= pad;
            b.hi[static_cast<std::size_t>(j)] += pad;
        }
        return b;
    }
};

struct BinningSpec {
    int cap_per_dim = 32;
    int override_per_dim = 0;  // >0 fixes the bin count
};

struct DistanceEstimate {
    double estimate = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    int bins_per_dim = 0;
    std::string argmax_id;  // dictionary estimator only
};

namespace detail {

struct BinGrid {
    int dim = 1;
    int bins = 1;
    std::vector<Vec> edges;  // interior edges per dim

    std::size_t cell(ConstSpan x) const {
        std::size_t idx = 0;
        for (int j = 0; j < dim; ++j) {
            const auto& e = edges[static_cast<std::size_t>(j)];
            const auto it = std::upper_bound(e.begin(), e.end(), x[static_cast<std::size_t>(j)]);
            idx = idx * static_cast<std::size_t>(bins) + static_cast<std::size_t>(it - e.begin());
        }
        return idx;
    }
    std::size_t cells() const {
        std::size_t c = 1;
        for (int j = 0; j < dim; ++j) c *= static_cast<std::size_t>(bins);
        return c;
    }
};

inline BinGrid equal_mass_grid(const EmpiricalLaw& a, const EmpiricalLaw& b, const BinningSpec& spec) {
    BinGrid g;
    g.dim = a.dim;
    const std::size_t pooled = a.size() + b.size();
    int bins = spec.override_per_dim > 0
                   ? spec.override_per_dim
                   : static_cast<int>(std::ceil(std::cbrt(static_cast<double>(pooled))));
    bins = std::min(bins, spec.cap_per_dim);
    bins = std::max(bins, 2);
    g.bins = bins;
    for (int j = 0; j < g.dim; ++j) {
        Vec col;
        col.reserve(pooled);
        for (std::size_t i = 0; i < a.size(); ++i) col.push_back(a.row(i)[static_cast<std::size_t>(j)]);
        for (std::size_t i = 0; i < b.size(); ++i) col.push_back(b.row(i)[static_cast<std::size_t>(j)]);
        std::sort(col.begin(), col.end());
        Vec e;
        for (int k = 1; k < bins; ++k) e.push_back(quantile_sorted(col, static_cast<double>(k) / bins));
        g.edges.push_back(std::move(e));
    }
    return g;
}

inline double binned_tv(const BinGrid&, const std::vector<std::size_t>& cells_a,
                        const std::vector<std::size_t>& cells_b, const std::vector<std::size_t>& idx_a,
                        const std::vector<std::size_t>& idx_b, Vec& scratch) {
    std::fill(scratch.begin(), scratch.end(), 0.0);
    const double wa = 1.0 / static_cast<double>(idx_a.size());
    const double wb = 1.0 / static_cast<double>(idx_b.size());
    for (std::size_t i : idx_a) scratch[cells_a[i]] += wa;
    for (std::size_t i : idx_b) scratch[cells_b[i]] -= wb;
    double acc = 0.0;
    for (double v : scratch) acc += std::fabs(v);
    return 0.5 * acc;
}

}  // namespace detail

inline DistanceEstimate tv_estimate(const EmpiricalLaw& a, const EmpiricalLaw& b, const BinningSpec& spec = {},
                                    int bootstrap = 200, std::uint64_t seed = 1234) {
    check(a.dim == b.dim, "tv_estimate: dimension mismatch");
    if (a.size() < 100 || b.size() < 100) throw ModelError("tv_estimate: sample too small (<100)");
    check(a.dim <= 3, "tv_estimate: product binning supported up to dimension 3");
    const auto grid = detail::equal_mass_grid(a, b, spec);
    std::vector<std::size_t> cells_a(a.size()), cells_b(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) cells_a[i] = grid.cell(a.row(i));
    for (std::size_t i = 0; i < b.size(); ++i) cells_b[i] = grid.cell(b.row(i));
    std::vector<std::size_t> idx_a(a.size()), idx_b(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) idx_a[i] = i;
    for (std::size_t i = 0; i < b.size(); ++i) idx_b[i] = i;
    Vec scratch(grid.cells(), 0.0);

    DistanceEstimate out;
    out.bins_per_dim = grid.bins;
    out.estimate = detail::binned_tv(grid, cells_a, cells_b, idx_a, idx_b, scratch);
    Rng rng = Rng::derive(seed, 0x7b, 0);
    Vec reps;
    reps.reserve(static_cast<std::size_t>(bootstrap));
    std::vector<std::size_t> ra(a.size()), rb(b.size());
    for (int r = 0; r < bootstrap; ++r) {
        for (auto& v : ra) v = rng.uniform_index(a.size());
        for (auto& v : rb) v = rng.uniform_index(b.size());
        reps.push_back(detail::binned_tv(grid, cells_a, cells_b, ra, rb, scratch));
    }
    std::sort(reps.begin(), reps.end());
    out.ci_lo = std::min(out.estimate, quantile_sorted(reps, 0.025));
    out.ci_hi = std::max(out.estimate, quantile_sorted(reps, 0.975));
    return out;
}

// Dictionary distance: max_f |mean_A f - mean_B f| over the test dictionary.
inline DistanceEstimate df_estimate(const EmpiricalLaw& a, const EmpiricalLaw& b, const Dictionary& dict,
                                    int bootstrap = 200, std::uint64_t seed = 4321) {
    check(a.dim == b.dim && a.dim == dict.dim, "df_estimate: dimension mismatch");
    check(a.size() > 0 && b.size() > 0, "df_estimate: empty sample");
    const std::size_t nf = dict.size();
    std::vector<Vec> fa(nf), fb(nf);
    for (std::size_t k = 0; k < nf; ++k) {
        fa[k].resize(a.size());
        fb[k].resize(b.size());
        for (std::size_t i = 0; i < a.size(); ++i) fa[k][i] = dict.fns[k].value(a.row(i));
        for (std::size_t i = 0; i < b.size(); ++i) fb[k][i] = dict.fns[k].value(b.row(i));
    }
    DistanceEstimate out;
    std::size_t arg = 0;
    for (std::size_t k = 0; k < nf; ++k) {
        const double gap = std::fabs(mean(fa[k]) - mean(fb[k]));
        if (gap > out.estimate) {
            out.estimate = gap;
            arg = k;
        }
    }
    out.argmax_id = dict.fns[arg].id;
    Rng rng = Rng::derive(seed, 0xdf, 0);
    Vec reps;
    reps.reserve(static_cast<std::size_t>(bootstrap));
    for (int r = 0; r < bootstrap; ++r) {
        double best = 0.0;
        for (std::size_t k = 0; k < nf; ++k) {
            double sa = 0.0, sb = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) sa += fa[k][rng.uniform_index(a.size())];
            for (std::size_t i = 0; i < b.size(); ++i) sb += fb[k][rng.uniform_index(b.size())];
            best = std::max(best, std::fabs(sa / a.size() - sb / b.size()));
        }
        reps.push_back(best);
    }
    std::sort(reps.begin(), reps.end());
    out.ci_lo = std::min(out.estimate, quantile_sorted(reps, 0.025));
    out.ci_hi = std::max(out.estimate, quantile_sorted(reps, 0.975));
    return out;
}

// Paired variant over aligned samples (same path index in both laws); the
// gap per function is the mean of differences, so coupled construction noise
// cancels and identical samples give exactly zero.
inline DistanceEstimate df_estimate_paired(const EmpiricalLaw& a, const EmpiricalLaw& b, const Dictionary& dict,
                                           int bootstrap = 200, std::uint64_t seed = 4321) {
    check(a.dim == b.dim && a.dim == dict.dim, "df_estimate_paired: dimension mismatch");
    check(a.size() == b.size() && a.size() > 0, "df_estimate_paired: needs aligned samples");
    const std::size_t n = a.size(), nf = dict.size();
    std::vector<Vec> diff(nf);
    for (std::size_t k = 0; k < nf; ++k) {
        diff[k].resize(n);
        for (std::size_t i = 0; i < n; ++i) diff[k][i] = dict.fns[k].value(a.row(i)) - dict.fns[k].value(b.row(i));
    }
    DistanceEstimate out;
    std::size_t arg = 0;
    for (std::size_t k = 0; k < nf; ++k) {
        const double gap = std::fabs(mean(diff[k]));
        if (gap > out.estimate) {
            out.estimate = gap;
            arg = k;
        }
    }
    out.argmax_id = dict.fns[arg].id;
    Rng rng = Rng::derive(seed, 0xdf, 1);
    Vec reps;
    reps.reserve(static_cast<std::size_t>(bootstrap));
    for (int r = 0; r < bootstrap; ++r) {
        double best = 0.0;
        for (std::size_t k = 0; k < nf; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += diff[k][rng.uniform_index(n)];
            best = std::max(best, std::fabs(s / static_cast<double>(n)));
        }
        reps.push_back(best);
    }
    std::sort(reps.begin(), reps.end());
    out.ci_lo = std::min(out.estimate, quantile_sorted(reps, 0.025));
    out.ci_hi = std::max(out.estimate, quantile_sorted(reps, 0.975));
    return out;
}

struct GapPoint {
    double x = 0.0;
    double gap = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
};

struct GapCurve {
    std::string estimator_id;
    std::vector<GapPoint> points;

    void write_csv(const std::string& path) const {
        CsvWriter w(path);
        w.header({"x", "gap", "ci_lo", "ci_hi", "estimator"});
        for (const auto& p : points)
            w.row_strings({format_double(p.x), format_double(p.gap), format_double(p.ci_lo),
                           format_double(p.ci_hi), estimator_id});
    }
};

}  // namespace jumpdiff
