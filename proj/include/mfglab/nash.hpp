#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mfglab/coupling.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/measures.hpp"
#include "mfglab/mfg.hpp"
#include "mfglab/pde.hpp"

namespace mfglab {

struct NashOptions {
    double t0 = 0.0;
    double horizon = 0.5;
    int steps = 0;                   // 0: choose from the CFL bound
    bool store_history = false;      // keep every time slice (particle drifts)
    std::size_t memory_budget = static_cast<std::size_t>(1.6e9);
};

// Values of the N-player system on the tensor grid (T^1)^N. Player value
// arrays share the row-major layout of TorusGrid(N, M); axis i is player i's
// coordinate.
struct NashSolution {
    ProblemSpec spec;
    int players = 0;
    double epsilon = 0.0;
    TorusGrid tensor;   // dim = N
    TimeGrid time;
    std::vector<std::vector<double>> v_t0;     // per player, slice at t0
    std::vector<std::vector<double>> history;  // per player, (K+1) * M^N when stored
    bool has_history = false;
    double max_principle_slack = 0.0;

    double value_t0(int i, std::size_t idx) const { return v_t0[i][idx]; }

    double value(int i, int k, std::size_t idx) const {
        if (!has_history) throw std::runtime_error("NashSolution: history not stored");
        return history[i][static_cast<std::size_t>(k) * tensor.node_count() + idx];
    }

    // v^{N,i}(t, x) for continuous (t, x), multilinear in space, linear in t
    double interp(int i, double t, const std::vector<double>& x) const {
        if (!has_history) throw std::runtime_error("NashSolution: history not stored");
        const double eps_t = 1e-12;
        if (t < time.t0 - eps_t || t > time.horizon + eps_t)
            throw std::out_of_range("NashSolution::interp: t outside range");
        double u = (t - time.t0) / time.dt();
        if (u < 0.0) u = 0.0;
        if (u > time.steps) u = time.steps;
        int k = static_cast<int>(std::floor(u));
        if (k >= time.steps) k = time.steps - 1;
        const double w = u - k;
        const std::size_t n = tensor.node_count();
        const double* lo = history[i].data() + static_cast<std::size_t>(k) * n;
        const double* hi = lo + n;
        const double a = interpolate_slice(tensor, lo, x);
        if (w == 0.0) return a;
        return (1.0 - w) * a + w * interpolate_slice(tensor, hi, x);
    }

    // d v^{N,i} / d x_i at a continuous state, central step of one grid cell
    double own_gradient(int i, double t, const std::vector<double>& x) const {
        const double h = tensor.spacing();
        std::vector<double> xp = x, xm = x;
        xp[i] = wrap_unit(xp[i] + h);
        xm[i] = wrap_unit(xm[i] - h);
        return (interp(i, t, xp) - interp(i, t, xm)) / (2.0 * h);
    }
};

namespace detail {

inline std::uint64_t pack_multiset(std::vector<int> coords) {
    std::sort(coords.begin(), coords.end());
    std::uint64_t key = 0;
    for (int c : coords) key = (key << 9) | static_cast<std::uint64_t>(c + 1);
    return key;
}

// F^eps(., m) on the 1-d grid for a multiset of grid-aligned atoms; matches
// mollified_eval_empirical on aligned inputs
inline std::vector<double> coupling_field_for_multiset(const MollifiedCoupling& fc,
                                                       const std::vector<int>& coords) {
    const TorusGrid& g = fc.grid();
    const int m = g.points_per_axis;
    const auto& ker = fc.mollifier().samples();
    std::vector<double> inner(m, 0.0);
    const double w = 1.0 / static_cast<double>(coords.size());
    for (int c : coords)
        for (int y = 0; y < m; ++y) inner[y] += w * ker[(y - c % m + 2 * m) % m];
    std::vector<double> fw(m);
    for (int y = 0; y < m; ++y) fw[y] = fc.base().f(g.node_point(y), inner[y]);
    return convolve(g, ker, fw);
}

}  // namespace detail

// Backward IMEX sweep of the full Nash system: tensor Laplacian implicit via
// FFT, own Hamiltonian and cross transport explicit upwind, the empirical
// coupling precomputed once per node (it is time-independent). All N value
// functions advance simultaneously.
inline NashSolution solve_nash(const ProblemSpec& spec, int players, double epsilon, int grid_m,
                               const NashOptions& opt = {}) {
    if (players < 2) throw std::invalid_argument("solve_nash: need at least two players");
    if (!is_pow2(static_cast<std::size_t>(grid_m)))
        throw std::invalid_argument("solve_nash: grid size must be a power of two");

    TorusGrid tensor(players, grid_m);
    const std::size_t n = tensor.node_count();
    const double h = tensor.spacing();
    const double lip = spec.hamiltonian.lipschitz_bound;

    int steps = opt.steps;
    if (steps <= 0)
        steps = static_cast<int>(std::ceil((opt.horizon - opt.t0) * lip * players / (0.9 * h)));
    TimeGrid tg(opt.t0, opt.horizon, steps);
    if (tg.dt() * lip * players / h > 1.0 + 1e-12)
        throw std::runtime_error("solve_nash: CFL violation, increase steps");

    // memory estimate: value arrays + stencil workspaces + coupling table
    {
        const std::size_t per_player = opt.store_history ? static_cast<std::size_t>(steps + 2) : 3;
        const std::size_t bytes = n * 8 * (players * per_player + 3 * players + players + 4);
        if (bytes > opt.memory_budget) {
            int m_ok = grid_m;
            while (m_ok > 8) {
                m_ok /= 2;
                std::size_t nn = 1;
                for (int a = 0; a < players; ++a) nn *= static_cast<std::size_t>(m_ok);
                if (nn * 8 * (players * per_player + 4 * players + 4) <= opt.memory_budget) break;
            }
            throw std::runtime_error("solve_nash: memory estimate " + std::to_string(bytes) +
                                     " bytes exceeds budget; try N = " + std::to_string(players) +
                                     ", M = " + std::to_string(m_ok));
        }
    }

    MollifiedCoupling fc(spec.coupling, epsilon, TorusGrid(1, grid_m));

    // empirical coupling per (player, node), keyed by the multiset of the
    // other players' coordinates
    std::unordered_map<std::uint64_t, std::vector<double>> fields;
    std::vector<std::vector<double>> coupling(players, std::vector<double>(n));
    {
        std::vector<int> coords(players - 1);
        for (std::size_t idx = 0; idx < n; ++idx) {
            const auto mi = tensor.unflat(idx);
            for (int i = 0; i < players; ++i) {
                int c = 0;
                for (int j = 0; j < players; ++j)
                    if (j != i) coords[c++] = mi[j];
                const std::uint64_t key = detail::pack_multiset(coords);
                auto it = fields.find(key);
                if (it == fields.end())
                    it = fields.emplace(key, detail::coupling_field_for_multiset(fc, coords)).first;
                coupling[i][idx] = it->second[mi[i]];
            }
        }
    }

    std::vector<std::size_t> dims(players, static_cast<std::size_t>(grid_m));
    ImplicitDiffusion diff(dims, h, tg.dt());

    NashSolution sol;
    sol.spec = spec;
    sol.players = players;
    sol.epsilon = epsilon;
    sol.tensor = tensor;
    sol.time = tg;
    sol.has_history = opt.store_history;
    if (opt.store_history)
        sol.history.assign(players, std::vector<double>(static_cast<std::size_t>(steps + 1) * n));

    // terminal data G(x_i) and the potential a(x_i) per player
    std::vector<std::vector<double>> v(players, std::vector<double>(n));
    std::vector<std::vector<double>> pot(players, std::vector<double>(n));
    std::vector<double> coupling_sup(players, 0.0);
    for (int i = 0; i < players; ++i) {
        for (std::size_t idx = 0; idx < n; ++idx) {
            const auto mi = tensor.unflat(idx);
            const std::vector<double> xi{mi[i] * h};
            v[i][idx] = spec.terminal.g(xi);
            pot[i][idx] = spec.hamiltonian.potential(xi);
            coupling_sup[i] = std::max(coupling_sup[i], std::fabs(coupling[i][idx]));
        }
        if (opt.store_history) {
            double* dst = sol.history[i].data() + static_cast<std::size_t>(steps) * n;
            for (std::size_t idx = 0; idx < n; ++idx) dst[idx] = v[i][idx];
        }
    }

    double gsup = 0.0, hsup = 0.0, fsup = 0.0;
    for (int i = 0; i < players; ++i) {
        fsup = std::max(fsup, coupling_sup[i]);
        for (std::size_t idx = 0; idx < n; ++idx) gsup = std::max(gsup, std::fabs(v[i][idx]));
    }
    hsup = std::fabs(spec.hamiltonian.pot_amp);  // H(., 0) = potential

    const double dt = tg.dt();
    std::vector<UpwindHamiltonian> ham(players);
    std::vector<std::vector<double>> next(players, std::vector<double>(n));
    double slack = 0.0;

    for (int step = steps; step >= 1; --step) {
        for (int j = 0; j < players; ++j) ham[j].build(tensor, {j}, v[j]);
        for (int i = 0; i < players; ++i) {
            auto& rhs = next[i];
            for (std::size_t idx = 0; idx < n; ++idx)
                rhs[idx] = v[i][idx] - dt * (ham[i].kinetic(idx) + pot[i][idx] - coupling[i][idx]);
            for (int j = 0; j < players; ++j) {
                if (j == i) continue;
                stencil::apply_transport(tensor, ham[j].axes, ham[j].cm, ham[j].cp, v[i], rhs, -dt);
            }
            diff.apply(rhs);
        }
        for (int i = 0; i < players; ++i) {
            v[i].swap(next[i]);
            const double bound = gsup + (tg.horizon - tg.node(step - 1)) * (fsup + hsup);
            for (std::size_t idx = 0; idx < n; ++idx)
                slack = std::max(slack, std::fabs(v[i][idx]) - bound);
            if (opt.store_history) {
                double* dst = sol.history[i].data() + static_cast<std::size_t>(step - 1) * n;
                for (std::size_t idx = 0; idx < n; ++idx) dst[idx] = v[i][idx];
            }
        }
    }
    sol.max_principle_slack = slack;
    if (slack > 1e-8)
        throw std::runtime_error("solve_nash: comparison bound violated by " + std::to_string(slack));
    sol.v_t0 = std::move(v);
    return sol;
}

// Finite projections of the master field: u^{N,i}(t, x) = U(t, x_i, m^{N,i})
// through the representation formula, with the empirical measure projected to
// a density first. The solve cache is keyed by (t, atom multiset) so
// permutations of the atoms are hits by construction.
class MasterProjector {
public:
    MasterProjector(ProblemSpec spec, double epsilon, double horizon, int grid_m, int steps,
                    double bandwidth, MFGOptions opts = {})
        : spec_(std::move(spec)), eps_(epsilon), horizon_(horizon), grid_(1, grid_m), steps_(steps),
          bandwidth_(bandwidth), opts_(opts) {}

    const TorusGrid& grid() const { return grid_; }
    double bandwidth() const { return bandwidth_; }
    std::size_t solves() const { return solves_; }
    std::size_t hits() const { return hits_; }

    // u^eps(t, .) started from the projected density of the atom multiset
    const std::vector<double>& field(double t, const std::vector<double>& atoms) {
        const auto key = make_key(t, atoms);
        auto it = cache_.find(key);
        if (it != cache_.end()) {
            ++hits_;
            return it->second;
        }
        EmpiricalMeasure em;
        for (double a : atoms) em.atoms.push_back({wrap_unit(a)});
        DensityField m0 = project_to_grid(em, grid_, bandwidth_);
        TimeGrid tg(t, horizon_, steps_);
        MFGSolution sol = solve_mfg(spec_, grid_, tg, m0, CouplingKind::Mollified, eps_, opts_);
        ++solves_;
        std::vector<double> slice(sol.u.slice(0), sol.u.slice(0) + grid_.node_count());
        return cache_.emplace(key, std::move(slice)).first->second;
    }

    double eval(double t, const std::vector<double>& atoms, double x) {
        const auto& f = field(t, atoms);
        return interpolate_slice(grid_, f.data(), {wrap_unit(x)});
    }

    // central difference of the field in its x-slot
    double eval_gradient(double t, const std::vector<double>& atoms, double x) {
        const auto& f = field(t, atoms);
        const double h = grid_.spacing();
        const double up = interpolate_slice(grid_, f.data(), {wrap_unit(x + h)});
        const double dn = interpolate_slice(grid_, f.data(), {wrap_unit(x - h)});
        return (up - dn) / (2.0 * h);
    }

    double eval_second(double t, const std::vector<double>& atoms, double x) {
        const auto& f = field(t, atoms);
        const double h = grid_.spacing();
        const double up = interpolate_slice(grid_, f.data(), {wrap_unit(x + h)});
        const double mid = interpolate_slice(grid_, f.data(), {wrap_unit(x)});
        const double dn = interpolate_slice(grid_, f.data(), {wrap_unit(x - h)});
        return (up - 2.0 * mid + dn) / (h * h);
    }

private:
    using Key = std::vector<long long>;

    Key make_key(double t, std::vector<double> atoms) const {
        for (double& a : atoms) a = wrap_unit(a);
        std::sort(atoms.begin(), atoms.end());
        Key key;
        key.push_back(std::llround(t * 1e9));
        for (double a : atoms) key.push_back(std::llround(a * 1e9));
        return key;
    }

    ProblemSpec spec_;
    double eps_;
    double horizon_;
    TorusGrid grid_;
    int steps_;
    double bandwidth_;
    MFGOptions opts_;
    std::map<Key, std::vector<double>> cache_;
    std::size_t solves_ = 0;
    std::size_t hits_ = 0;
};

// u^{N,i}(t, x) for a tensor state x (d = 1 coordinates)
inline double project_master(MasterProjector& proj, int i, double t, const std::vector<double>& x) {
    std::vector<double> atoms;
    for (int j = 0; j < static_cast<int>(x.size()); ++j)
        if (j != i) atoms.push_back(x[j]);
    return proj.eval(t, atoms, x[i]);
}

struct NashDiagnostics {
    double alpha = 0.0;      // sup_i |D_{x_i} u^{N,i}|
    double beta = 0.0;       // sup_{j != i} |D_{x_j} u^{N,i}|
    double residual = 0.0;
    double theta = 0.0;      // 1 + alpha^2 + (N beta)^2
    double alpha_hat = 0.0;  // sup |D^2_{x_i x_i} u^{N,i}|
    double beta_hat = 0.0;   // sup_{j != i} |D^2_{x_i x_j} u^{N,i}|
    double theta_hat = 0.0;  // 1 + alpha_hat + N beta_hat
    bool noise_warning = false;
};

inline EmpiricalMeasure atoms_measure(const std::vector<double>& coords) {
    EmpiricalMeasure em;
    for (double a : coords) em.atoms.push_back({wrap_unit(a)});
    return em;
}

// deterministic Kronecker-lattice states snapped to the tensor grid, interior
// sample times
inline std::vector<std::pair<double, std::vector<double>>> stratified_tensor_samples(
    int players, int grid_m, const TimeGrid& tg, int count) {
    static const double golden[] = {0.6180339887498949, 0.7548776662466927, 0.8191725133961645,
                                    0.8566748838545029, 0.8812714616335695, 0.8986537126286992};
    std::vector<std::pair<double, std::vector<double>>> out;
    const double h = 1.0 / grid_m;
    for (int k = 0; k < count; ++k) {
        std::vector<double> x(players);
        for (int a = 0; a < players; ++a) {
            const double u = std::fmod((k + 1) * golden[a % 6] + 0.137 * a, 1.0);
            x[a] = std::round(u / h) * h;
            x[a] = wrap_unit(x[a]);
        }
        const double span = tg.horizon - tg.t0;
        const double t = tg.t0 + span * (0.15 + 0.55 * std::fmod((k + 1) * golden[(players + 1) % 6], 1.0));
        out.emplace_back(t, std::move(x));
    }
    return out;
}

// Evaluates every term of the projected-master equation at the sample points
// with finite differences and returns the sup residual plus the gradient
// diagnostics. The coupling term is evaluated at the same projected density
// the representation formula sees, so the projection bias cancels between the
// two sides instead of flooring the residual.
inline NashDiagnostics residual_probe(const ProblemSpec& spec, int players, double epsilon,
                                      MasterProjector& proj,
                                      const std::vector<std::pair<double, std::vector<double>>>& samples,
                                      double atom_step = 0.03, double time_step = 0.0) {
    NashDiagnostics diag;
    MollifiedCoupling fc(spec.coupling, epsilon, proj.grid());
    const double da = atom_step;
    if (time_step <= 0.0) time_step = 0.005;
    if (da * da < 1e3 * 1e-11) diag.noise_warning = true;

    for (const auto& [t, x] : samples) {
        for (int i = 0; i < players; ++i) {
            std::vector<double> atoms;
            for (int j = 0; j < players; ++j)
                if (j != i) atoms.push_back(x[j]);

            const double u0 = proj.eval(t, atoms, x[i]);
            const double du_i = proj.eval_gradient(t, atoms, x[i]);
            const double lap_i = proj.eval_second(t, atoms, x[i]);
            diag.alpha = std::max(diag.alpha, std::fabs(du_i));
            diag.alpha_hat = std::max(diag.alpha_hat, std::fabs(lap_i));

            // time derivative with the same atom multiset
            const double tp = t + time_step, tm = t - time_step;
            const double dudt = (proj.eval(tp, atoms, x[i]) - proj.eval(tm, atoms, x[i])) / (2.0 * time_step);

            double cross = 0.0, lap_others = 0.0;
            int slot = 0;
            for (int j = 0; j < players; ++j) {
                if (j == i) continue;
                auto ap = atoms, am = atoms;
                ap[slot] = wrap_unit(ap[slot] + da);
                am[slot] = wrap_unit(am[slot] - da);
                const double up = proj.eval(t, ap, x[i]);
                const double dn = proj.eval(t, am, x[i]);
                const double du_j = (up - dn) / (2.0 * da);
                lap_others += (up - 2.0 * u0 + dn) / (da * da);
                diag.beta = std::max(diag.beta, std::fabs(du_j));
                const double cross_second =
                    (proj.eval_gradient(t, ap, x[i]) - proj.eval_gradient(t, am, x[i])) / (2.0 * da);
                diag.beta_hat = std::max(diag.beta_hat, std::fabs(cross_second));

                // player j's own feedback gradient
                std::vector<double> atoms_j;
                for (int l = 0; l < players; ++l)
                    if (l != j) atoms_j.push_back(x[l]);
                const double du_jj = proj.eval_gradient(t, atoms_j, x[j]);
                const double dpj = spec.hamiltonian.hp1(du_jj);
                cross += dpj * du_j;
                ++slot;
            }

            const DensityField mdens = project_to_grid(atoms_measure(atoms), proj.grid(), proj.bandwidth());
            const auto fdens = fc.eval(mdens);
            const double fval = interpolate_slice(proj.grid(), fdens.values.data(), {wrap_unit(x[i])});
            const double hval = spec.hamiltonian.eval({x[i]}, {du_i});
            const double res = -dudt - (lap_i + lap_others) + hval + cross - fval;
            diag.residual = std::max(diag.residual, std::fabs(res));
        }
    }
    diag.theta = 1.0 + diag.alpha * diag.alpha +
                 std::pow(static_cast<double>(players) * diag.beta, 2.0);
    diag.theta_hat = 1.0 + diag.alpha_hat + players * diag.beta_hat;
    return diag;
}

// w^{N,i}(t0, x_i, m0): average of the Nash value over the other players'
// coordinates drawn from m0; exact tensor quadrature at desk scale,
// Monte Carlo beyond.
struct AverageValue {
    std::vector<double> values;   // per x_i node
    std::vector<double> stderrs;  // zero for the quadrature path
    bool monte_carlo = false;
};

inline AverageValue average_value(const NashSolution& v, int i, const DensityField& m0,
                                  int mc_samples = 10000, std::uint64_t seed = 99,
                                  bool force_mc = false) {
    const int players = v.players;
    const int m = v.tensor.points_per_axis;
    const std::size_t n = v.tensor.node_count();
    if (m0.grid().points_per_axis != m || m0.grid().dim != 1)
        throw std::invalid_argument("average_value: m0 must live on the 1-d player grid");
    AverageValue out;
    out.values.assign(m, 0.0);
    out.stderrs.assign(m, 0.0);

    const double quad_cost = (players - 1) * std::log2(static_cast<double>(m));
    if (!force_mc && quad_cost <= 20.0) {
        const double volw = std::pow(m0.grid().cell_volume(), players - 1);
        for (std::size_t idx = 0; idx < n; ++idx) {
            const auto mi = v.tensor.unflat(idx);
            double w = volw;
            for (int j = 0; j < players; ++j)
                if (j != i) w *= m0.field.values[mi[j]];
            out.values[mi[i]] += w * v.value_t0(i, idx);
        }
        return out;
    }

    out.monte_carlo = true;
    const auto pts = sample(m0, mc_samples * (players - 1), seed);
    std::vector<double> x(players);
    const double h = 1.0 / m;
    for (int node = 0; node < m; ++node) {
        double acc = 0.0, acc2 = 0.0;
        for (int s = 0; s < mc_samples; ++s) {
            x[i] = node * h;
            int slot = 0;
            for (int j = 0; j < players; ++j) {
                if (j == i) continue;
                x[j] = pts[static_cast<std::size_t>(s) * (players - 1) + slot][0];
                ++slot;
            }
            const double val = interpolate_slice(v.tensor, v.v_t0[i].data(), x);
            acc += val;
            acc2 += val * val;
        }
        const double mean = acc / mc_samples;
        out.values[node] = mean;
        out.stderrs[node] = std::sqrt(std::max(0.0, acc2 / mc_samples - mean * mean) / mc_samples);
    }
    return out;
}

struct NashGap {
    double sup_gap = 0.0;
    double avg_gap = 0.0;
};

// sup over sampled tensor nodes of |v - u^{N,i}| plus the headline averaged
// gap against the local MFG value
inline NashGap nash_gap(const NashSolution& v, MasterProjector& proj, const DensityField& m0_nash,
                        const ScalarField& u_local_t0,
                        const std::vector<std::pair<double, std::vector<double>>>& samples) {
    NashGap out;
    for (const auto& [t_ignored, x] : samples) {
        (void)t_ignored;
        for (int i = 0; i < v.players; ++i) {
            const double vv = interpolate_slice(v.tensor, v.v_t0[i].data(), x);
            const double uu = project_master(proj, i, v.time.t0, x);
            out.sup_gap = std::max(out.sup_gap, std::fabs(vv - uu));
        }
    }
    const AverageValue avg = average_value(v, 0, m0_nash);
    const int m = v.tensor.points_per_axis;
    const int stride = u_local_t0.grid.points_per_axis / m;
    if (stride * m != u_local_t0.grid.points_per_axis)
        throw std::invalid_argument("nash_gap: reference grid must refine the tensor grid");
    for (int node = 0; node < m; ++node)
        out.avg_gap = std::max(out.avg_gap, std::fabs(avg.values[node] - u_local_t0.values[static_cast<std::size_t>(node) * stride]));
    return out;
}

}  // namespace mfglab
