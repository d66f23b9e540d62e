"""Variational principles over probability vectors and block schedules.

Four layers: a generic multistart maximizer on the simplex, the closed-form
weighted pressure for equal linear parts (a log-sum-exp recursion along the
projection chain), the attractor dimension as an infimum of pressures, and
coordinate-ascent optimizers over block schedules (Hausdorff side with an
entropy-drift class, packing side with per-scale profile maxima).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from scipy.special import entr

from .engine import mandelbrot_value, dim_mandelbrot
from .ifs import DiagonalIFS, build_projection_coding, RECT_TOL
from .weights import (DegenerateError, WeightModel, WeightSequence,
                      as_survival_vector, entropy, p_max_vector, validate_type_ell)


def softmax(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - x.max())
    return z / z.sum()


@dataclass
class OptimizationResult:
    value: float
    argument: object
    residual: float
    iterations: int
    n_starts: int
    trace: list = field(repr=False, default_factory=list)
    flags: list = field(default_factory=list)
    extras: dict = field(repr=False, default_factory=dict)


def maximize_on_simplex(f, n: int, starts: int = 32, seed: int = 0,
                        extra_starts=(), residual_tol: float = 1e-8,
                        max_polish_iter: int = 500,
                        nm_maxiter: int | None = None) -> OptimizationResult:
    """Multistart Nelder-Mead in softmax coordinates, then gradient-ascent
    polish with finite differences.  The residual is the sup norm of the
    centred finite-difference gradient at the returned point."""
    rng = np.random.default_rng(seed)
    xs = [np.zeros(n)]
    for p0 in extra_starts:
        xs.append(np.log(np.maximum(np.asarray(p0, dtype=np.float64), 1e-300)))
    while len(xs) < starts:
        xs.append(np.log(np.maximum(rng.dirichlet(np.ones(n)), 1e-12)))

    def F(x):
        return f(softmax(x))

    best_x, best_v = None, -math.inf
    trace = []
    for x0 in xs:
        res = minimize(lambda x: -F(x), x0, method="Nelder-Mead",
                       options={"maxiter": nm_maxiter or 300 * n,
                                "fatol": 1e-13, "xatol": 1e-9})
        v = -res.fun
        trace.append((float(F(x0)), float(v)))
        if v > best_v:
            best_v, best_x = v, res.x.copy()

    # ascent polish; the all-ones direction is flat, project it out
    x, fx = best_x, best_v
    h = 1e-6
    residual = math.inf
    it = 0
    for it in range(1, max_polish_iter + 1):
        g = np.empty(n)
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            g[i] = (F(x + e) - F(x - e)) / (2 * h)
        g -= g.mean()
        residual = float(np.abs(g).max())
        if residual <= residual_tol:
            break
        step = 1.0
        moved = False
        while step > 1e-16:
            xn = x + step * g
            fn = F(xn)
            if fn > fx:
                x, fx = xn, fn
                moved = True
                break
            step *= 0.5
        if not moved:
            break
    p = softmax(x)
    flags = []
    if abs(f(p) - fx) > 1e-9:
        flags.append("re-evaluation-mismatch")
    return OptimizationResult(value=float(fx), argument=p, residual=residual,
                              iterations=it, n_starts=len(xs), trace=trace,
                              flags=flags)


# ---------------------------------------------------------------------------
# sup over fixed weight laws


def optimize_mandelbrot(ifs: DiagonalIFS, alpha=None, starts: int = 32,
                        seed: int = 0) -> OptimizationResult:
    """Largest dimension among fixed weight laws: deterministic laws when
    alpha is None, percolation laws W_i = p_i 1{c_i}/alpha_i otherwise.

    The objective is concave (minimum of concave entropy terms), so the
    multistart is belt and braces; a nonpositive maximum is reported as
    dimension zero with a degenerate-sup flag."""
    cache: dict = {}
    if alpha is not None:
        alpha = as_survival_vector(alpha, ifs.n)
        log_alpha = np.log(alpha)

        def f(p):
            H = entropy(p) + float(p @ log_alpha)
            return mandelbrot_value(ifs, p, H, cache)

        extra = [p_max_vector(alpha)]
    else:

        def f(p):
            return mandelbrot_value(ifs, p, entropy(p), cache)

        extra = []
    res = maximize_on_simplex(f, ifs.n, starts=starts, seed=seed,
                              extra_starts=extra)
    p = res.argument
    model = (WeightModel.deterministic(p) if alpha is None
             else WeightModel.percolation(p, alpha))
    res.extras["model"] = model
    res.extras["H"] = model.entropy_H()
    if res.value <= 0.0:
        res.flags.append("degenerate-sup")
        res.value = 0.0
    else:
        res.extras["closed_form_value"] = dim_mandelbrot(ifs, model).value
    return res


# ---------------------------------------------------------------------------
# weighted pressure for equal linear parts


class PressureContext:
    """Chain data shared by all pressure evaluations on one system."""

    def __init__(self, ifs: DiagonalIFS, alpha):
        if not np.all(np.abs(ifs.A - ifs.A[0]) <= RECT_TOL):
            raise ValueError("weighted pressure needs equal linear parts")
        self.ifs = ifs
        self.alpha = as_survival_vector(alpha, ifs.n)
        chi = ifs.C[0]
        order = np.argsort(-chi, kind="stable")
        groups, vals = [], []
        for k in order:
            if vals and chi[k] == vals[-1]:
                groups[-1].append(int(k))
            else:
                groups.append([int(k)])
                vals.append(chi[k])
        self.groups = groups
        self.chi_tilde = np.array([chi[g].mean() for g in groups])
        chain, rest = [], [k for g in groups for k in g]
        for g in groups:
            chain.append(frozenset(rest))
            rest = [k for k in rest if k not in g]
        self.chain = chain
        self.coding = build_projection_coding(ifs, chain)
        self.s = len(groups)
        # expected offspring per class and level
        self.EN = [np.bincount(self.coding.class_index[r - 1], weights=self.alpha,
                               minlength=self.coding.n_classes(r))
                   for r in range(1, self.s + 1)]

    def lift_to_letters(self, u: np.ndarray, r: int) -> np.ndarray:
        """p on letters with level-r marginal u, spread within each fiber
        proportionally to alpha."""
        cls = self.coding.class_index[r - 1]
        return u[cls] * self.alpha / self.EN[r - 1][cls]


def weighted_pressure(ifs: DiagonalIFS, alpha, r: int, theta: float,
                      ctx: PressureContext | None = None):
    """P_r(theta) and its unique maximizing vector on the level-r classes.

    The objective theta*<u, phi_r> + h(u)/chi~_r + sum of projected-entropy
    corrections telescopes into conditional entropies weighted by 1/chi~_rho,
    so the supremum is an exact log-sum-exp recursion up the chain and the
    maximizer is the corresponding Gibbs chain."""
    if ctx is None:
        ctx = PressureContext(ifs, alpha)
    if not (1 <= r <= ctx.s):
        raise ValueError("level r = %d outside 1..%d" % (r, ctx.s))
    chi = ctx.chi_tilde
    # V on level-r classes; W up the chain by softmax aggregation
    V = theta * np.log(ctx.EN[r - 1]) / chi[r - 1]
    levels = list(range(r, ctx.s + 1))
    Ws = {r: V}
    for rho in levels[:-1]:
        cmap = ctx.coding.chain_maps[rho]          # classes rho -> rho+1
        scaled = chi[rho - 1] * Ws[rho]
        n_next = ctx.coding.n_classes(rho + 1)
        # grouped log-sum-exp, stable per target class
        tops = np.full(n_next, -np.inf)
        np.maximum.at(tops, cmap, scaled)
        sums = np.zeros(n_next)
        np.add.at(sums, cmap, np.exp(scaled - tops[cmap]))
        Ws[rho + 1] = (tops + np.log(sums)) / chi[rho - 1]
    top = Ws[levels[-1]]
    scaled = chi[ctx.s - 1] * top
    tmax = scaled.max()
    P = (tmax + math.log(np.exp(scaled - tmax).sum())) / chi[ctx.s - 1]
    # Gibbs chain back down: marginal at the top, conditionals per level
    w = np.exp(scaled - tmax)
    w /= w.sum()
    for rho in reversed(levels[:-1]):
        cmap = ctx.coding.chain_maps[rho]
        scaled = chi[rho - 1] * Ws[rho]
        tops = np.full(ctx.coding.n_classes(rho + 1), -np.inf)
        np.maximum.at(tops, cmap, scaled)
        sums = np.zeros(ctx.coding.n_classes(rho + 1))
        np.add.at(sums, cmap, np.exp(scaled - tops[cmap]))
        cond = np.exp(scaled - tops[cmap]) / sums[cmap]
        w = cond * w[cmap]
    return float(P), w


def _pressure_min_theta(ifs, alpha, r, lo, hi, ctx, grid: int = 256,
                        refine: int = 80):
    """min over theta in [lo, hi] of P_r(theta) (convex), grid + golden."""
    ths = np.linspace(lo, hi, grid)
    vals = np.array([weighted_pressure(ifs, alpha, r, t, ctx)[0] for t in ths])
    j = int(np.argmin(vals))
    a = ths[max(0, j - 1)]
    b = ths[min(grid - 1, j + 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = weighted_pressure(ifs, alpha, r, c, ctx)[0]
    fd = weighted_pressure(ifs, alpha, r, d, ctx)[0]
    for _ in range(refine):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = weighted_pressure(ifs, alpha, r, c, ctx)[0]
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = weighted_pressure(ifs, alpha, r, d, ctx)[0]
    t_star = 0.5 * (a + b)
    return t_star, weighted_pressure(ifs, alpha, r, t_star, ctx)


@dataclass
class AttractorDimension:
    value: float
    r_star: int
    theta_star: float
    weight_model: WeightModel
    mm_value: float
    pressure_scan: list
    flags: list


def dim_attractor_equal_linear(ifs: DiagonalIFS, alpha,
                               theta_grid: int = 256) -> AttractorDimension:
    """A.s. Hausdorff dimension of the surviving set for equal linear parts:
    the infimum of weighted pressures over levels r >= 2 and theta in
    [chi~_r/chi~_{r-1}, 1], attained by an explicit percolation-type law.

    Verifies the variational claim by recomputing the dimension of the
    reconstructed law; disagreement beyond 1e-6 is flagged."""
    ctx = PressureContext(ifs, alpha)
    total = float(ctx.alpha.sum())
    if total <= 1.0:
        raise DegenerateError("subcritical survival: sum alpha = %g <= 1" % total)
    flags = []
    scan = []
    if ctx.s == 1:
        value = math.log(total) / ctx.chi_tilde[0]
        r_star, theta_star = 1, 1.0
        u = ctx.EN[0] / total
        p = ctx.lift_to_letters(u, 1)
    else:
        best = (math.inf, None, None, None)
        for r in range(2, ctx.s + 1):
            lo = ctx.chi_tilde[r - 1] / ctx.chi_tilde[r - 2]
            t_star, (val, u) = _pressure_min_theta(ifs, alpha, r, lo, 1.0, ctx,
                                                   grid=theta_grid)
            scan.append({"r": r, "theta_lo": float(lo), "theta_star": float(t_star),
                         "value": float(val)})
            if val < best[0]:
                best = (val, r, t_star, u)
        value, r_star, theta_star, u = best
        p = ctx.lift_to_letters(u, r_star)
    model = WeightModel.percolation(p, ctx.alpha)
    mm = dim_mandelbrot(ifs, model).value
    if abs(mm - value) > 1e-6:
        flags.append("variational-mismatch")
    return AttractorDimension(value=float(value), r_star=int(r_star),
                              theta_star=float(theta_star), weight_model=model,
                              mm_value=float(mm), pressure_scan=scan, flags=flags)


# ---------------------------------------------------------------------------
# entropy-positive perturbation of percolation schedules


@dataclass
class PerturbResult:
    seq: WeightSequence
    head_end: int
    blend: float
    certificate_ok: bool
    margin: float
    flags: list


def admissible_eps_bound(ifs: DiagonalIFS, alpha) -> float:
    """Upper limit for the perturbation drift: below the blend threshold,
    the slow-clock budget and the inverse alphabet size."""
    alpha = as_survival_vector(alpha, ifs.n)
    H_max = math.log(float(alpha.sum()))
    if H_max <= 0:
        raise DegenerateError("subcritical survival vector")
    H_min = float(np.log(alpha).min())
    lam_thr = 8.0 * (H_max - 2.0 * H_min) / H_max ** 2
    lam_lo, _ = ifs.contraction_span()
    return min(1.0 / lam_thr, lam_lo, 1.0 / ifs.n)


def perturb_sequence(seq: WeightSequence, eps: float, N: int,
                     ifs: DiagonalIFS, align_blocks: bool = True) -> PerturbResult:
    """Entropy-lifting perturbation of a percolation schedule.

    Replaces the head (up to floor(N*eps), extended to a block boundary by
    default) by the entropy-maximizing vector, and blends every low-entropy
    row up to the budget floor(Lambda_a*N) toward it.  The output satisfies
    sum_{n<=M} H >= M*eps for every M up to the budget, provided the input
    obeyed the one-sided bound sum_{n<=M} H >= -M*eps there."""
    if seq.mode != "rows" or seq.alpha is None:
        raise ValueError("perturbation applies to percolation schedules")
    alpha = seq.alpha
    H_max = math.log(float(alpha.sum()))
    if H_max <= 0:
        raise DegenerateError("subcritical survival vector")
    H_min = float(np.log(alpha).min())
    lam_thr = 8.0 * (H_max - 2.0 * H_min) / H_max ** 2
    bound = admissible_eps_bound(ifs, alpha)
    if not (0.0 < eps < bound):
        raise ValueError("eps = %g outside (0, %g)" % (eps, bound))
    if N * eps < 1.0:
        raise ValueError("need N*eps >= 1")
    _, lam_hi = ifs.contraction_span()
    M_hi = int(math.floor(lam_hi * N))
    if seq.horizon < M_hi:
        raise ValueError("sequence horizon %d shorter than floor(Lambda_a N) = %d"
                         % (seq.horizon, M_hi))
    M_lo = int(math.floor(N * eps))
    H = seq.H_array()
    prefix = np.cumsum(H[:M_hi], dtype=np.longdouble)
    Ms = np.arange(1, M_hi + 1)
    bad = prefix[M_lo - 1:] < -eps * Ms[M_lo - 1:]
    if np.any(bad):
        raise ValueError("input schedule leaves the admissible class at "
                         "M = %d" % int(Ms[M_lo - 1:][bad][0]))

    pm = p_max_vector(alpha)
    rows = seq.p_rows().copy()
    head_end = M_lo
    flags = []
    if align_blocks and seq.block_lengths is not None:
        bounds = np.cumsum(seq.block_lengths)
        j = int(np.searchsorted(bounds, M_lo))
        head_end = int(bounds[min(j, len(bounds) - 1)])
        head_end = min(head_end, M_hi)
    elif align_blocks:
        flags.append("no-block-metadata")
    rows[:head_end] = pm
    blend = lam_thr * eps
    low = (H[:M_hi] <= 0.5 * H_max)
    low[:head_end] = False
    sel = np.flatnonzero(low)
    rows[sel] = (1.0 - blend) * rows[sel] + blend * pm
    out = WeightSequence(P=rows, alpha=alpha, block_lengths=None)
    pre2 = np.cumsum(out.H_array()[:M_hi], dtype=np.longdouble)
    margin = float((pre2 - eps * Ms).min())
    ok = margin >= -1e-9
    if not ok:
        flags.append("postcondition-failed")
    return PerturbResult(seq=out, head_end=head_end, blend=blend,
                         certificate_ok=ok, margin=margin, flags=flags)


# ---------------------------------------------------------------------------
# coordinate ascent over block schedules


class _ScheduleEvaluator:
    """Fast profile evaluation for candidate row matrices at fixed scales.

    Uses plain long-double prefix sums (the public tables use compensated
    summation; the optimizer inner loop trades that for speed) and caches
    projection codings per clock chain."""

    def __init__(self, ifs: DiagonalIFS, alpha, rows_budget: int):
        self.ifs = ifs
        self.alpha = None if alpha is None else as_survival_vector(alpha, ifs.n)
        self.log_alpha = None if self.alpha is None else np.log(self.alpha)
        self.rows_budget = rows_budget
        self.codings = {}

    def entropies(self, P: np.ndarray) -> np.ndarray:
        H = entr(P).sum(axis=1)
        if self.log_alpha is not None:
            H = H + P @ self.log_alpha
        return H

    def _chain(self, gam: np.ndarray):
        order = np.argsort(gam, kind="stable")
        groups, gs = [], []
        for k in order:
            if gs and gam[k] == gs[-1]:
                groups[-1].append(int(k))
            else:
                groups.append([int(k)])
                gs.append(int(gam[k]))
        key = tuple(tuple(g) for g in groups)
        coding = self.codings.get(key)
        if coding is None:
            chain, rest = [], [k for g in groups for k in g]
            for g in groups:
                chain.append(frozenset(rest))
                rest = [k for k in rest if k not in g]
            coding = build_projection_coding(self.ifs, chain)
            self.codings[key] = coding
        return gs, coding

    def stats(self, P: np.ndarray):
        """Shared per-candidate arrays: (H_prefix with leading 0, per-axis
        chi prefix)."""
        H_prefix = np.concatenate([[0.0],
                                   np.cumsum(self.entropies(P), dtype=np.longdouble)])
        chi_prefix = np.cumsum(P @ self.ifs.C, axis=0, dtype=np.longdouble)
        return np.asarray(H_prefix, dtype=np.float64), chi_prefix

    def _profile(self, P: np.ndarray, N: float, stats):
        H_prefix, chi_prefix = stats
        gam = np.empty(self.ifs.d, dtype=np.intp)
        for k in range(self.ifs.d):
            idx = int(np.searchsorted(chi_prefix[:, k], N, side="right"))
            if idx >= P.shape[0]:
                raise ValueError("row budget exhausted at scale %g" % N)
            gam[k] = idx + 1
        gs, coding = self._chain(gam)
        g1, gend = gs[0], gs[-1]
        band = np.empty(gend - g1)
        for r in range(2, len(gs) + 1):
            lo, hi = gs[r - 2], gs[r - 1]
            proj = coding.project_rows(P[lo:hi], r)
            band[lo - g1:hi - g1] = entr(proj).sum(axis=1)
        suffix = np.zeros(band.size + 1)
        if band.size:
            suffix[:-1] = np.cumsum(band[::-1], dtype=np.longdouble)[::-1]
        ks = np.arange(g1, gend + 1)
        return H_prefix[ks] + suffix, gend

    def d_tilde(self, P: np.ndarray, N: float, stats=None) -> float:
        """min_k H_{N,k} / N over k in [g_1, g_s]."""
        if stats is None:
            stats = self.stats(P)
        profile, _ = self._profile(P, N, stats)
        return float(profile.min() / N)

    def d_lower(self, P: np.ndarray, N: float, stats=None) -> float:
        """min(profile minimum over [g_1, g_s - 1], tail minimum) / N."""
        if stats is None:
            stats = self.stats(P)
        profile, gend = self._profile(P, N, stats)
        inner = float(profile[:-1].min()) if profile.size > 1 else math.inf
        tail = float(stats[0][gend:].min())
        return min(inner, tail) / N


def _blocks_covering(lengths, budget: int):
    """Block (start, end) index pairs (0-based, half-open) truncated to
    cover exactly ``budget`` rows."""
    spans = []
    acc = 0
    for L in lengths:
        if acc >= budget:
            break
        end = min(acc + L, budget)
        spans.append((acc, end))
        acc = end
    if acc < budget:
        raise ValueError("schedule covers %d rows, budget needs %d" % (acc, budget))
    return spans


def _ascend_blocks(objective, P0: np.ndarray, spans, feasible,
                   seed: int = 0, max_passes: int = 8, nm_iter: int = 120):
    """Coordinate ascent over block vectors: per block, Nelder-Mead in
    softmax coordinates with infeasible candidates rejected."""
    P = P0.copy()
    n = P.shape[1]
    best = objective(P) if feasible(P) else -math.inf
    for _ in range(max_passes):
        improved = False
        for (a, b) in spans:
            x0 = np.log(np.maximum(P[a], 1e-12))

            def f(x):
                cand = P.copy()
                cand[a:b] = softmax(x)
                if not feasible(cand):
                    return math.inf
                return -objective(cand)

            res = minimize(f, x0, method="Nelder-Mead",
                           options={"maxiter": nm_iter, "fatol": 1e-12,
                                    "xatol": 1e-8})
            if -res.fun > best + 1e-12:
                best = -res.fun
                P[a:b] = softmax(res.x)
                improved = True
        if not improved:
            break
    return P, best


def optimize_packing(ifs: DiagonalIFS, alpha, lengths, eps: float,
                     N_grid, seed: int = 0, max_passes: int = 6) -> OptimizationResult:
    """Packing-side variational sweep: per scale N, maximize the profile
    minimum d~_N over block schedules in the admissible class (partial
    entropy sums above -M*eps up to the budget), then report the tail
    maximum over the scale grid.

    The witness concatenates entropy-lifted maximizers on exponentially
    separated windows; it is reported, with its admissibility scan, rather
    than certified optimal."""
    alpha = as_survival_vector(alpha, ifs.n)
    bad = validate_type_ell(lengths)
    if bad:
        raise ValueError("; ".join(bad))
    H_max = math.log(float(alpha.sum()))
    if H_max <= 0:
        raise DegenerateError("subcritical survival vector")
    if eps <= 0:
        raise ValueError("eps must be positive")
    N_grid = np.sort(np.asarray(N_grid, dtype=np.float64))
    _, lam_hi = ifs.contraction_span()
    pm = p_max_vector(alpha)
    per_N = []
    best_rows = {}
    for N in N_grid:
        budget = int(math.floor(lam_hi * N)) + 2
        spans = _blocks_covering(lengths, budget)
        ev = _ScheduleEvaluator(ifs, alpha, budget)
        M_lo = max(1, int(math.floor(N * eps)))
        Ms = np.arange(M_lo, budget + 1, dtype=np.float64)

        def feasible(P):
            H = ev.entropies(P)
            pre = np.cumsum(H, dtype=np.longdouble)
            return bool(np.all(pre[M_lo - 1:] >= -eps * Ms[:pre.size - M_lo + 1]))

        def objective(P):
            return ev.d_tilde(P, float(N))

        starts = [np.repeat(pm[None, :], budget, axis=0)]
        spread = _band_spread_start(ifs, alpha, float(N), budget)
        if spread is not None:
            starts.append(spread)
        bestP, bestv = None, -math.inf
        for P0 in starts:
            P1, v1 = _ascend_blocks(objective, P0, spans, feasible,
                                    seed=seed, max_passes=max_passes)
            if v1 > bestv:
                bestP, bestv = P1, v1
        per_N.append({"N": float(N), "value": float(bestv)})
        best_rows[float(N)] = bestP
    vals = np.array([row["value"] for row in per_N])
    w0 = len(vals) // 2
    value = float(vals[w0:].max())

    # witness on exponentially separated windows
    witness, windows, wit_flags = _packing_witness(ifs, alpha, lengths, eps,
                                                   N_grid, best_rows, lam_hi)
    flags = ["at-horizon"] + wit_flags
    return OptimizationResult(value=value, argument=witness, residual=math.nan,
                              iterations=len(per_N), n_starts=2,
                              trace=per_N,
                              flags=flags,
                              extras={"per_N": per_N, "windows": windows,
                                      "eps": eps})


def _band_spread_start(ifs, alpha, N, budget):
    """Start that spends the coarse band on projected entropy: rows past the
    fast clock get the level-2 class-uniform lift."""
    try:
        ctx = PressureContext(ifs, alpha)
    except ValueError:
        return None
    if ctx.s < 2:
        return None
    pm = p_max_vector(alpha)
    g1 = int(N / ctx.chi_tilde[0]) + 1
    m2 = ctx.coding.n_classes(2)
    u = np.full(m2, 1.0 / m2)
    spread = ctx.lift_to_letters(u, 2)
    P = np.repeat(pm[None, :], budget, axis=0)
    P[min(g1, budget):] = spread
    return P


def _packing_witness(ifs, alpha, lengths, eps, N_grid, best_rows, lam_hi):
    """Concatenate entropy-lifted per-scale maximizers on windows
    (L_{m_{j-1}}, L_{m_j}] with L_{m_{j-1}} below floor(eps*N_j)."""
    bounds = np.cumsum(lengths)
    horizon = int(bounds[-1])
    pm = p_max_vector(alpha)
    rows = np.repeat(pm[None, :], horizon, axis=0)
    windows = []
    flags = []
    prev_end = 0
    for N in N_grid:
        if math.floor(eps * N) < prev_end:
            continue
        budget = int(math.floor(lam_hi * N))
        if budget > horizon:
            break
        j = int(np.searchsorted(bounds, budget))
        end = int(bounds[min(j, len(bounds) - 1)])
        end = min(end, horizon)
        base = WeightSequence(P=_pad_rows(best_rows[float(N)], end, pm),
                              alpha=alpha,
                              block_lengths=_truncate_lengths(lengths, end))
        try:
            pert = perturb_sequence(base, eps, int(N), ifs)
        except ValueError:
            flags.append("witness-window-skipped")
            continue
        rows[prev_end:end] = pert.seq.p_rows()[prev_end:end]
        windows.append({"N": float(N), "start": prev_end + 1, "end": end})
        prev_end = end
    seq = WeightSequence(P=rows, alpha=alpha,
                         block_lengths=list(lengths))
    H = seq.H_array()
    pre = np.cumsum(H, dtype=np.longdouble)
    Ms = np.arange(1, horizon + 1)
    if windows:
        scan_ok = bool(np.all(pre >= -eps * Ms))
        if not scan_ok:
            flags.append("witness-scan-failed")
    else:
        flags.append("witness-empty")
    return seq, windows, flags


def _pad_rows(P, rows, fill):
    if P.shape[0] >= rows:
        return P[:rows]
    pad = np.repeat(fill[None, :], rows - P.shape[0], axis=0)
    return np.vstack([P, pad])


def _truncate_lengths(lengths, total):
    out, acc = [], 0
    for L in lengths:
        if acc + L >= total:
            out.append(total - acc)
            break
        out.append(L)
        acc += L
    return out


def optimize_type_ell_hausdorff(ifs: DiagonalIFS, alpha, lengths, eps: float,
                                horizon: int | None = None,
                                N_points: int = 24, seed: int = 0,
                                seeds=(), max_passes: int = 4) -> OptimizationResult:
    """Hausdorff-side schedule search: maximize the at-horizon lower
    dimension estimate (minimum of d_N over a scale grid) over block
    schedules with certified entropy drift sum_{n<=N} H >= N*eps.

    The certificate re-scans the returned schedule after projecting each
    block vector to the eps^2 grid; both the continuous and the projected
    values are reported."""
    alpha = None if alpha is None else as_survival_vector(alpha, ifs.n)
    bad = validate_type_ell(lengths)
    if bad:
        raise ValueError("; ".join(bad))
    total = int(np.sum(lengths))
    horizon = total if horizon is None else min(int(horizon), total)
    if alpha is not None:
        H_max = math.log(float(alpha.sum()))
        if eps >= H_max:
            raise ValueError("eps = %g not below the top entropy %g" % (eps, H_max))
        pm = p_max_vector(alpha)
    else:
        pm = np.full(ifs.n, 1.0 / ifs.n)
        if eps >= math.log(ifs.n):
            raise ValueError("eps = %g not below log #letters" % eps)
    ev = _ScheduleEvaluator(ifs, alpha, horizon)
    spans = _blocks_covering(lengths, horizon)
    _, lam_hi = ifs.contraction_span()
    maxN = horizon / lam_hi * 0.98
    N_grid = np.geomspace(max(4.0, maxN / 16.0), maxN, N_points)
    burn = int(math.ceil(1.0 / eps))
    Ms = np.arange(burn, horizon + 1, dtype=np.float64)

    def feasible(P):
        pre = np.cumsum(ev.entropies(P), dtype=np.longdouble)
        return bool(np.all(pre[burn - 1:] >= eps * Ms))

    def objective(P):
        stats = ev.stats(P)
        return min(ev.d_lower(P, float(N), stats) for N in N_grid)

    starts = [np.repeat(pm[None, :], horizon, axis=0)]
    mm = optimize_mandelbrot(ifs, alpha, starts=8, seed=seed)
    starts.append(np.repeat(mm.argument[None, :], horizon, axis=0))
    for s in seeds:
        rows = s.p_rows() if hasattr(s, "p_rows") else np.asarray(s)
        starts.append(_pad_rows(rows.copy(), horizon, pm))
    bestP, bestv = None, -math.inf
    for P0 in starts:
        if not feasible(P0):
            continue
        P1, v1 = _ascend_blocks(objective, P0, spans, feasible,
                                seed=seed, max_passes=max_passes)
        if v1 > bestv:
            bestP, bestv = P1, v1
    if bestP is None:
        raise ValueError("no feasible start for eps = %g" % eps)

    # certificate on the eta = eps^2 grid
    eta = eps * eps
    Pg = _grid_project_rows(bestP, spans, eta)
    pre = np.cumsum(ev.entropies(Pg), dtype=np.longdouble)
    grid_ok = bool(np.all(pre[burn - 1:] >= eps * Ms))
    grid_val = min(ev.d_lower(Pg, float(N)) for N in N_grid) if grid_ok else None
    vectors = [bestP[a] for (a, b) in spans]
    seq = WeightSequence.from_blocks([b - a for (a, b) in spans], vectors,
                                     alpha=alpha)
    flags = ["at-horizon"]
    if not grid_ok:
        flags.append("grid-certificate-failed")
    return OptimizationResult(value=float(bestv), argument=seq,
                              residual=math.nan, iterations=len(spans),
                              n_starts=len(starts), trace=[],
                              flags=flags,
                              extras={"eps": eps, "eta": eta,
                                      "grid_value": grid_val,
                                      "grid_certificate": grid_ok,
                                      "N_grid": N_grid})


def _grid_project_rows(P, spans, eta):
    """Snap each block vector to the eta-grid: floor multiples of eta with
    the shortfall added to the largest coordinate."""
    out = P.copy()
    for (a, b) in spans:
        v = P[a].copy()
        snapped = np.where(v < eta, eta, np.floor(v / eta) * eta)
        snapped[np.argmax(v)] += 1.0 - snapped.sum()
        out[a:b] = snapped
    return out
