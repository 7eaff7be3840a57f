"""Channels between the n-qubit block picture and its Gaussian limit.

``apply_T`` maps the block decomposition of n shifted qubits to a hybrid
classical x quantum object: the block index ``j`` is smoothed onto the
real line with a Gaussian kernel of variance ``1/(2 sqrt(n))`` centered at
``g_n(j) = j/sqrt(n) - sqrt(n)(mu - 1/2)``, while the block states ride
along embedded in a common Fock cutoff.  ``gaussian_limit`` produces the
limiting product N(u_z, mu(1-mu)) x (displaced thermal), on the same grid
and cutoff, and ``hybrid_trace_distance`` integrates the trace-norm gap
between two such hybrids.  ``apply_S`` goes the other way, binning the
Gaussian pair back onto the valid-j lattice; ``blockwise_distance``
measures its distance to the true block data.  ``convergence_sweep`` runs
both directions over a list of n and fits log-log slopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .fock_gaussian import (
    GaussianLimitParams,
    default_fock_dim,
    displaced_thermal,
    embed_block,
)
from .spin_blocks import (
    LocalParams,
    ModelParams,
    as_local,
    block_pmf_window,
    block_state,
    classical_coordinate,
    typical_set,
    valid_j_values,
)
from .tolerances import (
    BLOCK_SKIP_MASS,
    CHANNEL_DROP_MASS,
    GRID_MASS_TOL,
    WINDOW_TAIL_MASS,
)

_trapz = getattr(np, "trapezoid", np.trapz)


@dataclass
class ClassicalDensity:
    """Probability density sampled on a uniform grid.

    ``values[i]`` is the density at ``x[i]``; the trapezoid mass over the
    grid must be within 1e-6 of ``expected_mass`` (default 1, smaller if a
    channel legitimately dropped mass).
    """

    x: np.ndarray
    values: np.ndarray
    expected_mass: float = 1.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.x.ndim != 1 or self.x.shape != self.values.shape:
            raise ValueError("grid and values must be equal-length 1-d arrays")
        steps = np.diff(self.x)
        if steps.size == 0 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("grid must be uniform with at least two points")
        if np.min(self.values) < -1e-12:
            raise ValueError(f"negative density value {np.min(self.values):.3e}")
        m = self.mass()
        if abs(m - self.expected_mass) > GRID_MASS_TOL:
            raise ValueError(
                f"grid mass {m:.9f} differs from expected {self.expected_mass:.9f} "
                f"by more than {GRID_MASS_TOL:.1e}; grid too narrow or coarse"
            )

    @property
    def step(self) -> float:
        return float(self.x[1] - self.x[0])

    def mass(self) -> float:
        return float(_trapz(self.values, self.x))

    def mean(self) -> float:
        return float(_trapz(self.x * self.values, self.x) / self.mass())

    def var(self) -> float:
        m = self.mean()
        return float(_trapz((self.x - m) ** 2 * self.values, self.x) / self.mass())

    def l1_distance(self, other: "ClassicalDensity") -> float:
        _check_same_grid(self.x, other.x)
        return float(_trapz(np.abs(self.values - other.values), self.x))


def _check_same_grid(xa: np.ndarray, xb: np.ndarray) -> None:
    if xa.shape != xb.shape or not np.allclose(xa, xb, rtol=0.0, atol=1e-9):
        raise ValueError("hybrid states live on different classical grids")


@dataclass
class HybridGaussianState:
    """Classical density plus conditional quantum state on a Fock cutoff.

    Either a product (one quantum state for every x) or a block mixture
    whose conditional at x is sum_j weights[x, j] * blocks[j] — then the
    per-x trace equals the classical density and the representation stays
    O(nx * nj + nj * dim^2) instead of O(nx * dim^2).
    """

    classical: ClassicalDensity
    dim: int
    product: bool
    quantum: np.ndarray | None = None
    weights: np.ndarray | None = None
    blocks: np.ndarray | None = None
    dropped_mass: float = 0.0

    def joint_stack(self, sl: slice) -> np.ndarray:
        """f(x) * rho(x) for grid indices ``sl``, shape (chunk, dim, dim)."""
        if self.product:
            f = self.classical.values[sl]
            return f[:, None, None] * self.quantum[None, :, :]
        return np.tensordot(self.weights[sl], self.blocks, axes=1)


def default_grid(
    mu: float,
    center: float,
    extra_lo: float = 0.0,
    extra_hi: float = 0.0,
    std_mult: float = 8.0,
    step_divisor: float = 50.0,
) -> np.ndarray:
    """Uniform grid: ``center`` +- ``std_mult`` classical standard deviations
    (std = sqrt(mu(1-mu))), step std/``step_divisor``, optionally widened."""
    std = math.sqrt(mu * (1.0 - mu))
    lo = min(center - std_mult * std, center - abs(extra_lo))
    hi = max(center + std_mult * std, center + abs(extra_hi))
    step = std / step_divisor
    npts = int(math.ceil((hi - lo) / step)) + 1
    return lo + step * np.arange(npts)


def gaussian_limit(
    gp: GaussianLimitParams, grid: np.ndarray | None = None, dim: int | None = None
) -> HybridGaussianState:
    """The limit object: N(u_z, mu(1-mu)) times a displaced thermal state."""
    if grid is None:
        grid = default_grid(gp.mu, gp.classical_mean)
    if dim is None:
        dim = default_fock_dim(gp.beta)
    f = norm.pdf(grid, loc=gp.classical_mean, scale=math.sqrt(gp.classical_var))
    classical = ClassicalDensity(grid, f)
    quantum = displaced_thermal(gp, dim)
    return HybridGaussianState(classical, dim, True, quantum=quantum)


def smoothed_classical_density(
    params: ModelParams, u, grid: np.ndarray | None = None
) -> ClassicalDensity:
    """Marginal of the T-channel: sum_j p_{n,u}(j) N(g_n(j), 1/(2 sqrt(n))).

    With ``grid=None`` a covering grid is built automatically; a supplied
    grid must already cover the support (the mass check errors otherwise).
    """
    u = as_local(u)
    j_vals, probs, _ = block_pmf_window(params, u)
    g = classical_coordinate(params, j_vals)
    ksd = math.sqrt(0.5 / math.sqrt(params.n))
    if grid is None:
        center = float(np.sum(probs * g) / np.sum(probs))
        grid = default_grid(
            params.mu,
            center,
            extra_lo=abs(center - (g.min() - 8.0 * ksd)),
            extra_hi=abs((g.max() + 8.0 * ksd) - center),
        )
    vals = norm.pdf(grid[:, None], loc=g[None, :], scale=ksd) @ probs
    return ClassicalDensity(grid, vals)


def apply_T(
    params: ModelParams,
    u,
    grid: np.ndarray | None = None,
    dim: int | None = None,
    eps_tail: float = 0.2,
) -> HybridGaussianState:
    """Map n shifted qubits to the hybrid classical x quantum object.

    Keeps blocks inside ``typical_set(eps_tail)``; the dropped probability
    must stay below 1e-9 (else the call errors, asking for a larger window)
    and is reported on the returned state.  Requires ``dim >= 2 j_max + 1``
    for the largest kept block.
    """
    u = as_local(u)
    j_lo, j_hi = typical_set(params, eps_tail)
    j_all, probs_all, win_drop = block_pmf_window(
        params, u, tail=min(WINDOW_TAIL_MASS, CHANNEL_DROP_MASS / 10.0)
    )
    keep = (j_all >= j_lo) & (j_all <= j_hi) & (probs_all > BLOCK_SKIP_MASS)
    j_keep = j_all[keep]
    p_keep = probs_all[keep]
    dropped = max(1.0 - float(p_keep.sum()), 0.0)
    if dropped >= CHANNEL_DROP_MASS:
        raise ValueError(
            f"typical window [{j_lo}, {j_hi}] (eps_tail = {eps_tail}) drops "
            f"block mass {dropped:.3e} >= {CHANNEL_DROP_MASS:.1e}; increase eps_tail"
        )
    d_need = int(round(2.0 * j_keep.max())) + 1
    if dim is None:
        dim = d_need
    if dim < d_need:
        raise ValueError(
            f"Fock cutoff dim = {dim} smaller than largest kept block "
            f"(2 j_max + 1 = {d_need})"
        )
    g = classical_coordinate(params, j_keep)
    ksd = math.sqrt(0.5 / math.sqrt(params.n))
    if grid is None:
        center = float(np.sum(p_keep * g))
        grid = default_grid(
            params.mu,
            center,
            extra_lo=abs(center - (g.min() - 8.0 * ksd)),
            extra_hi=abs((g.max() + 8.0 * ksd) - center),
        )
    blocks = np.empty((len(j_keep), dim, dim), dtype=complex)
    for i, j in enumerate(j_keep):
        blocks[i] = embed_block(block_state(params, u, j), dim)
    weights = norm.pdf(grid[:, None], loc=g[None, :], scale=ksd) * p_keep[None, :]
    classical = ClassicalDensity(grid, weights.sum(axis=1), expected_mass=1.0 - dropped)
    return HybridGaussianState(
        classical, dim, False, weights=weights, blocks=blocks, dropped_mass=dropped
    )


def hybrid_trace_distance(a: HybridGaussianState, b: HybridGaussianState) -> float:
    """integral dx || f_a(x) rho_a(x) - f_b(x) rho_b(x) ||_1, trapezoid rule.

    Both states must share the classical grid and the Fock cutoff.
    """
    _check_same_grid(a.classical.x, b.classical.x)
    if a.dim != b.dim:
        raise ValueError(f"Fock cutoffs differ: {a.dim} vs {b.dim}")
    nx = len(a.classical.x)
    chunk = max(4, int(6.0e6 // (a.dim * a.dim)))
    d_vals = np.empty(nx, dtype=float)
    for start in range(0, nx, chunk):
        sl = slice(start, min(start + chunk, nx))
        diff = a.joint_stack(sl) - b.joint_stack(sl)
        diff = 0.5 * (diff + np.conj(np.swapaxes(diff, -1, -2)))
        w = np.linalg.eigvalsh(diff)
        d_vals[sl] = np.abs(w).sum(axis=1)
    return float(_trapz(d_vals, a.classical.x))


@dataclass
class BlockMixture:
    """Classical-quantum state on the valid-j lattice: entries (j, q_j, tau_j).

    ``states[i]`` is a (2 j_i + 1)-dimensional density matrix in the
    k-ladder basis; ``leaked[i]`` is the mass that had to be filled in as
    maximally mixed because the source state leaked outside the block (or
    outside the Fock cutoff).  ``dropped`` is lattice mass never built.
    """

    js: np.ndarray
    probs: np.ndarray
    states: list
    leaked: np.ndarray
    dropped: float = 0.0


def apply_S(gp: GaussianLimitParams, n: int, dim: int | None = None) -> BlockMixture:
    """Bin the Gaussian pair back onto n-qubit block data.

    The classical coordinate X ~ N(u_z, mu(1-mu)) selects the block through
    j(X) = floor(sqrt(n) X + n(mu - 1/2)) snapped to the valid-j lattice,
    with the extreme cells absorbing the out-of-range tails; the quantum
    part is the displaced thermal state compressed into the first 2j+1
    levels, topped up with a maximally mixed filler for the leaked mass.
    """
    params = ModelParams(gp.mu, n)
    if dim is None:
        dim = default_fock_dim(gp.beta)
    phi = displaced_thermal(gp, dim)
    sd = math.sqrt(gp.classical_var)
    j_lattice = valid_j_values(n)
    # cells [g_n(j), g_n(j) + 1/sqrt(n)) on the classical axis
    g_edges_lo = classical_coordinate(params, j_lattice)
    g_edges_hi = g_edges_lo + 1.0 / math.sqrt(n)
    lo = np.array(g_edges_lo)
    hi = np.array(g_edges_hi)
    lo[0] = -np.inf
    hi[-1] = np.inf
    q = norm.cdf(hi, loc=gp.classical_mean, scale=sd) - norm.cdf(
        lo, loc=gp.classical_mean, scale=sd
    )
    keep = q > BLOCK_SKIP_MASS
    dropped = float(q[~keep].sum())
    js = j_lattice[keep]
    qs = q[keep]
    states: list[np.ndarray] = []
    leaks = np.empty(len(js), dtype=float)
    for i, j in enumerate(js):
        d_block = int(round(2.0 * j)) + 1
        m = min(d_block, dim)
        tau = np.zeros((d_block, d_block), dtype=complex)
        tau[:m, :m] = phi[:m, :m]
        leak = 1.0 - float(np.trace(tau).real)
        leaks[i] = leak
        tau[np.arange(d_block), np.arange(d_block)] += leak / d_block
        states.append(tau)
    return BlockMixture(js, qs, states, leaks, dropped)


def blockwise_distance(mix: BlockMixture, params: ModelParams, u) -> float:
    """sum_j || q_j tau_j - p_{n,u}(j) rho_j ||_1 over the valid lattice.

    Blocks present on only one side contribute their full mass; lattice
    mass outside both windows is added as an exact remainder, so the
    returned value is an upper bound tight to ~1e-12 on the full sum.
    """
    u = as_local(u)
    j_p, p_probs, p_drop = block_pmf_window(params, u)
    p_map = {float(j): float(p) for j, p in zip(j_p, p_probs)}
    q_map = {
        float(j): (float(q), s) for j, q, s in zip(mix.js, mix.probs, mix.states)
    }
    total = 0.0
    for j in sorted(set(p_map) | set(q_map)):
        p = p_map.get(j, 0.0)
        q, tau = q_map.get(j, (0.0, None))
        if p <= BLOCK_SKIP_MASS and q <= BLOCK_SKIP_MASS:
            total += abs(q - p)
            continue
        d_block = int(round(2.0 * j)) + 1
        m = q * tau if tau is not None else np.zeros((d_block, d_block), dtype=complex)
        if p > 0.0:
            m = m - p * block_state(params, u, j)
        m = 0.5 * (m + m.conj().T)
        total += float(np.sum(np.abs(np.linalg.eigvalsh(m))))
    return total + p_drop + mix.dropped


@dataclass
class SweepRow:
    n: int
    dist_T: float
    dist_S: float
    u_effective: tuple
    clamped: bool


@dataclass
class SweepConfig:
    eps_tail: float = 0.2
    clamp: bool = True
    delta_adm: float = 0.02
    std_mult: float = 8.0
    step_divisor: float = 50.0


@dataclass
class SweepResult:
    rows: list
    slope_T: float
    slope_S: float
    resid_T: float
    resid_S: float

    def table(self) -> list:
        """Rows as dicts with the sweep CSV columns."""
        out = []
        for r in self.rows:
            out.append(
                {
                    "n": r.n,
                    "dist_T": r.dist_T,
                    "dist_S": r.dist_S,
                    "slope_T": self.slope_T,
                    "slope_S": self.slope_S,
                }
            )
        return out


def _clamp_u(mu: float, u: LocalParams, n: int, delta: float) -> tuple[LocalParams, bool]:
    rn = math.sqrt(n)
    lo = (0.5 + delta - mu) * rn
    hi = (1.0 - delta - mu) * rn
    uz = min(max(u.uz, lo), hi)
    if uz != u.uz:
        return LocalParams(u.ux, u.uy, uz), True
    return u, False


def convergence_sweep(mu: float, u, n_list, config: SweepConfig | None = None) -> SweepResult:
    """Distances to/from the Gaussian limit over a list of n, with slopes.

    For each n, ``dist_T`` compares ``apply_T`` of the shifted n-qubit data
    with ``gaussian_limit`` on a shared grid and cutoff, and ``dist_S``
    compares ``apply_S`` of the Gaussian pair with the true block data.
    When ``u_z`` makes the shifted eigenvalue inadmissible at small n it is
    clamped to ``delta_adm`` inside the boundary (row flagged) so that both
    objects stay well defined; the log-log slopes are least-squares fits
    over all rows.
    """
    cfg = config or SweepConfig()
    u = as_local(u)
    rows = []
    for n in n_list:
        params = ModelParams(mu, int(n))
        u_eff, clamped = (u, False)
        if cfg.clamp:
            u_eff, clamped = _clamp_u(mu, u, int(n), cfg.delta_adm)
        gp = GaussianLimitParams(mu, u_eff)
        j_lo, j_hi = typical_set(params, cfg.eps_tail)
        dim = int(round(2.0 * j_hi)) + 1
        g_lo = classical_coordinate(params, np.array([j_lo]))[0]
        g_hi = classical_coordinate(params, np.array([j_hi]))[0]
        ksd = math.sqrt(0.5 / math.sqrt(params.n))
        center = gp.classical_mean
        grid = default_grid(
            mu,
            center,
            extra_lo=abs(center - (g_lo - 8.0 * ksd)),
            extra_hi=abs((g_hi + 8.0 * ksd) - center),
            std_mult=cfg.std_mult,
            step_divisor=cfg.step_divisor,
        )
        t_state = apply_T(params, u_eff, grid=grid, dim=dim, eps_tail=cfg.eps_tail)
        limit = gaussian_limit(gp, grid=grid, dim=dim)
        dist_t = hybrid_trace_distance(t_state, limit)
        mix = apply_S(gp, params.n)
        dist_s = blockwise_distance(mix, params, u_eff)
        rows.append(
            SweepRow(
                n=params.n,
                dist_T=dist_t,
                dist_S=dist_s,
                u_effective=(u_eff.ux, u_eff.uy, u_eff.uz),
                clamped=clamped,
            )
        )
    ln_n = np.log([r.n for r in rows])
    slope_t, resid_t = _loglog_fit(ln_n, [r.dist_T for r in rows])
    slope_s, resid_s = _loglog_fit(ln_n, [r.dist_S for r in rows])
    return SweepResult(rows, slope_t, slope_s, resid_t, resid_s)


def _loglog_fit(ln_n: np.ndarray, dists) -> tuple[float, float]:
    y = np.log(np.asarray(dists, dtype=float))
    coeffs, residuals, *_ = np.polyfit(ln_n, y, 1, full=True)
    resid = float(residuals[0]) if len(residuals) else 0.0
    return float(coeffs[0]), resid
