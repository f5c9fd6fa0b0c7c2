"""Variational flows along a frozen trajectory and the Malliavin spectral probe.

The forward tangent flow linearizes the one-step map of the nonlinear solver
exactly: with E the diagonal integrating factor and L_n the linearized
advection at the frozen state U_n,

    tangent:  xi   -> E (xi - dt L_n xi)
    adjoint:  rho  -> (I - dt L_n^T) (E rho),

so the backward flow is the exact matrix transpose of the forward one and the
duality <J xi, phi> = <xi, K phi> holds to floating-point precision, not just
to discretization order.  L_n^T is realized analytically (integration by
parts plus gradient-tensor contractions on the dealiased grid), which agrees
with the literal transpose because the grid quadrature is exact below the
Nyquist limit; a test pins this down by assembling both matrices densely.

The response Gram matrix over a low-mode block is accumulated from one
backward solve per basis vector,

    G[i, j] = sum_entries amp^2 * int_0^T <forced mode, K_{r,T} phi_i>
                                          <forced mode, K_{r,T} phi_j> dr,

with trapezoid quadrature on the solver grid, and is therefore symmetric
positive semidefinite by construction.  Spectral probes report three honest
quantities for the cone of states holding at least an alpha fraction of their
norm in the low-mode block: the compressed minimal eigenvalue, a sampled
infimum over the cone, and a weak-duality lower bound; the exact constrained
minimum is a nonconvex problem we deliberately do not claim to solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .galerkin import (
    EquationParams,
    ModeBasis,
    NoiseSpec,
    SpectralState,
    TrajectoryRecord,
    bilinear_transform,
    slot_stack,
    slot_unstack,
)
from .lattice import MAGNETIC, VELOCITY, Mode, norm_sq
from .reachability import ForcedSet, parity_unions


class FrozenPath:
    """A stride-1 trajectory with cached physical fields for linearization."""

    def __init__(self, record: TrajectoryRecord):
        if record.snapshot_stride != 1:
            raise ValueError("linearized flows require a stride-1 trajectory record")
        self.record = record
        self.basis: ModeBasis = record.basis
        self.params: EquationParams = record.params
        self.dt: float = record.dt
        self.n_steps: int = record.n_steps
        self.states: np.ndarray = record.states
        lam = self.basis.dissipation_array(self.params)
        self.decay = np.exp(-lam * self.dt)
        self._fields: dict[int, tuple] = {}

    def index_of(self, t: float) -> int:
        rel = (t - float(self.record.times[0])) / self.dt
        i = int(round(rel))
        if abs(rel - i) > 1e-8 or i < 0 or i > self.n_steps:
            raise ValueError(f"time {t} is not on the step grid of the path")
        return i

    def fields(self, n: int):
        """Physical values and gradient tensors of (u, b) at step n."""
        cached = self._fields.get(n)
        if cached is None:
            w, g = self.basis.synthesize_with_gradient(
                slot_stack(self.basis, self.states[n]))
            cached = (w[0], w[1], g[0], g[1])
            self._fields[n] = cached
        return cached


def _adv(w, g):
    # (w . grad) field, with g[..., d, c, :, :] = d-th derivative of component c
    return np.einsum("...dmn,...dcmn->...cmn", w, g)


def _grad_dot(g, phi):
    # G(w, phi)_i = sum_j (d_i w_j) phi_j
    return np.einsum("...icmn,...cmn->...imn", g, phi)


def linearized_advection(path: FrozenPath, n: int, xi: np.ndarray) -> np.ndarray:
    """Derivative of the advection term at the frozen state, applied to xi."""
    basis = path.basis
    if not path.params.nonlinearity_enabled:
        return np.zeros_like(xi)
    u, b, gu, gb = path.fields(n)
    x, gx = basis.synthesize_with_gradient(slot_stack(basis, xi))
    xu, xb, gxu, gxb = x[0], x[1], gx[0], gx[1]
    rows = np.stack([
        _adv(u, gxu) - _adv(b, gxb) + _adv(xu, gu) - _adv(xb, gb),
        _adv(u, gxb) - _adv(b, gxu) + _adv(xu, gb) - _adv(xb, gu),
    ])
    return slot_unstack(basis, basis.gather(rows))


def linearized_advection_adjoint(path: FrozenPath, n: int, phi: np.ndarray) -> np.ndarray:
    """Exact transpose of :func:`linearized_advection` on the truncation."""
    basis = path.basis
    if not path.params.nonlinearity_enabled:
        return np.zeros_like(phi)
    u, b, gu, gb = path.fields(n)
    p, gp = basis.synthesize_with_gradient(slot_stack(basis, phi))
    pu, pb, gpu, gpb = p[0], p[1], gp[0], gp[1]
    rows = np.stack([
        -_adv(u, gpu) + _adv(b, gpb) + _grad_dot(gu, pu) + _grad_dot(gb, pb),
        _adv(b, gpu) - _adv(u, gpb) - _grad_dot(gb, pu) - _grad_dot(gu, pb),
    ])
    return slot_unstack(basis, basis.gather(rows))


def _tangent_step(path: FrozenPath, n: int, xi: np.ndarray) -> np.ndarray:
    return path.decay * (xi - path.dt * linearized_advection(path, n, xi))


def _adjoint_step(path: FrozenPath, n: int, rho: np.ndarray) -> np.ndarray:
    rho = path.decay * rho
    return rho - path.dt * linearized_advection_adjoint(path, n, rho)


def jacobian_apply(path: FrozenPath, xi: SpectralState, s: float, t: float) -> SpectralState:
    """Tangent flow J_{s,t} xi along the frozen path, same scheme and grid."""
    i, j = path.index_of(s), path.index_of(t)
    if i > j:
        raise ValueError("need s <= t")
    v = xi.coeffs.copy()
    for n in range(i, j):
        v = _tangent_step(path, n, v)
    return SpectralState(path.basis, v, t)


def adjoint_apply(path: FrozenPath, phi: SpectralState, r: float, t: float) -> SpectralState:
    """Backward dual flow K_{r,t} phi, the exact transpose of the tangent flow."""
    i, j = path.index_of(r), path.index_of(t)
    if i > j:
        raise ValueError("need r <= t")
    v = phi.coeffs.copy()
    for n in range(j - 1, i - 1, -1):
        v = _adjoint_step(path, n, v)
    return SpectralState(path.basis, v, r)


def second_variation_apply(path: FrozenPath, xi: SpectralState, xi2: SpectralState,
                           s: float, t: float) -> SpectralState:
    """Second derivative of the flow map in directions (xi, xi2), from s to t.

    Propagates both tangents alongside and accumulates the symmetric
    quadratic source, which is the exact second derivative of the discrete
    one-step map; the output is symmetric in (xi, xi2) by construction.
    """
    i, j = path.index_of(s), path.index_of(t)
    if i > j:
        raise ValueError("need s <= t")
    basis = path.basis
    a, b = xi.coeffs.copy(), xi2.coeffs.copy()
    rho = np.zeros(basis.dim)
    for n in range(i, j):
        src = np.zeros(basis.dim)
        if path.params.nonlinearity_enabled:
            src = bilinear_transform(basis, a, b) + bilinear_transform(basis, b, a)
        rho = path.decay * (rho - path.dt * (linearized_advection(path, n, rho) + src))
        a = _tangent_step(path, n, a)
        b = _tangent_step(path, n, b)
    return SpectralState(basis, rho, t)


def adjoint_profile(path: FrozenPath, phi: np.ndarray, r: float, t: float) -> np.ndarray:
    """All backward levels K_{s,t} phi for s on the grid between r and t.

    ``phi`` may be a single vector (dim,) or a batch (ncols, dim); the result
    gains a leading time axis of length j - i + 1 with index 0 at time r.
    """
    i, j = path.index_of(r), path.index_of(t)
    if i > j:
        raise ValueError("need r <= t")
    levels = np.empty((j - i + 1,) + phi.shape)
    levels[j - i] = phi
    v = phi.copy()
    for n in range(j - 1, i - 1, -1):
        v = _adjoint_step(path, n, v)
        levels[n - i] = v
    return levels


# ---------------------------------------------------------------------------
# Malliavin matrix assembly and spectral probes.
# ---------------------------------------------------------------------------

@dataclass
class MalliavinMatrix:
    """Response Gram matrix over a low-mode block of the truncation basis."""

    gram: np.ndarray
    modes: list[Mode]
    mode_indices: np.ndarray
    horizon: float
    quadrature_steps: int

    def symmetrized(self) -> np.ndarray:
        return 0.5 * (self.gram + self.gram.T)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.symmetrized())


def _trapezoid_weights(n: int, dt: float) -> np.ndarray:
    w = np.full(n + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def malliavin_quadratic_form(path: FrozenPath, noise: NoiseSpec,
                             phi: SpectralState) -> float:
    """<M_{0,T} phi, phi>: forced-mode response energy of the backward flow."""
    T = float(path.record.times[-1])
    t0 = float(path.record.times[0])
    levels = adjoint_profile(path, phi.coeffs, t0, T)
    idx = noise.mode_indices(path.basis)
    f = levels[:, idx]  # (n+1, d)
    w = _trapezoid_weights(path.n_steps, path.dt)
    return float(np.einsum("ne,n,e->", f**2, w, noise.amplitudes() ** 2))


def assemble_malliavin(path: FrozenPath, noise: NoiseSpec,
                       n_level: Optional[int] = None) -> MalliavinMatrix:
    """Gram matrix over the modes with |k| <= n_level (default: full truncation).

    One batched backward solve per basis block; the result is a Gram matrix
    of quadrature-weighted response profiles and hence PSD up to roundoff.
    """
    basis = path.basis
    if n_level is None:
        n_level = basis.n_cut
    sel = basis.level_indices(n_level)
    T = float(path.record.times[-1])
    t0 = float(path.record.times[0])
    phi0 = np.zeros((len(sel), basis.dim))
    phi0[np.arange(len(sel)), sel] = 1.0
    levels = adjoint_profile(path, phi0, t0, T)  # (n+1, ncols, dim)
    idx = noise.mode_indices(basis)
    prof = levels[:, :, idx]  # (n+1, ncols, d)
    w = _trapezoid_weights(path.n_steps, path.dt)
    weighted = prof * np.sqrt(w)[:, None, None] * noise.amplitudes()
    flat = np.moveaxis(weighted, 1, 0).reshape(len(sel), -1)
    gram = flat @ flat.T
    modes = [basis.mode_at(i) for i in sel]
    return MalliavinMatrix(gram=gram, modes=modes, mode_indices=sel,
                           horizon=T - t0, quadrature_steps=path.n_steps)


@dataclass(frozen=True)
class ConeSpec:
    """States keeping at least an ``alpha`` fraction of norm in modes |k| <= n."""

    alpha: float
    n: int

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("cone fraction alpha must lie in (0, 1]")
        if self.n < 1:
            raise ValueError("cone level n must be >= 1")


@dataclass
class ConeReport:
    compressed_min_eig: float
    sampled_inf: float
    dual_lower_bound: float
    samples: int
    seed: object

    def to_dict(self) -> dict:
        return {
            "compressed_min_eig": self.compressed_min_eig,
            "sampled_inf": self.sampled_inf,
            "dual_lower_bound": self.dual_lower_bound,
            "samples": self.samples,
            "seed": self.seed if isinstance(self.seed, (int, type(None))) else str(self.seed),
        }


def cone_infimum(matrix: MalliavinMatrix, cone: ConeSpec, samples: int = 200,
                 seed=0) -> ConeReport:
    """Three spectral statistics of the Gram matrix over the cone.

    compressed_min_eig is exact on the low-mode subspace; sampled_inf is an
    upper bound on the cone infimum from explicit candidates plus random cone
    points; dual_lower_bound is a valid lower bound from weak Lagrangian
    duality and is reported as a bound, never as the infimum itself.
    """
    g = matrix.symmetrized()
    dim = g.shape[0]
    in_p = np.array([norm_sq(m.k) <= cone.n * cone.n for m in matrix.modes])
    p_idx = np.where(in_p)[0]
    q_idx = np.where(~in_p)[0]
    if p_idx.size == 0:
        raise ValueError(f"cone level n={cone.n} selects no modes of the matrix")

    evals_p, evecs_p = np.linalg.eigh(g[np.ix_(p_idx, p_idx)])
    compressed = float(evals_p[0])

    rng = np.random.default_rng(seed)
    candidates = []
    vp = np.zeros(dim)
    vp[p_idx] = evecs_p[:, 0]
    candidates.append(vp)
    if q_idx.size:
        evals_q, evecs_q = np.linalg.eigh(g[np.ix_(q_idx, q_idx)])
        vq = np.zeros(dim)
        vq[q_idx] = evecs_q[:, 0]
        # boundary candidate: minimal P-direction mixed with minimal Q-direction
        candidates.append(math.sqrt(cone.alpha) * vp + math.sqrt(1.0 - cone.alpha) * vq)
    for _ in range(samples):
        xp = rng.standard_normal(p_idx.size)
        xp /= np.linalg.norm(xp)
        phi = np.zeros(dim)
        if q_idx.size:
            t = cone.alpha + (1.0 - cone.alpha) * rng.random()
            xq = rng.standard_normal(q_idx.size)
            xq /= np.linalg.norm(xq)
            phi[p_idx] = math.sqrt(t) * xp
            phi[q_idx] = math.sqrt(1.0 - t) * xq
        else:
            phi[p_idx] = xp
        candidates.append(phi)
    sampled = float(min(phi @ g @ phi for phi in candidates))

    # weak duality: for unit phi on the cone and mu >= 0,
    # phi' G phi >= lambda_min(G - mu (P - alpha I)); the left side is a
    # concave function of mu, so a coarse grid plus a bounded 1-D
    # refinement around its best point recovers the optimum.
    pmat = np.zeros(dim)
    pmat[p_idx] = 1.0
    shift = np.diag(pmat - cone.alpha)
    dual_val = lambda mu: float(np.linalg.eigvalsh(g - mu * shift)[0])
    scale = max(float(np.trace(g)) / dim, 1e-300)
    grid = np.concatenate([[0.0], np.geomspace(1e-6 * scale, 1e3 * scale, 61)])
    values = [dual_val(mu) for mu in grid]
    i_best = int(np.argmax(values))
    best = values[i_best]
    lo = grid[max(i_best - 1, 0)]
    hi = grid[min(i_best + 1, len(grid) - 1)]
    if hi > lo:
        from scipy.optimize import minimize_scalar
        res = minimize_scalar(lambda mu: -dual_val(mu), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-12 * max(hi, 1.0)})
        best = max(best, -float(res.fun))
    return ConeReport(compressed_min_eig=compressed, sampled_inf=sampled,
                      dual_lower_bound=best, samples=samples, seed=seed)


def unstable_quadratic_form(state: SpectralState, forced: ForcedSet, depth: int) -> float:
    """Energy of a state on the bracket-reachable directions up to a depth.

    Magnetic components are collected on the union of even-indexed
    generations and velocity components on the union of odd-indexed ones
    (each reachable mode counted once), both intersected with the state's
    truncation.  Generations are tracked inside an inflated window so that
    excursions slightly beyond the truncation are not starved.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    basis = state.basis
    n_gen = 2 * depth + 1
    window = basis.n_cut + min(
        math.ceil(2.0 * forced.max_modulus()) * (n_gen + 1), 4 * basis.n_cut
    )
    even, odd = parity_unions(forced, n_gen, window_bound=window)
    total = 0.0
    for slot, union in ((MAGNETIC, even), (VELOCITY, odd)):
        seen = set()
        for v in union:
            k = v if (v[0] > 0 or (v[0] == 0 and v[1] > 0)) else (-v[0], -v[1])
            if k in seen or norm_sq(k) > basis.n_cut**2:
                continue
            seen.add(k)
            j = basis._kindex[k]
            base = slot * 2 * basis.n_k + 2 * j
            total += float(state.coeffs[base] ** 2 + state.coeffs[base + 1] ** 2)
    return total


def sample_cone_state(basis: ModeBasis, cone: ConeSpec, rng) -> SpectralState:
    """Random unit state on the cone (uniform mixing fraction in [alpha, 1])."""
    sel = basis.level_indices(cone.n)
    mask = np.zeros(basis.dim, dtype=bool)
    mask[sel] = True
    xp = rng.standard_normal(int(mask.sum()))
    xp /= np.linalg.norm(xp)
    coeffs = np.zeros(basis.dim)
    if mask.all():
        coeffs[mask] = xp
    else:
        t = cone.alpha + (1.0 - cone.alpha) * rng.random()
        xq = rng.standard_normal(int((~mask).sum()))
        xq /= np.linalg.norm(xq)
        coeffs[mask] = math.sqrt(t) * xp
        coeffs[~mask] = math.sqrt(1.0 - t) * xq
    return SpectralState(basis, coeffs)
