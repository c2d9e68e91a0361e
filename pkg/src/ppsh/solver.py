"""Damped-Newton finite-difference solver for the Dirichlet problem.

Solves tilde(D^2_h u) = f(x, u)^(1/C(n,p)) on a uniform box grid with fixed
boundary values, where tilde is the degree-one normalized p-sum product of
the discrete Hessian.  Concavity of tilde makes Newton from a discrete
supersolution the natural iteration; each accepted step must keep every node
Hessian strictly inside the cone and reduce the residual sup-norm.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .calculus import tilde_grad_batch
from .errors import (
    BarrierOrderingError,
    ConeBreachError,
    GridMismatchError,
    ProblemFormatError,
    SingularLinearizationError,
    StencilError,
)
from .exprparse import ExpressionError, parse_expression
from .operator import SymMatrix, enumerate_tuples
from .ptuples import TupleTable

_SPACING_RTOL = 1e-12


@dataclass
class GridField:
    """Scalar node values on a uniform box grid.

    The spacing must agree across axes; boundary nodes are the outermost
    layer of the index box.
    """

    box: tuple
    values: np.ndarray

    def __post_init__(self):
        self.box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != len(self.box):
            raise ValueError("values dimensionality does not match the box")
        if not all(m >= 3 for m in self.values.shape):
            raise ValueError("need at least 3 nodes per axis")
        if not np.isfinite(self.values).all():
            raise ValueError("grid values must be finite")
        spacings = [
            (hi - lo) / (m - 1) for (lo, hi), m in zip(self.box, self.values.shape)
        ]
        href = spacings[0]
        if any(abs(s - href) > _SPACING_RTOL * href for s in spacings):
            raise ValueError(f"spacing must be uniform across axes, got {spacings}")

    @property
    def n(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def h(self) -> float:
        (lo, hi) = self.box[0]
        return (hi - lo) / (self.shape[0] - 1)

    @property
    def axes(self) -> list:
        return [
            np.linspace(lo, hi, m) for (lo, hi), m in zip(self.box, self.shape)
        ]

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for k in range(self.n):
            sl = [slice(None)] * self.n
            sl[k] = 0
            mask[tuple(sl)] = True
            sl[k] = -1
            mask[tuple(sl)] = True
        return mask

    def node_coords(self) -> np.ndarray:
        """(#nodes, n) coordinates in C order."""
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def interior_coords(self) -> np.ndarray:
        grids = np.meshgrid(*[ax[1:-1] for ax in self.axes], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def interior_values(self) -> np.ndarray:
        inner = tuple(slice(1, -1) for _ in range(self.n))
        return self.values[inner].ravel()


def grid_from_callable(box, shape, fn) -> GridField:
    g = GridField(box=tuple(box), values=np.zeros(tuple(shape)))
    vals = fn(g.node_coords()).reshape(g.shape)
    return GridField(box=g.box, values=vals)


@dataclass
class DirichletProblem:
    """Dirichlet data for the normalized p-sum product equation.

    psi is either a callable on (K, n) coordinate arrays (evaluated throughout
    the box to seed the initial guess) or a full-grid array of node values
    whose boundary layer provides the data.  f(x, u) must satisfy
    f >= f0 > 0 and be non-decreasing in u; both are enforced by sampling.
    """

    p: int
    box: tuple
    shape: tuple
    psi: object
    f: object
    f_u: object
    f0: float
    f_is_constant: bool = False

    def __post_init__(self):
        self.box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        self.shape = tuple(int(m) for m in self.shape)
        n = len(self.box)
        if n not in (2, 3):
            raise ValueError("the solver supports spatial dimension 2 or 3")
        if not 1 <= self.p <= n:
            raise ValueError(f"need 1 <= p <= n, got p={self.p}")
        if not self.f0 > 0:
            raise ValueError("f0 must be strictly positive")
        self._validate_source()

    @property
    def n(self) -> int:
        return len(self.box)

    def _validate_source(self):
        rng = np.random.default_rng(1234)
        lows = np.array([lo for lo, _ in self.box])
        highs = np.array([hi for _, hi in self.box])
        x = lows + rng.uniform(0, 1, size=(256, self.n)) * (highs - lows)
        uref = self.psi(x) if callable(self.psi) else np.zeros(len(x))
        uspread = 10.0 * (1.0 + float(np.abs(uref).max()))
        u = rng.uniform(-uspread, uspread, size=len(x))
        fv = np.asarray(self.f(x, u), dtype=float)
        if np.any(fv < self.f0 * (1 - 1e-9) - 1e-12):
            raise ValueError(
                f"sampled source dips to {fv.min():.6g}, below f0={self.f0:.6g}"
            )
        dv = np.asarray(self.f_u(x, u), dtype=float)
        if np.any(dv < -1e-9 * (1 + np.abs(fv))):
            raise ValueError("source must be non-decreasing in u (comparison principle)")

    def f_tilde(self, x, u):
        m = math.comb(self.n, self.p)
        return np.asarray(self.f(x, u), dtype=float) ** (1.0 / m)

    def f_tilde_u(self, x, u):
        m = math.comb(self.n, self.p)
        fv = np.asarray(self.f(x, u), dtype=float)
        return (1.0 / m) * fv ** (1.0 / m - 1.0) * np.asarray(self.f_u(x, u), dtype=float)


@dataclass
class SolverConfig:
    """Newton iteration knobs; None entries are derived from the problem."""

    tol: float | None = None            # residual sup-norm target
    max_iters: int = 50
    backtrack: float = 0.5
    min_step: float = 1e-6
    margin: float | None = None         # strict cone margin kept by every iterate
    init_amplitude: float = 1.0
    barrier_factor: float = 0.1

    def __post_init__(self):
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0 < self.barrier_factor < 1:
            raise ValueError("barrier_factor must lie in (0, 1)")


@dataclass
class SolverReport:
    converged: bool
    iterations: int
    final_residual: float
    min_margin: float
    residual_history: list = field(default_factory=list)
    message: str = ""

    def to_json_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "min_margin": self.min_margin,
            "residual_history": list(self.residual_history),
            "message": self.message,
        }


@dataclass
class MonitorReport:
    """Interior-estimate monitors for a solution/barrier pair."""

    delta: float
    pogorelov_sup: float
    pogorelov_node: tuple
    gradient_sup: float | None
    gradient_node: tuple | None
    ball_radius: float

    def to_json_dict(self) -> dict:
        return {
            "delta": self.delta,
            "pogorelov_sup": self.pogorelov_sup,
            "pogorelov_node": list(self.pogorelov_node),
            "gradient_sup": self.gradient_sup,
            "gradient_node": None if self.gradient_node is None else list(self.gradient_node),
            "ball_radius": self.ball_radius,
        }


# ---------------------------------------------------------------------------
# finite differences


def _inner(shape):
    return tuple(slice(1, m - 1) for m in shape)


def _shifted(inner, axis, offset):
    out = list(inner)
    s = out[axis]
    out[axis] = slice(s.start + offset, s.stop + offset)
    return tuple(out)


def fd_hessian_field(u: GridField) -> np.ndarray:
    """Discrete Hessians at every interior node, shape (K, n, n), C order.

    Diagonal entries by second central differences, mixed entries by the
    four-point cross formula; both are exact on quadratics.
    """
    v = u.values
    n = u.n
    h = u.h
    inner = _inner(v.shape)
    kshape = tuple(m - 2 for m in v.shape)
    H = np.empty(kshape + (n, n))
    for k in range(n):
        up = _shifted(inner, k, +1)
        dn = _shifted(inner, k, -1)
        H[..., k, k] = (v[up] - 2.0 * v[inner] + v[dn]) / h**2
    for k in range(n):
        for l in range(k + 1, n):
            pp = _shifted(_shifted(inner, k, +1), l, +1)
            mm = _shifted(_shifted(inner, k, -1), l, -1)
            pm = _shifted(_shifted(inner, k, +1), l, -1)
            mp_ = _shifted(_shifted(inner, k, -1), l, +1)
            val = (v[pp] + v[mm] - v[pm] - v[mp_]) / (4.0 * h**2)
            H[..., k, l] = val
            H[..., l, k] = val
    return H.reshape(-1, n, n)


def fd_hessian(u: GridField, node) -> SymMatrix:
    """Discrete Hessian at one interior node (multi-index tuple)."""
    node = tuple(int(i) for i in node)
    if len(node) != u.n:
        raise StencilError(f"node {node} has wrong dimension for a {u.n}-d grid")
    for i, m in zip(node, u.shape):
        if not 1 <= i <= m - 2:
            raise StencilError(f"node {node} is not interior to shape {u.shape}")
    v = u.values
    h = u.h
    n = u.n
    a = np.zeros((n, n))
    for k in range(n):
        up = list(node)
        dn = list(node)
        up[k] += 1
        dn[k] -= 1
        a[k, k] = (v[tuple(up)] - 2.0 * v[node] + v[tuple(dn)]) / h**2
    for k in range(n):
        for l in range(k + 1, n):
            idx = {}
            for sk, sl in ((1, 1), (-1, -1), (1, -1), (-1, 1)):
                q = list(node)
                q[k] += sk
                q[l] += sl
                idx[(sk, sl)] = v[tuple(q)]
            val = (idx[(1, 1)] + idx[(-1, -1)] - idx[(1, -1)] - idx[(-1, 1)]) / (4.0 * h**2)
            a[k, l] = val
            a[l, k] = val
    return SymMatrix(a)


def _field_margins_tilde(H: np.ndarray, p: int):
    """Cone margins and normalized values for a stack of node Hessians."""
    n = H.shape[-1]
    eigs = np.linalg.eigvalsh(H)  # ascending
    margins = eigs[:, :p].sum(axis=1)
    idx = enumerate_tuples(n, p).index_array
    sums = eigs[:, idx].sum(axis=-1)
    mp = sums.prod(axis=-1)
    m = math.comb(n, p)
    tilde = np.clip(mp, 0.0, None) ** (1.0 / m)
    return margins, tilde


def assemble_residual(u: GridField, prob: DirichletProblem) -> np.ndarray:
    """Interior residual tilde(D^2_h u) - f(x, u)^(1/C(n,p)), C order.

    Raises ConeBreachError naming the first node whose Hessian leaves the
    closed cone (tolerance relative to 1 + max|H|).
    """
    H = fd_hessian_field(u)
    margins, tilde = _field_margins_tilde(H, prob.p)
    hscale = 1.0 + float(np.abs(H).max())
    if margins.min() < -1e-10 * hscale:
        k = int(margins.argmin())
        node = _interior_node_of_flat(u.shape, k)
        raise ConeBreachError(
            f"discrete Hessian leaves the cone at node {node} (margin {margins[k]:.6g})",
            node=node,
            margin=float(margins[k]),
        )
    x = u.interior_coords()
    return tilde - prob.f_tilde(x, u.interior_values())


def _interior_node_of_flat(shape, flat: int) -> tuple:
    kshape = tuple(m - 2 for m in shape)
    multi = np.unravel_index(flat, kshape)
    return tuple(int(i) + 1 for i in multi)


# ---------------------------------------------------------------------------
# Newton iteration


def _node_id_array(shape) -> np.ndarray:
    ids = -np.ones(shape, dtype=np.int64)
    inner = _inner(shape)
    kshape = tuple(m - 2 for m in shape)
    ids[inner] = np.arange(int(np.prod(kshape))).reshape(kshape)
    return ids


def _assemble_jacobian(u: GridField, prob: DirichletProblem, H: np.ndarray) -> sp.csr_matrix:
    n = u.n
    h = u.h
    _, Gt = (None, None)
    tilde, Gt = tilde_grad_batch(H, prob.p)
    x = u.interior_coords()
    uvals = u.interior_values()
    dft = prob.f_tilde_u(x, uvals)
    ids = _node_id_array(u.shape)
    inner = _inner(u.shape)
    K = Gt.shape[0]
    rows_all, cols_all, data_all = [], [], []
    center_ids = ids[inner].ravel()

    diag_coeff = -2.0 / h**2 * Gt[:, range(n), range(n)].sum(axis=1) - dft
    rows_all.append(center_ids)
    cols_all.append(center_ids)
    data_all.append(diag_coeff)

    for k in range(n):
        for s in (+1, -1):
            nb = ids[_shifted(inner, k, s)].ravel()
            keep = nb >= 0
            rows_all.append(center_ids[keep])
            cols_all.append(nb[keep])
            data_all.append(Gt[keep, k, k] / h**2)

    for k in range(n):
        for l in range(k + 1, n):
            for sk, sl in ((1, 1), (-1, -1), (1, -1), (-1, 1)):
                nb = ids[_shifted(_shifted(inner, k, sk), l, sl)].ravel()
                keep = nb >= 0
                coeff = (sk * sl) * Gt[keep, k, l] / (2.0 * h**2)
                rows_all.append(center_ids[keep])
                cols_all.append(nb[keep])
                data_all.append(coeff)

    rows = np.concatenate(rows_all)
    cols = np.concatenate(cols_all)
    data = np.concatenate(data_all)
    return sp.coo_matrix((data, (rows, cols)), shape=(K, K)).tocsr()


def _laplace_extension(box, shape, boundary_values: np.ndarray) -> np.ndarray:
    """Harmonic interior extension of boundary node values (direct solve)."""
    g = GridField(box=box, values=np.zeros(shape))
    n = g.n
    ids = _node_id_array(shape)
    inner = _inner(shape)
    center = ids[inner].ravel()
    K = center.size
    rows, cols, data = [center], [center], [np.full(K, -2.0 * n)]
    rhs = np.zeros(K)
    for k in range(n):
        for s in (+1, -1):
            nb_ids = ids[_shifted(inner, k, s)].ravel()
            nb_vals = boundary_values[_shifted(inner, k, s)].ravel()
            keep = nb_ids >= 0
            rows.append(center[keep])
            cols.append(nb_ids[keep])
            data.append(np.ones(keep.sum()))
            rhs[~keep] -= nb_vals[~keep]
    L = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(K, K),
    ).tocsr()
    sol = spsolve(L, rhs)
    out = boundary_values.copy()
    out[inner] = sol.reshape(tuple(m - 2 for m in shape))
    return out


def _boundary_grid(prob: DirichletProblem) -> np.ndarray:
    """Node values with exact boundary data and a smooth interior seed."""
    g = GridField(box=prob.box, values=np.zeros(prob.shape))
    if callable(prob.psi):
        vals = np.asarray(prob.psi(g.node_coords()), dtype=float).reshape(prob.shape)
        return vals
    vals = np.asarray(prob.psi, dtype=float)
    if vals.shape != tuple(prob.shape):
        raise ValueError("psi node values must match the grid shape")
    return _laplace_extension(prob.box, prob.shape, vals)


def _initial_guess(prob: DirichletProblem, cfg: SolverConfig, mu: float) -> GridField:
    """Discrete supersolution: boundary-compatible seed plus a ratcheted
    paraboloid well.

    The well |x-c|^2 - R^2 - D (D = R^2/2) is applied on interior nodes only;
    the induced jumps at the boundary ring only add convexity there, and the
    extra depth D keeps the cross-difference artifacts dominated near corners.
    """
    base = _boundary_grid(prob)
    g0 = GridField(box=prob.box, values=base)
    coords = g0.interior_coords()
    center = np.array([(lo + hi) / 2.0 for lo, hi in prob.box])
    r2 = sum(((hi - lo) / 2.0) ** 2 for lo, hi in prob.box)
    well = ((coords - center) ** 2).sum(axis=1) - 1.5 * r2
    inner = _inner(prob.shape)
    kshape = tuple(m - 2 for m in prob.shape)
    amp = max(cfg.init_amplitude, 1e-3)
    for _ in range(80):
        vals = base.copy()
        vals[inner] += (amp * well).reshape(kshape)
        g = GridField(box=prob.box, values=vals)
        H = fd_hessian_field(g)
        margins, tilde = _field_margins_tilde(H, prob.p)
        if margins.min() >= mu:
            ft = prob.f_tilde(coords, g.interior_values())
            if (tilde - ft).min() >= 0.0:
                return g
        amp *= 2.0
    raise RuntimeError(
        "could not ratchet the initial guess into an admissible supersolution"
    )


def newton_solve(prob: DirichletProblem, cfg: SolverConfig | None = None):
    """Damped Newton iteration; returns (solution GridField, SolverReport).

    Linearization rows pair the entrywise gradient of the normalized
    operator with the stencil coefficients of each node Hessian; steps
    backtrack until the trial keeps every node Hessian at margin >= mu and
    strictly reduces the residual sup-norm.
    """
    cfg = cfg or SolverConfig()
    m = math.comb(prob.n, prob.p)
    ft_ref = prob.f0 ** (1.0 / m)
    mu = cfg.margin if cfg.margin is not None else 1e-8 * (1.0 + ft_ref)
    tol = cfg.tol if cfg.tol is not None else 1e-8 * max(1.0, ft_ref)

    u = _initial_guess(prob, cfg, mu)
    inner = _inner(prob.shape)
    kshape = tuple(m_ - 2 for m_ in prob.shape)
    x = u.interior_coords()

    H = fd_hessian_field(u)
    margins, tilde = _field_margins_tilde(H, prob.p)
    res = tilde - prob.f_tilde(x, u.interior_values())
    rnorm = float(np.abs(res).max())
    history = [rnorm]
    min_margin_seen = float(margins.min())

    iterations = 0
    message = ""
    converged = rnorm <= tol
    while not converged and iterations < cfg.max_iters:
        iterations += 1
        J = _assemble_jacobian(u, prob, H)
        try:
            step = spsolve(J, -res)
        except Exception as exc:  # pragma: no cover - scipy raises rarely here
            raise SingularLinearizationError(str(exc)) from exc
        if not np.isfinite(step).all():
            raise SingularLinearizationError("linear solve produced non-finite step")

        s = 1.0
        accepted = False
        while s >= cfg.min_step:
            vals = u.values.copy()
            vals[inner] += (s * step).reshape(kshape)
            trial = GridField(box=prob.box, values=vals)
            Ht = fd_hessian_field(trial)
            margins_t, tilde_t = _field_margins_tilde(Ht, prob.p)
            if margins_t.min() >= mu:
                res_t = tilde_t - prob.f_tilde(x, trial.interior_values())
                rn_t = float(np.abs(res_t).max())
                if rn_t < rnorm:
                    u, H, res, rnorm, margins = trial, Ht, res_t, rn_t, margins_t
                    accepted = True
                    break
            s *= cfg.backtrack
        if not accepted:
            message = (
                "line search stalled: no step kept the cone margin and reduced the residual"
            )
            break
        history.append(rnorm)
        min_margin_seen = min(min_margin_seen, float(margins.min()))
        converged = rnorm <= tol

    report = SolverReport(
        converged=bool(converged),
        iterations=iterations,
        final_residual=rnorm,
        min_margin=float(margins.min()),
        residual_history=history,
        message=message or ("converged" if converged else "max iterations reached"),
    )
    return u, report


# ---------------------------------------------------------------------------
# barrier and monitors


def check_barrier_ordering(u: GridField, w: GridField, tol: float = 1e-8,
                           strict_tol: float = 1e-8) -> float:
    """Verify w >= u - tol everywhere with a strict gap somewhere interior.

    Returns the maximal interior gap.  Raises BarrierOrderingError otherwise.
    """
    if u.box != w.box or u.shape != w.shape:
        raise GridMismatchError("solution and barrier grids differ")
    diff = w.values - u.values
    if diff.min() < -tol:
        node = np.unravel_index(int(diff.argmin()), u.shape)
        raise BarrierOrderingError(
            f"barrier drops {-diff.min():.3g} below the solution at node {tuple(node)}"
        )
    inner = _inner(u.shape)
    gap = float(diff[inner].max())
    if gap <= strict_tol:
        raise BarrierOrderingError(
            f"barrier is not strictly above the solution in the interior (max gap {gap:.3g})"
        )
    return gap


def compute_barrier(prob: DirichletProblem, u: GridField,
                    cfg: SolverConfig | None = None) -> GridField:
    """Solve the same boundary problem with constant source factor * f0.

    A smaller operator value forces a larger function at fixed boundary data,
    so the result dominates u; the ordering is verified before returning.
    """
    cfg = cfg or SolverConfig()
    c = cfg.barrier_factor * prob.f0
    bprob = DirichletProblem(
        p=prob.p,
        box=prob.box,
        shape=prob.shape,
        psi=prob.psi,
        f=lambda x, uu, _c=c: np.full(np.atleast_2d(x).shape[0], _c),
        f_u=lambda x, uu: np.zeros(np.atleast_2d(x).shape[0]),
        f0=c,
        f_is_constant=True,
    )
    w, rep = newton_solve(bprob, cfg)
    if not rep.converged:
        raise BarrierOrderingError(f"barrier solve failed to converge: {rep.message}")
    check_barrier_ordering(u, w)
    return w


def _interior_gradient_norms(u: GridField) -> np.ndarray:
    """Central-difference gradient magnitudes at interior nodes, C order."""
    v = u.values
    h = u.h
    inner = _inner(v.shape)
    comps = []
    for k in range(u.n):
        comps.append((v[_shifted(inner, k, +1)] - v[_shifted(inner, k, -1)]) / (2.0 * h))
    return np.sqrt(sum(c**2 for c in comps)).ravel()


def monitor_estimates(u: GridField, w: GridField, prob: DirichletProblem,
                      delta: float) -> MonitorReport:
    """Interior-estimate monitors.

    Pogorelov monitor: max over interior nodes of (w-u)^(1+delta) times the
    spectral norm of the discrete Hessian.  Gradient monitor (constant
    sources only): max over nodes of the centered ball of radius
    0.4 * min half-extent of |grad_h u| * r / N with N = 4 sup_ball |u|.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if u.box != w.box or u.shape != w.shape:
        raise GridMismatchError("solution and barrier grids differ")
    H = fd_hessian_field(u)
    specnorm = np.abs(np.linalg.eigvalsh(H)).max(axis=1)
    inner = _inner(u.shape)
    gap = (w.values - u.values)[inner].ravel()
    quant = np.clip(gap, 0.0, None) ** (1.0 + delta) * specnorm
    kbest = int(quant.argmax())
    pogorelov_node = _interior_node_of_flat(u.shape, kbest)

    gradient_sup = None
    gradient_node = None
    center = np.array([(lo + hi) / 2.0 for lo, hi in u.box])
    radius = 0.4 * min((hi - lo) / 2.0 for lo, hi in u.box)
    if prob.f_is_constant:
        coords = u.interior_coords()
        in_ball = ((coords - center) ** 2).sum(axis=1) <= radius**2
        if not in_ball.any():
            raise ValueError("grid too coarse: the centered ball holds no interior node")
        grads = _interior_gradient_norms(u)
        nref = 4.0 * float(np.abs(u.interior_values()[in_ball]).max())
        vals = grads[in_ball] * radius / nref
        jbest = int(vals.argmax())
        flat = np.flatnonzero(in_ball)[jbest]
        gradient_sup = float(vals[jbest])
        gradient_node = _interior_node_of_flat(u.shape, int(flat))

    return MonitorReport(
        delta=float(delta),
        pogorelov_sup=float(quant[kbest]),
        pogorelov_node=pogorelov_node,
        gradient_sup=gradient_sup,
        gradient_node=gradient_node,
        ball_radius=float(radius),
    )


# ---------------------------------------------------------------------------
# problem files and solution CSV


def _quadratic_from_coeffs(coeffs, n):
    """u(x) = x'Qx/2 + b'x + c from n*n + n + 1 numbers (Q row-major)."""
    need = n * n + n + 1
    if len(coeffs) != need:
        raise ProblemFormatError(
            "boundary", f"quadratic spec needs {need} numbers for n={n}, got {len(coeffs)}"
        )
    Q = np.array(coeffs[: n * n], dtype=float).reshape(n, n)
    Q = (Q + Q.T) / 2.0
    b = np.array(coeffs[n * n : n * n + n], dtype=float)
    c = float(coeffs[-1])

    def psi(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return 0.5 * np.einsum("ki,ij,kj->k", x, Q, x) + x @ b + c

    return psi


def load_problem(path: str):
    """Read a TOML or JSON problem definition.

    Required fields: n, p, box, shape, boundary, f, f0.  Optional: a
    "solver" table with SolverConfig overrides.  Returns
    (DirichletProblem, SolverConfig).
    """
    text = open(path, "rb").read()
    if str(path).endswith(".toml"):
        try:
            import tomllib as toml_mod  # Python >= 3.11
        except ModuleNotFoundError:
            import tomli as toml_mod
        raw = toml_mod.loads(text.decode("utf-8"))
    else:
        raw = json.loads(text.decode("utf-8"))
    if not isinstance(raw, dict):
        raise ProblemFormatError("<root>", "problem file must hold a table/object")

    def need(name):
        if name not in raw:
            raise ProblemFormatError(name, "missing")
        return raw[name]

    try:
        n = int(need("n"))
        p = int(need("p"))
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError("n/p", f"must be integers ({exc})")
    box_raw = need("box")
    try:
        if len(box_raw) == 2 and np.isscalar(box_raw[0]):
            box = tuple((float(box_raw[0]), float(box_raw[1])) for _ in range(n))
        else:
            box = tuple((float(lo), float(hi)) for lo, hi in box_raw)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError("box", f"expected [lo, hi] or per-axis pairs ({exc})")
    if len(box) != n or any(hi <= lo for lo, hi in box):
        raise ProblemFormatError("box", "needs n non-degenerate [lo, hi] pairs")
    shape_raw = need("shape")
    shape = tuple([int(shape_raw)] * n) if np.isscalar(shape_raw) else tuple(int(s) for s in shape_raw)
    if len(shape) != n or any(s < 5 for s in shape):
        raise ProblemFormatError("shape", "needs n axis sizes, each at least 5")

    bnd = need("boundary")
    if isinstance(bnd, str) and bnd.startswith("quadratic:"):
        try:
            coeffs = [float(v) for v in bnd[len("quadratic:"):].split(",")]
        except ValueError as exc:
            raise ProblemFormatError("boundary", f"bad quadratic coefficients ({exc})")
        psi = _quadratic_from_coeffs(coeffs, n)
    elif isinstance(bnd, str):
        try:
            expr = parse_expression(bnd, n)
        except ExpressionError as exc:
            raise ProblemFormatError("boundary", str(exc))
        psi = lambda x, _e=expr: _e(x)
    elif np.isscalar(bnd):
        psi = lambda x, _v=float(bnd): np.full(np.atleast_2d(x).shape[0], _v)
    else:
        raise ProblemFormatError("boundary", "expected expression, quadratic:... or number")

    fraw = need("f")
    try:
        f0 = float(need("f0"))
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError("f0", f"must be a number ({exc})")
    if np.isscalar(fraw) and not isinstance(fraw, str):
        fval = float(fraw)
        if fval <= 0:
            raise ProblemFormatError("f", "constant source must be positive")
        f = lambda x, u, _v=fval: np.full(np.atleast_2d(x).shape[0], _v)
        f_u = lambda x, u: np.zeros(np.atleast_2d(x).shape[0])
        constant = True
    elif isinstance(fraw, str):
        try:
            expr = parse_expression(fraw, n, allow_u=True)
            dexpr = expr.derivative_u()
        except ExpressionError as exc:
            raise ProblemFormatError("f", str(exc))
        f = lambda x, u, _e=expr: _e(x, u)
        f_u = lambda x, u, _e=dexpr: _e(x, u)
        constant = not expr.uses_u and _expression_is_constant(expr, box)
    else:
        raise ProblemFormatError("f", "expected expression or number")

    solver_raw = raw.get("solver", {})
    if not isinstance(solver_raw, dict):
        raise ProblemFormatError("solver", "must be a table of overrides")
    allowed = {
        "tol", "max_iters", "backtrack", "min_step", "margin",
        "init_amplitude", "barrier_factor",
    }
    unknown = set(solver_raw) - allowed
    if unknown:
        raise ProblemFormatError("solver", f"unknown keys {sorted(unknown)}")
    cfg = SolverConfig(**solver_raw)

    try:
        prob = DirichletProblem(
            p=p, box=box, shape=shape, psi=psi, f=f, f_u=f_u, f0=f0,
            f_is_constant=constant,
        )
    except ValueError as exc:
        raise ProblemFormatError("f/f0", str(exc))
    return prob, cfg


def _expression_is_constant(expr, box) -> bool:
    rng = np.random.default_rng(7)
    lows = np.array([lo for lo, _ in box])
    highs = np.array([hi for _, hi in box])
    x = lows + rng.uniform(0, 1, size=(64, len(box))) * (highs - lows)
    vals = expr(x)
    return bool(np.ptp(vals) == 0.0)


def solution_to_csv(path: str, u: GridField, w: GridField, prob: DirichletProblem):
    """Write node coordinates, u, w, cone margin and Hessian norm as CSV."""
    n = u.n
    coords = u.node_coords()
    H = fd_hessian_field(u)
    eigs = np.linalg.eigvalsh(H)
    margins_int = eigs[:, : prob.p].sum(axis=1)
    norms_int = np.abs(eigs).max(axis=1)
    margins = np.full(u.values.size, np.nan)
    norms = np.full(u.values.size, np.nan)
    ids = _node_id_array(u.shape).ravel()
    interior = ids >= 0
    margins[interior] = margins_int[ids[interior]]
    norms[interior] = norms_int[ids[interior]]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{k+1}" for k in range(n)] + ["u", "w", "margin", "hess_norm"])
        uflat = u.values.ravel()
        wflat = w.values.ravel()
        for i in range(u.values.size):
            row = [repr(float(v)) for v in coords[i]]
            row += [repr(float(uflat[i])), repr(float(wflat[i]))]
            row += [repr(float(margins[i])), repr(float(norms[i]))]
            writer.writerow(row)


def load_solution_csv(path: str):
    """Rebuild (u, w) grid fields from a solution CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    ncols = len(header)
    n = ncols - 4
    if n not in (2, 3) or header[n] != "u" or header[n + 1] != "w":
        raise ValueError("unrecognized solution CSV layout")
    data = np.asarray(rows)
    axes = [np.unique(data[:, k]) for k in range(n)]
    shape = tuple(len(ax) for ax in axes)
    if int(np.prod(shape)) != len(rows):
        raise ValueError("solution CSV does not cover a full grid")
    box = tuple((float(ax[0]), float(ax[-1])) for ax in axes)
    order = np.lexsort(tuple(data[:, k] for k in reversed(range(n))))
    uvals = data[order, n].reshape(shape)
    wvals = data[order, n + 1].reshape(shape)
    return GridField(box=box, values=uvals), GridField(box=box, values=wvals)
