"""Douglas-Rachford product-space splitting and classical projection methods.

Every term acts on a short footprint of the height vector. Off the footprint
its prox is the identity, which makes the off-footprint coordinates of every
governing vector equal to the previous average. Only the footprint-local
blocks ``Y_i`` are stored; :meth:`SolverState.governing_vectors` rebuilds the
full vectors on demand.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .terms import Kernel


@dataclass(frozen=True)
class ProxTerm:
    footprint: tuple
    kernel: Kernel
    label: str = ""

    def __post_init__(self):
        fp = tuple(int(i) for i in self.footprint)
        if len(set(fp)) != len(fp):
            raise ValueError(f"term {self.label!r} has duplicate footprint indices")
        if any(i < 0 for i in fp):
            raise ValueError(f"term {self.label!r} has negative footprint index")
        object.__setattr__(self, "footprint", fp)

    @property
    def kind(self) -> str:
        return self.kernel.kind


@dataclass
class SolverConfig:
    method: Literal["dr", "cyclic", "parallel"] = "dr"
    gamma: float = 1.0
    tolerance: float = 1e-3
    max_iterations: int = 50_000
    workers: int | None = None
    progress: Callable | None = None
    progress_every: int = 100

    def __post_init__(self):
        if self.method not in ("dr", "cyclic", "parallel"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be a positive integer")


@dataclass
class SolverState:
    monitored: np.ndarray
    iteration: int = 0
    last_step_norm: float = np.inf
    governing_step_norm: float = np.inf
    violations: np.ndarray = field(default_factory=lambda: np.zeros(0))
    converged: bool = False
    step_history: list = field(default_factory=list)
    _blocks: list = field(default_factory=list, repr=False)
    _previous: np.ndarray | None = field(default=None, repr=False)

    def governing_vectors(self) -> list[np.ndarray]:
        """Full-length governing vectors ``x_{k,i}`` in term order."""
        if not self._blocks:
            return [self.monitored.copy()]
        base = self._previous if self._previous is not None else self.monitored
        out = []
        for fp, y in self._blocks:
            x = base.copy()
            x[list(fp)] = y
            out.append(x)
        return out


def default_workers() -> int:
    raw = os.environ.get("GRADEOPT_THREADS")
    if raw is None or raw.strip() == "":
        return 1
    n = int(raw)
    if n == 0:
        return os.cpu_count() or 1
    return max(1, n)


def embed(term: ProxTerm, x, gamma: float = 1.0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = x.copy()
    fp = list(term.footprint)
    out[fp] = term.kernel.apply(x[fp], gamma)
    return out


def residual(term: ProxTerm, x) -> float:
    """Distance from the footprint subvector to the term's constraint set."""
    z = np.asarray(x, dtype=float)[list(term.footprint)]
    return float(np.linalg.norm(term.kernel.apply(z, 1.0) - z))


class _Group:
    """Terms sharing a kernel class and footprint length, evaluated as one batch."""

    def __init__(self, cls, members, terms):
        self.cls = cls
        self.members = np.array(members)
        self.index = np.array([terms[i].footprint for i in members], dtype=np.intp)
        self.params = cls.stack([terms[i].kernel for i in members])

    def apply(self, Z, gamma):
        return self.cls.apply_stacked(self.params, Z, gamma)


def _group_terms(terms, select=None):
    buckets: dict = {}
    for i, t in enumerate(terms):
        if select is not None and not select(t):
            continue
        buckets.setdefault((type(t.kernel).__name__, len(t.footprint)), []).append(i)
    return [_Group(type(terms[m[0]].kernel), m, terms) for _, m in sorted(buckets.items())]


def _validate(terms, z0):
    if not terms:
        raise ValueError("solver needs at least one term")
    n = len(z0)
    for t in terms:
        if max(t.footprint) >= n:
            raise ValueError(f"term {t.label!r} references index beyond the height vector")


def constraint_residuals(terms, x, groups=None) -> np.ndarray:
    """Residuals of all constraint terms at ``x`` (objective terms get 0)."""
    out = np.zeros(len(terms))
    groups = groups if groups is not None else _group_terms(terms, lambda t: t.kind == "constraint")
    for g in groups:
        Z = x[g.index]
        out[g.members] = np.linalg.norm(g.apply(Z, 1.0) - Z, axis=1)
    return out


def _map(groups, fn, workers):
    if workers > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, groups))
    return [fn(g) for g in groups]


def _progress(cfg, state):
    if cfg.progress is not None and state.iteration % cfg.progress_every == 0:
        cfg.progress(state.iteration, state.last_step_norm,
                     float(state.violations.max()) if state.violations.size else 0.0)


def dr_solve(terms, z0, cfg: SolverConfig | None = None):
    """Douglas-Rachford on the product space; returns ``(x_bar, state)``."""
    cfg = cfg or SolverConfig()
    z0 = np.asarray(z0, dtype=float)
    _validate(terms, z0)
    n, m = len(z0), len(terms)
    gamma, tol = cfg.gamma, cfg.tolerance
    workers = cfg.workers or default_workers()
    groups = _group_terms(terms)
    cgroups = _group_terms(terms, lambda t: t.kind == "constraint")
    counts = np.zeros(n)
    for t in terms:
        counts[list(t.footprint)] += 1
    idle = m - counts  # number of governing vectors that leave each coordinate alone

    Y = [z0[g.index] for g in groups]
    prev = z0.copy()
    xbar = z0.copy()
    state = SolverState(monitored=xbar, violations=constraint_residuals(terms, xbar, cgroups))

    def step(args):
        g, y = args
        R = 2.0 * xbar[g.index] - y
        return y - xbar[g.index] + g.apply(R, gamma)

    for k in range(int(cfg.max_iterations)):
        Ynew = _map(list(zip(groups, Y)), step, workers)
        gov2 = float(np.dot(idle, (xbar - prev) ** 2))
        total = np.zeros(n)
        for g, y, yn in zip(groups, Y, Ynew):
            gov2 += float(np.sum((yn - y) ** 2))
            total += np.bincount(g.index.ravel(), weights=yn.ravel(), minlength=n)
        new = (total + idle * xbar) / m
        prev, Y = xbar, Ynew
        state.last_step_norm = float(np.linalg.norm(new - xbar))
        state.governing_step_norm = float(np.sqrt(gov2))
        state.step_history.append(state.last_step_norm)
        xbar = new
        state.iteration = k + 1
        state.monitored = xbar
        if state.governing_step_norm < tol:
            state.violations = constraint_residuals(terms, xbar, cgroups)
            if not np.any(state.violations >= tol):
                state.converged = True
        if cfg.progress is not None and state.iteration % cfg.progress_every == 0:
            state.violations = constraint_residuals(terms, xbar, cgroups)
            _progress(cfg, state)
        if state.converged:
            break

    state.violations = constraint_residuals(terms, xbar, cgroups)
    state._previous = prev
    state._blocks = [None] * m
    for g, y in zip(groups, Y):
        for row, i in enumerate(g.members):
            state._blocks[i] = (terms[i].footprint, y[row])
    return xbar, state


def _check_constraints_only(terms):
    bad = [t.label for t in terms if t.kind != "constraint"]
    if bad:
        raise ValueError(f"projection methods accept constraint terms only, got {bad}")


def _projection_loop(terms, z0, cfg, sweep):
    cfg = cfg or SolverConfig()
    z = np.asarray(z0, dtype=float).copy()
    _validate(terms, z)
    _check_constraints_only(terms)
    groups = _group_terms(terms)
    state = SolverState(monitored=z, violations=constraint_residuals(terms, z, groups))
    for k in range(int(cfg.max_iterations)):
        new = sweep(z, groups)
        state.last_step_norm = state.governing_step_norm = float(np.linalg.norm(new - z))
        state.step_history.append(state.last_step_norm)
        z = new
        state.iteration = k + 1
        state.monitored = z
        check = state.last_step_norm < cfg.tolerance or state.iteration % cfg.progress_every == 0
        if check:
            state.violations = constraint_residuals(terms, z, groups)
        _progress(cfg, state)
        if state.last_step_norm < cfg.tolerance and not np.any(state.violations >= cfg.tolerance):
            state.converged = True
            break
    state.violations = constraint_residuals(terms, z, groups)
    return z, state


def cyclic_solve(terms, z0, cfg: SolverConfig | None = None):
    """Repeated sweeps ``z <- P_J ... P_1 z`` in term order."""

    def sweep(z, _groups):
        z = z.copy()
        for t in terms:
            fp = list(t.footprint)
            z[fp] = t.kernel.apply(z[fp], 1.0)
        return z

    return _projection_loop(terms, z0, cfg, sweep)


def parallel_solve(terms, z0, cfg: SolverConfig | None = None):
    """Repeated averaged projections ``z <- (1/J) sum_j P_j z``."""
    J = len(terms)

    def sweep(z, groups):
        shift = np.zeros_like(z)
        for g in groups:
            Z = z[g.index]
            shift += np.bincount(g.index.ravel(), weights=(g.apply(Z, 1.0) - Z).ravel(),
                                 minlength=len(z))
        return z + shift / J

    return _projection_loop(terms, z0, cfg, sweep)


def solve(terms, z0, cfg: SolverConfig | None = None):
    cfg = cfg or SolverConfig()
    fn = {"dr": dr_solve, "cyclic": cyclic_solve, "parallel": parallel_solve}[cfg.method]
    return fn(terms, z0, cfg)


def objective_total(terms, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(sum(t.kernel.value(x[list(t.footprint)]) for t in terms if t.kind == "objective"))


def report(state: SolverState, terms) -> dict:
    return {
        "converged": bool(state.converged),
        "iterations": int(state.iteration),
        "last_step_norm": float(state.last_step_norm),
        "governing_step_norm": float(state.governing_step_norm),
        "max_violation": float(state.violations.max()) if state.violations.size else 0.0,
        "objective": objective_total(terms, state.monitored),
        "violations": [
            {"term": t.label, "residual": float(r)}
            for t, r in zip(terms, state.violations) if t.kind == "constraint"
        ],
        "step_history": [float(s) for s in state.step_history],
    }
