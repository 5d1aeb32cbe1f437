"""Amplitude systems for separable bound states.

Substituting U = (a_i u0) into the equal-frequency system reduces the
PDE to the algebraic system on the support S,

    a_i^(p-1) * sum_{j in S} k_ij a_j^(p+1) = 1,   i in S,

with a_i = 0 off the support.  For p = 1 this is linear in X = (a_i^2),
K_S X = 1, solved by LU with partial pivoting; for general p a damped
Newton iteration runs in log-amplitudes t_i = log a_i, which keeps the
iterates positive without constraints.

Every positive solution yields a bound state whose quadratic energy is
(sum_i a_i^2) * I(u0); the candidate with the smallest such coefficient
is the ground-state candidate.  Non-convergence of Newton is reported
as "not found", never as nonexistence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import ProblemSpec, UnsupportedRegimeError, require_valid

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 200


@dataclass
class AmplitudeSolution:
    support: tuple            # 0-based indices
    a: np.ndarray             # length M, zero off the support
    residual: float           # max-norm residual of the amplitude system
    reduced_action_coeff: float  # sum a_i^2 = I(U)/I(u0) at equal omega
    singular: bool = False
    no_solution_found: bool = False

    def support_mask(self) -> str:
        on = set(self.support)
        return "".join("1" if i in on else "0" for i in range(len(self.a)))


def _system_residual(K: np.ndarray, p: float, a: np.ndarray) -> np.ndarray:
    s = K @ a ** (p + 1)
    return a ** (p - 1) * s - 1.0


def solve_support_linear(spec: ProblemSpec, support: Sequence[int]) -> Optional[AmplitudeSolution]:
    """p = 1 amplitude system K_S X = 1 with X = a^2.

    Returns the solution only when every X entry is strictly positive.
    A singular restricted matrix gives None with the singular flag
    raised through an empty sentinel (callers treat None as not-found).
    """
    if spec.p != 1:
        raise ValueError("solve_support_linear requires p=1")
    idx = np.asarray(sorted(support), dtype=int)
    if idx.size == 0:
        raise ValueError("support must be nonempty")
    KS = spec.effective_K()[np.ix_(idx, idx)]
    one = np.ones(idx.size)
    try:
        X = np.linalg.solve(KS, one)
    except np.linalg.LinAlgError:
        return None
    if np.any(X <= 0):
        return None
    a = np.zeros(spec.M)
    a[idx] = np.sqrt(X)
    res = float(np.abs(_system_residual(spec.effective_K()[np.ix_(idx, idx)], 1.0, a[idx])).max())
    return AmplitudeSolution(
        support=tuple(int(i) for i in idx),
        a=a,
        residual=res,
        reduced_action_coeff=float(X.sum()),
    )


def solve_support_newton(
    spec: ProblemSpec,
    support: Sequence[int],
    start: Optional[np.ndarray] = None,
) -> Optional[AmplitudeSolution]:
    """Damped Newton in log-amplitudes for the general-p system.

    start, when given, is the positive amplitude vector on the support
    (length |S|).  Otherwise the uniform vector and the equal-coupling
    guess are tried.  Convergence means max-norm residual <= 1e-12.
    """
    idx = np.asarray(sorted(support), dtype=int)
    if idx.size == 0:
        raise ValueError("support must be nonempty")
    K = spec.effective_K()[np.ix_(idx, idx)]
    p = spec.p
    m = idx.size

    starts = []
    if start is not None:
        start = np.asarray(start, dtype=float)
        if start.shape == (spec.M,):
            start = start[idx]
        if np.any(start <= 0):
            raise ValueError("start must be strictly positive on the support")
        starts.append(start)
    starts.append(np.ones(m))
    if m > 1:
        starts.append(np.full(m, (m - 1) ** (-1 / (2 * p))))

    best = None
    for a0 in starts:
        t = np.log(a0)
        for _ in range(NEWTON_MAX_ITER):
            a = np.exp(t)
            F = _system_residual(K, p, a)
            nrm = np.abs(F).max()
            if nrm <= NEWTON_TOL:
                break
            s = K @ a ** (p + 1)
            Jac = np.diag((p - 1) * a ** (p - 1) * s) \
                + (p + 1) * K * np.outer(a ** (p - 1), a ** (p + 1))
            try:
                dt = np.linalg.solve(Jac, -F)
            except np.linalg.LinAlgError:
                break
            dt = np.clip(dt, -10.0, 10.0)  # keep exp(t) in range
            lam = 1.0
            with np.errstate(over="ignore", invalid="ignore"):
                for _ in range(40):
                    a_new = np.exp(t + lam * dt)
                    if np.all(np.isfinite(a_new)):
                        r_new = _system_residual(K, p, a_new)
                        if np.all(np.isfinite(r_new)) and np.abs(r_new).max() <= (1 - 0.25 * lam) * nrm:
                            break
                    lam *= 0.5
                else:
                    break
            t = t + lam * dt
        a = np.exp(t)
        res = float(np.abs(_system_residual(K, p, a)).max())
        if best is None or res < best[1]:
            best = (a, res)
        if res <= NEWTON_TOL:
            break

    a_s, res = best
    if res > NEWTON_TOL:
        return None
    a = np.zeros(spec.M)
    a[idx] = a_s
    return AmplitudeSolution(
        support=tuple(int(i) for i in idx),
        a=a,
        residual=res,
        reduced_action_coeff=float(np.sum(a_s ** 2)),
    )


def solve_support(spec: ProblemSpec, support: Sequence[int], start=None) -> Optional[AmplitudeSolution]:
    if spec.p == 1:
        return solve_support_linear(spec, support)
    return solve_support_newton(spec, support, start=start)


def enumerate_candidates(spec: ProblemSpec, use_maximizer_starts: bool = True) -> list:
    """Solve the amplitude system on every nonempty support subset.

    Returns positive solutions sorted by increasing reduced action
    coefficient sum a_i^2; the head of the list is the ground-state
    candidate.  Valid as an action comparison only for equal
    frequencies, where I(U) = (sum a_i^2) I(u0).
    """
    require_valid(spec)
    if not spec.equal_omega():
        raise UnsupportedRegimeError(
            "candidate enumeration compares actions via sum a_i^2, which "
            "requires equal frequencies"
        )
    starts = {}
    if use_maximizer_starts and spec.p != 1:
        from . import reduction  # deferred to avoid an import cycle

        ms = reduction.maximize_coupling_form(spec, n_random=64)
        if ms.f_max > 0:
            for pt in ms.points:
                sup = pt.support
                if sup:
                    starts[sup] = pt.x[list(sup)] * ms.f_max ** (-1 / (2 * spec.p))

    import itertools

    out = []
    for r in range(1, spec.M + 1):
        for support in itertools.combinations(range(spec.M), r):
            sol = solve_support(spec, support, start=starts.get(support))
            if sol is not None:
                out.append(sol)
    out.sort(key=lambda s: s.reduced_action_coeff)
    return out


def candidates_to_csv(candidates: list, path):
    """Candidate table: support_mask, a_1..a_M, reduced_action_coeff, residual."""
    if not candidates:
        with open(path, "w") as fh:
            fh.write("support_mask\n")
        return
    M = len(candidates[0].a)
    cols = ["support_mask"] + [f"a_{i+1}" for i in range(M)] + ["reduced_action_coeff", "residual"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for sol in candidates:
            vals = [sol.support_mask()] + [f"{v:.17g}" for v in sol.a] \
                + [f"{sol.reduced_action_coeff:.17g}", f"{sol.residual:.17g}"]
            fh.write(",".join(vals) + "\n")
