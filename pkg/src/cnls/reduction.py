"""Finite-dimensional reduction: maximize the coupling form on the sphere.

Ground states of the equal-frequency system are separable, U = (a_i u0),
and the amplitude directions are exactly the maximizers of

    f(X) = sum_{i,j} k_ij x_i^(p+1) x_j^(p+1)

over the unit sphere intersected with the nonnegative orthant.  Writing
f_max for the maximum and cal_X for the maximizer set, the verdict is

    f_max <= 0            -> no ground states at all,
    no full-support point -> only semitrivial ground states,
    some but not all      -> mixed,
    all full-support      -> every ground state nontrivial,

and the physical amplitudes are a_i = f_max^(-1/2p) X_i.

The maximum is located by a multistart projected gradient ascent run as
one batched iteration over all starts (coordinate vectors, the uniform
point of every support subset, Dirichlet-random points).  For p = 1 the
problem on each support restricts to maximizing a quadratic form over
the simplex, whose interior critical points solve K_S y = c 1; these
are enumerated exactly and injected into the start set, and double as
an independent certificate.  Cluster representatives are polished by
Newton on the amplitude system of their support, which pins maximizers
to round-off accuracy.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .model import (
    SUPPORT_TOL,
    AmplitudeVector,
    InvalidSpecError,
    ProblemSpec,
    UnsupportedRegimeError,
    require_valid,
)

CLUSTER_TOL = 1e-9      # f-value window for membership in the maximizer set
DEDUP_RADIUS = 1e-5     # Euclidean distance under which two points are one


def coupling_form(spec: ProblemSpec, x: np.ndarray) -> float:
    """f(X) = sum_{i,j} k_ij x_i^(p+1) x_j^(p+1), diagonal included."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.M,):
        raise ValueError(f"expected {spec.M} amplitudes, got shape {x.shape}")
    y = np.abs(x) ** (spec.p + 1)
    return float(y @ spec.effective_K() @ y)


def _batch_form(K: np.ndarray, p: float, X: np.ndarray) -> np.ndarray:
    Y = X ** (p + 1)
    return np.einsum("si,ij,sj->s", Y, K, Y)


def _batch_gradient(K: np.ndarray, p: float, X: np.ndarray) -> np.ndarray:
    Y = X ** (p + 1)
    return 2 * (p + 1) * X ** p * (Y @ K)


def _project(X: np.ndarray) -> np.ndarray:
    """Projection onto the unit sphere intersected with the orthant."""
    X = np.maximum(X, 0.0)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    dead = norms[:, 0] <= 0
    if np.any(dead):
        X[dead, 0] = 1.0
        norms[dead] = 1.0
    return X / norms


def _support_subsets(M: int, rng: np.random.Generator, cap: int = 4095):
    if 2 ** M - 1 <= cap:
        for r in range(1, M + 1):
            yield from itertools.combinations(range(M), r)
    else:
        seen = set()
        while len(seen) < cap:
            mask = rng.integers(0, 2, size=M).astype(bool)
            if mask.any():
                seen.add(tuple(np.nonzero(mask)[0]))
        yield from seen


@dataclass
class KKTCandidate:
    """Interior critical point of the p=1 quadratic form on one support face."""

    support: tuple
    x: np.ndarray
    f: float
    is_local_max: bool
    degenerate: bool = False  # singular restricted matrix, solution by least squares


def kkt_candidates_p1(spec: ProblemSpec) -> list:
    """Exact critical-point enumeration for p = 1.

    With y = x^2 the form becomes y^T K y on the simplex.  On each
    support face the interior critical points solve K_S y = c 1; the
    reduced-Hessian eigenvalues (restricted to the sum-zero subspace)
    and the off-support multiplier conditions decide local maximality.
    Every coordinate vertex appears with value k_ii.  The maximum of f
    over the sphere is the best value among these candidates, which
    serves as an independent certificate for the gradient ascent.
    """
    if spec.p != 1:
        raise ValueError("certificate applies to p=1 only")
    K = spec.effective_K()
    M = spec.M
    out = []
    for support in _support_subsets(M, np.random.default_rng(0)):
        idx = np.asarray(support)
        KS = K[np.ix_(idx, idx)]
        one = np.ones(len(idx))
        if len(idx) == 1:
            y = one.copy()
            fval = float(KS[0, 0])
            degenerate = False
        else:
            degenerate = False
            try:
                v = np.linalg.solve(KS, one)
            except np.linalg.LinAlgError:
                v, res, rank, _ = np.linalg.lstsq(KS, one, rcond=None)
                if np.linalg.norm(KS @ v - one) > 1e-10:
                    continue  # no critical point on this face
                degenerate = True
            tot = v.sum()
            if tot <= 0 or np.any(v <= 0):
                continue
            y = v / tot
            fval = 1.0 / tot
        x = np.zeros(M)
        x[idx] = np.sqrt(y)
        # local-max test: reduced Hessian on the face plus growth of idle entries
        local_max = True
        if len(idx) > 1:
            B = np.linalg.qr(np.eye(len(idx)) - np.outer(one, one) / len(idx))[0][:, : len(idx) - 1]
            eigs = np.linalg.eigvalsh(B.T @ KS @ B)
            local_max = bool(np.all(eigs <= 1e-12))
        if local_max:
            yfull = np.zeros(M)
            yfull[idx] = y
            growth = K @ yfull
            idle = np.setdiff1d(np.arange(M), idx)
            if idle.size and np.any(growth[idle] > fval + 1e-12):
                local_max = False
        out.append(KKTCandidate(support=tuple(support), x=x, f=fval,
                                is_local_max=local_max, degenerate=degenerate))
    return out


@dataclass
class MaximizerSet:
    f_max: float
    points: list                      # AmplitudeVector, unit norm, f within CLUSTER_TOL
    all_positive: bool
    some_positive: bool
    possibly_continuum: bool = False
    certificate: Optional[list] = None

    def point_array(self) -> np.ndarray:
        return np.vstack([pt.x for pt in self.points])


def _sphere_ascent(K, p, X, max_iter, tol):
    """Batched projected gradient ascent of f over sphere & orthant."""
    f = _batch_form(K, p, X)
    step = np.ones(X.shape[0])
    active = np.ones(X.shape[0], dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        G = _batch_gradient(K, p, X)
        # tangent part, with KKT screening of blocked boundary directions
        T = G - (np.sum(G * X, axis=1, keepdims=True)) * X
        T[(X <= 0) & (T < 0)] = 0.0
        gnorm2 = np.sum(T * T, axis=1)
        active = active & (gnorm2 > tol ** 2)
        if not active.any():
            break
        moved = np.zeros(X.shape[0], dtype=bool)
        for _ in range(45):
            trial = ~moved & active
            if not trial.any():
                break
            Xt = _project(X[trial] + step[trial, None] * G[trial])
            ft = _batch_form(K, p, Xt)
            # sufficient increase along the realized (projected) move
            gain = np.sum(G[trial] * (Xt - X[trial]), axis=1)
            ok = ft >= f[trial] + 1e-4 * np.maximum(gain, 0.0)
            ok &= ft >= f[trial]
            rows = np.nonzero(trial)[0]
            good = rows[ok]
            X[good] = Xt[ok]
            f[good] = ft[ok]
            moved[good] = True
            bad = rows[~ok]
            step[bad] *= 0.5
            step[step < 1e-18] = 1e-18
        step[moved] = np.minimum(step[moved] * 2.0, 1.0)
        active &= moved
    return X, f


def _newton_polish(spec, x):
    """Snap a near-maximizer to the exact critical point of its support.

    A maximizer X with value f solves the amplitude system on its
    support after the rescale a = f^(-1/2p) X, and conversely
    f = |a|^(-2p) and X = a/|a|.  Newton on the amplitude system
    therefore pins maximizers to round-off.
    """
    from . import algebraic

    support = tuple(int(i) for i in np.nonzero(x > SUPPORT_TOL)[0])
    if not support:
        return None
    fval = coupling_form(spec, x)
    if fval <= 0:
        return None
    start = x[list(support)] * fval ** (-1 / (2 * spec.p))
    sol = algebraic.solve_support_newton(spec, support, start=start)
    if sol is None:
        return None
    a = sol.a[list(support)]
    nrm = np.linalg.norm(a)
    x_new = np.zeros(spec.M)
    x_new[list(support)] = a / nrm
    f_new = nrm ** (-2 * spec.p)
    if np.linalg.norm(x_new - x) > 10 * DEDUP_RADIUS or f_new < fval - CLUSTER_TOL:
        return None
    return x_new, f_new


def maximize_coupling_form(
    spec: ProblemSpec,
    n_random: int = 200,
    seed: int = 12345,
    max_iter: int = 400,
    polish: bool = True,
) -> MaximizerSet:
    """Locate f_max and the maximizer set on the sphere.

    f_max <= 0 is a meaningful outcome (no bound states), not an error.
    """
    require_valid(spec)
    K = spec.effective_K()
    M, p = spec.M, spec.p
    rng = np.random.default_rng(seed)

    starts = [np.eye(M)]
    uniform_rows = []
    for support in _support_subsets(M, rng):
        row = np.zeros(M)
        row[list(support)] = 1.0 / np.sqrt(len(support))
        uniform_rows.append(row)
    starts.append(np.array(uniform_rows))
    if n_random > 0:
        starts.append(np.sqrt(rng.dirichlet(np.ones(M), size=n_random)))
    certificate = None
    if p == 1:
        certificate = kkt_candidates_p1(spec)
        if certificate:
            starts.append(np.array([c.x for c in certificate]))
    X0 = _project(np.vstack(starts))

    scale = max(1.0, float(np.abs(K).max()))
    X, f = _sphere_ascent(K, p, X0, max_iter=max_iter, tol=1e-12 * scale)

    order = np.argsort(-f)
    X, f = X[order], f[order]
    f_max = float(f[0])
    tol = CLUSTER_TOL * max(1.0, abs(f_max))
    near = f >= f_max - tol
    Xn, fn = X[near], f[near]

    reps = []
    for row, val in zip(Xn, fn):
        if all(np.linalg.norm(row - r) >= DEDUP_RADIUS for r, _ in reps):
            reps.append((row.copy(), float(val)))

    if polish and f_max > 0:
        polished = []
        for row, val in zip([r for r, _ in reps], [v for _, v in reps]):
            snap = _newton_polish(spec, row)
            polished.append(snap if snap is not None else (row, val))
        # polishing may merge representatives; dedup again
        reps = []
        for row, val in sorted(polished, key=lambda t: -t[1]):
            if all(np.linalg.norm(row - r) >= DEDUP_RADIUS for r, _ in reps):
                reps.append((row, val))
        f_max = max(v for _, v in reps)
        reps = [(r, v) for r, v in reps if v >= f_max - tol]

    points = [AmplitudeVector(x=r) for r, _ in reps]
    full = [pt.full_support for pt in points]
    # two distinct representatives at the same level but closer than 0.1
    # hint at a continuum of maximizers that clustering cannot certify
    continuum = False
    for i in range(len(reps)):
        for j in range(i + 1, len(reps)):
            d = np.linalg.norm(reps[i][0] - reps[j][0])
            if DEDUP_RADIUS < d < 0.1:
                continuum = True
    return MaximizerSet(
        f_max=f_max,
        points=points,
        all_positive=bool(full and all(full)),
        some_positive=bool(any(full)),
        possibly_continuum=continuum,
        certificate=certificate,
    )


class Verdict(str, Enum):
    NO_GROUND_STATES = "NoGroundStates"
    SEMITRIVIAL_ONLY = "SemitrivialOnly"
    MIXED = "Mixed"
    ALL_NONTRIVIAL = "AllNontrivial"


@dataclass
class GroundStateReport:
    verdict: Verdict
    f_max: float
    maximizers: list          # unit-sphere amplitude directions
    amplitudes: list          # physical amplitudes f_max^(-1/2p) X
    support_masks: list
    possibly_continuum: bool = False

    def to_json_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "f_max": self.f_max,
            "maximizers": [list(map(float, x)) for x in self.maximizers],
            "amplitudes": [list(map(float, a)) for a in self.amplitudes],
            "support_masks": self.support_masks,
            "possibly_continuum": self.possibly_continuum,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


F_MAX_ZERO_TOL = 1e-10


def classify(spec: ProblemSpec, **maximize_kwargs) -> GroundStateReport:
    """Ground-state classification for the equal-frequency system.

    Unequal frequencies break the separable reduction, so the operation
    refuses them; use the action module (reduced comparisons) or the
    variational module (direct PDE minimization) in that regime.
    """
    require_valid(spec)
    if not spec.equal_omega():
        raise UnsupportedRegimeError(
            "classification requires equal frequencies; "
            "use action levels or the variational oracle for unequal omega"
        )
    ms = maximize_coupling_form(spec, **maximize_kwargs)
    if ms.f_max <= F_MAX_ZERO_TOL:
        return GroundStateReport(
            verdict=Verdict.NO_GROUND_STATES,
            f_max=ms.f_max,
            maximizers=[],
            amplitudes=[],
            support_masks=[],
            possibly_continuum=ms.possibly_continuum,
        )
    scale = ms.f_max ** (-1 / (2 * spec.p))
    if ms.all_positive:
        verdict = Verdict.ALL_NONTRIVIAL
    elif ms.some_positive:
        verdict = Verdict.MIXED
    else:
        verdict = Verdict.SEMITRIVIAL_ONLY
    return GroundStateReport(
        verdict=verdict,
        f_max=ms.f_max,
        maximizers=[pt.x for pt in ms.points],
        amplitudes=[scale * pt.x for pt in ms.points],
        support_masks=[pt.support_mask() for pt in ms.points],
        possibly_continuum=ms.possibly_continuum,
    )
