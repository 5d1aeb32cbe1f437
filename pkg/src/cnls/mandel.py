"""Characteristic coupling value for probe-split systems.

Split the interaction into the probed part J_P (pairs in P, weighted by
beta) and the fixed part J_NP.  Comparing a nontrivial bound state
against the best semitrivial level L_sem gives the quotient

    B(U) = ( I(U)^(p+1) L_sem^(-p) - J_NP(U) ) / J_P(U),

whose infimum beta_hat over nonzero fields classifies the probe value:
beta < beta_hat forces every ground state to be semitrivial, while
beta > beta_hat forces every ground state to be nontrivial.

The infimum here runs over the separable family U = X u0 only.  At
equal frequencies that family contains every ground state, so the
dichotomy read off the separable beta_hat matches the true
classification; results carry family="separable" to record that for
unequal frequencies it is only an upper bound on the true infimum.

On separable fields everything reduces to amplitude sums: with
I(u0) = int u0^(2p+2) (the scalar state has I = J),

    B(X) = ( |X|^(2p+2) c_sem^(-p) - f_NP(X) ) / f_P(X),

where c_sem is the semitrivial level in I(u0) units and f_NP, f_P are
the plain coupling sums over the two pair classes.  B is homogeneous of
degree zero, so the ray through each X is resolved exactly and the
search runs on the unit sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import action, algebraic
from .model import (
    AmplitudeVector,
    ProblemSpec,
    UnsupportedRegimeError,
    require_valid,
)
from .reduction import F_MAX_ZERO_TOL, _project, maximize_coupling_form

BOUNDARY_TOL = 1e-6


def _pair_forms(spec: ProblemSpec, X: np.ndarray):
    """(f_P, f_NP) for a batch of amplitude rows, base couplings unweighted."""
    mask = spec.probe_mask()
    KP = np.where(mask, spec.K, 0.0)
    KN = np.where(mask, 0.0, spec.K)
    Y = np.abs(X) ** (spec.p + 1)
    fP = np.einsum("si,ij,sj->s", Y, KP, Y)
    fN = np.einsum("si,ij,sj->s", Y, KN, Y)
    return fP, fN


def beta_quotient(spec: ProblemSpec, x: np.ndarray, sem_coeff: float) -> float:
    """B on the separable representative X u0, in I(u0) units.

    sem_coeff is the semitrivial level divided by I(u0).  Raises when
    the probed interaction vanishes at X, where B is undefined.
    """
    require_valid(spec)
    if spec.P is None:
        raise ValueError("beta_quotient needs a probe set P")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    fP, fN = _pair_forms(spec, x)
    if abs(fP[0]) < 1e-300:
        raise ValueError("probe interaction J_P vanishes at this point; B undefined")
    nrm2 = float(np.sum(x[0] ** 2))
    num = nrm2 ** (spec.p + 1) * sem_coeff ** (-spec.p) - fN[0]
    return float(num / fP[0])


@dataclass
class BetaHatResult:
    beta: float
    beta_hat: float
    regime: str                      # NontrivialEmpty | AllNontrivial | Boundary
    minimizer: Optional[AmplitudeVector]
    family: str = "separable"
    sem_coefficient: float = math.nan
    sem_constancy_gap: Optional[float] = None

    def to_json_dict(self) -> dict:
        return {
            "beta": self.beta,
            "beta_hat": self.beta_hat,
            "regime": self.regime,
            "minimizer": None if self.minimizer is None else [float(v) for v in self.minimizer.x],
            "family": self.family,
        }


def _quotient_descent(spec, sem_coeff, X, max_iter=300):
    """Batched projected descent of B over the sphere; rows with f_P ~ 0 drop out."""
    p = spec.p
    mask = spec.probe_mask()
    KP = np.where(mask, spec.K, 0.0)
    KN = np.where(mask, 0.0, spec.K)
    cp = sem_coeff ** (-p)

    def value(Xb):
        Y = Xb ** (p + 1)
        fP = np.einsum("si,ij,sj->s", Y, KP, Y)
        fN = np.einsum("si,ij,sj->s", Y, KN, Y)
        nrm2 = np.sum(Xb ** 2, axis=1)
        lead = nrm2 ** (p + 1) * cp
        with np.errstate(divide="ignore", invalid="ignore"):
            B = (lead - fN) / fP
        # the numerator cancels as f_P -> 0; below this floor the quotient is
        # round-off noise, so those evaluations are discarded, not trusted
        floor = 1e-8 * (np.abs(lead) + np.abs(fN) + 1.0)
        B[np.abs(fP) < floor] = np.inf
        return B, fP, fN

    B, fP, fN = value(X)
    step = np.full(X.shape[0], 0.5)
    alive = np.isfinite(B)
    for _ in range(max_iter):
        if not alive.any():
            break
        Y = X ** (p + 1)
        nrm2 = np.sum(X ** 2, axis=1)
        gQ = (2 * p + 2) * cp * nrm2[:, None] ** p * X
        gN = 2 * (p + 1) * X ** p * (Y @ KN)
        gP = 2 * (p + 1) * X ** p * (Y @ KP)
        with np.errstate(divide="ignore", invalid="ignore"):
            G = (gQ - gN - B[:, None] * gP) / fP[:, None]
        G[~alive] = 0.0
        T = G - np.sum(G * X, axis=1, keepdims=True) * X
        # at the orthant boundary, descent moves along -T; directions that
        # would leave the orthant are blocked and must not count as slope
        T[(X <= 0) & (T > 0)] = 0.0
        tnorm = np.linalg.norm(T, axis=1)
        alive = alive & (tnorm > 1e-12 * np.maximum(1.0, np.abs(B)))
        if not alive.any():
            break
        moved = np.zeros(X.shape[0], dtype=bool)
        for _ in range(40):
            trial = alive & ~moved
            if not trial.any():
                break
            Xt = _project(X[trial] - step[trial, None] * G[trial])
            Bt, _, _ = value(Xt)
            ok = Bt <= B[trial] - 1e-12 * np.abs(B[trial])
            ok &= np.isfinite(Bt)
            rows = np.nonzero(trial)[0]
            X[rows[ok]] = Xt[ok]
            B[rows[ok]] = Bt[ok]
            moved[rows[ok]] = True
            step[rows[~ok]] *= 0.5
        step[step < 1e-16] = 1e-16
        step[moved] = np.minimum(step[moved] * 2, 1.0)
        alive &= moved
        _, fP, fN = value(X)
    return X, B


def beta_hat(spec: ProblemSpec, beta: float, n_random: int = 128,
             seed: int = 12345) -> BetaHatResult:
    """Characteristic value at the given probe coupling.

    Needs equal frequencies (so the separable family is exhaustive) and
    nonnegative couplings on the probe set.  When the semitrivial level
    is infinite the regime comes from the existence thresholds instead
    of the quotient.
    """
    require_valid(spec)
    if spec.P is None:
        raise ValueError("beta_hat needs a probe set P")
    if not spec.equal_omega():
        raise UnsupportedRegimeError("beta_hat over the separable family needs equal omega")
    mask = spec.probe_mask()
    if np.any(spec.K[mask] <= 0):
        raise UnsupportedRegimeError("beta_hat assumes k > 0 on the probe set")

    probe_spec = spec.with_beta(float(beta))
    sem_coeff = action.semitrivial_coefficient(probe_spec)
    if math.isinf(sem_coeff):
        ms = maximize_coupling_form(probe_spec, n_random=64)
        if ms.f_max > F_MAX_ZERO_TOL:
            return BetaHatResult(beta=beta, beta_hat=-math.inf, regime="AllNontrivial",
                                 minimizer=None, sem_coefficient=sem_coeff)
        return BetaHatResult(beta=beta, beta_hat=math.inf, regime="NontrivialEmpty",
                             minimizer=None, sem_coefficient=sem_coeff)

    M = spec.M
    rng = np.random.default_rng(seed)
    starts = [np.eye(M)]
    import itertools

    for r in range(2, M + 1):
        for sup in itertools.combinations(range(M), r):
            row = np.zeros(M)
            row[list(sup)] = 1 / np.sqrt(r)
            starts.append(row[None, :])
    # near-boundary starts let descent approach infima attained in the limit
    for i in range(M):
        row = np.full(M, 0.05)
        row[i] = 1.0
        starts.append(row[None, :])
    ms = maximize_coupling_form(probe_spec, n_random=32)
    if ms.points:
        starts.append(np.vstack([pt.x for pt in ms.points]))
    if n_random:
        starts.append(np.sqrt(rng.dirichlet(np.ones(M), size=n_random)))
    X0 = _project(np.vstack(starts))

    X, B = _quotient_descent(spec, sem_coeff, X0)
    finite = np.isfinite(B)
    if not finite.any():
        raise UnsupportedRegimeError("quotient undefined on every start (J_P = 0 everywhere)")
    k = int(np.argmin(np.where(finite, B, np.inf)))
    bhat = float(B[k])
    minimizer = AmplitudeVector(x=X[k])

    if abs(beta - bhat) <= BOUNDARY_TOL:
        regime = "Boundary"
    elif beta < bhat:
        regime = "NontrivialEmpty"
    else:
        regime = "AllNontrivial"

    gap = None
    if bhat > beta and math.isfinite(bhat):
        # on [beta, beta_hat] the semitrivial winner avoids P, so its level is flat
        gap = abs(action.semitrivial_coefficient(spec.with_beta(bhat)) - sem_coeff)
    return BetaHatResult(beta=beta, beta_hat=bhat, regime=regime, minimizer=minimizer,
                         sem_coefficient=sem_coeff, sem_constancy_gap=gap)


def beta_hat_curve(spec: ProblemSpec, betas: Sequence[float], **kwargs) -> list:
    return [beta_hat(spec, float(b), **kwargs) for b in betas]


# ---------------------------------------------------------------------------
# probe-avoiding semitrivial candidates
# ---------------------------------------------------------------------------

@dataclass
class ProbeFreeCandidateReport:
    candidate: algebraic.AmplitudeSolution
    quotient_values: list        # I^(p+1)/J_beta at each probed beta, in I(u0) units
    quotient_constant: bool
    displacing_beta: Optional[float]
    inconclusive: bool


def probe_free_candidate_check(spec: ProblemSpec, support: Sequence[int],
                               betas: Sequence[float],
                               tol: float = 1e-9) -> ProbeFreeCandidateReport:
    """Check that a P-avoiding semitrivial candidate eventually loses.

    The candidate's support must contain no probe pair, which makes its
    action quotient independent of beta; the scan then looks for the
    first probed beta at which some competitor whose support does touch
    P has strictly lower action.  No competitor in range means the
    result is inconclusive, not a proof of optimality.
    """
    require_valid(spec)
    if spec.P is None:
        raise ValueError("needs a probe set P")
    sup = set(int(i) for i in support)
    for (i, j) in spec.P:
        if (i - 1) in sup and (j - 1) in sup:
            raise ValueError(f"support touches probe pair ({i},{j}); hypothesis violated")
    # the candidate avoids P, so its amplitude system is beta-independent
    candidate = algebraic.solve_support(spec.with_beta(float(betas[0])), sorted(sup))
    if candidate is None:
        raise ValueError("no positive amplitude solution on the candidate support")

    # quotient I^(p+1)/J_beta on the candidate, in I(u0) units; with f_P = 0 it
    # must equal I^(p+1)/J exactly, independent of beta
    a = candidate.a[None, :]
    p = spec.p
    values = []
    for b in betas:
        sb = spec.with_beta(float(b))
        fP, fN = _pair_forms(sb, a)
        Jb = (sb.beta if sb.beta is not None else 1.0) * fP[0] + fN[0]
        nrm2 = float(np.sum(candidate.a ** 2))
        values.append(nrm2 ** (p + 1) / Jb)
    constant = max(values) - min(values) <= 1e-12 * max(1.0, abs(values[0]))

    displacing = None
    for b in sorted(float(b) for b in betas):
        cands = algebraic.enumerate_candidates(spec.with_beta(b), use_maximizer_starts=False)
        for sol in cands:
            touches = any((i - 1) in set(sol.support) and (j - 1) in set(sol.support)
                          for (i, j) in spec.P)
            if touches and sol.reduced_action_coeff < candidate.reduced_action_coeff - tol:
                displacing = b
                break
        if displacing is not None:
            break
    return ProbeFreeCandidateReport(
        candidate=candidate,
        quotient_values=values,
        quotient_constant=bool(constant),
        displacing_beta=displacing,
        inconclusive=displacing is None,
    )


# ---------------------------------------------------------------------------
# lower bound for the quotient at small probe couplings
# ---------------------------------------------------------------------------

def quotient_floor(p: float, r: np.ndarray) -> float:
    """g(r) = ((1+sum r^2)^(p+1) - 1 - sum r^(2p+2)) / (2 sum r^(p+1) + (sum r^(p+1))^2).

    Defined for p >= 1 on [0,1]^(M-1).  At r = 0 both terms vanish; the
    leading-order expansion along any approach direction gives the
    limit (p+1)/2 for p = 1 and +inf for p > 1, which is what is
    returned there.
    """
    if p < 1:
        raise ValueError("quotient floor needs p >= 1")
    r = np.asarray(r, dtype=float)
    if np.any((r < 0) | (r > 1)):
        raise ValueError("r must lie in [0,1]^(M-1)")
    s2 = float(np.sum(r ** 2))
    if s2 == 0.0:
        return (p + 1) / 2 if p == 1 else math.inf
    num = (1 + s2) ** (p + 1) - 1 - float(np.sum(r ** (2 * p + 2)))
    sp = float(np.sum(r ** (p + 1)))
    den = 2 * sp + sp ** 2
    return num / den


@dataclass
class QuotientFloorScan:
    min_value: float
    argmin: np.ndarray
    corner_limit: float
    corner_radius: float


def quotient_floor_scan(M: int, p: float, n_grid: int = 100,
                        corner_radius: float = 1e-3) -> QuotientFloorScan:
    """Grid minimum of g over [0,1]^(M-1), corner ball excluded.

    The corner is covered by the directional limit instead (the bound
    needs a positive floor, and the corner is where degeneracy lives).
    """
    if M < 2:
        raise ValueError("M >= 2")
    axes = [np.linspace(0.0, 1.0, n_grid)] * (M - 1)
    mesh = np.meshgrid(*axes, indexing="ij")
    R = np.stack([m.ravel() for m in mesh], axis=1)
    norms = np.linalg.norm(R, axis=1)
    keep = norms >= corner_radius
    R = R[keep]
    s2 = np.sum(R ** 2, axis=1)
    sp = np.sum(R ** (p + 1), axis=1)
    num = (1 + s2) ** (p + 1) - 1 - np.sum(R ** (2 * p + 2), axis=1)
    den = 2 * sp + sp ** 2
    vals = num / den
    k = int(np.argmin(vals))
    corner = (p + 1) / 2 if p == 1 else math.inf
    return QuotientFloorScan(min_value=float(vals[k]), argmin=R[k],
                             corner_limit=corner, corner_radius=corner_radius)
