"""Ground-state action levels, coupling thresholds and comparison lemmas.

For a support set X, the level

    L(X) = ( inf { I(U) : J(U) = 1, u_i = 0 for i not in X } )^((p+1)/p)

equals I evaluated on a ground state of the subsystem.  At equal
frequencies the separable reduction makes it explicit:

    L(X) = fmax(X)^(-1/p) * I(u0),   fmax(X) = max f over sphere points
                                               supported inside X,

and L(X) = +inf exactly when fmax(X) <= 0.  The semitrivial level is the
minimum of L over proper supports.  Monotonicity (levels nondecreasing
in omega, nonincreasing in K) and continuity in the probe multiplier
beta are exposed as checkable comparisons.

Levels are reported in absolute units: the scalar factor I(u0) comes
from the scalar module, with the frequency dependence handled by the
exact scaling I(u0; omega) = omega^((2-p(N-2))/(2p)) I(u0; 1).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import scalar
from .model import ProblemSpec, UnsupportedRegimeError, require_valid
from .reduction import F_MAX_ZERO_TOL, kkt_candidates_p1, maximize_coupling_form

TIE_TOL = 1e-9


@lru_cache(maxsize=None)
def _scalar_I_at_unit_omega(p: float, N: int) -> float:
    return scalar.solve_scalar(p, N, 1.0).I_value


def scalar_energy(p: float, N: int, omega: float) -> float:
    """I(u0) for the scalar ground state at the given frequency."""
    return _scalar_I_at_unit_omega(p, N) * scalar.omega_scaling_factor(p, N, omega)


def _supports(M: int):
    for r in range(1, M + 1):
        yield from itertools.combinations(range(M), r)


def _ball_f_max(spec: ProblemSpec, support: Sequence[int], n_random: int = 64) -> float:
    """max of f over sphere points supported inside the given set.

    For p = 1 the exact critical-point enumeration is complete, so the
    gradient-ascent pass is skipped; that keeps threshold bisections and
    scans cheap without giving up exactness.
    """
    sub = spec.restricted(support)
    if sub.M == 1:
        return float(sub.K[0, 0])
    if sub.p == 1:
        return max(c.f for c in kkt_candidates_p1(sub))
    ms = maximize_coupling_form(sub, n_random=n_random)
    return ms.f_max


def _level_from_f_max(spec: ProblemSpec, f_max: float, omega_support: float) -> float:
    if f_max <= F_MAX_ZERO_TOL:
        return math.inf
    return f_max ** (-1 / spec.p) * scalar_energy(spec.p, spec.N, omega_support)


def action_level(spec: ProblemSpec, support: Optional[Sequence[int]] = None,
                 n_random: int = 64) -> float:
    """Ground-state action level restricted to the support (0-based).

    Frequencies must agree on the support (singletons always qualify);
    unequal multi-component supports need the PDE-level minimizer, see
    variational.action_level_numerical.
    """
    require_valid(spec)
    if support is None:
        support = tuple(range(spec.M))
    idx = sorted(int(i) for i in support)
    w = spec.omega[idx]
    if len(idx) > 1 and np.any(np.abs(w - w[0]) > 1e-12 * max(1.0, abs(w[0]))):
        raise UnsupportedRegimeError(
            "unequal frequencies on a multi-component support; "
            "compute this level with the variational module"
        )
    f_max = _ball_f_max(spec, idx, n_random=n_random)
    return _level_from_f_max(spec, f_max, float(w[0]))


@dataclass
class ActionLevels:
    full: float
    per_support: dict            # support tuple -> level (ball semantics)
    semitrivial: float
    thresholds: Optional[dict] = None  # support tuple -> coupling threshold

    def verdict(self) -> str:
        if math.isinf(self.full):
            return "no-ground-states"
        if math.isinf(self.semitrivial):
            return "nontrivial"
        if self.semitrivial - self.full <= TIE_TOL * max(1.0, abs(self.full)):
            return "semitrivial"
        return "nontrivial"


def action_levels(spec: ProblemSpec, with_thresholds: bool = False,
                  threshold_tol: float = 1e-6, n_random: int = 64) -> ActionLevels:
    """Levels for every support subset plus the semitrivial minimum."""
    require_valid(spec)
    if not spec.equal_omega():
        # only singletons are computable; multi-supports would raise
        raise UnsupportedRegimeError(
            "per-support levels at unequal frequencies are PDE-level "
            "quantities; use the variational module"
        )
    omega0 = float(spec.omega[0])
    per = {}
    if spec.p == 1:
        cands = kkt_candidates_p1(spec)
        for support in _supports(spec.M):
            inside = [c.f for c in cands if set(c.support) <= set(support)]
            f_max = max(inside) if inside else -math.inf
            per[support] = _level_from_f_max(spec, f_max, omega0)
    else:
        for support in _supports(spec.M):
            f_max = _ball_f_max(spec, support, n_random=n_random)
            per[support] = _level_from_f_max(spec, f_max, omega0)
    full_support = tuple(range(spec.M))
    semi = min((lvl for sup, lvl in per.items() if sup != full_support), default=math.inf)
    thresholds = None
    if with_thresholds and spec.P:
        thresholds = {
            sup: coupling_threshold(spec, sup, tol=threshold_tol)
            for sup in per
        }
    return ActionLevels(full=per[full_support], per_support=per,
                        semitrivial=semi, thresholds=thresholds)


def semitrivial_coefficient(spec: ProblemSpec, n_random: int = 64) -> float:
    """Semitrivial level in I(u0) units: min over proper supports of fmax^(-1/p)."""
    require_valid(spec)
    best = -math.inf
    if spec.p == 1:
        cands = kkt_candidates_p1(spec)
        full = set(range(spec.M))
        best = max((c.f for c in cands if set(c.support) != full), default=-math.inf)
    else:
        for support in _supports(spec.M):
            if len(support) == spec.M:
                continue
            best = max(best, _ball_f_max(spec, support, n_random=n_random))
    if best <= F_MAX_ZERO_TOL:
        return math.inf
    return best ** (-1 / spec.p)


def coupling_threshold(spec: ProblemSpec, support: Optional[Sequence[int]] = None,
                       bracket: Optional[tuple] = None, tol: float = 1e-6) -> float:
    """Largest beta at which the restricted level is still infinite.

    Bisects on the sign of the restricted fmax, which is nondecreasing
    in beta when the probed couplings are nonnegative.  Returns -inf if
    the level is finite over the whole search range and +inf if it
    never becomes finite.
    """
    require_valid(spec)
    if not spec.P:
        raise ValueError("coupling threshold needs a probe set P")
    mask = spec.probe_mask()
    if np.any(spec.K[mask] < 0):
        raise UnsupportedRegimeError("threshold bisection assumes k >= 0 on P")
    if support is None:
        support = tuple(range(spec.M))
    idx = sorted(int(i) for i in support)

    def finite(beta: float) -> bool:
        return _ball_f_max(spec.with_beta(beta), idx) > F_MAX_ZERO_TOL

    if bracket is None:
        lo, hi = -1.0, 1.0
        for _ in range(60):
            if finite(hi):
                break
            hi *= 2
        else:
            return math.inf
        for _ in range(60):
            if not finite(lo):
                break
            lo *= 2
        else:
            return -math.inf
    else:
        lo, hi = bracket
        if finite(lo):
            return -math.inf
        if not finite(hi):
            return math.inf
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if finite(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# closed-form regime classifiers
# ---------------------------------------------------------------------------

@dataclass
class UniformRepulsiveRegime:
    regime: str          # no-ground-states | all-nontrivial | finite-comparison
    beta_lower: float    # stated threshold for the full-support level
    beta_semitrivial: float


def uniform_repulsive_regime(M: int, beta: float) -> UniformRepulsiveRegime:
    """Stated regime thresholds for the family k_ii = -1, k_ij = beta.

    The closed forms 2/(M-1) and 2/(M-2) count each unordered coupling
    pair once.  Under this library's ordered-pair convention for J (the
    one the system equations impose) the measured thresholds are half
    these values; coupling_threshold locates them numerically.  The
    classifier reports the stated constants unchanged.
    """
    if M < 3:
        raise ValueError("family requires M >= 3")
    lower = 2.0 / (M - 1)
    semi = 2.0 / (M - 2)
    if beta <= lower:
        regime = "no-ground-states"
    elif beta <= semi:
        regime = "all-nontrivial"
    else:
        regime = "finite-comparison"
    return UniformRepulsiveRegime(regime=regime, beta_lower=lower, beta_semitrivial=semi)


def uniform_repulsive_spec(M: int, beta: float, p: float = 1.0, N: int = 1) -> ProblemSpec:
    """The spec for k_ii = -1, k_ij = beta, with beta as the probe multiplier."""
    K = np.ones((M, M)) - 2.0 * np.eye(M)
    P = frozenset((i + 1, j + 1) for i in range(M) for j in range(M) if i != j)
    return ProblemSpec(M=M, p=p, N=N, omega=np.ones(M), K=K, P=P, beta=beta)


@dataclass
class SmallDiagonalReport:
    holds: bool
    lhs: float
    rhs: float
    margin: float


def small_diagonal_condition(spec: ProblemSpec) -> SmallDiagonalReport:
    """Frequency-spread inequality guaranteeing nontrivial ground states.

    For p <= 1, M >= 3, sorted frequencies and equal off-diagonal
    couplings b > 0, the condition

        (M-1)/(M-2)^(1/p) > M/(M-1)^(1/p) * (omega_M/omega_1)^((2-p(N-2))/(2p))

    implies that small enough diagonal terms leave every ground state
    nontrivial.  Only the inequality and its margin are evaluated; the
    admissible diagonal size is not quantified.
    """
    require_valid(spec)
    p, M, N = spec.p, spec.M, spec.N
    if p > 1:
        raise UnsupportedRegimeError(
            "the small-diagonal conclusion can fail for p > 1 "
            "(equal-coupling M=3, p=3 is a counterexample)"
        )
    if M < 3:
        raise ValueError("requires M >= 3")
    w = spec.omega
    if np.any(np.diff(w) < 0):
        raise ValueError("frequencies must be sorted ascending")
    off = spec.effective_K()[~np.eye(M, dtype=bool)]
    if not (np.allclose(off, off[0]) and off[0] > 0):
        raise ValueError("off-diagonal couplings must be equal and positive")
    lhs = (M - 1) / (M - 2) ** (1 / p)
    rhs = M / (M - 1) ** (1 / p) * (w[-1] / w[0]) ** ((2 - p * (N - 2)) / (2 * p))
    return SmallDiagonalReport(holds=bool(lhs > rhs), lhs=lhs, rhs=rhs, margin=lhs - rhs)


# ---------------------------------------------------------------------------
# monotonicity and continuity
# ---------------------------------------------------------------------------

@dataclass
class MonotonicityReport:
    kind: str            # "omega" | "K" | "equal"
    level_1: float
    level_2: float
    margin: float        # >= 0 when the lemma holds
    holds: bool


def monotonicity_check(spec1: ProblemSpec, spec2: ProblemSpec,
                       tol: float = 1e-9) -> MonotonicityReport:
    """Level comparison for a dominated pair of specs.

    spec2 must dominate spec1 either in omega (componentwise, equal K)
    or in K (entrywise, equal omega).  Levels rise with omega and fall
    with K.  Reduced-level evaluation needs uniform frequency vectors.
    """
    require_valid(spec1)
    require_valid(spec2)
    K1, K2 = spec1.effective_K(), spec2.effective_K()
    same_K = np.array_equal(K1, K2)
    same_w = np.array_equal(spec1.omega, spec2.omega)
    if same_K and same_w:
        kind = "equal"
    elif same_K and np.all(spec2.omega >= spec1.omega):
        kind = "omega"
    elif same_w and np.all(K2 >= K1):
        kind = "K"
    else:
        raise ValueError("specs are not comparable (no domination direction)")
    if not (spec1.equal_omega() and spec2.equal_omega()):
        raise UnsupportedRegimeError("reduced-level comparison needs uniform frequencies")
    l1 = action_level(spec1)
    l2 = action_level(spec2)
    if kind == "K":
        margin = l1 - l2          # level must not increase
    else:
        margin = l2 - l1          # level must not decrease (omega/equal)
    if math.isinf(l1) or math.isinf(l2):
        if kind == "K":
            holds = not (math.isinf(l2) and not math.isinf(l1))
        else:
            holds = not (math.isinf(l1) and not math.isinf(l2))
        margin = math.inf if holds else -math.inf
    else:
        holds = margin >= -tol * max(1.0, abs(l1), abs(l2))
    return MonotonicityReport(kind=kind, level_1=l1, level_2=l2, margin=margin, holds=holds)


@dataclass
class ContinuityScan:
    betas: np.ndarray
    level_full: np.ndarray
    level_semitrivial: np.ndarray
    verdicts: list
    jump_flags: list             # (curve, index) pairs that tripped the detector
    divergences: list            # (curve, index) of finite/infinite transitions
    max_rel_jump: float


def continuity_scan(spec: ProblemSpec, beta_range: tuple, n_points: int) -> ContinuityScan:
    """Sample levels across a beta range and look for spurious jumps.

    The level curves are continuous in beta (with divergence at the
    coupling threshold), so a genuine jump indicates a solver bug.  The
    detector flags |L1-L0| > 10 * max(|L0|,|L1|) / n_points between
    finite neighbours, except where the curve is steepening into the
    divergence (ratio above 10), which is recorded separately.
    """
    lo, hi = beta_range
    betas = np.linspace(lo, hi, n_points)
    full = np.empty(n_points)
    semi = np.empty(n_points)
    verdicts = []
    for k, b in enumerate(betas):
        levels = action_levels(spec.with_beta(float(b)))
        full[k] = levels.full
        semi[k] = levels.semitrivial
        verdicts.append(levels.verdict())
    jump_flags = []
    divergences = []
    max_rel = 0.0
    for name, curve in (("full", full), ("semitrivial", semi)):
        for k in range(n_points - 1):
            a, b = curve[k], curve[k + 1]
            if math.isinf(a) != math.isinf(b):
                divergences.append((name, k))
                continue
            if math.isinf(a):
                continue
            scale = max(abs(a), abs(b), 1e-300)
            rel = abs(b - a) / scale
            max_rel = max(max_rel, rel)
            steep = max(abs(a), abs(b)) > 10 * min(abs(a), abs(b))
            if steep:
                divergences.append((name, k))
            elif abs(b - a) > 10.0 * scale / n_points:
                jump_flags.append((name, k))
    return ContinuityScan(betas=betas, level_full=full, level_semitrivial=semi,
                          verdicts=verdicts, jump_flags=jump_flags,
                          divergences=divergences, max_rel_jump=max_rel)


def scan_to_csv(scan: ContinuityScan, path):
    with open(path, "w") as fh:
        fh.write("beta,level_full,level_semitrivial,verdict\n")
        for b, lf, ls, v in zip(scan.betas, scan.level_full,
                                scan.level_semitrivial, scan.verdicts):
            fh.write(f"{b:.17g},{lf:.17g},{ls:.17g},{v}\n")
