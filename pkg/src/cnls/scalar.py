"""Scalar ground state of Delta u - omega u + |u|^2p u = 0 on R^N.

For N=1 the positive even solution is explicit,

    u(x) = ((p+1) omega)^(1/2p) sech^(1/p)(p sqrt(omega) x),

and for N >= 2 the radial profile is found by shooting on

    u'' + (N-1)/r u' - omega u + u^(2p+1) = 0,  u'(0) = 0,

bisecting on u(0) between undershoot (u' turns positive while u > 0)
and overshoot (u crosses zero).  The converged trajectory is extended
past the last reliable sample by the asymptotic tail
C r^(-(N-1)/2) exp(-sqrt(omega) r), which keeps the profile positive
and monotone down to round-off.

Integrals use the spherical measure: int_{R^N} g(|x|) dx
= area(S^{N-1}) * int_0^inf g(r) r^(N-1) dr.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .model import SolverError, unit_sphere_area

_PROFILE_NODES = 8001
_SHOOT_RTOL = 1e-10
_SHOOT_ATOL = 1e-12


@dataclass(frozen=True)
class ScalarGroundState:
    p: float
    N: int
    omega: float
    r: np.ndarray        # radial grid, r[0] = 0
    u: np.ndarray        # profile samples, positive decreasing
    du: np.ndarray       # radial derivative samples
    u0_at_0: float
    mass: float          # int u^2
    grad_energy: float   # int |grad u|^2
    lp_norm: float       # int u^(2p+2)
    I_value: float       # grad_energy + omega * mass

    @property
    def J_value(self) -> float:
        # for the scalar equation with unit coupling, J = int u^(2p+2)
        return self.lp_norm

    def scaling_exponent(self) -> float:
        return (2 - self.p * (self.N - 2)) / (2 * self.p)


def omega_scaling_factor(p: float, N: int, sigma: float) -> float:
    """Factor by which I (and J) scale when omega is multiplied by sigma."""
    return sigma ** ((2 - p * (N - 2)) / (2 * p))


def _validate(p: float, N: int, omega: float):
    if omega <= 0:
        raise ValueError("omega must be positive")
    if p <= 0:
        raise ValueError("p must be positive")
    if N >= 3 and p >= 2.0 / (N - 2):
        raise ValueError(f"p={p} not subcritical for N={N}")


def _integrals(p, N, omega, r, u, du):
    area = unit_sphere_area(N)
    h = r[1] - r[0]
    w = np.full(r.size, h)
    w[0] = w[-1] = h / 2
    rw = w * r ** (N - 1)
    mass = area * float(np.sum(rw * u * u))
    grad = area * float(np.sum(rw * du * du))
    lp = area * float(np.sum(rw * u ** (2 * p + 2)))
    return mass, grad, lp


def _solve_1d(p: float, omega: float) -> ScalarGroundState:
    amp = ((p + 1) * omega) ** (1 / (2 * p))
    rate = p * np.sqrt(omega)
    r_max = 50.0 / np.sqrt(omega)
    r = np.linspace(0.0, r_max, _PROFILE_NODES)
    sech = 1.0 / np.cosh(rate * r)
    u = amp * sech ** (1 / p)
    du = -np.sqrt(omega) * u * np.tanh(rate * r)
    mass, grad, lp = _integrals(p, 1, omega, r, u, du)
    return ScalarGroundState(
        p=p, N=1, omega=omega, r=r, u=u, du=du, u0_at_0=amp,
        mass=mass, grad_energy=grad, lp_norm=lp, I_value=grad + omega * mass,
    )


def _shoot(p, N, omega, s, r_max):
    """Classify the trajectory started at u(0)=s: cross / turn / decay."""
    r0 = 1e-8

    def rhs(r, y):
        u, v = y
        return (v, -(N - 1) / r * v + omega * u - np.sign(u) * np.abs(u) ** (2 * p + 1))

    def crossed(r, y):
        return y[0]

    crossed.terminal = True
    crossed.direction = -1.0

    def turned(r, y):
        return y[1]

    turned.terminal = True
    turned.direction = 1.0

    # series start: u ~ s + (omega s - s^(2p+1)) r^2 / (2N)
    c = omega * s - s ** (2 * p + 1)
    y0 = (s + c * r0 ** 2 / (2 * N), c * r0 / N)
    sol = solve_ivp(rhs, (r0, r_max), y0, events=(crossed, turned),
                    rtol=_SHOOT_RTOL, atol=_SHOOT_ATOL, dense_output=True)
    if sol.t_events[0].size:
        return "cross", sol
    if sol.t_events[1].size:
        return "turn", sol
    return "decay", sol


def _solve_radial(p: float, N: int, omega: float) -> ScalarGroundState:
    r_max = 50.0 / np.sqrt(omega)
    # below ((p+1) omega)^(1/2p) the trajectory lacks the energy to reach 0
    lo = ((p + 1) * omega) ** (1 / (2 * p))
    hi = 2 * lo
    while _shoot(p, N, omega, hi, r_max)[0] != "cross":
        hi *= 2
        if hi > 1e6:
            raise SolverError("shooting bisection failed to bracket in [1e-6, 1e6]")
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        status, _ = _shoot(p, N, omega, mid, r_max)
        if status == "cross":
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-16 * hi:
            break
    s = 0.5 * (lo + hi)
    _, sol = _shoot(p, N, omega, s, r_max)

    r = np.linspace(0.0, r_max, _PROFILE_NODES)
    r_ode = np.clip(r, 1e-8, sol.t[-1])
    u, du = sol.sol(r_ode)
    u[0], du[0] = s, 0.0
    # splice the asymptotic tail where the raw trajectory stops being reliable
    cut = np.where((u < 1e-9 * s) | (r > sol.t[-1]) | (du > 0))[0]
    if cut.size:
        k = max(int(cut[0]), 2)
        rk, uk = r[k - 1], u[k - 1]
        decay = np.sqrt(omega)
        tail = r[k:]
        u[k:] = uk * (rk / tail) ** ((N - 1) / 2) * np.exp(-decay * (tail - rk))
        du[k:] = u[k:] * (-(N - 1) / (2 * tail) - decay)

    mass, grad, lp = _integrals(p, N, omega, r, u, du)
    return ScalarGroundState(
        p=p, N=N, omega=omega, r=r, u=u, du=du, u0_at_0=s,
        mass=mass, grad_energy=grad, lp_norm=lp, I_value=grad + omega * mass,
    )


def solve_scalar(p: float, N: int, omega: float) -> ScalarGroundState:
    """Ground state of the scalar equation, closed form for N=1, shooting else."""
    _validate(p, N, omega)
    if N == 1:
        return _solve_1d(p, omega)
    return _solve_radial(p, N, omega)


def scale_omega(gs: ScalarGroundState, omega_new: float) -> ScalarGroundState:
    """Ground state at a new frequency via u_w(x) = w^(1/2p) u_1(sqrt(w) x).

    All integral quantities transform by explicit powers of
    sigma = omega_new / omega, so no re-solve is needed.
    """
    if omega_new <= 0:
        raise ValueError("omega_new must be positive")
    sigma = omega_new / gs.omega
    if sigma == 1.0:
        return gs
    p, N = gs.p, gs.N
    sq = np.sqrt(sigma)
    return replace(
        gs,
        omega=omega_new,
        r=gs.r / sq,
        u=gs.u * sigma ** (1 / (2 * p)),
        du=gs.du * sigma ** (1 / (2 * p)) * sq,
        u0_at_0=gs.u0_at_0 * sigma ** (1 / (2 * p)),
        mass=gs.mass * sigma ** (1 / p - N / 2),
        grad_energy=gs.grad_energy * sigma ** (1 / p + 1 - N / 2),
        lp_norm=gs.lp_norm * sigma ** ((p + 1) / p - N / 2),
        I_value=gs.I_value * sigma ** ((2 - p * (N - 2)) / (2 * p)),
    )


def write_profile_csv(gs: ScalarGroundState, path):
    """Profile export: CSV with r,u columns."""
    with open(path, "w") as fh:
        fh.write("r,u\n")
        for r, u in zip(gs.r, gs.u):
            fh.write(f"{r:.17g},{u:.17g}\n")


def metadata_dict(gs: ScalarGroundState) -> dict:
    return {
        "p": gs.p,
        "N": gs.N,
        "omega": gs.omega,
        "u0_at_0": gs.u0_at_0,
        "mass": gs.mass,
        "grad_energy": gs.grad_energy,
        "lp_norm": gs.lp_norm,
        "I_value": gs.I_value,
        "scaling_exponent": gs.scaling_exponent(),
    }
