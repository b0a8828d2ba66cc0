"""Primal-dual interior-point method with a filter line search.

Works on any problem object exposing ``n, m_eq, m_ineq, lower, upper`` and
``objective(y)``, ``gradient(y)``, ``constraints(y)`` (equalities then
inequalities ``g >= 0``), ``jacobian(y)`` (dense, same row order) and
``hessian(y, lam, obj_factor)``.

Inequalities are turned into equalities with bounded slacks, so the working
vector is ``w = (y, s)`` with constraints ``c_E(y) = 0`` and ``g(y) - s = 0``,
``s >= 0``.  Multiplier sign convention: stationarity of
``f + lam^T c - zL^T (w - l) + zU^T (w - u)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from ..errors import InvalidParameter, LinearSolveFailure
from .kkt import InertiaCorrector

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SolverOptions:
    feasibility_tol: float = 1e-6
    optimality_tol: float = 1e-6
    max_iter: int = 500
    mu_init: float = 0.1
    mu_decrease: float = 0.2
    mu_power: float = 1.5
    backtrack: float = 0.5
    reg_floor: float = 1e-8
    bound_push: float = 1e-2
    polish: bool = True
    linear_solver: str = "auto"  # dense | sparse | auto (by system size)
    verbose: bool = False

    def __post_init__(self):
        for name in ("feasibility_tol", "optimality_tol", "mu_init", "reg_floor", "bound_push"):
            if not getattr(self, name) > 0:
                raise InvalidParameter(f"{name} must be positive")
        if not (0 < self.mu_decrease < 1 and 0 < self.backtrack < 1):
            raise InvalidParameter("mu_decrease and backtrack must lie in (0, 1)")
        if self.linear_solver not in ("auto", "dense", "sparse"):
            raise InvalidParameter(f"unknown linear solver {self.linear_solver!r}")
        if not self.mu_power > 1:
            raise InvalidParameter("mu_power must exceed 1")
        if not (isinstance(self.max_iter, int) and self.max_iter >= 1):
            raise InvalidParameter("max_iter must be a positive integer")


@dataclass
class IpmResult:
    status: str
    y: np.ndarray
    lam: np.ndarray
    iterations: int
    objective: float
    primal_infeasibility: float
    dual_infeasibility: float
    complementarity: float
    overall_error: float
    restorations: int = 0
    history: list = field(default_factory=list)
    elapsed: float = 0.0


# filter and line-search constants
GAMMA_THETA = 1e-5
GAMMA_PHI = 1e-8
DELTA_SWITCH = 1.0
S_THETA = 1.1
S_PHI = 2.3
ETA_PHI = 1e-8
GAMMA_ALPHA = 0.05
SOC_MAX = 4
KAPPA_SOC = 0.99
KAPPA_SIGMA = 1e10
KAPPA_EPS = 10.0
S_MAX = 100.0
TAU_MIN = 0.99
DAMPING = 1e-5
LAMBDA_MAX = 1e3
BOUND_MULT_RESET = 1e3
RESTO_STALL = 50
RESTO_LIMIT = 200


class _Filter:
    def __init__(self):
        self.entries: list[tuple[float, float]] = []

    def accepts(self, theta: float, phi: float) -> bool:
        return all(theta < t or phi < p for t, p in self.entries)

    def add(self, theta: float, phi: float):
        t, p = (1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta
        self.entries = [(a, b) for a, b in self.entries if a < t or b < p]
        self.entries.append((t, p))

    def reset(self):
        self.entries = []


class InteriorPoint:
    def __init__(self, problem, opts: SolverOptions | None = None):
        self.p = problem
        self.o = opts or SolverOptions()
        n, me, mi = problem.n, problem.m_eq, problem.m_ineq
        self.n, self.me, self.mi = n, me, mi
        self.m = me + mi
        self.nw = n + mi
        self.lo = np.concatenate([np.asarray(problem.lower, float), np.zeros(mi)])
        self.hi = np.concatenate([np.asarray(problem.upper, float), np.full(mi, np.inf)])
        if np.any(self.lo > self.hi):
            raise InvalidParameter("lower bound exceeds upper bound")
        self.hasL = np.isfinite(self.lo)
        self.hasU = np.isfinite(self.hi)
        self.onlyL = self.hasL & ~self.hasU
        self.onlyU = self.hasU & ~self.hasL
        self.kkt = InertiaCorrector(opts.linear_solver)
        self.filter = _Filter()
        self.history: list[dict] = []
        self.restorations = 0
        self.iter = 0

    # ------------------------------------------------------------ evaluation

    def _push(self, y):
        """Move the start point strictly inside its bounds."""
        k = self.o.bound_push
        lo, hi = self.lo[: self.n], self.hi[: self.n]
        y = np.array(y, dtype=float)
        both = np.isfinite(lo) & np.isfinite(hi)
        with np.errstate(invalid="ignore"):  # inf - inf on one-sided bounds is masked out below
            pl = np.where(both, np.minimum(k * np.maximum(1, np.abs(lo)), k * (hi - lo)), k * np.maximum(1, np.abs(lo)))
            pu = np.where(both, np.minimum(k * np.maximum(1, np.abs(hi)), k * (hi - lo)), k * np.maximum(1, np.abs(hi)))
            y = np.where(np.isfinite(lo), np.maximum(y, lo + pl), y)
            y = np.where(np.isfinite(hi), np.minimum(y, hi - pu), y)
        fixed = both & (hi - lo <= 0)
        y[fixed] = lo[fixed]
        return y

    def _cons(self, w):
        c = np.asarray(self.p.constraints(w[: self.n]), dtype=float).copy()
        c[self.me:] -= w[self.n:]
        return c

    def _jac(self, w):
        J = np.asarray(self.p.jacobian(w[: self.n]), dtype=float)
        A = np.zeros((self.m, self.nw))
        A[:, : self.n] = J
        A[self.me:, self.n:] = -np.eye(self.mi)
        return A

    def _grad(self, w):
        g = np.zeros(self.nw)
        g[: self.n] = self.p.gradient(w[: self.n])
        return g

    def _barrier(self, w, f, mu):
        dl = w[self.hasL] - self.lo[self.hasL]
        du = self.hi[self.hasU] - w[self.hasU]
        if np.any(dl <= 0) or np.any(du <= 0):
            return np.inf
        val = f - mu * (np.log(dl).sum() + np.log(du).sum())
        val += DAMPING * mu * ((w - self.lo)[self.onlyL].sum() + (self.hi - w)[self.onlyU].sum())
        return float(val)

    def _barrier_grad(self, w, g, mu):
        out = g.copy()
        out[self.hasL] -= mu / (w[self.hasL] - self.lo[self.hasL])
        out[self.hasU] += mu / (self.hi[self.hasU] - w[self.hasU])
        out[self.onlyL] += DAMPING * mu
        out[self.onlyU] -= DAMPING * mu
        return out

    def _trial(self, w, mu):
        """(theta, phi, c, f) at ``w`` or infinities when evaluation fails."""
        with np.errstate(all="ignore"):
            try:
                c = self._cons(w)
                f = float(self.p.objective(w[: self.n]))
            except (FloatingPointError, ValueError, ArithmeticError):
                return np.inf, np.inf, None, np.inf
        if not (np.all(np.isfinite(c)) and math.isfinite(f)):
            return np.inf, np.inf, None, np.inf
        return float(np.abs(c).sum()), self._barrier(w, f, mu), c, f

    def _fraction_to_boundary(self, w, dw, tau):
        a = 1.0
        neg = self.hasL & (dw < 0)
        if np.any(neg):
            a = min(a, float(np.min(-tau * (w[neg] - self.lo[neg]) / dw[neg])))
        pos = self.hasU & (dw > 0)
        if np.any(pos):
            a = min(a, float(np.min(tau * (self.hi[pos] - w[pos]) / dw[pos])))
        return a

    @staticmethod
    def _frac_mult(z, dz, tau):
        neg = dz < 0
        if not np.any(neg):
            return 1.0
        return min(1.0, float(np.min(-tau * z[neg] / dz[neg])))

    def _lsq_multipliers(self, g, A, zL, zU, cap: float = LAMBDA_MAX):
        """Least-squares constraint multipliers, or zeros when the estimate exceeds ``cap``."""
        rhs = -(g - zL + zU)
        try:
            lam = np.linalg.lstsq(A.T, rhs, rcond=None)[0]
        except LinAlgError:
            return np.zeros(self.m)
        if not np.all(np.isfinite(lam)) or np.max(np.abs(lam), initial=0.0) > cap:
            return np.zeros(self.m)
        return lam

    def _errors(self, w, g, A, c, lam, zL, zU, mu):
        dual = g + A.T @ lam - zL + zU
        dl = np.where(self.hasL, w - self.lo, 0.0)
        du = np.where(self.hasU, self.hi - w, 0.0)
        comp_l = np.abs(zL * dl - mu)[self.hasL]
        comp_u = np.abs(zU * du - mu)[self.hasU]
        comp = max(np.max(comp_l, initial=0.0), np.max(comp_u, initial=0.0))
        nz = self.hasL.sum() + self.hasU.sum()
        zsum = np.abs(zL).sum() + np.abs(zU).sum()
        s_d = max(S_MAX, (np.abs(lam).sum() + zsum) / max(self.m + nz, 1)) / S_MAX
        s_c = max(S_MAX, zsum / max(nz, 1)) / S_MAX
        dinf = float(np.max(np.abs(dual), initial=0.0))
        pinf = float(np.max(np.abs(c), initial=0.0))
        err = max(dinf / s_d, pinf, comp / s_c)
        return err, pinf, dinf, float(comp)

    def _safeguard(self, w, zL, zU, mu):
        dl = w[self.hasL] - self.lo[self.hasL]
        zL[self.hasL] = np.clip(zL[self.hasL], mu / (KAPPA_SIGMA * dl), KAPPA_SIGMA * mu / dl)
        du = self.hi[self.hasU] - w[self.hasU]
        zU[self.hasU] = np.clip(zU[self.hasU], mu / (KAPPA_SIGMA * du), KAPPA_SIGMA * mu / du)

    def _log(self, kind, mu, f, theta, phi, alpha, dw):
        rec = dict(iter=self.iter, mu=float(mu), obj=float(f), theta=float(theta), phi=float(phi),
                   alpha=float(alpha), delta_w=float(dw), kind=kind)
        self.history.append(rec)
        if self.o.verbose:
            print(f"{self.iter:4d} {kind:5s} mu={mu:.2e} obj={f:.8e} theta={theta:.2e} alpha={alpha:.2e} dw={dw:.1e}")

    # -------------------------------------------------------------- main loop

    def solve(self, y0) -> IpmResult:
        t0 = time.perf_counter()
        o = self.o
        y = self._push(y0)
        g0 = np.asarray(self.p.constraints(y), dtype=float)[self.me:]
        s = np.maximum(g0, o.bound_push)
        w = np.concatenate([y, s])
        zL = np.where(self.hasL, 1.0, 0.0)
        zU = np.where(self.hasU, 1.0, 0.0)
        mu = o.mu_init
        tau = max(TAU_MIN, 1.0 - mu)
        mu_min = min(o.optimality_tol, o.feasibility_tol) / 10.0

        c = self._cons(w)
        if not np.all(np.isfinite(c)):
            raise LinearSolveFailure("constraints are not finite at the start point")
        f = float(self.p.objective(w[: self.n]))
        g = self._grad(w)
        A = self._jac(w)
        lam = self._lsq_multipliers(g, A, zL, zU)
        theta0 = float(np.abs(c).sum())
        self.theta_max = 1e4 * max(1.0, theta0)
        self.theta_min = 1e-4 * max(1.0, theta0)

        best = None
        status = "iteration-limit"
        while True:
            err0, pinf, dinf, comp = self._errors(w, g, A, c, lam, zL, zU, 0.0)
            if best is None or err0 < best[0]:
                best = (err0, w.copy(), lam.copy(), f, pinf, dinf, comp)
            if err0 <= o.optimality_tol and pinf <= o.feasibility_tol:
                status = "optimal"
                break
            if self.iter >= o.max_iter:
                break
            # barrier parameter update
            while mu > mu_min and self._errors(w, g, A, c, lam, zL, zU, mu)[0] <= KAPPA_EPS * mu:
                mu = max(mu_min, min(o.mu_decrease * mu, mu ** o.mu_power))
                tau = max(TAU_MIN, 1.0 - mu)
                self.filter.reset()

            self.iter += 1
            H = np.zeros((self.nw, self.nw))
            H[: self.n, : self.n] = self.p.hessian(w[: self.n], lam, 1.0)
            dl = np.where(self.hasL, w - self.lo, np.inf)
            du = np.where(self.hasU, self.hi - w, np.inf)
            sig_l = np.where(self.hasL, zL / dl, 0.0)
            sig_u = np.where(self.hasU, zU / du, 0.0)
            H[np.arange(self.nw), np.arange(self.nw)] += sig_l + sig_u
            delta_c = o.reg_floor * mu**0.25
            delta_w, _ = self.kkt.factorize(H, A, delta_c)

            gphi = self._barrier_grad(w, g, mu)
            rhs = -np.concatenate([gphi + A.T @ lam, c])
            sol = self.kkt.solve(rhs)
            dw, dlam = sol[: self.nw], sol[self.nw:]

            def dz_from(step):
                dzl = np.where(self.hasL, mu / dl - zL - sig_l * step, 0.0)
                dzu = np.where(self.hasU, mu / du - zU + sig_u * step, 0.0)
                return dzl, dzu

            alpha_max = self._fraction_to_boundary(w, dw, tau)
            theta = float(np.abs(c).sum())
            phi = self._barrier(w, f, mu)
            gd = float(gphi @ dw)

            accepted = None
            tiny = np.max(np.abs(dw) / (1.0 + np.abs(w)), initial=0.0) < 10 * EPS
            if tiny:
                wt = w + alpha_max * dw
                th_t, ph_t, c_t, f_t = self._trial(wt, mu)
                if math.isfinite(th_t):
                    accepted = ("tiny", wt, alpha_max, dw, dlam, c_t, f_t, th_t, ph_t)
            if accepted is None:
                accepted = self._line_search(w, dw, dlam, rhs, alpha_max, theta, phi, gd, mu, tau)
            if accepted is None:
                self._log("resto", mu, f, theta, phi, 0.0, delta_w)
                out = self._restoration(w, mu, tau, theta, phi)
                if out is None:
                    status = "infeasible-detected"
                    break
                w = out
                c = self._cons(w)
                f = float(self.p.objective(w[: self.n]))
                g = self._grad(w)
                A = self._jac(w)
                # restoration ignores the duals: reset oversized bound multipliers, then
                # re-estimate lam without the start-up cap (large multipliers are genuine here)
                if max(np.max(zL, initial=0.0), np.max(zU, initial=0.0)) > BOUND_MULT_RESET:
                    zL[self.hasL] = 1.0
                    zU[self.hasU] = 1.0
                self._safeguard(w, zL, zU, mu)
                lam = self._lsq_multipliers(g, A, zL, zU, cap=np.inf)
                if self.iter >= o.max_iter:
                    break
                continue

            kind, wt, alpha, step, dlam_used, c_t, f_t, th_t, ph_t = accepted
            dzl, dzu = dz_from(step)
            az = self._frac_mult(np.concatenate([zL[self.hasL], zU[self.hasU]]),
                                 np.concatenate([dzl[self.hasL], dzu[self.hasU]]), tau)
            if kind != "f":
                self.filter.add(theta, phi)
            w = wt
            lam = lam + alpha * dlam_used
            zL = zL + az * dzl
            zU = zU + az * dzu
            self._safeguard(w, zL, zU, mu)
            c, f = c_t, f_t
            g = self._grad(w)
            A = self._jac(w)
            self._log(kind, mu, f, th_t, ph_t, alpha, delta_w)

        if status == "iteration-limit":
            err0, w, lam, f, pinf, dinf, comp = best
        elif status == "infeasible-detected":
            err0, pinf, dinf, comp = self._errors(w, g, A, c, lam, zL, zU, 0.0)
        return IpmResult(
            status=status, y=w[: self.n].copy(), lam=lam.copy(), iterations=self.iter, objective=float(f),
            primal_infeasibility=float(pinf), dual_infeasibility=float(dinf), complementarity=float(comp),
            overall_error=float(err0), restorations=self.restorations, history=self.history,
            elapsed=time.perf_counter() - t0,
        )

    # ------------------------------------------------------------ line search

    def _alpha_min(self, theta, gd):
        if gd < 0:
            if theta <= self.theta_min:
                a = min(GAMMA_THETA, GAMMA_PHI * theta / -gd, DELTA_SWITCH * theta**S_THETA / (-gd) ** S_PHI)
            else:
                a = min(GAMMA_THETA, GAMMA_PHI * theta / -gd)
        else:
            a = GAMMA_THETA
        return GAMMA_ALPHA * a

    def _acceptable(self, th_t, ph_t, alpha, theta, phi, gd):
        """Return 'f', 'h' or None."""
        if not (math.isfinite(th_t) and math.isfinite(ph_t)):
            return None
        if th_t > self.theta_max or not self.filter.accepts(th_t, ph_t):
            return None
        switching = gd < 0 and alpha * (-gd) ** S_PHI > DELTA_SWITCH * theta**S_THETA
        if theta <= self.theta_min and switching:
            return "f" if ph_t <= phi + ETA_PHI * alpha * gd else None
        if th_t <= (1.0 - GAMMA_THETA) * theta or ph_t <= phi - GAMMA_PHI * theta:
            return "h"
        return None

    def _line_search(self, w, dw, dlam, rhs, alpha_max, theta, phi, gd, mu, tau):
        alpha = alpha_max
        a_min = self._alpha_min(theta, gd)
        first = True
        while alpha >= a_min:
            wt = w + alpha * dw
            th_t, ph_t, c_t, f_t = self._trial(wt, mu)
            kind = self._acceptable(th_t, ph_t, alpha, theta, phi, gd)
            if kind:
                return kind, wt, alpha, dw, dlam, c_t, f_t, th_t, ph_t
            if first and math.isfinite(th_t) and th_t >= theta:
                soc = self._second_order(w, rhs, alpha_max, c_t, theta, phi, gd, mu, tau)
                if soc is not None:
                    return soc
            first = False
            alpha *= self.o.backtrack
        return None

    def _second_order(self, w, rhs, alpha_max, c_trial, theta, phi, gd, mu, tau):
        c_soc = alpha_max * self._cons(w) + c_trial
        theta_old = float(np.abs(c_trial).sum())
        for _ in range(SOC_MAX):
            r = rhs.copy()
            r[self.nw:] = -c_soc
            sol = self.kkt.solve(r)
            dw, dlam = sol[: self.nw], sol[self.nw:]
            a = self._fraction_to_boundary(w, dw, tau)
            wt = w + a * dw
            th_t, ph_t, c_t, f_t = self._trial(wt, mu)
            kind = self._acceptable(th_t, ph_t, alpha_max, theta, phi, gd)
            if kind:
                return "soc" if kind == "h" else "f", wt, a, dw, dlam, c_t, f_t, th_t, ph_t
            if not math.isfinite(th_t) or th_t > KAPPA_SOC * theta_old:
                return None
            c_soc = a * c_soc + c_t
            theta_old = th_t
        return None

    # ------------------------------------------------------------ restoration

    def _restoration(self, w, mu, tau, theta_R, phi_R):
        """Reduce infeasibility by Levenberg-Marquardt steps on ``0.5 |c|^2`` under a weak log barrier.

        Returns a point the filter accepts with at most 90% of the entry
        violation, or ``None`` when the violation stalls above
        ``1e3 * feasibility_tol``.  Stalling below that level hands the best
        point found back to the main loop.
        """
        self.restorations += 1
        self.filter.add(theta_R, phi_R)
        stall_level = 1e3 * self.o.feasibility_tol
        D2 = np.minimum(1.0, 1.0 / np.maximum(np.abs(w), EPS)) ** 2
        lm = None
        best_w, best_theta = w, theta_R
        stall = 0
        for _ in range(RESTO_LIMIT):
            c = self._cons(w)
            A = self._jac(w)
            half = 0.5 * float(c @ c)
            mu_R = min(mu, max(1e-4 * half, 1e-16))
            dl = np.where(self.hasL, w - self.lo, np.inf)
            du = np.where(self.hasU, self.hi - w, np.inf)

            def merit(v, cv):
                if cv is None:
                    return np.inf
                a = v[self.hasL] - self.lo[self.hasL]
                b = self.hi[self.hasU] - v[self.hasU]
                if np.any(a <= 0) or np.any(b <= 0):
                    return np.inf
                return 0.5 * float(cv @ cv) - mu_R * (np.log(a).sum() + np.log(b).sum())

            grad = A.T @ c
            grad[self.hasL] -= mu_R / dl[self.hasL]
            grad[self.hasU] += mu_R / du[self.hasU]
            M = A.T @ A
            idx = np.arange(self.nw)
            M[idx, idx] += np.where(self.hasL, mu_R / dl**2, 0.0) + np.where(self.hasU, mu_R / du**2, 0.0)
            if lm is None:
                lm = 1e-6 * max(float(np.max(np.diag(M))), EPS)
            m0 = merit(w, c)
            accepted = False
            while lm < 1e30:
                try:
                    step = -cho_solve(cho_factor(M + lm * np.diag(D2)), grad)
                except LinAlgError:
                    lm *= 10.0
                    continue
                a = self._fraction_to_boundary(w, step, max(TAU_MIN, 1.0 - mu))
                wt = w + a * step
                th_t, ph_t, c_t, f_t = self._trial(wt, mu)
                if c_t is not None and merit(wt, c_t) <= m0 + 1e-4 * a * float(grad @ step):
                    accepted = True
                    break
                lm *= 4.0
            if not accepted:
                break
            lm = max(lm / 3.0, 1e-20)
            w = wt
            self.iter += 1
            self._log("r", mu_R, f_t, th_t, ph_t, a, lm)
            if th_t <= 0.9 * theta_R and self.filter.accepts(th_t, ph_t):
                return w
            if th_t < 0.99 * best_theta:
                best_w, best_theta, stall = w, th_t, 0
            else:
                stall += 1
            if stall >= RESTO_STALL or self.iter >= self.o.max_iter:
                break
        if best_theta > stall_level:
            return None
        return best_w

def minimize(problem, y0, opts: SolverOptions | None = None) -> IpmResult:
    return InteriorPoint(problem, opts).solve(y0)


def polish_feasibility(problem, y, active_tol: float = 1e-5, rounds: int = 6):
    """Drive equality residuals toward rounding level with minimum-norm Newton steps.

    Variables within ``active_tol`` of a bound are snapped onto it and stay
    fixed; nearly active inequalities are held at their current values.
    Returns the polished point, or ``y`` unchanged if the attempt would not
    improve feasibility.
    """
    lo, hi = np.asarray(problem.lower, float), np.asarray(problem.upper, float)
    me = problem.m_eq
    y0 = np.array(y, dtype=float)
    scale = 1.0 + np.abs(y0)
    near_lo = (y0 - lo) < active_tol * (1 + np.abs(lo))
    near_hi = (hi - y0) < active_tol * (1 + np.abs(hi))
    free = np.flatnonzero(~(near_lo | near_hi))
    cons0 = np.asarray(problem.constraints(y0), float)
    g0 = cons0[me:]
    act = np.flatnonzero(g0 < active_tol)
    target = np.maximum(g0[act], 0.0)
    best = y0
    best_norm = float(np.max(np.abs(cons0[:me]), initial=0.0))
    yk = y0.copy()
    # two variables resting on the same bound (a junction and the edge feeding it)
    # only balance exactly once both sit on it
    yk[near_lo] = lo[near_lo]
    yk[near_hi] = hi[near_hi]
    stalled = 0
    for _ in range(rounds):
        cons = np.asarray(problem.constraints(yk), float)
        r = np.concatenate([cons[:me], cons[me:][act] - target])
        J = np.asarray(problem.jacobian(yk), float)
        Jfull = np.vstack([J[:me], J[me:][act]])
        for _pin in range(5):  # pin variables the step would push across a bound
            step = np.linalg.lstsq(Jfull[:, free] * scale[free], -r, rcond=None)[0] * scale[free]
            yt = yk.copy()
            yt[free] += step
            out = (yt < lo) | (yt > hi)
            if not out.any():
                break
            yk = np.clip(yk, lo, hi)
            yk[out & (yt < lo)] = lo[out & (yt < lo)]
            yk[out & (yt > hi)] = hi[out & (yt > hi)]
            free = free[~out[free]]
            r = np.concatenate([np.asarray(problem.constraints(yk), float)[:me],
                                np.asarray(problem.constraints(yk), float)[me:][act] - target])
        if np.any(yt < lo) or np.any(yt > hi):
            break
        ct = np.asarray(problem.constraints(yt), float)
        if not np.all(np.isfinite(ct)) or np.any(ct[me:] < np.minimum(g0, 0.0) - 1e-12):
            break
        norm = float(np.max(np.abs(ct[:me]), initial=0.0))
        yk = yt
        if norm < best_norm:
            best, best_norm, stalled = yt, norm, 0
        else:
            stalled += 1
            if stalled == 2:
                break
    return best
