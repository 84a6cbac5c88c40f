"""KKT residuals and rank predictions for the perfect-CSI leakage problem.

The leakage problem ``min t`` s.t. ``zPhi z* - t (N0 + zPsi z*) <= 0``, rate
floors, power caps and PSD cones is quasi-convex. At its optimum ``t*`` the
Lagrangian multipliers are those of the convex problem

    min  (z1 Phi1 z1* + z2 Phi2 z2*) - t* (N0 + z1 Psi1 z1* + z2 Psi2 z2*)

over the remaining constraints, scaled by ``mu = 1 / (N0 + zPsi z*)`` (the
stationarity condition in ``t``). :func:`kkt_certificate` finds ``t*`` by
Dinkelbach iterations started from the bisection bracket and returns the
primal design together with the scaled multipliers.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import CovarianceDesign, capacity_bounds
from .linalg import numerical_rank, quadratic_form
from .sdp import IpmOptions, LmiProblem, solve

log = logging.getLogger(__name__)

KKT_TOL = 1e-6
DUAL_MARGIN = 1e-6
NONZERO_TOL = 1e-6
COLLINEAR_TOL = 1e-8
ORTHO_TOL = 1e-6
DINKELBACH_TOL = 1e-11
DINKELBACH_ITERS = 30
KKT_FEAS_TOL = 1e-9
KKT_GAP_TOL = 1e-13
GAP_LADDER = (KKT_GAP_TOL, 1e-11, 1e-9)
# the rank tests need complementarity far below the 1e-6 dual dead band
KKT_OPTIONS = IpmOptions(rel_tol=1e-15, max_iters=400)


@dataclass
class KktDuals:
    """Multipliers of the leakage problem (perfect CSI)."""

    lam1: float
    lam2: float
    mu: float
    nu1: float
    nu2: float
    A1: np.ndarray
    B1: np.ndarray
    A2: np.ndarray
    B2: np.ndarray


@dataclass
class KktCertificate:
    """Refined optimum of one cell: level ``t``, design and multipliers."""

    rk1: float
    rl2: float
    t: float
    design: CovarianceDesign
    duals: KktDuals
    status: str
    iterations: int = 0


def _row(v):
    return np.asarray(v, dtype=complex).reshape(1, -1)


def _qf(v, X):
    v = _row(v)
    return v @ X @ v.conj().T


def dinkelbach_problem(inst, t, a1, a2):
    """Batched convex subproblem ``min N - t D`` over the rate/power set."""
    t = np.atleast_1d(np.asarray(t, float))
    a1 = np.broadcast_to(np.asarray(a1, float), t.shape)
    a2 = np.broadcast_to(np.asarray(a2, float), t.shape)
    p = LmiProblem(batch=t.size)
    phi1 = p.hermitian("phi1", inst.m1)
    psi1 = p.hermitian("psi1", inst.m1)
    phi2 = p.hermitian("phi2", inst.m2)
    psi2 = p.hermitian("psi2", inst.m2)
    n0 = inst.n0
    num = _qf(inst.z1, phi1) + _qf(inst.z2, phi2)
    den = _qf(inst.z1, psi1) + _qf(inst.z2, psi2) + n0
    p.add_le((_qf(inst.h21, psi1) + n0) * a1 - _qf(inst.h21, phi1), "rate1")
    p.add_le((_qf(inst.h12, psi2) + n0) * a2 - _qf(inst.h12, phi2), "rate2")
    p.add_le((phi1 + psi1).trace() - inst.p1, "power1")
    p.add_le((phi2 + psi2).trace() - inst.p2, "power2")
    p.minimize(num - den * t)
    return p


def _num_den(inst, phi1, psi1, phi2, psi2):
    num = quadratic_form(inst.z1, phi1) + quadratic_form(inst.z2, phi2)
    den = inst.n0 + quadratic_form(inst.z1, psi1) + quadratic_form(inst.z2, psi2)
    return np.real(num), np.real(den)


class _Merged:
    """Batched solution assembled from several solve attempts."""

    def __init__(self, sol):
        self.status = sol.status.copy()
        self._vals = {n: sol.value(n) for n in ("phi1", "psi1", "phi2", "psi2")}
        self._duals = {n: np.array(sol.dual(n)) for n in DUAL_NAMES}

    def update(self, idx, sol):
        self.status[idx] = sol.status
        for n in self._vals:
            self._vals[n][idx] = sol.value(n)
        for n in self._duals:
            self._duals[n][idx] = sol.dual(n)

    def value(self, name):
        return self._vals[name]

    def dual(self, name):
        return self._duals[name]


DUAL_NAMES = ("power1", "power2", "rate1", "rate2",
              "psd:phi1", "psd:psi1", "psd:phi2", "psd:psi2")


def _solve_ladder(build, inst, t, a1, a2):
    """Solve at the tight gap; members that stall are retried looser."""
    merged = None
    idx = np.arange(t.size)
    for gap in GAP_LADDER:
        sol = solve(build(inst, t[idx], a1[idx], a2[idx]), feas_tol=KKT_FEAS_TOL,
                    gap_tol=gap, options=KKT_OPTIONS)
        if merged is None:
            merged = _Merged(sol)
        else:
            merged.update(idx, sol)
        idx = idx[(sol.status != "optimal") & (sol.status != "infeasible")]
        if idx.size == 0:
            break
    return merged


def kkt_certificates(inst, rk1, rl2, t0=None, tol=DINKELBACH_TOL,
                     max_iters=DINKELBACH_ITERS):
    """Refine the optimum of many cells at once; list of :class:`KktCertificate`.

    ``t0`` (optional, per cell) is a starting level at or above the optimum,
    e.g. the bisection's feasible end; the default is the eavesdropper cap.
    """
    if not inst.perfect:
        raise ValueError("KKT analysis covers the perfect-CSI problem only")
    rk1 = np.atleast_1d(np.asarray(rk1, float))
    rl2 = np.atleast_1d(np.asarray(rl2, float))
    B = rk1.size
    a1 = np.expm1(rk1 * math.log(2.0))
    a2 = np.expm1(rl2 * math.log(2.0))
    if t0 is None:
        t = np.full(B, 2.0 ** capacity_bounds(inst)[2] - 1.0)
    else:
        t = np.broadcast_to(np.asarray(t0, float), (B,)).copy()
    c1, c2, _ = capacity_bounds(inst)
    # at full capacity the feasible set has no interior and multipliers
    # need not exist
    boundary = (rk1 >= c1 * (1 - 1e-12)) | (rl2 >= c2 * (1 - 1e-12))
    status = np.full(B, "running", dtype=object)
    iters = np.zeros(B, int)
    out = [None] * B
    for _ in range(max_iters):
        act = np.nonzero(status == "running")[0]
        if act.size == 0:
            break
        sol = _solve_ladder(dinkelbach_problem, inst, t[act], a1[act], a2[act])
        mats = {n: sol.value(n) for n in ("phi1", "psi1", "phi2", "psi2")}
        iters[act] += 1
        for j, i in enumerate(act):
            if sol.status[j] != "optimal":
                if sol.status[j] == "infeasible":
                    status[i] = "infeasible"
                elif boundary[i]:
                    status[i] = "noDualCertificate"
                else:
                    status[i] = "numericalFailure"
                continue
            d = CovarianceDesign(*(mats[n][j] for n in
                                   ("phi1", "psi1", "phi2", "psi2")))
            num, den = _num_den(inst, d.phi1, d.psi1, d.phi2, d.psi2)
            t_new = max(num / den, 0.0)
            mu = 1.0 / den
            duals = KktDuals(
                lam1=mu * sol.dual("power1")[j], lam2=mu * sol.dual("power2")[j],
                mu=mu, nu1=mu * sol.dual("rate1")[j], nu2=mu * sol.dual("rate2")[j],
                A1=mu * sol.dual("psd:phi1")[j], B1=mu * sol.dual("psd:psi1")[j],
                A2=mu * sol.dual("psd:phi2")[j], B2=mu * sol.dual("psd:psi2")[j])
            out[i] = KktCertificate(float(rk1[i]), float(rl2[i]), float(t_new),
                                    d, duals, "running", int(iters[i]))
            if abs(t_new - t[i]) <= tol * max(1.0, t[i]):
                status[i] = "optimal"
            t[i] = t_new
    for i in range(B):
        st = "numericalFailure" if status[i] == "running" else status[i]
        if out[i] is None:
            out[i] = KktCertificate(float(rk1[i]), float(rl2[i]), math.nan,
                                    None, None, st, int(iters[i]))
        else:
            out[i].status = st
            out[i].iterations = int(iters[i])
    return out


def kkt_certificate(inst, rk1, rl2, t0=None):
    """Single-cell version of :func:`kkt_certificates`."""
    return kkt_certificates(inst, [rk1], [rl2], None if t0 is None else [t0])[0]


def kkt_residuals(inst, rk1, rl2, primal, duals, t):
    """Residuals of the fifteen KKT conditions at ``(primal, duals, t)``.

    Keys ``a1`` .. ``a15`` (plus ``dual`` for multiplier sign/PSD violations
    and ``max``). ``a1`` is the largest primal constraint violation,
    ``a2``-``a10`` are absolute complementary-slackness products, ``a11`` is
    ``mu (N0 + zPsi z*) - 1`` and ``a12``-``a15`` are Frobenius norms of the
    stationarity mismatch.
    """
    if duals is None or primal is None:
        raise ValueError("KKT residuals need both a primal design and duals")
    for name in ("lam1", "lam2", "mu", "nu1", "nu2", "A1", "B1", "A2", "B2"):
        if getattr(duals, name, None) is None:
            raise ValueError(f"missing multiplier {name}")
    d, u = primal, duals
    a1 = 2.0 ** rk1 - 1.0
    a2 = 2.0 ** rl2 - 1.0
    n0 = inst.n0
    qf = lambda v, X: float(np.real(quadratic_form(v, X)))  # noqa: E731
    leak = qf(inst.z1, d.phi1) + qf(inst.z2, d.phi2) \
        - t * (n0 + qf(inst.z1, d.psi1) + qf(inst.z2, d.psi2))
    rate1 = a1 * (n0 + qf(inst.h21, d.psi1)) - qf(inst.h21, d.phi1)
    rate2 = a2 * (n0 + qf(inst.h12, d.psi2)) - qf(inst.h12, d.phi2)
    pow1 = float(np.real(np.trace(d.phi1 + d.psi1))) - inst.p1
    pow2 = float(np.real(np.trace(d.phi2 + d.psi2))) - inst.p2
    mins = [float(np.linalg.eigvalsh(m)[0]) for m in (d.phi1, d.psi1, d.phi2, d.psi2)]
    r = {}
    r["a1"] = max(0.0, leak, rate1, rate2, pow1, pow2, *(-m for m in mins))
    r["a2"] = abs(u.lam1 * pow1)
    r["a3"] = abs(u.lam2 * pow2)
    r["a4"] = abs(np.trace(u.A1 @ d.phi1))
    r["a5"] = abs(np.trace(u.B1 @ d.psi1))
    r["a6"] = abs(np.trace(u.A2 @ d.phi2))
    r["a7"] = abs(np.trace(u.B2 @ d.psi2))
    r["a8"] = abs(u.mu * leak)
    r["a9"] = abs(u.nu1 * rate1)
    r["a10"] = abs(u.nu2 * rate2)
    r["a11"] = abs(u.mu * (n0 + qf(inst.z1, d.psi1) + qf(inst.z2, d.psi2)) - 1.0)

    def outer(v):
        v = _row(v)
        return v.conj().T @ v

    I1, I2 = np.eye(inst.m1), np.eye(inst.m2)
    z1, z2, h21, h12 = (outer(v) for v in (inst.z1, inst.z2, inst.h21, inst.h12))
    r["a12"] = np.linalg.norm(u.A1 - (u.lam1 * I1 + u.mu * z1 - u.nu1 * h21))
    r["a13"] = np.linalg.norm(u.B1 - (u.lam1 * I1 - u.mu * t * z1 + u.nu1 * a1 * h21))
    r["a14"] = np.linalg.norm(u.A2 - (u.lam2 * I2 + u.mu * z2 - u.nu2 * h12))
    r["a15"] = np.linalg.norm(u.B2 - (u.lam2 * I2 - u.mu * t * z2 + u.nu2 * a2 * h12))
    r["dual"] = max(0.0, -u.lam1, -u.lam2, -u.mu, -u.nu1, -u.nu2,
                    *(-float(np.linalg.eigvalsh(m)[0]) for m in (u.A1, u.B1, u.A2, u.B2)))
    r = {k: float(v) for k, v in r.items()}
    r["max"] = max(r.values())
    return r


# --- rank predictions -----------------------------------------------------

@dataclass
class RankVerdict:
    user: int
    branch: str          # "active" (lam > margin), "inactive", "zero", "collinear"
    verdict: str         # "pass" | "fail" | "indeterminate"
    rank_phi: int
    rank_psi: int
    detail: str = ""


@dataclass
class RankReport:
    rk1: float
    rl2: float
    t: float
    users: list = field(default_factory=list)

    @property
    def verdict(self):
        vs = [u.verdict for u in self.users]
        if "fail" in vs:
            return "fail"
        if "indeterminate" in vs:
            return "indeterminate"
        return "pass"


def collinear(a, b, tol=COLLINEAR_TOL):
    """True if ``|<a, b>| / (|a| |b|) > 1 - tol`` (zero vectors count)."""
    a, b = np.ravel(a), np.ravel(b)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return True
    return abs(np.vdot(a, b)) / (na * nb) > 1.0 - tol


def _nonzero(m):
    return float(np.real(np.trace(m))) > NONZERO_TOL


def _user_rank(user, lam, phi, psi, z, h, t, zeta, m):
    rphi, rpsi = numerical_rank(phi), numerical_rank(psi)
    if not _nonzero(phi):
        return RankVerdict(user, "zero", "pass", rphi, rpsi, "Phi = 0")
    if lam > DUAL_MARGIN:
        ok = rphi == 1
        msg = f"rank(Phi)={rphi}"
        if t > zeta and _nonzero(psi):
            ok = ok and rpsi == 1
            msg += f", rank(Psi)={rpsi}"
        return RankVerdict(user, "active", "pass" if ok else "fail", rphi, rpsi, msg)
    if collinear(z, h):
        return RankVerdict(user, "collinear", "indeterminate", rphi, rpsi,
                           "z and h collinear")
    if lam < -DUAL_MARGIN:
        return RankVerdict(user, "inactive", "fail", rphi, rpsi,
                           "negative power multiplier")
    zc = np.ravel(z).conj()
    zc = zc / np.linalg.norm(zc)
    w, v = np.linalg.eigh(phi)
    scale = max(float(np.real(np.trace(phi))), 1e-300)
    big = v[:, w > 1e-6 * scale]
    ortho = float(np.max(np.abs(big.conj().T @ zc))) if big.size else 0.0
    ok = rphi <= m - 1 and ortho <= ORTHO_TOL and t <= 2 * zeta
    # |lam| inside the dead band: the multiplier may be a small positive
    # value, so unmet zero-branch predictions are not counted as failures
    return RankVerdict(user, "inactive", "pass" if ok else "indeterminate",
                       rphi, rpsi,
                       f"rank(Phi)={rphi}, |<range, z*>|={ortho:.2e}, t={t:.2e}")


def rank_check(inst, cert, zeta=1e-4):
    """Check the rank predictions for one :class:`KktCertificate`."""
    rep = RankReport(cert.rk1, cert.rl2, cert.t)
    if cert.design is None or cert.duals is None:
        return rep
    d, u = cert.design, cert.duals
    rep.users.append(_user_rank(1, u.lam1, d.phi1, d.psi1, inst.z1, inst.h21,
                                cert.t, zeta, inst.m1))
    rep.users.append(_user_rank(2, u.lam2, d.phi2, d.psi2, inst.z2, inst.h12,
                                cert.t, zeta, inst.m2))
    return rep


def verify_region(inst, region, zeta=None):
    """KKT residuals and rank checks on every converged cell of a sweep.

    Returns a list of dicts with keys k, l, status, max_residual, residuals,
    rank (a :class:`RankReport`).
    """
    zeta = region.meta.get("zeta", 1e-4) if zeta is None else zeta
    ok = np.nonzero(region.ok)[0]
    certs = kkt_certificates(inst, region.r1[ok], region.r2[ok],
                             t0=region.t_min[ok])
    rows = []
    for i, c in zip(ok, certs):
        row = {"k": int(region.k[i]), "l": int(region.l[i]), "status": c.status,
               "cert": c}
        if c.status == "optimal":
            res = kkt_residuals(inst, c.rk1, c.rl2, c.design, c.duals, c.t)
            row["residuals"] = res
            row["max_residual"] = res["max"]
            row["rank"] = rank_check(inst, c, zeta)
        else:
            row["residuals"], row["max_residual"], row["rank"] = {}, math.nan, None
        rows.append(row)
    return rows


def kkt_report(rows):
    """Plain-text per-cell listing of :func:`verify_region` output."""
    lines = ["k,l,status,maxResidual,rank,detail"]
    for r in rows:
        rk = r["rank"]
        verdict = rk.verdict if rk is not None else "indeterminate"
        detail = "; ".join(f"user{u.user}:{u.branch}:{u.detail}"
                           for u in rk.users) if rk is not None else ""
        lines.append(f"{r['k']},{r['l']},{r['status']},"
                     f"{r['max_residual']:.3e},{verdict},{detail}")
    return "\n".join(lines) + "\n"
