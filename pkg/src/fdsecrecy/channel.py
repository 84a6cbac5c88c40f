"""Two-user full-duplex MISO wiretap instance, rate formulas and config I/O.

Channels are stored as 1-D complex arrays. ``h21`` is the link from user 1's
``m1`` transmit antennas to user 2's receive antenna, ``h12`` the reverse
link, ``z1``/``z2`` the links from each user to the eavesdropper. Under
imperfect CSI these are the estimates; the true channels lie in balls of
radius ``eps21``, ``eps12``, ``eps1``, ``eps2`` around them, and the
self-interference residual channels ``e11`` (length ``m1``) and ``e22``
(length ``m2``) have norms bounded by ``eps11``, ``eps22``.
"""
import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .linalg import hermitize, min_eigenvalue, quadratic_form

EPS_NAMES = ("eps11", "eps12", "eps21", "eps22", "eps1", "eps2")
DESIGN_TOL = 1e-8


def db_to_linear(db):
    """``10^(dB/10)``; 3 dB is about 1.995."""
    return 10.0 ** (float(db) / 10.0)


@dataclass(frozen=True)
class SystemInstance:
    m1: int
    m2: int
    h12: np.ndarray
    h21: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    n0: float = 1.0
    p1: float = 1.0
    p2: float = 1.0
    eps11: float = 0.0
    eps12: float = 0.0
    eps21: float = 0.0
    eps22: float = 0.0
    eps1: float = 0.0
    eps2: float = 0.0

    def __post_init__(self):
        for name in ("h12", "h21", "z1", "z2"):
            v = np.asarray(getattr(self, name), dtype=complex).reshape(-1)
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if self.h21.size != self.m1 or self.z1.size != self.m1:
            raise ValueError("h21 and z1 must have m1 entries")
        if self.h12.size != self.m2 or self.z2.size != self.m2:
            raise ValueError("h12 and z2 must have m2 entries")
        if not self.n0 > 0:
            raise ValueError("noise power n0 must be positive")
        if self.p1 < 0 or self.p2 < 0:
            raise ValueError("power budgets must be nonnegative")
        for name in EPS_NAMES:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def eps(self):
        return {name: getattr(self, name) for name in EPS_NAMES}

    @property
    def perfect(self):
        return all(v == 0 for v in self.eps.values())

    def with_eps(self, value=None, **named):
        """Copy with all six error bounds set to ``value`` (and/or by name)."""
        kw = {name: float(value) for name in EPS_NAMES} if value is not None else {}
        kw.update({k: float(v) for k, v in named.items()})
        return replace(self, **kw)

    def with_power_db(self, p1_db, p2_db=None):
        p2_db = p1_db if p2_db is None else p2_db
        return replace(self, p1=db_to_linear(p1_db), p2=db_to_linear(p2_db))

    def with_power(self, p1, p2=None):
        return replace(self, p1=float(p1), p2=float(p1 if p2 is None else p2))


@dataclass
class CovarianceDesign:
    """Transmit covariances of both users plus optional auxiliary scalars."""

    phi1: np.ndarray
    psi1: np.ndarray
    phi2: np.ndarray
    psi2: np.ndarray
    aux: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, m1, m2):
        z1 = np.zeros((m1, m1), dtype=complex)
        z2 = np.zeros((m2, m2), dtype=complex)
        return cls(z1, z1.copy(), z2, z2.copy())

    def power1(self):
        return float(np.real(np.trace(self.phi1 + self.psi1)))

    def power2(self):
        return float(np.real(np.trace(self.phi2 + self.psi2)))

    def violations(self, inst, tol=DESIGN_TOL):
        """List of invariant violations (empty when the design is valid)."""
        out = []
        for name in ("phi1", "psi1", "phi2", "psi2"):
            m = getattr(self, name)
            lam = float(min_eigenvalue(hermitize(m, name)))
            if lam < -tol:
                out.append(f"{name} not PSD (min eigenvalue {lam:.3g})")
        if self.power1() > inst.p1 + tol:
            out.append(f"user 1 power {self.power1():.9g} exceeds {inst.p1:.9g}")
        if self.power2() > inst.p2 + tol:
            out.append(f"user 2 power {self.power2():.9g} exceeds {inst.p2:.9g}")
        return out

    def is_valid(self, inst, tol=DESIGN_TOL):
        return not self.violations(inst, tol)


def mrt_design(inst):
    """Full-power maximum-ratio design on the direct links, no jamming."""
    d = CovarianceDesign.zeros(inst.m1, inst.m2)
    for h, p, attr in ((inst.h21, inst.p1, "phi1"), (inst.h12, inst.p2, "phi2")):
        nh = np.linalg.norm(h)
        if nh > 0:
            u = h.conj() / nh
            setattr(d, attr, p * np.outer(u, u.conj()))
    return d


def _rate(sinr):
    return math.log2(1.0 + max(sinr, 0.0))


def sinr_user1(inst, d):
    return (quadratic_form(inst.h21, d.phi1, psd=True)
            / (inst.n0 + quadratic_form(inst.h21, d.psi1, psd=True)))


def sinr_user2(inst, d):
    return (quadratic_form(inst.h12, d.phi2, psd=True)
            / (inst.n0 + quadratic_form(inst.h12, d.psi2, psd=True)))


def sinr_eve(inst, d):
    num = (quadratic_form(inst.z1, d.phi1, psd=True)
           + quadratic_form(inst.z2, d.phi2, psd=True))
    den = (inst.n0 + quadratic_form(inst.z1, d.psi1, psd=True)
           + quadratic_form(inst.z2, d.psi2, psd=True))
    return num / den


def rate_user1(inst, d):
    """Rate of user 1's message at user 2, channels taken as exact."""
    return _rate(sinr_user1(inst, d))


def rate_user2(inst, d):
    return _rate(sinr_user2(inst, d))


def leakage_rate(inst, d):
    """Rate leaked to the eavesdropper about both messages jointly."""
    return _rate(sinr_eve(inst, d))


def capacity_bounds(inst):
    """Worst-case user capacities and best-case eavesdropper capacity.

    With all error bounds zero these are the perfect-CSI single-link
    capacities and the eavesdropper's full-power capacity.
    """
    g21 = np.linalg.norm(inst.h21)
    g12 = np.linalg.norm(inst.h12)
    c1 = math.log2(1.0 + (g21 - inst.eps21) ** 2 * inst.p1 / inst.n0) \
        if g21 > inst.eps21 else 0.0
    c2 = math.log2(1.0 + (g12 - inst.eps12) ** 2 * inst.p2 / inst.n0) \
        if g12 > inst.eps12 else 0.0
    ge = ((np.linalg.norm(inst.z1) + inst.eps1) ** 2 * inst.p1
          + (np.linalg.norm(inst.z2) + inst.eps2) ** 2 * inst.p2)
    ce = math.log2(1.0 + ge / inst.n0)
    return c1, c2, ce


# --- error sampling -------------------------------------------------------

def sample_sphere(rng, m, radius, count):
    """``count`` complex vectors of length ``m`` uniform on the sphere."""
    g = rng.standard_normal((count, 2 * m))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return radius * (g[:, :m] + 1j * g[:, m:])


def _qf_many(vs, m):
    """Real quadratic forms ``v M v^H`` for a stack of row vectors."""
    return np.real(np.einsum("si,ij,sj->s", vs, m, vs.conj()))


@dataclass
class WorstCaseRates:
    """Sampled extremes of the three SINRs and the matching rates."""

    sinr1_min: float
    sinr2_min: float
    sinr_e_max: float

    @property
    def r1_min(self):
        return math.log2(1.0 + max(self.sinr1_min, 0.0))

    @property
    def r2_min(self):
        return math.log2(1.0 + max(self.sinr2_min, 0.0))

    @property
    def re_max(self):
        return math.log2(1.0 + max(self.sinr_e_max, 0.0))

    def as_tuple(self):
        return self.r1_min, self.r2_min, self.re_max


def error_sinrs(inst, d, e21, e22, e12, e11, e1, e2):
    """SINRs of user 1, user 2 and the eavesdropper for stacks of errors.

    Each ``e*`` is an array ``(S, m)``; row ``s`` of every array forms one
    error realization.
    """
    h21 = inst.h21 + e21
    h12 = inst.h12 + e12
    z1 = inst.z1 + e1
    z2 = inst.z2 + e2
    s1 = _qf_many(h21, d.phi1) / (inst.n0 + _qf_many(e22, d.phi2 + d.psi2)
                                  + _qf_many(h21, d.psi1))
    s2 = _qf_many(h12, d.phi2) / (inst.n0 + _qf_many(e11, d.phi1 + d.psi1)
                                  + _qf_many(h12, d.psi2))
    se = (_qf_many(z1, d.phi1) + _qf_many(z2, d.phi2)) / (
        inst.n0 + _qf_many(z1, d.psi1) + _qf_many(z2, d.psi2))
    return s1, s2, se


def worst_case_rates_mc(inst, d, samples, seed=0):
    """Monte-Carlo worst-case rates over the CSI error balls.

    Errors are drawn uniformly on each ball's boundary sphere; the
    zero-error realization is always included. Returns
    :class:`WorstCaseRates` (``as_tuple()`` gives ``(r1Min, r2Min, rEMax)``).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    dims = {"eps21": inst.m1, "eps22": inst.m2, "eps12": inst.m2,
            "eps11": inst.m1, "eps1": inst.m1, "eps2": inst.m2}
    errs = {}
    for name in ("eps21", "eps22", "eps12", "eps11", "eps1", "eps2"):
        e = sample_sphere(rng, dims[name], getattr(inst, name), samples)
        errs[name] = np.vstack([np.zeros((1, dims[name])), e])
    s1, s2, se = error_sinrs(inst, d, errs["eps21"], errs["eps22"],
                             errs["eps12"], errs["eps11"], errs["eps1"],
                             errs["eps2"])
    return WorstCaseRates(float(s1.min()), float(s2.min()), float(se.max()))


# --- config files ---------------------------------------------------------

class ConfigError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


_REQUIRED = ("m1", "m2", "h12", "h21", "z1", "z2")


def parse_complex(text):
    """Parse ``a+bi`` style complex numbers (``i`` or ``j``, unicode minus ok)."""
    s = text.strip().replace("−", "-").replace(" ", "")
    s = re.sub(r"[iI]$", "j", s)
    if s.endswith("j") and re.fullmatch(r"[+-]?j", s):
        s = s[:-1] + "1j"
    try:
        return complex(s)
    except ValueError:
        raise ValueError(f"bad complex number {text!r}") from None


def parse_config(text):
    """Parse a key-value instance file into a :class:`SystemInstance`."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, val = line.split("=", 1)
        elif ":" in line:
            key, val = line.split(":", 1)
        else:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key = key.strip().lower()
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        raw[key] = (val.strip(), lineno)

    def num(key, default=None, kind=float):
        if key not in raw:
            if default is None:
                raise ConfigError(f"missing key {key!r}")
            return default
        val, ln = raw[key]
        try:
            out = kind(val)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {val!r}", ln) from None
        return out

    def vec(key):
        if key not in raw:
            raise ConfigError(f"missing key {key!r}")
        val, ln = raw[key]
        try:
            return np.array([parse_complex(p) for p in
                             val.strip("[]").split(",") if p.strip()])
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", ln) from None

    known = set(_REQUIRED) | {"n0", "p1_db", "p2_db", "p1", "p2", "eps"} | set(EPS_NAMES)
    for key, (_, ln) in raw.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", ln)

    kw = dict(m1=num("m1", kind=int), m2=num("m2", kind=int), h12=vec("h12"),
              h21=vec("h21"), z1=vec("z1"), z2=vec("z2"), n0=num("n0", 1.0))
    for user in ("1", "2"):
        if f"p{user}" in raw and f"p{user}_db" in raw:
            raise ConfigError(f"give either p{user} or p{user}_db, not both",
                              raw[f"p{user}"][1])
        if f"p{user}" in raw:
            kw[f"p{user}"] = num(f"p{user}")
        else:
            kw[f"p{user}"] = db_to_linear(num(f"p{user}_db", 0.0))
    shared = num("eps", 0.0)
    for name in EPS_NAMES:
        kw[name] = num(name, shared)
    try:
        return SystemInstance(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def bundled_config_text(name="reference.cfg"):
    return resources.files("fdsecrecy").joinpath("data", name).read_text("utf-8")


def reference_instance(p_db=3.0, eps=0.0):
    """The bundled two-antenna reference instance at ``p_db`` on both users."""
    return parse_config(bundled_config_text()).with_power_db(p_db).with_eps(eps)


def format_complex(z):
    return f"{z.real:.12g}{z.imag:+.12g}i"


def format_config(inst):
    lines = [f"m1 = {inst.m1}", f"m2 = {inst.m2}"]
    for key in ("h12", "h21", "z1", "z2"):
        lines.append(f"{key} = " + ", ".join(format_complex(z)
                                             for z in getattr(inst, key)))
    lines += [f"n0 = {inst.n0!r}", f"p1 = {inst.p1!r}", f"p2 = {inst.p2!r}"]
    lines += [f"{name} = {getattr(inst, name)!r}" for name in EPS_NAMES]
    return "\n".join(lines) + "\n"
