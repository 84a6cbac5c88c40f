"""Batched primal-dual interior-point method for small conic programs.

Solves, for every member of a batch at once,

    minimize    c'x
    subject to  G x + s = h,   s in R+^l x S+^k1 x ... x S+^kp

through the homogeneous self-dual embedding with Nesterov-Todd scaling and a
Mehrotra predictor-corrector step. Infeasibility of either side is detected
from the embedding's certificates. Batch members that finish early are
dropped from the working set; the remaining ones keep iterating.

All linear algebra is dense numpy; problem sizes here are tiny (tens of
variables, blocks up to ~10x10), so the cost is dominated by the number of
vectorized calls, not by flops.
"""
from dataclasses import dataclass

import numpy as np

RUNNING, OPTIMAL, PRIMAL_INFEASIBLE, DUAL_INFEASIBLE, FAILED, STOPPED = range(6)


@dataclass
class IpmOptions:
    feas_tol: float = 1e-8
    abs_tol: float = 1e-7
    rel_tol: float = 1e-8
    max_iters: int = 200
    step: float = 0.98
    refine: int = 1
    # once complementarity is exhausted, residuals below this count as converged
    stall_tol: float = 1e-6


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _sprod(a, b):
    ab = a @ b
    return 0.5 * (ab + np.swapaxes(ab, -1, -2))


def _chol(a):
    """Batched Cholesky; failed members get an identity factor and ok=False."""
    try:
        return np.linalg.cholesky(a), np.ones(a.shape[0], bool)
    except np.linalg.LinAlgError:
        out = np.empty_like(a)
        ok = np.ones(a.shape[0], bool)
        eye = np.eye(a.shape[-1])
        for i in range(a.shape[0]):
            try:
                out[i] = np.linalg.cholesky(a[i])
            except np.linalg.LinAlgError:
                out[i] = eye
                ok[i] = False
        return out, ok


def _mv(a, v):
    """Batched ``a @ v`` for a (b, m, n) and v (b, n)."""
    return (a @ v[:, :, None])[:, :, 0]


def _mtv(a, v):
    """Batched ``a^T @ v`` for a (b, m, n) and v (b, m)."""
    return (v[:, None, :] @ a)[:, 0, :]


def _bgx(x, g):
    """``sum_j x[b, j] g[b, j]`` for block coefficient stacks g (b, j, k, k)."""
    b, j, k, _ = g.shape
    return (x[:, None, :] @ g.reshape(b, j, k * k))[:, 0].reshape(b, k, k)


def _bgtz(g, z):
    """``<g[b, j], z[b]>`` for every j."""
    b, j, k, _ = g.shape
    return (g.reshape(b, j, k * k) @ z.reshape(b, k * k, 1))[:, :, 0]


def _inner(a, b):
    return np.sum((a * b).reshape(a.shape[0], -1), axis=1)


class _Block:
    __slots__ = ("cols", "G", "h", "k", "shared")

    def __init__(self, part, batch):
        self.cols = part.cols
        self.G = part.G
        self.h = part.h
        self.k = part.h.shape[-1]
        self.shared = part.G.shape[0] == 1 and part.h.shape[0] == 1
        if not self.shared:
            self.G = np.broadcast_to(part.G, (batch,) + part.G.shape[1:])
            self.h = np.broadcast_to(part.h, (batch,) + part.h.shape[1:])

    def take(self, idx):
        if not self.shared:
            self.G = self.G[idx]
            self.h = self.h[idx]

    def Gx(self, x):
        b, kk = x.shape[0], self.k * self.k
        if self.shared:
            return (x[:, self.cols] @ self.G[0].reshape(-1, kk)).reshape(b, self.k, self.k)
        return _bgx(x[:, self.cols], self.G)

    def GTz(self, z):
        b, kk = z.shape[0], self.k * self.k
        if self.shared:
            return z.reshape(b, kk) @ self.G[0].reshape(-1, kk).T
        return _bgtz(self.G, z)

    def _G(self, b):
        return np.broadcast_to(self.G, (b,) + self.G.shape[1:])

    def hb(self, b):
        return np.broadcast_to(self.h, (b, self.k, self.k))


def solve_conic(data, opts=None, monitor=None):
    """Run the interior-point method on compiled :class:`ConicData`.

    ``monitor(idx, info)`` may be supplied; it is called every iteration with
    the working-set batch indices and a dict holding the normalized iterate
    ``x`` and the current ``pcost``/``dcost``/``pres``/``dres``/``gap``. It
    returns an int array: 0 keeps iterating, any other value finishes the
    member with that status code.

    Returns a dict of arrays over the full batch: ``x``, ``z_lp``,
    ``z_blocks``, ``s_lp``, ``s_blocks``, ``status``, ``pcost``, ``dcost``,
    ``pres``, ``dres``, ``gap`` and ``iters``.
    """
    # diverging members (tau -> 0 on infeasible problems) overflow before
    # they are classified; their steps are zeroed, so silence the warnings
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return _solve_conic(data, opts, monitor)


def _solve_conic(data, opts, monitor):
    opts = opts or IpmOptions()
    B, n = data.batch, data.n
    c = np.broadcast_to(data.c, (B, n)).astype(float)
    Gl = np.broadcast_to(data.lp.G, (B,) + data.lp.G.shape[1:]).astype(float)
    hl = np.broadcast_to(data.lp.h, (B,) + data.lp.h.shape[1:]).astype(float)
    ml = Gl.shape[1]
    blocks = [_Block(p, B) for p in data.blocks]
    dg = ml + sum(b.k for b in blocks)

    out = {
        "x": np.zeros((B, n)), "z_lp": np.zeros((B, ml)),
        "s_lp": np.zeros((B, ml)),
        "z_blocks": [np.zeros((B, b.k, b.k)) for b in blocks],
        "s_blocks": [np.zeros((B, b.k, b.k)) for b in blocks],
        "status": np.full(B, RUNNING), "pcost": np.full(B, np.nan),
        "dcost": np.full(B, np.nan), "pres": np.full(B, np.nan),
        "dres": np.full(B, np.nan), "gap": np.full(B, np.nan),
        "iters": np.zeros(B, int), "tau": np.ones(B), "kappa": np.ones(B),
    }

    idx = np.arange(B)
    x = np.zeros((B, n))
    tau = np.ones(B)
    kappa = np.ones(B)
    sl = np.ones((B, ml))
    zl = np.ones((B, ml))
    S = [np.broadcast_to(np.eye(b.k), (B, b.k, b.k)).copy() for b in blocks]
    Z = [np.broadcast_to(np.eye(b.k), (B, b.k, b.k)).copy() for b in blocks]

    hnorm = np.sqrt(np.sum(hl ** 2, axis=1)
                    + sum(np.sum(b.hb(B) ** 2, axis=(1, 2)) for b in blocks))
    hnorm = np.maximum(1.0, hnorm)
    cnorm = np.maximum(1.0, np.linalg.norm(c, axis=1))

    def finish(mask, code):
        sel = np.nonzero(mask)[0]
        if sel.size == 0:
            return
        g = idx[sel]
        t = tau[sel][:, None]
        out["x"][g] = x[sel] / t
        out["z_lp"][g] = zl[sel] / t
        out["s_lp"][g] = sl[sel] / t
        for j in range(len(blocks)):
            out["z_blocks"][j][g] = Z[j][sel] / t[:, :, None]
            out["s_blocks"][j][g] = S[j][sel] / t[:, :, None]
        out["status"][g] = code
        out["tau"][g] = tau[sel]
        out["kappa"][g] = kappa[sel]
        out["iters"][g] = it

    it = 0
    broken = np.zeros(B, bool)
    while idx.size:
        b_ = idx.size
        # residuals
        rx = _mtv(Gl, zl) + c * tau[:, None]
        rzl = sl + _mv(Gl, x) - hl * tau[:, None]
        rzb = []
        hz = np.sum(hl * zl, axis=1)
        sz = np.sum(sl * zl, axis=1)
        for j, blk in enumerate(blocks):
            rx[:, blk.cols] += blk.GTz(Z[j])
            rzb.append(S[j] + blk.Gx(x) - blk.hb(b_) * tau[:, None, None])
            hz += _inner(blk.hb(b_), Z[j])
            sz += _inner(S[j], Z[j])
        cx = np.sum(c * x, axis=1)
        rt = kappa + cx + hz
        mu = (sz + tau * kappa) / (dg + 1)

        nrz = np.sqrt(np.sum(rzl ** 2, axis=1)
                      + sum(np.sum(r ** 2, axis=(1, 2)) for r in rzb))
        nrx = np.linalg.norm(rx, axis=1)
        pcost = cx / tau
        dcost = -hz / tau
        pres = nrz / tau / hnorm[idx]
        dres = nrx / tau / cnorm[idx]
        gap = sz / tau ** 2
        denom = np.maximum(np.minimum(np.abs(pcost), np.abs(dcost)), 1e-300)
        relgap = np.where((pcost < 0) | (dcost > 0), gap / denom, np.inf)
        out["pcost"][idx], out["dcost"][idx] = pcost, dcost
        out["pres"][idx], out["dres"][idx], out["gap"][idx] = pres, dres, gap

        # certificates of infeasibility (unnormalized iterates)
        gtz = rx - c * tau[:, None]
        pinf = (hz < 0) & (np.linalg.norm(gtz, axis=1) / cnorm[idx]
                           <= -hz * opts.feas_tol)
        gxs = rzl + hl * tau[:, None]
        gxs_n = np.sum(gxs ** 2, axis=1)
        for j, blk in enumerate(blocks):
            gxs_n += np.sum((rzb[j] + blk.hb(b_) * tau[:, None, None]) ** 2,
                            axis=(1, 2))
        dinf = (cx < 0) & (np.sqrt(gxs_n) / hnorm[idx] <= -cx * opts.feas_tol)
        opt = (pres <= opts.feas_tol) & (dres <= opts.feas_tol) & (
            (gap <= opts.abs_tol) | (relgap <= opts.rel_tol))
        bad = ~np.isfinite(mu) | ~np.isfinite(pcost) | ~np.isfinite(dcost)
        # no further progress possible: broken step or gap exhausted
        stalled = broken | (gap <= 1e-3 * opts.abs_tol)
        near = (pres <= opts.stall_tol) & (dres <= opts.stall_tol) & (
            gap <= opts.abs_tol)
        opt |= stalled & near
        bad |= stalled & ~near & ~pinf & ~dinf

        done = np.zeros(b_, bool)
        finish(bad, FAILED)
        done |= bad
        if monitor is not None and not done.all():
            live = np.nonzero(~done)[0]
            info = {"x": x[live] / tau[live, None], "pcost": pcost[live],
                    "dcost": dcost[live], "pres": pres[live],
                    "dres": dres[live], "gap": gap[live],
                    "dres_abs": nrx[live] / tau[live]}
            codes = np.zeros(b_, int)
            codes[live] = monitor(idx[live], info)
            for code in np.unique(codes[codes > 0]):
                m = codes == code
                finish(m, code)
                done |= m
        for mask, code in ((opt, OPTIMAL), (pinf, PRIMAL_INFEASIBLE),
                           (dinf, DUAL_INFEASIBLE)):
            m = mask & ~done
            finish(m, code)
            done |= m
        if it >= opts.max_iters:
            finish(~done, FAILED)
            done[:] = True
        if done.any():
            keep = ~done
            idx = idx[keep]
            if idx.size == 0:
                break
            x, tau, kappa, sl, zl = x[keep], tau[keep], kappa[keep], sl[keep], zl[keep]
            broken = broken[keep]
            S = [s[keep] for s in S]
            Z = [z[keep] for z in Z]
            c, Gl, hl = c[keep], Gl[keep], hl[keep]
            rx, rzl, rt, mu = rx[keep], rzl[keep], rt[keep], mu[keep]
            rzb = [r[keep] for r in rzb]
            for blk in blocks:
                blk.take(keep)
            b_ = idx.size
        it += 1

        # Nesterov-Todd scaling
        d = np.sqrt(sl / zl)
        laml = np.sqrt(sl * zl)
        R, Rinv, lamb = [], [], []
        okall = np.ones(b_, bool)
        for j in range(len(blocks)):
            Ls, ok1 = _chol(S[j])
            Lz, ok2 = _chol(Z[j])
            U, sv, Vt = np.linalg.svd(np.swapaxes(Lz, -1, -2) @ Ls)
            sv = np.maximum(sv, 1e-300)
            isq = 1.0 / np.sqrt(sv)
            R.append(Ls @ np.swapaxes(Vt, -1, -2) * isq[:, None, :])
            Rinv.append(isq[:, :, None] * (np.swapaxes(U, -1, -2)
                                           @ np.swapaxes(Lz, -1, -2)))
            lamb.append(sv)
            okall &= ok1 & ok2

        # scaled constraint matrix and reduced system
        Gtl = Gl / d[:, :, None]
        H = np.swapaxes(Gtl, 1, 2) @ Gtl
        Gtb = []
        for j, blk in enumerate(blocks):
            Ri = Rinv[j][:, None]
            gt = Ri @ blk._G(b_) @ np.swapaxes(Ri, -1, -2)
            Gtb.append(gt)
            flat = gt.reshape(b_, len(blk.cols), -1)
            H[:, blk.cols[:, None], blk.cols[None, :]] += flat @ np.swapaxes(
                flat, -1, -2)
        diag = np.einsum("bii->bi", H)
        ridge = 1e-14 * np.maximum(diag.max(axis=1), 1e-300)
        H[:, np.arange(n), np.arange(n)] += ridge[:, None]
        # H is small (n x n); one batched inverse serves all right-hand sides
        Hinv = np.linalg.inv(H)

        def hsolve(rhs):
            return _mv(Hinv, rhs)

        def kkt(bx, bzl, bzb):
            """Solve G'dz = bx, G dx - W'W dz = bz (bz given scaled)."""
            def apply(bx, bzl, bzb):
                rhs = bx + _mtv(Gtl, bzl)
                for j, blk in enumerate(blocks):
                    rhs[:, blk.cols] += _bgtz(Gtb[j], bzb[j])
                dx = hsolve(rhs)
                dzl = _mv(Gtl, dx) - bzl
                dzb = [_bgx(dx[:, blk.cols], Gtb[j]) - bzb[j]
                       for j, blk in enumerate(blocks)]
                return dx, dzl, dzb
            dx, dzl, dzb = apply(bx, bzl, bzb)
            for _ in range(opts.refine):
                # residual of the scaled system: Gt'dz~ = bx, Gt dx - dz~ = bz~
                ex = bx - _mtv(Gtl, dzl)
                for j, blk in enumerate(blocks):
                    ex[:, blk.cols] -= _bgtz(Gtb[j], dzb[j])
                ezl = bzl - (_mv(Gtl, dx) - dzl)
                ezb = [bzb[j] - (_bgx(dx[:, blk.cols], Gtb[j])
                                 - dzb[j]) for j, blk in enumerate(blocks)]
                ddx, ddzl, ddzb = apply(ex, ezl, ezb)
                dx = dx + ddx
                dzl = dzl + ddzl
                dzb = [a + b for a, b in zip(dzb, ddzb)]
            return dx, dzl, dzb

        htl = hl / d
        htb = [_sym(Rinv[j] @ blk.hb(b_) @ np.swapaxes(Rinv[j], -1, -2))
               for j, blk in enumerate(blocks)]
        dx2, dzl2, dzb2 = kkt(-c, htl, htb)
        den = (np.sum(c * dx2, axis=1) + np.sum(htl * dzl2, axis=1)
               + sum(_inner(htb[j], dzb2[j])
                     for j in range(len(blocks))) - kappa / tau)

        def direction(eta, rcl, rcb, rck):
            ul = rcl / laml
            ub = [rcb[j] * (2.0 / (lamb[j][:, :, None] + lamb[j][:, None, :]))
                  for j in range(len(blocks))]
            bzl = -eta[:, None] * rzl / d - ul
            bzb = [-eta[:, None, None] * _sym(
                Rinv[j] @ rzb[j] @ np.swapaxes(Rinv[j], -1, -2)) - ub[j]
                for j in range(len(blocks))]
            dx1, dzl1, dzb1 = kkt(-eta[:, None] * rx, bzl, bzb)
            num = (-eta * rt - rck / tau - np.sum(c * dx1, axis=1)
                   - np.sum(htl * dzl1, axis=1)
                   - sum(_inner(htb[j], dzb1[j])
                         for j in range(len(blocks))))
            dtau = num / den
            dx = dx1 + dtau[:, None] * dx2
            dzl = dzl1 + dtau[:, None] * dzl2
            dzb = [_sym(dzb1[j] + dtau[:, None, None] * dzb2[j])
                   for j in range(len(blocks))]
            dsl = ul - dzl
            dsb = [_sym(ub[j] - dzb[j]) for j in range(len(blocks))]
            dkappa = (rck - kappa * dtau) / tau
            return dx, dzl, dzb, dsl, dsb, dtau, dkappa

        def max_step(dsl, dsb, dzl, dzb, dtau, dkappa):
            amax = np.full(b_, np.inf)
            for v, lam in ((dsl, laml), (dzl, laml)):
                if ml:
                    r = np.where(v < 0, -lam / np.where(v < 0, v, -1.0), np.inf)
                    amax = np.minimum(amax, r.min(axis=1))
            for j in range(len(blocks)):
                isq = 1.0 / np.sqrt(lamb[j])
                sc = isq[:, :, None] * isq[:, None, :]
                for v in (dsb[j], dzb[j]):
                    m = v * sc
                    # non-finite members get step 0 and are marked broken below
                    ok = np.all(np.isfinite(m.reshape(b_, -1)), axis=1)
                    w = np.full(b_, -np.inf)
                    if ok.any():
                        w[ok] = np.linalg.eigvalsh(m[ok])[:, 0]
                    amax = np.minimum(amax, np.where(w < 0, -1.0 / np.where(
                        w < 0, w, -1.0), np.inf))
            for v, base in ((dtau, tau), (dkappa, kappa)):
                amax = np.minimum(amax, np.where(v < 0, -base / np.where(
                    v < 0, v, -1.0), np.inf))
            return amax

        # predictor
        one = np.ones(b_)
        rcl = -laml ** 2
        rcb = [-np.einsum("bi,ij->bij", lamb[j] ** 2, np.eye(blocks[j].k))
               for j in range(len(blocks))]
        rck = -tau * kappa
        dxa, dzla, dzba, dsla, dsba, dtaua, dkappaa = direction(one, rcl, rcb, rck)
        aa = np.minimum(1.0, max_step(dsla, dsba, dzla, dzba, dtaua, dkappaa))
        sigma = (1.0 - aa) ** 3

        # corrector
        sm = sigma * mu
        rcl = -laml ** 2 - dsla * dzla + sm[:, None]
        rcb = [rcb[j] - _sprod(dsba[j], dzba[j])
               + sm[:, None, None] * np.eye(blocks[j].k)
               for j in range(len(blocks))]
        rck = -tau * kappa - dtaua * dkappaa + sm
        dx, dzl, dzb, dsl, dsb, dtau, dkappa = direction(1.0 - sigma, rcl, rcb, rck)
        alpha = np.minimum(1.0, opts.step * max_step(dsl, dsb, dzl, dzb, dtau, dkappa))

        finite = (np.isfinite(alpha) & np.all(np.isfinite(dx), axis=1) & okall
                  & np.isfinite(dtau) & np.isfinite(dkappa))
        for v in [dsl, dzl] + dsb + dzb:
            finite &= np.all(np.isfinite(v.reshape(b_, -1)), axis=1)
        alpha = np.where(finite, alpha, 0.0)
        # broken members keep their iterate and are classified next pass
        broken = ~finite

        def upd(v, dv, a):
            return v + np.where(a > 0, a, 0.0) * np.nan_to_num(dv)

        # update in the original coordinates
        a2 = alpha[:, None]
        a3 = alpha[:, None, None]
        x = upd(x, dx, a2)
        sl = upd(sl, d * dsl, a2)
        zl = upd(zl, dzl / d, a2)
        for j in range(len(blocks)):
            S[j] = _sym(upd(S[j], R[j] @ dsb[j] @ np.swapaxes(R[j], -1, -2), a3))
            Z[j] = _sym(upd(Z[j], np.swapaxes(Rinv[j], -1, -2) @ dzb[j] @ Rinv[j],
                            a3))
        tau = upd(tau, dtau, alpha)
        kappa = upd(kappa, dkappa, alpha)
    return out
