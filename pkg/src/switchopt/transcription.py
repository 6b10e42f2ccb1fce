"""Direct collocation transcription of embedded problems.

Fixed-mesh trapezoidal (default) or Hermite-Simpson collocation.  The
decision vector stacks, in order: states (N+1)*n, mode-0 controls
(N+1)*m, mode-1 controls (N+1)*m, mode signal (N+1).  Dynamics enter as
one defect constraint per interval; boundary conditions enter through
variable bounds (initial state pinned, final state boxed).

Derivatives of the transcribed objective and constraints are assembled
by the chain rule from per-node partials of the problem callbacks, which
are obtained by vectorized central differences with relative step 1e-6.
The auxiliary-cost and convex-combination parts are differentiated
analytically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .ocp import EmbeddedProblem, Trajectory, _aux_grad, _aux_unchecked

FD_REL = 1e-6

SCHEMES = ("trapezoidal", "hermite-simpson")


@dataclass(frozen=True)
class Mesh:
    """Collocation grid spanning the problem horizon."""

    grid: np.ndarray
    scheme: str = "trapezoidal"

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0):
            raise ValueError("mesh grid must be strictly increasing")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        object.__setattr__(self, "grid", g)

    @property
    def num_intervals(self) -> int:
        return self.grid.size - 1

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.grid)

    @staticmethod
    def uniform(num_intervals: int, t0: float, tf: float, scheme: str = "trapezoidal") -> "Mesh":
        if num_intervals < 1:
            raise ValueError("need at least one interval")
        return Mesh(np.linspace(t0, tf, num_intervals + 1), scheme)


@dataclass(frozen=True)
class DecisionLayout:
    """Flat layout of the collocation decision vector."""

    n: int
    m: int
    N: int

    @property
    def num_nodes(self) -> int:
        return self.N + 1

    @property
    def length(self) -> int:
        return self.num_nodes * (self.n + 2 * self.m + 1)

    @property
    def x_offset(self) -> int:
        return 0

    @property
    def u0_offset(self) -> int:
        return self.num_nodes * self.n

    @property
    def u1_offset(self) -> int:
        return self.u0_offset + self.num_nodes * self.m

    @property
    def v_offset(self) -> int:
        return self.u1_offset + self.num_nodes * self.m

    def pack(self, X, U0, U1, V) -> np.ndarray:
        K = self.num_nodes
        z = np.empty(self.length)
        z[: K * self.n] = np.asarray(X, float).reshape(K * self.n)
        z[self.u0_offset : self.u1_offset] = np.asarray(U0, float).reshape(K * self.m)
        z[self.u1_offset : self.v_offset] = np.asarray(U1, float).reshape(K * self.m)
        z[self.v_offset :] = np.asarray(V, float).reshape(K)
        return z

    def unpack(self, z):
        K = self.num_nodes
        z = np.asarray(z, dtype=float)
        if z.size != self.length:
            raise ValueError("decision vector has wrong length")
        X = z[: K * self.n].reshape(K, self.n)
        U0 = z[self.u0_offset : self.u1_offset].reshape(K, self.m)
        U1 = z[self.u1_offset : self.v_offset].reshape(K, self.m)
        V = z[self.v_offset :]
        return X, U0, U1, V

    def index(self, quantity: str, node: int, comp: int = 0) -> int:
        """Flat index of one scalar decision variable."""
        if not 0 <= node <= self.N:
            raise IndexError("node out of range")
        if quantity == "x":
            return self.x_offset + node * self.n + comp
        if quantity == "u0":
            return self.u0_offset + node * self.m + comp
        if quantity == "u1":
            return self.u1_offset + node * self.m + comp
        if quantity == "v":
            return self.v_offset + node
        raise KeyError(quantity)


def _fd_steps(col):
    return FD_REL * np.maximum(1.0, np.abs(col))


def _jac_wrt(fun, args, idx, width):
    """Batched central-difference Jacobian of fun w.r.t. args[idx].

    args[idx] has shape (K, width); the result has shape (K, out..., width).
    """
    base = fun(*args)
    out = np.zeros(base.shape + (width,))
    for j in range(width):
        h = _fd_steps(args[idx][:, j])
        hi = [a.copy() if k == idx else a for k, a in enumerate(args)]
        lo = [a.copy() if k == idx else a for k, a in enumerate(args)]
        hi[idx][:, j] += h
        lo[idx][:, j] -= h
        denom = 2.0 * h
        out[..., j] = (fun(*hi) - fun(*lo)) / (denom[:, None] if base.ndim == 2 else denom)
    return out


def _node_eval(ep: EmbeddedProblem, t, X, U0, U1, V, derivs: bool):
    """Values (and partials) of the embedded dynamics and running cost."""
    base = ep.base
    f0, f1 = base.f0(t, X, U0), base.f1(t, X, U1)
    l0, l1 = base.l0(t, X, U0), base.l1(t, X, U1)
    w = V[:, None]
    out = {
        "F": (1.0 - w) * f0 + w * f1,
        "L": (1.0 - V) * l0 + V * l1 + _aux_unchecked(V, ep.beta),
    }
    if not derivs:
        return out
    n, m = base.state_dim, base.control_dim
    J0x = _jac_wrt(base.f0, (t, X, U0), 1, n)
    J1x = _jac_wrt(base.f1, (t, X, U1), 1, n)
    g0x = _jac_wrt(base.l0, (t, X, U0), 1, n)
    g1x = _jac_wrt(base.l1, (t, X, U1), 1, n)
    out["Fx"] = (1.0 - w[..., None]) * J0x + w[..., None] * J1x
    out["Fv"] = f1 - f0
    out["Lx"] = (1.0 - w) * g0x + w * g1x
    out["Lv"] = l1 - l0 + _aux_grad(V, ep.beta)
    if m:
        out["Fu0"] = (1.0 - w[..., None]) * _jac_wrt(base.f0, (t, X, U0), 2, m)
        out["Fu1"] = w[..., None] * _jac_wrt(base.f1, (t, X, U1), 2, m)
        out["Lu0"] = (1.0 - w) * _jac_wrt(base.l0, (t, X, U0), 2, m)
        out["Lu1"] = w * _jac_wrt(base.l1, (t, X, U1), 2, m)
    else:
        K = t.size
        out["Fu0"] = out["Fu1"] = np.zeros((K, n, 0))
        out["Lu0"] = out["Lu1"] = np.zeros((K, 0))
    return out


def _terminal_and_grad(ep: EmbeddedProblem, x0, xf, derivs: bool):
    b = ep.base.boundary
    K = ep.base.terminal_cost
    val = float(K(b.t0, x0, b.tf, xf))
    if not derivs:
        return val, None, None
    n = ep.base.state_dim
    g0 = np.zeros(n)
    gf = np.zeros(n)
    for j in range(n):
        h = FD_REL * max(1.0, abs(x0[j]))
        e = np.zeros(n)
        e[j] = h
        g0[j] = (K(b.t0, x0 + e, b.tf, xf) - K(b.t0, x0 - e, b.tf, xf)) / (2 * h)
        h = FD_REL * max(1.0, abs(xf[j]))
        e = np.zeros(n)
        e[j] = h
        gf[j] = (K(b.t0, x0, b.tf, xf + e) - K(b.t0, x0, b.tf, xf - e)) / (2 * h)
    return val, g0, gf


@dataclass
class NlpProblem:
    """Finite-dimensional program: objective + equality defects + box bounds."""

    objective: Callable[[np.ndarray], float]
    constraints: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    n_constraints: int
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    jacobian: Callable[[np.ndarray], sp.spmatrix] | None = None
    full_eval: Callable[[np.ndarray], tuple] | None = None
    layout: DecisionLayout | None = None
    mesh: Mesh | None = None
    problem: EmbeddedProblem | None = None

    def __post_init__(self):
        if self.gradient is None:
            self.gradient = lambda z: _fd_gradient(self.objective, z)
        if self.jacobian is None:
            self.jacobian = lambda z: sp.csr_matrix(_fd_jacobian(self.constraints, z, self.n_constraints))
        if self.full_eval is None:
            self.full_eval = lambda z: (
                self.objective(z),
                self.gradient(z),
                self.constraints(z),
                self.jacobian(z),
            )


def _fd_gradient(fun, z):
    z = np.asarray(z, dtype=float)
    f0 = fun(z)
    if not np.isfinite(f0):
        raise FloatingPointError("non-finite objective")
    g = np.zeros(z.size)
    for i in range(z.size):
        h = FD_REL * max(1.0, abs(z[i]))
        e = np.zeros(z.size)
        e[i] = h
        g[i] = (fun(z + e) - fun(z - e)) / (2 * h)
    return g


def _fd_jacobian(fun, z, n_out):
    z = np.asarray(z, dtype=float)
    J = np.zeros((n_out, z.size))
    for i in range(z.size):
        h = FD_REL * max(1.0, abs(z[i]))
        e = np.zeros(z.size)
        e[i] = h
        J[:, i] = (fun(z + e) - fun(z - e)) / (2 * h)
    return J


def objective_gradient(nlp: NlpProblem, z) -> np.ndarray:
    """Gradient of the transcribed objective at z."""
    return nlp.gradient(np.asarray(z, dtype=float))


def constraint_jacobian(nlp: NlpProblem, z) -> sp.spmatrix:
    """Sparse Jacobian of the defect constraints at z."""
    return nlp.jacobian(np.asarray(z, dtype=float))


def _bounds(ep: EmbeddedProblem, layout: DecisionLayout):
    base = ep.base
    b = base.boundary
    K = layout.num_nodes
    lo = np.empty(layout.length)
    hi = np.empty(layout.length)
    xlo = np.tile(base.state_lower, K).reshape(K, -1)
    xhi = np.tile(base.state_upper, K).reshape(K, -1)
    xlo[0] = b.x0
    xhi[0] = b.x0
    xlo[-1] = np.maximum(xlo[-1], b.xf_lower)
    xhi[-1] = np.minimum(xhi[-1], b.xf_upper)
    lo[: K * layout.n] = xlo.ravel()
    hi[: K * layout.n] = xhi.ravel()
    if layout.m:
        clo = np.tile(base.control_set.lower, K)
        chi = np.tile(base.control_set.upper, K)
        lo[layout.u0_offset : layout.v_offset] = np.concatenate([clo, clo])
        hi[layout.u0_offset : layout.v_offset] = np.concatenate([chi, chi])
    lo[layout.v_offset :] = 0.0
    hi[layout.v_offset :] = 1.0
    return lo, hi


class _Transcriber:
    """Shared machinery for both collocation schemes."""

    def __init__(self, ep: EmbeddedProblem, mesh: Mesh):
        self.ep = ep
        self.mesh = mesh
        base = ep.base
        self.layout = DecisionLayout(base.state_dim, base.control_dim, mesh.num_intervals)
        self.t = mesh.grid
        self.h = mesh.h
        self.tm = 0.5 * (self.t[:-1] + self.t[1:])
        # trapezoidal quadrature weights over nodes
        w = np.zeros(self.t.size)
        w[:-1] += 0.5 * self.h
        w[1:] += 0.5 * self.h
        self.trap_w = w
        self._structure = None

    # ---- structure ------------------------------------------------------
    def _jac_structure(self):
        """(rows, cols) for the interval-local defect blocks, built once."""
        if self._structure is not None:
            return self._structure
        lay = self.layout
        n, m, N = lay.n, lay.m, lay.N
        rows, cols = [], []
        r = np.arange(N * n).reshape(N, n)
        for k_shift in (0, 1):
            node = np.arange(N) + k_shift
            # state block (N, n, n)
            rr = np.repeat(r[:, :, None], n, axis=2)
            cc = (lay.x_offset + node[:, None, None] * n + np.arange(n)[None, None, :]) * np.ones(
                (N, n, n), dtype=int
            )
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            if m:
                for off in (lay.u0_offset, lay.u1_offset):
                    rr = np.repeat(r[:, :, None], m, axis=2)
                    cc = (off + node[:, None, None] * m + np.arange(m)[None, None, :]) * np.ones(
                        (N, n, m), dtype=int
                    )
                    rows.append(rr.ravel())
                    cols.append(cc.ravel())
            # mode-signal block (N, n)
            rows.append(r.ravel())
            cols.append(np.repeat(lay.v_offset + node, n))
        self._structure = (np.concatenate(rows), np.concatenate(cols))
        return self._structure

    def _assemble(self, blocks):
        """blocks: per shift, dict of (state, u0, u1, v) arrays matching structure."""
        lay = self.layout
        data = []
        for shift in (0, 1):
            bx, bu0, bu1, bv = blocks[shift]
            data.append(bx.ravel())
            if lay.m:
                data.append(bu0.ravel())
                data.append(bu1.ravel())
            data.append(bv.ravel())
        rows, cols = self._jac_structure()
        J = sp.coo_matrix(
            (np.concatenate(data), (rows, cols)),
            shape=(lay.N * lay.n, lay.length),
        )
        return J.tocsr()

    # ---- evaluation -----------------------------------------------------
    def evaluate(self, z, derivs: bool):
        lay = self.layout
        X, U0, U1, V = lay.unpack(z)
        ev = _node_eval(self.ep, self.t, X, U0, U1, V, derivs)
        if self.mesh.scheme == "trapezoidal":
            return self._trapezoidal(X, U0, U1, V, ev, derivs)
        return self._hermite_simpson(X, U0, U1, V, ev, derivs)

    def _trapezoidal(self, X, U0, U1, V, ev, derivs):
        lay = self.layout
        n, N = lay.n, lay.N
        h = self.h
        F, L = ev["F"], ev["L"]
        C = X[1:] - X[:-1] - 0.5 * h[:, None] * (F[1:] + F[:-1])
        tval, tg0, tgf = _terminal_and_grad(self.ep, X[0], X[-1], derivs)
        obj = float(self.trap_w @ L) + tval
        if not derivs:
            return obj, C.ravel(), None, None
        w = self.trap_w
        gX = w[:, None] * ev["Lx"]
        gX[0] += tg0
        gX[-1] += tgf
        gU0 = w[:, None] * ev["Lu0"]
        gU1 = w[:, None] * ev["Lu1"]
        gV = w * ev["Lv"]
        grad = lay.pack(gX, gU0, gU1, gV)

        eye = np.eye(n)
        hh = 0.5 * h[:, None, None]
        blocks = {
            0: (
                -eye - hh * ev["Fx"][:-1],
                -hh * ev["Fu0"][:-1],
                -hh * ev["Fu1"][:-1],
                -0.5 * h[:, None] * ev["Fv"][:-1],
            ),
            1: (
                eye - hh * ev["Fx"][1:],
                -hh * ev["Fu0"][1:],
                -hh * ev["Fu1"][1:],
                -0.5 * h[:, None] * ev["Fv"][1:],
            ),
        }
        return obj, C.ravel(), grad, self._assemble(blocks)

    def _hermite_simpson(self, X, U0, U1, V, ev, derivs):
        lay = self.layout
        n, m, N = lay.n, lay.m, lay.N
        h = self.h
        F, L = ev["F"], ev["L"]
        Fa, Fb = F[:-1], F[1:]
        Xm = 0.5 * (X[:-1] + X[1:]) + (h[:, None] / 8.0) * (Fa - Fb)
        U0m = 0.5 * (U0[:-1] + U0[1:])
        U1m = 0.5 * (U1[:-1] + U1[1:])
        Vm = 0.5 * (V[:-1] + V[1:])
        evm = _node_eval(self.ep, self.tm, Xm, U0m, U1m, Vm, derivs)
        Fm, Lm = evm["F"], evm["L"]
        C = X[1:] - X[:-1] - (h[:, None] / 6.0) * (Fa + 4.0 * Fm + Fb)
        tval, tg0, tgf = _terminal_and_grad(self.ep, X[0], X[-1], derivs)
        obj = float(np.sum((h / 6.0) * (L[:-1] + 4.0 * Lm + L[1:]))) + tval
        if not derivs:
            return obj, C.ravel(), None, None

        eye = np.eye(n)
        h8 = h[:, None, None] / 8.0
        Aa, Ab, Am = ev["Fx"][:-1], ev["Fx"][1:], evm["Fx"]
        # midpoint-state sensitivities
        dXm_dXa = 0.5 * eye + h8 * Aa
        dXm_dXb = 0.5 * eye - h8 * Ab
        dFm_dXa = np.einsum("kij,kjl->kil", Am, dXm_dXa)
        dFm_dXb = np.einsum("kij,kjl->kil", Am, dXm_dXb)
        h6 = h[:, None, None] / 6.0
        blk_xa = -eye - h6 * (Aa + 4.0 * dFm_dXa)
        blk_xb = eye - h6 * (Ab + 4.0 * dFm_dXb)

        Fva, Fvb, Fvm = ev["Fv"][:-1], ev["Fv"][1:], evm["Fv"]
        dXm_dVa = (h[:, None] / 8.0) * Fva
        dXm_dVb = -(h[:, None] / 8.0) * Fvb
        dFm_dVa = np.einsum("kij,kj->ki", Am, dXm_dVa) + 0.5 * Fvm
        dFm_dVb = np.einsum("kij,kj->ki", Am, dXm_dVb) + 0.5 * Fvm
        hv = h[:, None] / 6.0
        blk_va = -hv * (Fva + 4.0 * dFm_dVa)
        blk_vb = -hv * (Fvb + 4.0 * dFm_dVb)

        if m:
            B0a, B0b, B0m = ev["Fu0"][:-1], ev["Fu0"][1:], evm["Fu0"]
            B1a, B1b, B1m = ev["Fu1"][:-1], ev["Fu1"][1:], evm["Fu1"]
            dXm_dU0a = h8 * B0a
            dXm_dU0b = -h8 * B0b
            dXm_dU1a = h8 * B1a
            dXm_dU1b = -h8 * B1b
            dFm_dU0a = np.einsum("kij,kjl->kil", Am, dXm_dU0a) + 0.5 * B0m
            dFm_dU0b = np.einsum("kij,kjl->kil", Am, dXm_dU0b) + 0.5 * B0m
            dFm_dU1a = np.einsum("kij,kjl->kil", Am, dXm_dU1a) + 0.5 * B1m
            dFm_dU1b = np.einsum("kij,kjl->kil", Am, dXm_dU1b) + 0.5 * B1m
            blk_u0a = -h6 * (B0a + 4.0 * dFm_dU0a)
            blk_u0b = -h6 * (B0b + 4.0 * dFm_dU0b)
            blk_u1a = -h6 * (B1a + 4.0 * dFm_dU1a)
            blk_u1b = -h6 * (B1b + 4.0 * dFm_dU1b)
        else:
            blk_u0a = blk_u0b = blk_u1a = blk_u1b = np.zeros((N, n, 0))
            dXm_dU0a = dXm_dU0b = dXm_dU1a = dXm_dU1b = np.zeros((N, n, 0))
            B0m = B1m = np.zeros((N, n, 0))

        jac = self._assemble({0: (blk_xa, blk_u0a, blk_u1a, blk_va), 1: (blk_xb, blk_u0b, blk_u1b, blk_vb)})

        # objective gradient: Simpson weights with midpoint chained back to nodes
        Lxa, Lxb, Lxm = ev["Lx"][:-1], ev["Lx"][1:], evm["Lx"]
        Lva, Lvb, Lvm = ev["Lv"][:-1], ev["Lv"][1:], evm["Lv"]
        w6 = h[:, None] / 6.0
        dLm_dXa = np.einsum("ki,kij->kj", Lxm, dXm_dXa)
        dLm_dXb = np.einsum("ki,kij->kj", Lxm, dXm_dXb)
        gX = np.zeros_like(X)
        gX[:-1] += w6 * (Lxa + 4.0 * dLm_dXa)
        gX[1:] += w6 * (Lxb + 4.0 * dLm_dXb)
        gX[0] += tg0
        gX[-1] += tgf
        dLm_dVa = np.einsum("ki,ki->k", Lxm, dXm_dVa) + 0.5 * Lvm
        dLm_dVb = np.einsum("ki,ki->k", Lxm, dXm_dVb) + 0.5 * Lvm
        gV = np.zeros_like(V)
        gV[:-1] += (h / 6.0) * (Lva + 4.0 * dLm_dVa)
        gV[1:] += (h / 6.0) * (Lvb + 4.0 * dLm_dVb)
        gU0 = np.zeros_like(U0)
        gU1 = np.zeros_like(U1)
        if m:
            Lu0a, Lu0b, Lu0m = ev["Lu0"][:-1], ev["Lu0"][1:], evm["Lu0"]
            Lu1a, Lu1b, Lu1m = ev["Lu1"][:-1], ev["Lu1"][1:], evm["Lu1"]
            dLm_dU0a = np.einsum("ki,kij->kj", Lxm, dXm_dU0a) + 0.5 * Lu0m
            dLm_dU0b = np.einsum("ki,kij->kj", Lxm, dXm_dU0b) + 0.5 * Lu0m
            dLm_dU1a = np.einsum("ki,kij->kj", Lxm, dXm_dU1a) + 0.5 * Lu1m
            dLm_dU1b = np.einsum("ki,kij->kj", Lxm, dXm_dU1b) + 0.5 * Lu1m
            gU0[:-1] += w6 * (Lu0a + 4.0 * dLm_dU0a)
            gU0[1:] += w6 * (Lu0b + 4.0 * dLm_dU0b)
            gU1[:-1] += w6 * (Lu1a + 4.0 * dLm_dU1a)
            gU1[1:] += w6 * (Lu1b + 4.0 * dLm_dU1b)
        grad = lay.pack(gX, gU0, gU1, gV)
        return obj, C.ravel(), grad, jac


def transcribe(problem: EmbeddedProblem, mesh: Mesh) -> NlpProblem:
    """Transcribe an embedded problem into a finite nonlinear program."""
    b = problem.base.boundary
    if abs(mesh.grid[0] - b.t0) > 1e-9 or abs(mesh.grid[-1] - b.tf) > 1e-9:
        raise ValueError("mesh does not span the problem horizon")
    tr = _Transcriber(problem, mesh)
    lo, hi = _bounds(problem, tr.layout)

    def objective(z):
        return tr.evaluate(z, False)[0]

    def constraints(z):
        return tr.evaluate(z, False)[1]

    def gradient(z):
        return tr.evaluate(z, True)[2]

    def jacobian(z):
        return tr.evaluate(z, True)[3]

    def full_eval(z):
        obj, c, g, J = tr.evaluate(z, True)
        return obj, g, c, J

    return NlpProblem(
        objective=objective,
        constraints=constraints,
        lower=lo,
        upper=hi,
        n_constraints=mesh.num_intervals * problem.base.state_dim,
        gradient=gradient,
        jacobian=jacobian,
        full_eval=full_eval,
        layout=tr.layout,
        mesh=mesh,
        problem=problem,
    )


def trajectory_from_vector(nlp: NlpProblem, z) -> Trajectory:
    """Unpack a decision vector into a Trajectory on the mesh grid."""
    X, U0, U1, V = nlp.layout.unpack(z)
    return Trajectory(
        times=nlp.mesh.grid,
        states=X,
        controls_u0=U0,
        controls_u1=U1,
        mode_signal=np.clip(V, 0.0, 1.0),
    )
