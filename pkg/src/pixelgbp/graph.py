"""Factor-graph container and the Gaussian message-passing engine.

Every variable is a rotation whose belief is kept in canonical (information)
form in the tangent space at its current frame.  A sweep runs two
barrier-synchronized steps:

* Step A — every factor relinearizes at the current frames and rewrites its
  outgoing messages into a fresh buffer, querying variable-to-factor
  products on demand against the previous buffer.
* Step B — every variable fuses its freshly written messages, advances its
  frame by the fused mean, and re-expresses both the stored messages and
  the belief at the new frame, so the next sweep needs no transports.

Messages live in a flat slot array, one slot per (factor, recipient) pair;
all stored slots are always expressed at their recipient's current frame.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels_numpy as ref_kernels
from . import backend, lie
from . import factors as factor_ops
from .factors import FactorParams
from .gaussian import CanonicalGaussian, LieGaussian, transport_canonical
from .imaging import CameraIntrinsics, gradient_field

log = logging.getLogger(__name__)

PHOTO = "photometric"
PRIOR = "prior"
REG = "regularization"


@dataclass(frozen=True)
class SweepReport:
    """Per-sweep statistics returned by :meth:`FactorGraph.sweep`."""

    sweep: int
    step_norm: float           # mean frame-change norm, radians
    energy: float              # sum of 0.5 * lam * ||r||^2 over factors
    wall_ms: float
    singular_messages: int     # smoothness messages degraded to zero info
    skipped_photometric: int   # photometric factors that saw nothing


class FactorGraph:
    """Bipartite graph of rotation variables and the three factor kinds."""

    def __init__(self, params: FactorParams, damping: float = 0.0):
        if not 0.0 <= damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        self.params = params
        self.damping = damping
        self._levels: list[int] = []
        self._pixels: list[tuple[float, float] | None] = []
        self._photo: list[int] = []
        self._prior: list[int] = []
        self._reg: list[tuple[int, int]] = []
        self._factor_tab: list[tuple[str, int]] = []
        self._finalized = False
        self._scene = None
        self.sweep_index = 0

    # ------------------------------------------------------------------
    # construction

    def add_variable(self, level: int = 0, pixel=None) -> int:
        if self._finalized:
            raise RuntimeError("graph already finalized")
        self._levels.append(int(level))
        self._pixels.append(None if pixel is None else (float(pixel[0]), float(pixel[1])))
        return len(self._levels) - 1

    def _check_var(self, v):
        if not 0 <= v < len(self._levels):
            raise IndexError(f"no variable {v}")

    def add_photo_factor(self, var: int) -> int:
        if self._finalized:
            raise RuntimeError("graph already finalized")
        self._check_var(var)
        if self._pixels[var] is None:
            raise ValueError("photometric factors need a variable with a pixel")
        self._photo.append(var)
        self._factor_tab.append((PHOTO, len(self._photo) - 1))
        return len(self._factor_tab) - 1

    def add_prior_factor(self, var: int) -> int:
        if self._finalized:
            raise RuntimeError("graph already finalized")
        self._check_var(var)
        self._prior.append(var)
        self._factor_tab.append((PRIOR, len(self._prior) - 1))
        return len(self._factor_tab) - 1

    def add_reg_factor(self, var_i: int, var_j: int) -> int:
        if self._finalized:
            raise RuntimeError("graph already finalized")
        self._check_var(var_i)
        self._check_var(var_j)
        if var_i == var_j:
            raise ValueError("smoothness factor needs two distinct variables")
        self._reg.append((var_i, var_j))
        self._factor_tab.append((REG, len(self._reg) - 1))
        return len(self._factor_tab) - 1

    def finalize(self) -> None:
        """Freeze the topology and allocate the flat engine arrays."""
        if self._finalized:
            return
        n = len(self._levels)
        if n == 0:
            raise ValueError("graph has no variables")
        self.levels = np.array(self._levels, dtype=np.int64)
        self.pixels = np.full((n, 2), np.nan)
        for v, p in enumerate(self._pixels):
            if p is not None:
                self.pixels[v] = p

        self.photo_var = np.array(self._photo, dtype=np.int64)
        self.prior_var = np.array(self._prior, dtype=np.int64)
        reg = np.array(self._reg, dtype=np.int64).reshape(-1, 2)
        self.reg_i = reg[:, 0].copy()
        self.reg_j = reg[:, 1].copy()

        P, Q, R = len(self._photo), len(self._prior), len(self._reg)
        self.slot_var = np.concatenate(
            [self.photo_var, self.prior_var, self.reg_i, self.reg_j]
        ).astype(np.int64)
        self.reg_slot_i = np.arange(P + Q, P + Q + R, dtype=np.int64)
        self.reg_slot_j = np.arange(P + Q + R, P + Q + 2 * R, dtype=np.int64)

        m = self.slot_var.shape[0]
        order = np.argsort(self.slot_var, kind="stable")
        self.var_slots = order
        self.var_slot_ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.var_slot_ptr, self.slot_var + 1, 1)
        np.cumsum(self.var_slot_ptr, out=self.var_slot_ptr)

        fids = {PHOTO: [], PRIOR: [], REG: []}
        for fid, (kind, _) in enumerate(self._factor_tab):
            fids[kind].append(fid)
        self.slot_factor = np.concatenate(
            [
                np.array(fids[PHOTO], dtype=np.int64),
                np.array(fids[PRIOR], dtype=np.int64),
                np.array(fids[REG], dtype=np.int64),
                np.array(fids[REG], dtype=np.int64),
            ]
        )

        self.frames = np.tile(np.eye(3), (n, 1, 1))
        self._msg_eta = np.zeros((m, 3))
        self._msg_lam = np.zeros((m, 3, 3))
        self._scratch_eta = np.zeros((m, 3))
        self._scratch_lam = np.zeros((m, 3, 3))
        self.belief_eta = np.zeros((n, 3))
        self.belief_lam = np.zeros((n, 3, 3))
        self._finalized = True

    # ------------------------------------------------------------------
    # simple accessors

    @property
    def n_variables(self) -> int:
        return len(self._levels)

    @property
    def n_factors(self) -> int:
        return len(self._factor_tab)

    @property
    def n_photo(self) -> int:
        return len(self._photo)

    @property
    def n_prior(self) -> int:
        return len(self._prior)

    @property
    def n_reg(self) -> int:
        return len(self._reg)

    def factor_kind(self, f: int):
        return self._factor_tab[f]

    def factor_variables(self, f: int):
        kind, k = self._factor_tab[f]
        if kind == PHOTO:
            return (int(self.photo_var[k]) if self._finalized else self._photo[k],)
        if kind == PRIOR:
            return (int(self.prior_var[k]) if self._finalized else self._prior[k],)
        pair = (self.reg_i[k], self.reg_j[k]) if self._finalized else self._reg[k]
        return (int(pair[0]), int(pair[1]))

    def incident_factors(self, v: int):
        self._require_finalized()
        lo, hi = self.var_slot_ptr[v], self.var_slot_ptr[v + 1]
        return sorted(int(self.slot_factor[s]) for s in self.var_slots[lo:hi])

    def _require_finalized(self):
        if not self._finalized:
            raise RuntimeError("call finalize() first")

    def set_frames(self, frames) -> None:
        self._require_finalized()
        frames = np.asarray(frames, dtype=np.float64)
        if frames.shape != self.frames.shape:
            raise ValueError(f"expected frames of shape {self.frames.shape}")
        self.frames[:] = frames

    def set_scene(self, left, right, K: CameraIntrinsics) -> None:
        """Attach the image pair observed by the photometric factors."""
        self._require_finalized()
        left = np.asarray(left, dtype=np.float64)
        right = np.asarray(right, dtype=np.float64)
        gx, gy = gradient_field(right)
        pix = self.pixels[self.photo_var]
        if np.isnan(pix).any():
            raise ValueError("photometric variable without pixel coordinates")
        xi = pix[:, 0].astype(np.int64)
        yi = pix[:, 1].astype(np.int64)
        if (xi < 0).any() or (xi >= left.shape[1]).any() or (yi < 0).any() \
                or (yi >= left.shape[0]).any():
            raise ValueError("photometric pixel outside the left image")
        homo = np.concatenate([pix, np.ones((len(pix), 1))], axis=-1)
        q = homo @ K.inverse_matrix.T
        self._scene = {
            "left": left,
            "right": right,
            "gx": gx,
            "gy": gy,
            "K": K,
            "q": q,
            "skew_q": lie.skew(q),
            "i_left": left[yi, xi],
        }

    # ------------------------------------------------------------------
    # the engine

    def sweep(self, update_frames: bool = True) -> SweepReport:
        """Run one synchronous two-step iteration over the whole graph."""
        self._require_finalized()
        if self.n_photo and self._scene is None:
            raise RuntimeError("photometric factors need set_scene() first")
        kern = backend.get_kernels()
        t0 = time.perf_counter()

        prev_eta, prev_lam = self._msg_eta, self._msg_lam
        out_eta, out_lam = self._scratch_eta, self._scratch_lam
        P, Q = self.n_photo, self.n_prior

        energy = 0.0
        skipped = 0
        n_singular = 0
        if P:
            s = self._scene
            e, skipped = kern.photo_messages(
                self.frames, self.photo_var, s["q"], s["skew_q"], s["i_left"],
                s["right"], s["gx"], s["gy"], s["K"].matrix, self.params.lam_d,
                out_eta, out_lam,
            )
            energy += e
        if Q:
            kern.prior_messages(out_eta, out_lam, P, Q, self.params.lam_p)
        if self.n_reg:
            tot_eta, tot_lam = kern.csr_totals(
                self.slot_var, prev_eta, prev_lam, self.n_variables
            )
            e, n_singular = kern.reg_messages(
                self.frames, self.reg_i, self.reg_j, self.reg_slot_i,
                self.reg_slot_j, prev_eta, prev_lam, tot_eta, tot_lam,
                self.params.lam_r, out_eta, out_lam,
            )
            energy += e

        if self.damping > 0.0:
            b = self.damping
            out_eta *= 1.0 - b
            out_eta += b * prev_eta
            out_lam *= 1.0 - b
            out_lam += b * prev_lam

        step_sum, n_static = kern.belief_update(
            self.frames, out_eta, out_lam, self.slot_var,
            self.belief_eta, self.belief_lam, update_frames,
        )
        if n_static:
            log.debug("%d variables kept their frame (singular belief)", n_static)
        if skipped or n_singular:
            log.debug(
                "sweep %d: %d photometric factors saw nothing, %d singular messages",
                self.sweep_index, skipped, n_singular,
            )

        self._msg_eta, self._scratch_eta = out_eta, prev_eta
        self._msg_lam, self._scratch_lam = out_lam, prev_lam
        self.sweep_index += 1
        return SweepReport(
            sweep=self.sweep_index,
            step_norm=step_sum / self.n_variables,
            energy=energy,
            wall_ms=(time.perf_counter() - t0) * 1e3,
            singular_messages=n_singular,
            skipped_photometric=skipped,
        )

    def run(self, n_sweeps: int, update_frames: bool = True):
        return [self.sweep(update_frames) for _ in range(n_sweeps)]

    # ------------------------------------------------------------------
    # single-entity reference operations (numpy, used by tests and probes)

    def _slot_of(self, f: int, v: int) -> int:
        kind, k = self._factor_tab[f]
        P, Q = self.n_photo, self.n_prior
        if kind == PHOTO:
            if self.photo_var[k] != v:
                raise ValueError("factor does not send to this variable")
            return k
        if kind == PRIOR:
            if self.prior_var[k] != v:
                raise ValueError("factor does not send to this variable")
            return P + k
        if self.reg_i[k] == v:
            return int(self.reg_slot_i[k])
        if self.reg_j[k] == v:
            return int(self.reg_slot_j[k])
        raise ValueError("factor does not send to this variable")

    def linearize_factor(self, f: int) -> CanonicalGaussian:
        """Linearized potential of factor f at the current frames."""
        self._require_finalized()
        kind, k = self._factor_tab[f]
        if kind == PRIOR:
            lam = self.params.lam_p * np.eye(3)
            return CanonicalGaussian(np.zeros(3), lam)
        if kind == PHOTO:
            if self._scene is None:
                raise RuntimeError("photometric factors need set_scene() first")
            s = self._scene
            v = self.photo_var[k]
            out = factor_ops.photometric_residual(
                self.pixels[v], self.frames[v], s["left"], s["right"], s["K"],
                (s["gx"], s["gy"]),
            )
            if out is None:
                return CanonicalGaussian(np.zeros(3), np.zeros((3, 3)))
            r, J = out
            eta, lam = factor_ops.linearized_potential(r, J, self.params.lam_d)
            return CanonicalGaussian(eta, lam)
        i, j = self.reg_i[k], self.reg_j[k]
        r, J_i, J_j = factor_ops.regularization_residual(self.frames[i], self.frames[j])
        eta, lam = factor_ops.linearized_potential(
            r, np.hstack([J_i, J_j]), self.params.lam_r
        )
        return CanonicalGaussian(eta, lam)

    def variable_to_factor(self, v: int, f: int) -> LieGaussian:
        """Product of v's stored messages excluding f, at v's current frame."""
        self._require_finalized()
        lo, hi = self.var_slot_ptr[v], self.var_slot_ptr[v + 1]
        slots = self.var_slots[lo:hi]
        skip = self._slot_of(f, v)
        eta = np.zeros(3)
        lam = np.zeros((3, 3))
        for s in slots:
            if s != skip:
                eta += self._msg_eta[s]
                lam += self._msg_lam[s]
        return LieGaussian(self.frames[v].copy(), CanonicalGaussian(eta, lam))

    def factor_to_variable(self, f: int, target: int) -> LieGaussian:
        """Fresh message f -> target against the currently stored products."""
        self._require_finalized()
        kind, k = self._factor_tab[f]
        pot = self.linearize_factor(f)
        if kind != REG:
            if self.factor_variables(f)[0] != target:
                raise ValueError("factor does not send to this variable")
            return LieGaussian(self.frames[target].copy(), pot)
        i, j = int(self.reg_i[k]), int(self.reg_j[k])
        if target == j:
            other, t_sl, o_sl = i, slice(3, 6), slice(0, 3)
        elif target == i:
            other, t_sl, o_sl = j, slice(0, 3), slice(3, 6)
        else:
            raise ValueError("factor does not send to this variable")
        inc = self.variable_to_factor(other, f)
        eta = pot.eta.copy()
        lam = pot.lam.copy()
        eta[o_sl] += inc.gauss.eta
        lam[o_sl, o_sl] += inc.gauss.lam
        A = lam[o_sl, o_sl]
        L, ok = ref_kernels._chol3(A)
        if not ok:
            log.debug("singular elimination block for factor %d", f)
            return LieGaussian(
                self.frames[target].copy(),
                CanonicalGaussian(np.zeros(3), np.zeros((3, 3))),
            )
        C = lam[t_sl, o_sl]
        X = np.stack([ref_kernels._chol_solve3(L, lam[o_sl, t_sl][:, c]) for c in range(3)], axis=-1)
        m_lam = lam[t_sl, t_sl] - C @ X
        m_eta = eta[t_sl] - C @ ref_kernels._chol_solve3(L, eta[o_sl])
        m_lam = 0.5 * (m_lam + m_lam.T)
        return LieGaussian(self.frames[target].copy(), CanonicalGaussian(m_eta, m_lam))

    def update_belief(self, v: int) -> LieGaussian:
        """Fuse v's stored messages, advance its frame, re-express storage."""
        self._require_finalized()
        lo, hi = self.var_slot_ptr[v], self.var_slot_ptr[v + 1]
        slots = self.var_slots[lo:hi]
        eta = self._msg_eta[slots].sum(axis=0)
        lam = self._msg_lam[slots].sum(axis=0)
        L, ok = ref_kernels._chol3(lam)
        if not ok:
            self.belief_eta[v] = eta
            self.belief_lam[v] = lam
            return LieGaussian(self.frames[v].copy(), CanonicalGaussian(eta, lam))
        m = ref_kernels._chol_solve3(L, eta)
        self.frames[v] = lie.oplus(self.frames[v], m)
        for s in slots:
            e2, l2 = transport_canonical(self._msg_eta[s], self._msg_lam[s], -m)
            self._msg_eta[s] = e2
            self._msg_lam[s] = 0.5 * (l2 + l2.T)
        e2, l2 = transport_canonical(eta, lam, -m)
        self.belief_eta[v] = e2
        self.belief_lam[v] = 0.5 * (l2 + l2.T)
        return LieGaussian(
            self.frames[v].copy(),
            CanonicalGaussian(self.belief_eta[v].copy(), self.belief_lam[v].copy()),
        )

    def belief(self, v: int) -> LieGaussian:
        self._require_finalized()
        return LieGaussian(
            self.frames[v].copy(),
            CanonicalGaussian(self.belief_eta[v].copy(), self.belief_lam[v].copy()),
        )

    # ------------------------------------------------------------------

    def validate(self) -> None:
        """Check the structural invariants of the finalized graph."""
        self._require_finalized()
        assert self.slot_var.shape[0] == self.n_photo + self.n_prior + 2 * self.n_reg
        # the CSR view must partition the slot set
        seen = np.sort(self.var_slots)
        assert np.array_equal(seen, np.arange(self.slot_var.shape[0]))
        for v in range(self.n_variables):
            lo, hi = self.var_slot_ptr[v], self.var_slot_ptr[v + 1]
            assert (self.slot_var[self.var_slots[lo:hi]] == v).all()
        # factors list their variables back
        for f in range(self.n_factors):
            for v in self.factor_variables(f):
                assert f in self.incident_factors(v)
        arity = {PHOTO: 1, PRIOR: 1, REG: 2}
        for f, (kind, _) in enumerate(self._factor_tab):
            assert len(self.factor_variables(f)) == arity[kind]
