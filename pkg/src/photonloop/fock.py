"""Sparse multi-mode bosonic Fock states.

A state is a sparse superposition over occupation vectors, where each
occupation vector maps optical modes to photon counts.  Modes are labeled by
polarization, time bin and an internal (wavepacket) tag, which is enough to
describe a polarization delay loop: the circulating field, the emitted time
bins and the environment modes that absorb loss.

All operations are functional: they return new states and never mutate their
input.  Amplitudes are complex doubles; occupation vectors only store modes
with nonzero photon number.
"""

from __future__ import annotations

import math
from typing import Iterator, NamedTuple

import numpy as np

__all__ = [
    "ModeId",
    "FockState",
    "DensityMatrix",
    "TruncationOverflowError",
    "UnknownBinError",
    "ZeroStateError",
    "create",
    "annihilate",
    "mix_modes",
    "relabel_mode",
    "partial_trace_to_bin",
    "prune_and_renormalize",
    "number_expectation",
    "attenuate_density_matrix",
]

# Occupation vectors are stored as sorted tuples of (mode, count) pairs.
OccKey = tuple

# Amplitudes below this are treated as numerical zeros and dropped on merge.
_MERGE_EPS = 1e-15


class TruncationOverflowError(RuntimeError):
    """A creation operator would push a term above the photon cap."""


class UnknownBinError(KeyError):
    """Requested output bin does not appear in the state."""


class ZeroStateError(ValueError):
    """Operation needs a normalizable state but got the zero vector."""


class ModeId(NamedTuple):
    """Label of one optical mode.

    kind: 0 = in-loop mode, 1 = emitted output bin, 2 = environment mode.
    pol:  0 = H, 1 = V (ignored for environment modes).
    bin:  time bin in units of the round-trip delay.  For in-loop modes this
          is 0 (the loop holds one temporal position); for environment modes
          it is a serial number unique to the loss event.
    tag:  internal wavepacket tag.  0 is the loop reference wavepacket,
          k > 0 labels the orthogonal complement introduced by a partially
          distinguishable photon.

    Tuple ordering gives a total, stable order over modes.
    """

    kind: int
    pol: int
    bin: int
    tag: int

    KIND_LOOP = 0
    KIND_OUT = 1
    KIND_ENV = 2
    POL_H = 0
    POL_V = 1

    @classmethod
    def loop_h(cls, tag: int) -> "ModeId":
        return cls(cls.KIND_LOOP, cls.POL_H, 0, tag)

    @classmethod
    def loop_v(cls, tag: int) -> "ModeId":
        return cls(cls.KIND_LOOP, cls.POL_V, 0, tag)

    @classmethod
    def out(cls, bin: int, tag: int) -> "ModeId":
        return cls(cls.KIND_OUT, cls.POL_H, bin, tag)

    @classmethod
    def env(cls, serial: int) -> "ModeId":
        return cls(cls.KIND_ENV, cls.POL_V, serial, 0)

    def __repr__(self) -> str:  # compact, for debugging
        kind = {0: "loop", 1: "out", 2: "env"}[self.kind]
        pol = {0: "H", 1: "V"}[self.pol]
        return f"{kind}:{pol}:{self.bin}:{self.tag}"


def _occ_set(occ: OccKey, mode: ModeId, count: int) -> OccKey:
    """Return a new occupation key with `mode` set to `count`."""
    items = [(m, c) for m, c in occ if m != mode]
    if count:
        items.append((mode, count))
    items.sort()
    return tuple(items)


def _occ_get(occ: OccKey, mode: ModeId) -> int:
    for m, c in occ:
        if m == mode:
            return c
    return 0


def _occ_total(occ: OccKey) -> int:
    return sum(c for _, c in occ)


class FockState:
    """Sparse superposition of multi-mode occupation vectors.

    terms: dict mapping occupation keys to complex amplitudes.
    n_max: hard cap on the photon number of any single term.
    """

    __slots__ = ("terms", "n_max", "_norm_sq")

    def __init__(self, terms: dict | None = None, n_max: int = 8):
        self.terms: dict = dict(terms) if terms else {}
        self.n_max = n_max
        self._norm_sq: float | None = None

    # -- construction -----------------------------------------------------

    @classmethod
    def vacuum(cls, n_max: int = 8) -> "FockState":
        return cls({(): 1.0 + 0.0j}, n_max=n_max)

    @classmethod
    def from_occupations(cls, occ: dict, n_max: int = 8) -> "FockState":
        """Single basis term with the given {mode: count} occupation."""
        key = tuple(sorted((m, c) for m, c in occ.items() if c))
        return cls({key: 1.0 + 0.0j}, n_max=n_max)

    # -- basic queries -----------------------------------------------------

    @property
    def norm_sq(self) -> float:
        if self._norm_sq is None:
            self._norm_sq = float(sum(abs(a) ** 2 for a in self.terms.values()))
        return self._norm_sq

    @property
    def is_zero(self) -> bool:
        return not self.terms or self.norm_sq < _MERGE_EPS**2

    def modes(self) -> set:
        out = set()
        for occ in self.terms:
            for m, _ in occ:
                out.add(m)
        return out

    def amplitude(self, occ: dict) -> complex:
        key = tuple(sorted((m, c) for m, c in occ.items() if c))
        return self.terms.get(key, 0.0 + 0.0j)

    def items(self) -> Iterator:
        return iter(self.terms.items())

    def copy(self) -> "FockState":
        return FockState(self.terms, n_max=self.n_max)

    # -- linear structure (used by the loop engine) -------------------------

    def scaled(self, factor: complex) -> "FockState":
        return FockState(
            {k: factor * a for k, a in self.terms.items()}, n_max=self.n_max
        )

    def added(self, other: "FockState") -> "FockState":
        if self.n_max != other.n_max:
            raise ValueError("photon caps differ")
        terms = dict(self.terms)
        for k, a in other.terms.items():
            b = terms.get(k, 0.0) + a
            if abs(b) < _MERGE_EPS:
                terms.pop(k, None)
            else:
                terms[k] = b
        return FockState(terms, n_max=self.n_max)

    def normalized(self) -> "FockState":
        n = math.sqrt(self.norm_sq)
        if n < _MERGE_EPS:
            raise ZeroStateError("cannot normalize the zero vector")
        return self.scaled(1.0 / n)

    def __repr__(self) -> str:
        n = len(self.terms)
        return f"FockState({n} terms, norm_sq={self.norm_sq:.6g}, n_max={self.n_max})"


# -- operators --------------------------------------------------------------


def create(
    state: FockState, mode: ModeId, on_overflow: str = "raise"
) -> tuple[FockState, float]:
    """Apply the creation operator a† on `mode` with bosonic normalization.

    Terms that would exceed the photon cap either raise
    TruncationOverflowError (on_overflow='raise') or are dropped with their
    probability weight accounted (on_overflow='drop').

    Returns (new_state, dropped_weight).
    """
    if on_overflow not in ("raise", "drop"):
        raise ValueError(f"bad overflow policy {on_overflow!r}")
    terms: dict = {}
    dropped = 0.0
    for occ, amp in state.terms.items():
        if _occ_total(occ) + 1 > state.n_max:
            if on_overflow == "raise":
                raise TruncationOverflowError(
                    f"creation on {mode} exceeds n_max={state.n_max}"
                )
            dropped += abs(amp) ** 2
            continue
        n = _occ_get(occ, mode)
        key = _occ_set(occ, mode, n + 1)
        val = terms.get(key, 0.0) + amp * math.sqrt(n + 1)
        if abs(val) < _MERGE_EPS:
            terms.pop(key, None)
        else:
            terms[key] = val
    return FockState(terms, n_max=state.n_max), dropped


def annihilate(state: FockState, mode: ModeId) -> FockState:
    """Apply the annihilation operator a on `mode` (factor sqrt(n)).

    The vacuum maps to the zero vector, which is representable and flagged
    via FockState.is_zero.
    """
    terms: dict = {}
    for occ, amp in state.terms.items():
        n = _occ_get(occ, mode)
        if n == 0:
            continue
        key = _occ_set(occ, mode, n - 1)
        val = terms.get(key, 0.0) + amp * math.sqrt(n)
        if abs(val) < _MERGE_EPS:
            terms.pop(key, None)
        else:
            terms[key] = val
    return FockState(terms, n_max=state.n_max)


def mix_modes(
    state: FockState,
    mode_a: ModeId,
    mode_b: ModeId,
    u: np.ndarray,
) -> FockState:
    """Two-mode linear-optics transformation.

    Creation operators map as
        a† -> u[0,0] a† + u[1,0] b†
        b† -> u[0,1] a† + u[1,1] b†
    and multi-photon terms expand through the double binomial sum.  `u` must
    be unitary so that the state norm is preserved; this routine does not
    check it.
    """
    if mode_a == mode_b:
        raise ValueError("mix_modes needs two distinct modes")
    u00, u01 = complex(u[0, 0]), complex(u[0, 1])
    u10, u11 = complex(u[1, 0]), complex(u[1, 1])
    terms: dict = {}
    for occ, amp in state.terms.items():
        na = _occ_get(occ, mode_a)
        nb = _occ_get(occ, mode_b)
        if na == 0 and nb == 0:
            val = terms.get(occ, 0.0) + amp
            if abs(val) < _MERGE_EPS:
                terms.pop(occ, None)
            else:
                terms[occ] = val
            continue
        base = _occ_set(_occ_set(occ, mode_a, 0), mode_b, 0)
        pref = amp / math.sqrt(math.factorial(na) * math.factorial(nb))
        for j in range(na + 1):
            ca_j = math.comb(na, j) * (u00**j) * (u10 ** (na - j))
            if ca_j == 0:
                continue
            for k in range(nb + 1):
                cb_k = math.comb(nb, k) * (u01**k) * (u11 ** (nb - k))
                if cb_k == 0:
                    continue
                n_a_out = j + k
                n_b_out = na + nb - j - k
                coeff = (
                    pref
                    * ca_j
                    * cb_k
                    * math.sqrt(math.factorial(n_a_out) * math.factorial(n_b_out))
                )
                key = _occ_set(_occ_set(base, mode_a, n_a_out), mode_b, n_b_out)
                val = terms.get(key, 0.0) + coeff
                if abs(val) < _MERGE_EPS:
                    terms.pop(key, None)
                else:
                    terms[key] = val
    return FockState(terms, n_max=state.n_max)


def relabel_mode(state: FockState, old: ModeId, new: ModeId) -> FockState:
    """Rename a mode.  The target mode must be unoccupied in every term."""
    if old == new:
        return state.copy()
    terms: dict = {}
    for occ, amp in state.terms.items():
        n = _occ_get(occ, old)
        if n and _occ_get(occ, new):
            raise ValueError(f"relabel target {new} already occupied")
        key = _occ_set(_occ_set(occ, old, 0), new, n) if n else occ
        terms[key] = terms.get(key, 0.0) + amp
    return FockState(terms, n_max=state.n_max)


def number_expectation(state: FockState, modes=None) -> float:
    """<n> summed over the given modes (all modes when None)."""
    total = 0.0
    norm = state.norm_sq
    if norm < _MERGE_EPS**2:
        return 0.0
    for occ, amp in state.terms.items():
        w = abs(amp) ** 2
        if modes is None:
            total += w * _occ_total(occ)
        else:
            total += w * sum(c for m, c in occ if m in modes)
    return total / norm


def prune_and_renormalize(
    state: FockState, eps_amp: float
) -> tuple[FockState, float]:
    """Drop terms with |amplitude| below eps_amp, then renormalize.

    Returns (pruned_state, dropped_weight) where dropped_weight is the total
    probability removed, relative to the input norm.
    """
    if eps_amp < 0:
        raise ValueError("eps_amp must be non-negative")
    norm = state.norm_sq
    if norm < _MERGE_EPS**2:
        return state.copy(), 0.0
    kept = {k: a for k, a in state.terms.items() if abs(a) >= eps_amp}
    dropped = norm - sum(abs(a) ** 2 for a in kept.values())
    dropped_frac = max(dropped / norm, 0.0)
    if not kept:
        return FockState({}, n_max=state.n_max), 1.0
    out = FockState(kept, n_max=state.n_max).normalized().scaled(math.sqrt(norm))
    return out, dropped_frac


# -- density matrices --------------------------------------------------------


class DensityMatrix:
    """Photon-number density matrix of a single emitted bin.

    Hermitian, unit trace, positive semidefinite within numeric tolerances.
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix: np.ndarray):
        self.matrix = np.asarray(matrix, dtype=complex)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("density matrix must be square")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def validate(
        self,
        herm_tol: float = 1e-12,
        trace_tol: float = 1e-9,
        psd_tol: float = 1e-9,
    ) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > trace_tol:
            raise ValueError(f"trace {np.trace(m).real} != 1")
        w = np.linalg.eigvalsh(m)
        if w.min() < -psd_tol:
            raise ValueError(f"negative eigenvalue {w.min()}")

    def pn(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).clip(min=0.0)

    def nbar(self) -> float:
        p = self.pn()
        return float(np.dot(np.arange(self.dim), p))

    def g2_zero(self) -> float:
        p = self.pn()
        n = np.arange(self.dim)
        nbar = float(np.dot(n, p))
        if nbar == 0.0:
            return 0.0
        return float(np.dot(n * (n - 1), p)) / nbar**2

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim}, nbar={self.nbar():.4g})"


def partial_trace_to_bin(
    state: FockState,
    bin: int,
    n_max: int | None = None,
    require_present: bool = True,
) -> DensityMatrix:
    """Reduced density matrix of the emitted bin, indexed by total photon
    number over all internal tags of that bin.

    Coherences are carried by the reference-tag (tag 0) component; photons in
    orthogonal tags of the same bin are summed incoherently, shifting the
    number index.  For a bin occupying only tag 0 this is the exact
    single-mode reduction.
    """
    if n_max is None:
        n_max = state.n_max
    dim = n_max + 1
    norm = state.norm_sq
    if norm < _MERGE_EPS**2:
        raise ZeroStateError("cannot trace the zero vector")

    ref = ModeId.out(bin, 0)
    seen_bin = False
    # group terms by everything except the bin's tag-0 occupation
    groups: dict = {}
    for occ, amp in state.terms.items():
        n0 = 0
        extra = 0
        rest = []
        for m, c in occ:
            if m.kind == ModeId.KIND_OUT and m.bin == bin:
                seen_bin = True
                if m.tag == 0:
                    n0 = c
                else:
                    extra += c
                    rest.append((m, c))
            else:
                rest.append((m, c))
        key = tuple(rest)
        groups.setdefault(key, []).append((n0, extra, amp))

    if require_present and not seen_bin:
        raise UnknownBinError(f"bin {bin} absent from state")

    rho = np.zeros((dim, dim), dtype=complex)
    for entries in groups.values():
        for n0, extra, a in entries:
            for m0, extra_b, b in entries:
                i, j = n0 + extra, m0 + extra_b
                if i < dim and j < dim:
                    rho[i, j] += a * np.conj(b)
    rho /= norm
    return DensityMatrix(rho)


def attenuate_density_matrix(rho: DensityMatrix, eta: float) -> DensityMatrix:
    """Beamsplitter attenuation of a number-basis density matrix.

    Standard Kraus decomposition of the pure-loss channel with transmission
    eta: K_k |n> = sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k>.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("transmission must lie in [0, 1]")
    dim = rho.dim
    out = np.zeros_like(rho.matrix)
    for k in range(dim):
        kraus = np.zeros((dim, dim))
        for n in range(k, dim):
            kraus[n - k, n] = math.sqrt(
                math.comb(n, k) * eta ** (n - k) * (1.0 - eta) ** k
            )
        out += kraus @ rho.matrix @ kraus.T
    return DensityMatrix(out)
