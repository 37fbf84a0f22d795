"""Optical elements of the delay loop.

The loop consists of a half-wave plate at 22.5 degrees inside the loop (a
50/50 mixer in polarization space), a polarizing beamsplitter that transmits
H out of the loop and keeps V circulating, one lumped loss beamsplitter per
round trip, and a Gaussian-beam overlap model for diffraction between round
trips.

Sign convention of the wave plate: H -> (H+V)/sqrt(2), V -> (H-V)/sqrt(2).
A photon that stays in the loop therefore flips sign on every pass, which
produces the alternating amplitudes of the loop's output superposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .fock import FockState, ModeId, mix_modes, relabel_mode

__all__ = [
    "LoopParams",
    "EnvAllocator",
    "RouteResult",
    "wp_mix",
    "wp2_partial",
    "loss_channel",
    "pbs_route",
    "diffraction_overlap",
]

_SQ2 = 1.0 / math.sqrt(2.0)

# H -> (H+V)/sqrt(2), V -> (H-V)/sqrt(2): columns are the images of the
# input creation operators in the (H, V) output basis.
_WP_PLUS_MINUS = np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]])
# Opposite handedness, for completeness.
_WP_MINUS_PLUS = np.array([[_SQ2, _SQ2], [-_SQ2, _SQ2]])


@dataclass
class LoopParams:
    """Physical parameters of the delay loop.

    eta_l:  round-trip intensity transmission.
    roundtrip_ns: loop delay R in nanoseconds.
    overlap_m: wave-function overlap M of a fresh photon with the circulating
        reference wavepacket (equals the classical interference visibility
        for a perfect single-photon source).
    beam_waist_mm, wavelength_nm, loop_length_m: Gaussian-beam geometry used
        by the diffraction model.
    diffraction: when True, the per-pass overlap is additionally reduced by
        the one-loop-length diffraction factor.
    """

    eta_l: float = 0.9
    roundtrip_ns: float = 3.336
    overlap_m: float = 1.0
    beam_waist_mm: float = 0.50
    wavelength_nm: float = 935.0
    loop_length_m: float = 1.0
    diffraction: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta_l <= 1.0:
            raise ValueError(f"eta_l={self.eta_l} outside [0, 1]")
        if not 0.0 <= self.overlap_m <= 1.0:
            raise ValueError(f"overlap_m={self.overlap_m} outside [0, 1]")
        if self.roundtrip_ns <= 0:
            raise ValueError("roundtrip_ns must be positive")
        if self.beam_waist_mm <= 0:
            raise ValueError("beam_waist_mm must be positive")
        if self.wavelength_nm <= 0:
            raise ValueError("wavelength_nm must be positive")


class EnvAllocator:
    """Hands out environment modes, one per loss event, never reused."""

    def __init__(self) -> None:
        self._next = 0

    def fresh(self) -> ModeId:
        mode = ModeId.env(self._next)
        self._next += 1
        return mode


def wp_mix(
    state: FockState,
    mode_a: ModeId,
    mode_b: ModeId,
    sign_convention: str = "plus_minus",
) -> FockState:
    """Half-wave plate at 22.5 degrees acting on the two polarization modes.

    mode_a plays the role of H, mode_b of V.  Multi-photon terms expand via
    the binomial sums; indistinguishable photons in the two inputs bunch
    (Hong-Ou-Mandel), photons in other modes are untouched.
    """
    if sign_convention == "plus_minus":
        u = _WP_PLUS_MINUS
    elif sign_convention == "minus_plus":
        u = _WP_MINUS_PLUS
    else:
        raise ValueError(f"unknown sign convention {sign_convention!r}")
    return mix_modes(state, mode_a, mode_b, u)


def wp2_partial(
    state: FockState,
    fresh_pair: tuple[ModeId, ModeId],
    loop_pair: tuple[ModeId, ModeId],
    overlap_m: float,
) -> FockState:
    """Mixing of a fresh photon with the circulating field at partial overlap.

    The fresh photon's wavepacket is first decomposed into sqrt(M) times the
    loop reference wavepacket plus sqrt(1-M) times a new orthogonal
    wavepacket; the wave plate then acts within each wavepacket
    independently.  M=1 collapses to a single Hong-Ou-Mandel mixer on the
    reference pair; M=0 keeps fresh and circulating photons in orthogonal
    two-dimensional subspaces.
    """
    if not 0.0 <= overlap_m <= 1.0:
        raise ValueError(f"overlap {overlap_m} outside [0, 1]")
    fresh_h, fresh_v = fresh_pair
    loop_h, loop_v = loop_pair
    c = math.sqrt(overlap_m)
    s = math.sqrt(1.0 - overlap_m)
    if overlap_m == 1.0:
        # exact limiting case: full transfer into the reference wavepacket
        state = relabel_mode(state, fresh_h, loop_h)
    else:
        # fresh_h -> s*fresh_h + c*loop_h, unitary completion on loop_h
        split = np.array([[s, c], [c, -s]])
        state = mix_modes(state, fresh_h, loop_h, split)
    state = wp_mix(state, loop_h, loop_v)
    if overlap_m != 1.0:
        state = wp_mix(state, fresh_h, fresh_v)
    return state


def loss_channel(
    state: FockState,
    mode: ModeId,
    eta: float,
    env: EnvAllocator,
) -> FockState:
    """Photon loss as a beamsplitter into a fresh environment mode.

    Transmission amplitude sqrt(eta), reflection i*sqrt(1-eta).  The
    environment mode is never touched again; tracing it out at readout
    yields the usual binomial loss statistics.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmission {eta} outside [0, 1]")
    if eta == 1.0:
        return state.copy()
    t = math.sqrt(eta)
    r = math.sqrt(1.0 - eta)
    env_mode = env.fresh()
    u = np.array([[t, 1j * r], [1j * r, t]])
    return mix_modes(state, mode, env_mode, u)


class RouteResult(NamedTuple):
    state: FockState
    emitted: tuple  # modes moved to the output bin
    retained: tuple  # V modes still circulating


def pbs_route(state: FockState, time_bin: int) -> RouteResult:
    """Polarizing beamsplitter at the loop output.

    H-polarized in-loop photons (every internal tag) are relabeled into the
    output time bin; V-polarized photons stay in the loop for the next round
    trip.  A superposition of H and V becomes an entangled superposition of
    an emitted and a retained photon.
    """
    emitted = []
    retained = []
    for mode in sorted(state.modes()):
        if mode.kind != ModeId.KIND_LOOP:
            continue
        if mode.pol == ModeId.POL_H:
            target = ModeId.out(time_bin, mode.tag)
            state = relabel_mode(state, mode, target)
            emitted.append(target)
        else:
            retained.append(mode)
    return RouteResult(state, tuple(emitted), tuple(retained))


def diffraction_overlap(z_m: float, w0_mm: float, wavelength_nm: float) -> float:
    """Mode overlap of a Gaussian beam with itself after propagating z.

    M(z) = |k w0^2 / (k w0^2 + i z)|^2 with k = 2 pi / lambda.  Decreases
    monotonically from 1 at z=0 toward (k w0^2 / z)^2.
    """
    if z_m < 0:
        raise ValueError("propagation distance must be non-negative")
    w0 = w0_mm * 1e-3
    lam = wavelength_nm * 1e-9
    k = 2.0 * math.pi / lam
    zr2 = (k * w0 * w0) ** 2
    return zr2 / (zr2 + z_m * z_m)


def effective_overlap(loop: LoopParams) -> float:
    """Per-pass overlap including the optional one-loop diffraction penalty."""
    m = loop.overlap_m
    if loop.diffraction:
        m *= diffraction_overlap(
            loop.loop_length_m, loop.beam_waist_mm, loop.wavelength_nm
        )
    return m
