"""Models of the two pulsed pair sources feeding the teleporter.

One collinear module heralds the single photon whose state gets prepared
with waveplates; one non-collinear module supplies the entangled resource
pair.  Emission is sampled at the event level from the measured count
rates rather than pulse by pulse: with tens of expected detections per
pass, simulating 2.8e10 pump pulses would be waste.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .qstate import (
    KET_H,
    BellState,
    DensityMatrix,
    PureState,
    apply_unitary,
    fidelity,
    jones_hwp,
    jones_qwp,
)


@dataclass(frozen=True)
class SourceModel:
    """Measured operating point of the multiplexed four-photon source.

    Rates are counts per second on the ground bench; `double_pair_fraction`
    is the fraction of heralded events caused by a same-crystal double pair,
    and `entangled_fidelity` the bench fidelity of the resource pair.
    """

    rep_rate: float = 80e6
    trigger_rate: float = 5.7e5
    pair_rate: float = 1.0e6
    entangled_fidelity: float = 0.933
    double_pair_fraction: float = 0.0
    num_modules: int = 2
    fourfold_ground_rate: float = 8210.0

    def __post_init__(self):
        for name in ("rep_rate", "trigger_rate", "pair_rate", "fourfold_ground_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.25 <= self.entangled_fidelity <= 1.0:
            raise ValueError("entangled_fidelity must lie in [1/4, 1]")
        if not 0.0 <= self.double_pair_fraction < 1.0:
            raise ValueError("double_pair_fraction must lie in [0, 1)")
        if self.num_modules < 1:
            raise ValueError("num_modules must be >= 1")


class EmissionEvent(enum.Enum):
    NONE = "none"
    SINGLE_PAIR = "single_pair"
    DOUBLE_PAIR = "double_pair"


@dataclass(frozen=True)
class PreparedInput:
    """A prepared single-qubit state and one waveplate setting producing it.

    The physical order is quarter-wave plate first, then half-wave plate,
    both fed with horizontally polarized light.
    """

    state: PureState
    hwp_angle: float
    qwp_angle: float


def _waveplate_state(hwp_angle: float, qwp_angle: float) -> PureState:
    prepared = apply_unitary(KET_H, jones_qwp(qwp_angle))
    return apply_unitary(prepared, jones_hwp(hwp_angle))


def _plate_overlap_sq(target: np.ndarray, hwp: np.ndarray, qwp: np.ndarray) -> np.ndarray:
    """|<target| HWP(h) QWP(q) |H>|^2 on a broadcast grid of angles."""
    # First column of HWP(h) @ QWP(q): the plates act on (1, 0).
    c2h, s2h = np.cos(2 * hwp), np.sin(2 * hwp)
    cq, sq = np.cos(qwp), np.sin(qwp)
    # QWP(q) |H> = (cq^2 + i sq^2, cq sq (1 - i))
    top = cq**2 + 1j * sq**2
    bot = cq * sq * (1.0 - 1j)
    out0 = c2h * top + s2h * bot
    out1 = s2h * top - c2h * bot
    return np.abs(np.conj(target[0]) * out0 + np.conj(target[1]) * out1) ** 2


def prepare_input(alpha: complex, beta: complex) -> PreparedInput:
    """Prepare alpha|H> + beta|V>, recovering waveplate angles numerically.

    The amplitudes are normalized (with a warning if they are off by more
    than 1e-10); both amplitudes zero is rejected.
    """
    norm_sq = abs(alpha) ** 2 + abs(beta) ** 2
    if norm_sq < 1e-24:
        raise ValueError("alpha and beta cannot both be zero")
    if abs(norm_sq - 1.0) > 1e-10:
        warnings.warn(
            f"|alpha|^2 + |beta|^2 = {norm_sq:.6g}, renormalizing", stacklevel=2
        )
    target = PureState([alpha, beta])
    tvec = target.amplitudes

    def infidelity(angles: np.ndarray) -> float:
        return 1.0 - float(_plate_overlap_sq(tvec, angles[0], angles[1]))

    # Coarse scan over both plate angles, then a local polish.
    grid = np.linspace(0.0, np.pi, 48, endpoint=False)
    hh, qq = np.meshgrid(grid, grid, indexing="ij")
    coarse = _plate_overlap_sq(tvec, hh, qq)
    i, j = np.unravel_index(np.argmax(coarse), coarse.shape)
    res = optimize.minimize(
        infidelity, x0=np.array([grid[i], grid[j]]), method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000},
    )
    hwp, qwp = (float(a) % np.pi for a in res.x)
    # Confirm through the full Jones pipeline, not the fast objective.
    if fidelity(target, _waveplate_state(hwp, qwp).density()) < 1 - 1e-10:
        raise RuntimeError("waveplate angle search failed to converge")
    return PreparedInput(state=target, hwp_angle=hwp, qwp_angle=qwp)


def werner_pair(f_ent: float) -> DensityMatrix:
    """Entangled resource with white-noise admixture matching fidelity f_ent.

    Returns p |phi+><phi+| + (1-p) I/4 with p = (4 f_ent - 1)/3, the
    single-parameter model used for the bench-measured pair fidelity.
    """
    if not 0.25 <= f_ent <= 1.0:
        raise ValueError("entangled fidelity must lie in [1/4, 1]")
    p = (4.0 * f_ent - 1.0) / 3.0
    phi = BellState.PHI_PLUS.state.density().matrix
    return DensityMatrix(p * phi + (1.0 - p) * np.eye(4) / 4.0)


def sample_emission(source: SourceModel, rng: np.random.Generator) -> EmissionEvent:
    """Draw one pump-pulse emission outcome from the rate model.

    An emission happens with probability pair_rate/rep_rate; conditional on
    emitting, the double-pair branch is taken with double_pair_fraction.
    """
    p_emit = min(source.pair_rate / source.rep_rate, 1.0) if source.rep_rate > 0 else 0.0
    if rng.random() >= p_emit:
        return EmissionEvent.NONE
    if rng.random() < source.double_pair_fraction:
        return EmissionEvent.DOUBLE_PAIR
    return EmissionEvent.SINGLE_PAIR


def multiplex_rate(rates: list[float] | tuple[float, ...]) -> float:
    """Combined rate of independent source modules sharing one pump."""
    if any(r < 0 for r in rates):
        raise ValueError("rates must be non-negative")
    return float(sum(rates))
