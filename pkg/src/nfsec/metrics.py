"""Secrecy-rate evaluation for a joint precoder / artificial-noise design.

Rates are in bits/s/Hz and always computed from noise-whitened channels.
Log-determinants of I + H X Xh Hh terms are evaluated through the
difference form logdet(I + H (S + A) Hh) - logdet(I + H A Hh), which
avoids forming the interference-plus-noise inverse explicitly.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError
from .units import watts_to_dbm
from . import geometry as geo

LN2 = float(np.log(2.0))

# Relative slack on the transmit power budget check.
POWER_SLACK = 1e-9


def _logdet_eye_plus_gram(factor: np.ndarray) -> float:
    """Natural-log det(I + F Fh) for a tall or wide complex factor F."""
    n, m = factor.shape
    # Work in whichever Gram dimension is smaller.
    if m < n:
        g = factor.conj().T @ factor
    else:
        g = factor @ factor.conj().T
    g = 0.5 * (g + g.conj().T)
    sign, val = np.linalg.slogdet(np.eye(g.shape[0]) + g)
    if sign.real <= 0 or not np.isfinite(val):
        raise NumericalError("log-det of an indefinite Gram matrix",
                             f"sign={sign}, logdet={val}")
    return float(val)


def rate_bob(h_bob: np.ndarray, w: np.ndarray,
             v: np.ndarray | None = None) -> float:
    """Achievable rate of the K-stream signal under AN self-interference.

    Args:
        h_bob: whitened channel, shape (n_rx, n_tx).
        w: precoder, shape (n_tx, K).
        v: AN vector, shape (n_tx,); None means AN off.

    Returns:
        Rate in bits/s/Hz.
    """
    if v is None:
        return _logdet_eye_plus_gram(h_bob @ w) / LN2
    t = np.column_stack([w, v])
    return (_logdet_eye_plus_gram(h_bob @ t)
            - _logdet_eye_plus_gram(h_bob @ v[:, None])) / LN2


def rate_eve(h_eve: np.ndarray, w: np.ndarray,
             v: np.ndarray | None = None) -> float:
    """Leakage rate at the eavesdropper; same expression, Eve's channel."""
    return rate_bob(h_eve, w, v)


def secrecy_rate(h_bob: np.ndarray, h_eve: np.ndarray, w: np.ndarray,
                 v: np.ndarray | None = None) -> float:
    """Nonnegative part of the Bob/Eve rate difference, bits/s/Hz."""
    return max(0.0, rate_bob(h_bob, w, v) - rate_eve(h_eve, w, v))


def decompose_rate_terms(h_bob: np.ndarray, h_eve: np.ndarray,
                         w: np.ndarray, v: np.ndarray
                         ) -> tuple[float, float, float]:
    """Split the unclamped secrecy rate into its three log-det terms.

    Term 1 is Bob's rate written literally with the AN covariance inverse,
    term 2 is Eve's AN-only log-det, term 3 is Eve's signal-plus-AN
    log-det; term1 + term2 - term3 equals rate_bob - rate_eve. All three
    are in bits/s/Hz.
    """
    hv = h_bob @ v[:, None]
    hw = h_bob @ w
    n_rx = h_bob.shape[0]
    j = np.eye(n_rx) + hv @ hv.conj().T
    m = np.eye(n_rx) + hw @ hw.conj().T @ np.linalg.inv(j)
    sign, val = np.linalg.slogdet(m)
    if not np.isfinite(val):
        raise NumericalError("log-det failed in rate decomposition")
    # The determinant is real positive analytically; sign carries only a
    # unit-magnitude phase residue, so the log-magnitude is val itself.
    term1 = float(val) / LN2
    term2 = _logdet_eye_plus_gram(h_eve @ v[:, None]) / LN2
    t = np.column_stack([w, v])
    term3 = _logdet_eye_plus_gram(h_eve @ t) / LN2
    return term1, term2, term3


@dataclass(frozen=True)
class BeamformerState:
    """A digital design on an active-port support.

    Args:
        w: precoder rows aligned with support, shape (len(support), K).
        v: AN vector, shape (len(support),).
        power_budget_w: transmit budget the pair was designed under.
        support: active rail port indices, ascending.
    """

    w: np.ndarray
    v: np.ndarray
    power_budget_w: float
    support: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.w.ndim != 2 or self.v.ndim != 1:
            raise ConfigurationError("w must be 2-D and v 1-D")
        if self.w.shape[0] != self.v.shape[0]:
            raise ConfigurationError("w and v row counts differ")
        if self.support and len(self.support) != self.w.shape[0]:
            raise ConfigurationError("support size does not match w rows")
        if self.power_budget_w <= 0:
            raise ConfigurationError("power budget must be positive")
        if self.total_power_w > self.power_budget_w * (1.0 + POWER_SLACK):
            raise ConfigurationError(
                f"design spends {self.total_power_w:.6e} W over a "
                f"{self.power_budget_w:.6e} W budget")

    @property
    def total_power_w(self) -> float:
        return float(np.sum(np.abs(self.w) ** 2) + np.sum(np.abs(self.v) ** 2))

    @property
    def an_power_fraction(self) -> float:
        return float(np.sum(np.abs(self.v) ** 2)) / self.power_budget_w


def field_power_maps(geometry: geo.ScenarioGeometry, state: BeamformerState,
                     points_xy: np.ndarray) -> dict[str, np.ndarray]:
    """Probe signal and interference power over a set of field points.

    Each point is observed through a single isotropic element with the
    exact distance model. Returns received signal power ("rsp_dbm",
    through the precoder) and interference-plus-noise power ("inp_dbm",
    AN power plus the noise floor), both in dBm, aligned with points_xy.
    """
    pts = np.asarray(points_xy, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ConfigurationError("points_xy must have shape (n, 2)")
    if not state.support:
        raise ConfigurationError("state needs an explicit port support")
    idx = np.asarray(state.support, dtype=int)
    rsp = np.empty(pts.shape[0])
    inp = np.empty(pts.shape[0])
    for i, (x, y) in enumerate(pts):
        h = geo.channel_matrix(geometry, geo.probe_receiver(x, y),
                               model="exact")[0, idx]
        rsp[i] = np.sum(np.abs(h @ state.w) ** 2)
        inp[i] = np.abs(h @ state.v) ** 2 + geometry.noise_power_w
    return {"rsp_dbm": watts_to_dbm(rsp), "inp_dbm": watts_to_dbm(inp)}
