"""Hybrid analog/digital realization of a digital secrecy design.

A digital precoder/AN pair [w | v] on n active ports is approximated by
an analog phase-shifter bank f_rf (constant modulus 1/sqrt(n)) driving a
baseband matrix f_bb, with the AN embedded as a baseband combination
v_pre of the data streams: the realized pair is
[f_rf f_bb | f_rf f_bb v_pre]. The fit alternates exact least-squares
updates of f_bb and v_pre with per-column phase projections of f_rf, so
the Frobenius fit residual never increases.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError

# Singular values below this fraction of the largest are treated as zero.
PINV_RCOND = 1e-10


@dataclass(frozen=True)
class HybridRealization:
    """Analog bank, baseband precoder, and embedded-AN coefficients."""

    f_rf: np.ndarray            # (n, n_rf), |entries| = 1/sqrt(n)
    f_bb: np.ndarray            # (n_rf, K)
    v_pre: np.ndarray           # (K,)
    fit_residual: float         # Frobenius residual of the unscaled fit
    residual_trace: list[float] = field(default_factory=list)
    used_pinv: bool = False

    @property
    def w_hb(self) -> np.ndarray:
        return self.f_rf @ self.f_bb

    @property
    def v_hb(self) -> np.ndarray:
        return self.w_hb @ self.v_pre

    @property
    def total_power_w(self) -> float:
        w = self.w_hb
        return float(np.sum(np.abs(w) ** 2)
                     + np.sum(np.abs(w @ self.v_pre) ** 2))


def embed_an(w_hb: np.ndarray, v_target: np.ndarray) -> np.ndarray:
    """Least-squares stream combination reproducing a digital AN vector."""
    v_pre, *_ = np.linalg.lstsq(w_hb, v_target, rcond=PINV_RCOND)
    return v_pre


def update_rf_column(f_rf: np.ndarray, col: int, target: np.ndarray,
                     x_rows: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Constant-modulus projection for one analog column.

    Args:
        f_rf: current analog bank, modified out of place.
        col: column index to update.
        target: fit target, shape (n, K+1).
        x_rows: baseband-times-coupling product, shape (n_rf, K+1).
        y: current product f_rf @ x_rows.

    Returns:
        The updated bank; y is updated in place to track it.
    """
    x = x_rows[col, :]
    nrm = np.vdot(x, x).real
    if nrm <= 0.0:
        return f_rf
    residual = target - y + np.outer(f_rf[:, col], x)
    g = residual @ x.conj() / nrm
    f_new = np.exp(1j * np.angle(g)) / np.sqrt(f_rf.shape[0])
    y += np.outer(f_new - f_rf[:, col], x)
    out = f_rf.copy()
    out[:, col] = f_new
    return out


def fit_hybrid(t_target: np.ndarray, n_rf: int, power_budget_w: float,
               max_sweeps: int = 100, tol_rel: float = 1e-6
               ) -> HybridRealization:
    """Fit and power-normalize a hybrid realization of [w | v].

    Args:
        t_target: stacked digital design, shape (n, K+1), AN last column.
        n_rf: number of RF chains, K <= n_rf <= n.
        power_budget_w: budget the realized pair is scaled to spend.

    Returns:
        HybridRealization whose realized pair spends the budget exactly
        (unless the fit target is identically zero).
    """
    n, kp1 = t_target.shape
    k = kp1 - 1
    if k < 1:
        raise ConfigurationError("target needs at least one data column")
    if not (k <= n_rf <= n):
        raise ConfigurationError(
            f"need num_streams <= n_rf <= ports, got {k}/{n_rf}/{n}")

    # Analog phases start from the dominant left singular directions.
    u, _, _ = np.linalg.svd(t_target, full_matrices=True)
    f_rf = np.exp(1j * np.angle(u[:, :n_rf])) / np.sqrt(n)
    f_bb = np.zeros((n_rf, k), dtype=complex)
    v_pre = np.zeros(k, dtype=complex)
    w_target, v_target = t_target[:, :k], t_target[:, k]

    def coupling(vp):
        return np.column_stack([np.eye(k), vp])

    def residual_norm(frf, fbb, vp):
        return float(np.linalg.norm(t_target - frf @ fbb @ coupling(vp)))

    used_pinv = False
    trace: list[float] = []
    prev = residual_norm(f_rf, f_bb, v_pre)
    for _ in range(max_sweeps):
        s = coupling(v_pre)
        # Exact two-sided least squares for the baseband block. The right
        # factor s s^H = I + v_pre v_pre^H inverts in closed form, which
        # stays well-posed even when an AN-dominated target drives the LS
        # v_pre to extreme magnitudes (a plain solve overflows there).
        lhs, _, rank_rf, _ = np.linalg.lstsq(f_rf, t_target @ s.conj().T,
                                             rcond=PINV_RCOND)
        if rank_rf < n_rf:
            used_pinv = True
        vp_norm_sq = float(np.sum(np.abs(v_pre) ** 2))
        if not np.isfinite(vp_norm_sq):
            raise NumericalError("hybrid AN weight went non-finite")
        if vp_norm_sq > 0.0:
            vp_hat = v_pre / np.sqrt(vp_norm_sq)
            shrink = 1.0 / (1.0 + 1.0 / vp_norm_sq)
            f_bb = lhs - shrink * np.outer(lhs @ vp_hat, vp_hat.conj())
        else:
            f_bb = lhs

        w_hb = f_rf @ f_bb
        v_pre, *_rest = np.linalg.lstsq(w_hb, v_target, rcond=PINV_RCOND)
        if _rest[1] < k:
            used_pinv = True

        x_rows = f_bb @ coupling(v_pre)
        y = f_rf @ x_rows
        for col in range(n_rf):
            f_rf = update_rf_column(f_rf, col, t_target, x_rows, y)

        r = residual_norm(f_rf, f_bb, v_pre)
        if not np.isfinite(r):
            raise NumericalError("hybrid fit residual went non-finite")
        trace.append(r)
        if abs(prev - r) <= tol_rel * max(prev, np.finfo(float).tiny):
            break
        prev = r

    fit = HybridRealization(f_rf, f_bb, v_pre, trace[-1] if trace else prev,
                            trace, used_pinv)
    return normalize_power(fit, power_budget_w)


def normalize_power(fit: HybridRealization, power_budget_w: float
                    ) -> HybridRealization:
    """Scale the baseband block so the realized pair spends the budget.

    Only f_bb is touched; the analog bank keeps its constant modulus and
    v_pre its meaning as a stream combination. A zero-power fit (all-zero
    target) is returned unchanged.
    """
    if power_budget_w <= 0:
        raise ConfigurationError("power budget must be positive")
    total = fit.total_power_w
    if total <= 0.0:
        return fit
    alpha = np.sqrt(power_budget_w / total)
    return HybridRealization(fit.f_rf, fit.f_bb * alpha, fit.v_pre,
                             fit.fit_residual, fit.residual_trace,
                             fit.used_pinv)
