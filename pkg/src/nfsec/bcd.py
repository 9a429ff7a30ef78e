"""Block-coordinate secrecy optimization of a precoder / AN pair.

One outer iteration holds three closed-form auxiliary updates (Bob's MMSE
receiver and stream weights, Eve's AN-only receiver and weight, Eve's
signal-plus-AN whitener), assembly of the resulting quadratic surrogate,
and an exact primal update via spectral water-filling over the two
curvature matrices under the transmit power budget. Every step is an
exact block optimum, so the surrogate value never decreases.

Rates reported in traces are bits/s/Hz; the surrogate constant is kept
in nats internally and converted at the reporting boundary.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NumericalError
from .metrics import LN2, rate_bob, rate_eve

logger = logging.getLogger(__name__)

# Seed for the fixed dictionary of random balancing rotations.
_ROTATION_SEED = 12345


def _herm(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def _solve(a: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular system in {what}",
                             f"shape={a.shape}") from exc


@dataclass(frozen=True)
class AuxiliaryState:
    """Closed-form auxiliaries at a fixed precoder / AN pair."""

    u_bob: np.ndarray   # (n_bob, K) linear receiver
    q_bob: np.ndarray   # (K, K) Hermitian PD stream weights
    u_eve: np.ndarray   # (n_eve,) receiver for the AN-only term
    q_eve: float        # positive scalar weight
    q_z: np.ndarray     # (n_eve, n_eve) signal-plus-AN whitener


@dataclass(frozen=True)
class CurvatureSystem:
    """Quadratic surrogate: two curvature matrices and linear targets.

    The surrogate (in nats) at a design (w, v) is

        constant_nats - tr(wh a w) + 2 Re tr(r_wh w) - vh b v + 2 Re(r_vh v)

    with a = f_bob + c_leak and b = a + f_eve, all Hermitian PSD.
    """

    a: np.ndarray
    b: np.ndarray
    r_w: np.ndarray
    r_v: np.ndarray
    constant_nats: float
    f_bob: np.ndarray
    f_eve: np.ndarray
    c_leak: np.ndarray


def update_bob_aux(h_bob: np.ndarray, w: np.ndarray,
                   v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """MMSE receiver and inverse-MSE stream weights for the data link."""
    hv = h_bob @ v
    hw = h_bob @ w
    n = h_bob.shape[0]
    j = np.eye(n) + np.outer(hv, hv.conj())
    u = _solve(j + hw @ hw.conj().T, hw, "bob receiver update")
    q = np.eye(w.shape[1]) + hw.conj().T @ _solve(j, hw, "bob weight update")
    return u, _herm(q)


def update_eve_aux(h_eve: np.ndarray,
                   v: np.ndarray) -> tuple[np.ndarray, float]:
    """Receiver and scalar weight for Eve's AN-only log-det term."""
    hv = h_eve @ v
    m = np.eye(h_eve.shape[0]) + np.outer(hv, hv.conj())
    u = _solve(m, hv, "eve receiver update")
    g = np.abs(1.0 - np.vdot(u, hv)) ** 2 + np.vdot(u, u).real
    if g <= 0 or not np.isfinite(g):
        raise NumericalError("nonpositive MSE in eve update", f"g={g}")
    return u, float(1.0 / g)


def update_z_aux(h_eve: np.ndarray, w: np.ndarray,
                 v: np.ndarray) -> np.ndarray:
    """Inverse of Eve's signal-plus-AN covariance."""
    ht = h_eve @ np.column_stack([w, v])
    gz = np.eye(h_eve.shape[0]) + ht @ ht.conj().T
    return _herm(_solve(gz, np.eye(gz.shape[0]), "eve whitener update"))


def auxiliary_state(h_bob: np.ndarray, h_eve: np.ndarray, w: np.ndarray,
                    v: np.ndarray) -> AuxiliaryState:
    u_bob, q_bob = update_bob_aux(h_bob, w, v)
    u_eve, q_eve = update_eve_aux(h_eve, v)
    return AuxiliaryState(u_bob, q_bob, u_eve, q_eve,
                          update_z_aux(h_eve, w, v))


def build_curvature(h_bob: np.ndarray, h_eve: np.ndarray,
                    aux: AuxiliaryState) -> CurvatureSystem:
    """Assemble the quadratic surrogate implied by fixed auxiliaries."""
    m_b = h_bob.conj().T @ aux.u_bob
    r_w = m_b @ aux.q_bob
    f_bob = _herm(r_w @ m_b.conj().T)
    m_e = h_eve.conj().T @ aux.u_eve
    r_v = aux.q_eve * m_e
    f_eve = aux.q_eve * np.outer(m_e, m_e.conj())
    c_leak = _herm(h_eve.conj().T @ aux.q_z @ h_eve)
    a = f_bob + c_leak
    b = a + f_eve

    k = aux.u_bob.shape[1]
    n_eve = h_eve.shape[0]
    sign_b, logdet_qb = np.linalg.slogdet(aux.q_bob)
    sign_z, logdet_qz = np.linalg.slogdet(aux.q_z)
    if sign_b.real <= 0 or sign_z.real <= 0:
        raise NumericalError("auxiliary weight matrix lost definiteness")
    const = (logdet_qb + k - np.trace(aux.q_bob).real
             - np.trace(aux.q_bob @ aux.u_bob.conj().T @ aux.u_bob).real
             + np.log(aux.q_eve) + 1.0
             - aux.q_eve * (1.0 + np.vdot(aux.u_eve, aux.u_eve).real)
             + n_eve + logdet_qz - np.trace(aux.q_z).real)
    return CurvatureSystem(a, b, r_w, r_v, float(const), f_bob, f_eve, c_leak)


def surrogate_value(curv: CurvatureSystem, w: np.ndarray,
                    v: np.ndarray) -> float:
    """Surrogate objective at (w, v), in bits/s/Hz.

    With auxiliaries freshly computed at the same (w, v) this equals the
    unclamped secrecy rate; after a primal update it lower-bounds it.
    """
    quad = (np.trace(w.conj().T @ curv.a @ w).real
            - 2.0 * np.trace(curv.r_w.conj().T @ w).real
            + np.vdot(v, curv.b @ v).real
            - 2.0 * np.vdot(curv.r_v, v).real)
    return (curv.constant_nats - quad) / LN2


def solve_primal(curv: CurvatureSystem, lam: float,
                 ridge: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Unconstrained surrogate maximizer at a fixed power price lam."""
    n = curv.a.shape[0]
    shift = (lam + ridge) * np.eye(n)
    w = _solve(curv.a + shift, curv.r_w, "primal precoder solve")
    v = _solve(curv.b + shift, curv.r_v, "primal AN solve")
    return w, v


def dual_value(curv: CurvatureSystem, lam: float, power_budget_w: float
               ) -> float:
    """Lagrange dual of the power-constrained surrogate quadratic.

    Diagnostic only; the optimizer never ascends this directly.
    """
    w, v = solve_primal(curv, lam)
    return (-np.trace(curv.r_w.conj().T @ w).real
            - np.vdot(curv.r_v, v).real - lam * power_budget_w)


@dataclass(frozen=True)
class WaterfillResult:
    lam: float
    w: np.ndarray
    v: np.ndarray
    delivered_power_w: float
    bisection_iters: int


def _psd_eigh(m: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(m)
    floor = -1e-10 * max(1.0, float(np.abs(vals).max(initial=0.0)))
    if vals.min(initial=0.0) < floor:
        raise NumericalError(f"{what} is not PSD",
                             f"min eigenvalue {vals.min():.3e}")
    return np.maximum(vals, 0.0), vecs


def waterfill(curv: CurvatureSystem, power_budget_w: float,
              power_rtol: float = 1e-8,
              max_bisections: int = 200) -> WaterfillResult:
    """Exact power-constrained maximizer of the quadratic surrogate.

    Diagonalizes both curvature matrices, then prices power with a single
    multiplier found by safeguarded bisection on the strictly decreasing
    delivered-power curve. A multiplier of zero is accepted when the
    unconstrained optimum already fits the budget.
    """
    if power_budget_w <= 0:
        raise NumericalError("power budget must be positive")
    if not (np.all(np.isfinite(curv.r_w)) and np.all(np.isfinite(curv.r_v))):
        raise NumericalError("non-finite curvature targets")
    xi_a, z_a = _psd_eigh(curv.a, "precoder curvature")
    xi_b, z_b = _psd_eigh(curv.b, "AN curvature")
    r_hat = z_a.conj().T @ curv.r_w
    weights_a = np.sum(np.abs(r_hat) ** 2, axis=1)
    r_vhat = z_b.conj().T @ curv.r_v
    weights_b = np.abs(r_vhat) ** 2

    def power_at(lam: float) -> float:
        return float(np.sum(weights_a / (xi_a + lam) ** 2)
                     + np.sum(weights_b / (xi_b + lam) ** 2))

    def solution_at(denom_a, denom_b):
        w = z_a @ (r_hat / denom_a[:, None])
        v = z_b @ (r_vhat / denom_b)
        return w, v

    # Feasibility probe at lam = 0; singular directions get a tiny ridge.
    n = curv.a.shape[0]
    ridge_a = 1e-12 * max(float(np.sum(xi_a)) / n, np.finfo(float).tiny)
    ridge_b = 1e-12 * max(float(np.sum(xi_b)) / n, np.finfo(float).tiny)
    denom_a0 = np.where(xi_a > ridge_a, xi_a, xi_a + ridge_a)
    denom_b0 = np.where(xi_b > ridge_b, xi_b, xi_b + ridge_b)
    p0 = float(np.sum(weights_a / denom_a0 ** 2)
               + np.sum(weights_b / denom_b0 ** 2))
    if np.isfinite(p0) and p0 <= power_budget_w:
        w, v = solution_at(denom_a0, denom_b0)
        return WaterfillResult(0.0, w, v, p0, 0)

    lo, hi = 0.0, 1.0
    for _ in range(200):
        if power_at(hi) < power_budget_w:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NumericalError("failed to bracket the power multiplier")
    lam = hi
    iters = 0
    for iters in range(1, max_bisections + 1):
        lam = 0.5 * (lo + hi)
        p = power_at(lam)
        # Accept from the feasible side only, so iterates never overspend.
        if power_budget_w * (1.0 - power_rtol) <= p <= power_budget_w:
            break
        if p > power_budget_w:
            lo = lam
        else:
            hi = lam
    else:
        lam = hi
        p = power_at(lam)
    w, v = solution_at(xi_a + lam, xi_b + lam)
    return WaterfillResult(float(lam), w, v, power_at(lam), iters)


def rotation_dictionary(k: int, num_random: int = 8,
                        seed: int = _ROTATION_SEED) -> list[np.ndarray]:
    """Fixed candidate unitaries: identity, DFT, and seeded random ones."""
    mats = [np.eye(k, dtype=complex),
            np.fft.fft(np.eye(k), norm="ortho")]
    rng = np.random.default_rng(seed)
    for _ in range(num_random):
        g = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
        q, r = np.linalg.qr(g)
        d = np.diagonal(r)
        mats.append(q * (d / np.abs(d)))
    return mats


def stream_power_ratio(w: np.ndarray) -> float:
    p = np.sum(np.abs(w) ** 2, axis=0)
    if p.max(initial=0.0) <= 0.0:
        return 1.0
    if p.min() <= 0.0:
        return np.inf
    return float(p.max() / p.min())


def balance_streams(w: np.ndarray, rotations: list[np.ndarray] | None = None
                    ) -> tuple[np.ndarray, np.ndarray, float]:
    """Right-rotate the precoder to even out per-stream powers.

    The rotation leaves the transmit covariance and all rates untouched;
    it only redistributes power across stream columns. Returns the
    rotated precoder, the chosen rotation, and its peak-to-valley ratio.
    Ties keep the earliest dictionary entry, so the identity wins when
    nothing strictly improves.
    """
    if rotations is None:
        rotations = rotation_dictionary(w.shape[1])
    gram = w.conj().T @ w
    best, best_omega, best_ratio = w, rotations[0], np.inf
    for omega in rotations:
        p = np.diagonal(omega.conj().T @ gram @ omega).real
        if p.max(initial=0.0) <= 0.0:
            ratio = 1.0
        elif p.min() <= 0.0:
            ratio = np.inf
        else:
            ratio = float(p.max() / p.min())
        if ratio < best_ratio:
            best, best_omega, best_ratio = w @ omega, omega, ratio
    if not np.isfinite(best_ratio):
        return w, rotations[0], stream_power_ratio(w)
    return best, best_omega, best_ratio


def random_init(rng: np.random.Generator, n: int, num_streams: int,
                power_budget_w: float,
                with_an: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian starting point scaled to spend the budget exactly."""
    w = rng.standard_normal((n, num_streams)) \
        + 1j * rng.standard_normal((n, num_streams))
    v = np.zeros(n, dtype=complex)
    if with_an:
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    total = np.sum(np.abs(w) ** 2) + np.sum(np.abs(v) ** 2)
    scale = np.sqrt(power_budget_w / total)
    return w * scale, v * scale


@dataclass(frozen=True)
class BcdOptions:
    max_iters: int = 200
    tol_rel: float = 1e-4          # on the secrecy-rate change
    enable_an: bool = True
    balance: bool = True
    power_rtol: float = 1e-8
    divergence_tol: float = 1e-6   # absolute drop that flags divergence


@dataclass
class BcdTrace:
    surrogate_bits: list[float] = field(default_factory=list)
    objective_bits: list[float] = field(default_factory=list)
    secrecy_bits: list[float] = field(default_factory=list)
    lam: list[float] = field(default_factory=list)
    power_w: list[float] = field(default_factory=list)
    diverged: bool = False


@dataclass(frozen=True)
class BcdResult:
    w: np.ndarray
    v: np.ndarray
    lam: float
    secrecy_bits: float
    converged: bool
    iterations: int
    trace: BcdTrace
    rotation: np.ndarray | None = None


def bcd_optimize(h_bob: np.ndarray, h_eve: np.ndarray,
                 power_budget_w: float, num_streams: int | None = None,
                 rng: np.random.Generator | None = None,
                 init: tuple[np.ndarray, np.ndarray] | None = None,
                 options: BcdOptions | None = None) -> BcdResult:
    """Run the block-coordinate secrecy optimization to convergence.

    Args:
        h_bob, h_eve: whitened channels restricted to the active support.
        power_budget_w: transmit power budget in watts.
        num_streams: stream count for a random start (ignored with init).
        rng: generator for the random start.
        init: optional warm start (w, v); must fit the budget.
        options: loop controls; AN can be disabled here.

    Returns:
        BcdResult with the balanced final design and per-iteration trace.
    """
    opts = options or BcdOptions()
    if init is not None:
        w, v = init[0].astype(complex), init[1].astype(complex)
    else:
        if num_streams is None or rng is None:
            raise ValueError("need num_streams and rng without an init")
        w, v = random_init(rng, h_bob.shape[1], num_streams, power_budget_w,
                           with_an=opts.enable_an)
    if not opts.enable_an:
        v = np.zeros_like(v)

    trace = BcdTrace()
    lam = 0.0
    best = (w, v, lam, -np.inf)
    prev_obj = None
    converged = False
    iteration = 0
    for iteration in range(1, opts.max_iters + 1):
        aux = auxiliary_state(h_bob, h_eve, w, v)
        curv = build_curvature(h_bob, h_eve, aux)
        if not opts.enable_an:
            curv = replace(curv, r_v=np.zeros_like(curv.r_v))
        wf = waterfill(curv, power_budget_w, power_rtol=opts.power_rtol)
        w, v, lam = wf.w, wf.v, wf.lam

        objective = rate_bob(h_bob, w, v) - rate_eve(h_eve, w, v)
        sr = max(0.0, objective)
        trace.surrogate_bits.append(surrogate_value(curv, w, v))
        trace.objective_bits.append(objective)
        trace.secrecy_bits.append(sr)
        trace.lam.append(lam)
        trace.power_w.append(wf.delivered_power_w)

        if objective > best[3]:
            best = (w, v, lam, objective)
        elif objective < best[3] - opts.divergence_tol:
            trace.diverged = True
            logger.warning("objective slipped %.3e bits below the best "
                           "iterate at iteration %d",
                           best[3] - objective, iteration)
        # Convergence tracks the unclamped rate difference; the clamp is
        # a reporting convention and would freeze progress at zero.
        if prev_obj is not None and \
                abs(objective - prev_obj) <= \
                opts.tol_rel * max(1.0, abs(prev_obj)):
            converged = True
            break
        prev_obj = objective

    w, v, lam, objective = best
    rotation = None
    if opts.balance and w.shape[1] > 1:
        w, rotation, _ = balance_streams(w)
    return BcdResult(w, v, lam, max(0.0, objective), converged, iteration,
                     trace, rotation)
