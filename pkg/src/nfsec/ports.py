"""Sparsity-driven selection of active ports on the fluid-antenna rail.

Ports are pruned in batches by row energy of the stacked design [w | v]:
at a power-constrained optimum the per-row gradient norm of the
quadratic surrogate equals the power price times that row energy, so the
smallest rows are the cheapest to drop. After each prune the design is
refit on the surviving ports with a short budget; the final support gets
a long refit.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import bcd
from .errors import ConfigurationError, NumericalError
from .metrics import BeamformerState

logger = logging.getLogger(__name__)


def row_energies(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Euclidean norm of each port's row across streams and AN."""
    return np.sqrt(np.sum(np.abs(w) ** 2, axis=1) + np.abs(v) ** 2)


def batch_size(support_size: int, num_active: int, eta: float = 0.5,
               m_min: int = 1) -> int:
    """Ports to drop this stage: a fixed fraction of the surplus."""
    surplus = support_size - num_active
    if surplus <= 0:
        return 0
    return min(surplus, max(m_min, int(np.floor(eta * surplus))))


def prune_support(support: np.ndarray, scores: np.ndarray,
                  count: int) -> tuple[np.ndarray, np.ndarray]:
    """Drop the count lowest-scoring ports; ties drop the smaller index.

    Returns:
        (kept, dropped) port index arrays, kept in ascending order.
    """
    support = np.asarray(support, dtype=int)
    if count <= 0:
        return support, np.empty(0, dtype=int)
    if count >= support.size:
        raise ConfigurationError("cannot prune the whole support")
    order = np.lexsort((support, scores))
    dropped = np.sort(support[order[:count]])
    kept = np.sort(support[order[count:]])
    return kept, dropped


def uniform_support(num_ports: int, num_active: int) -> np.ndarray:
    """Fixed-array baseline: active ports evenly spread over the rail."""
    if not (1 <= num_active <= num_ports):
        raise ConfigurationError("need 1 <= num_active <= num_ports")
    if num_active == 1:
        return np.array([(num_ports - 1) // 2])
    return np.round(np.linspace(0, num_ports - 1, num_active)).astype(int)


def selection_matrix(support, num_ports: int) -> np.ndarray:
    """0/1 matrix mapping stacked active rows back onto the full rail."""
    idx = np.asarray(support, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= num_ports):
        raise ConfigurationError("support index out of range")
    if np.unique(idx).size != idx.size:
        raise ConfigurationError("support indices must be distinct")
    return np.eye(num_ports)[:, idx]


@dataclass(frozen=True)
class SelectionOptions:
    eta: float = 0.5
    m_min: int = 1
    refit_iters: int = 30
    final_iters: int = 200
    tol_rel: float = 1e-4
    enable_an: bool = True
    score_source: str = "digital"   # or "hybrid"
    num_rf_chains: int | None = None  # needed for hybrid scores


@dataclass(frozen=True)
class StageRecord:
    support: tuple[int, ...]
    scores: np.ndarray
    dropped: tuple[int, ...]
    refit_failed: bool


@dataclass(frozen=True)
class SelectionResult:
    support: tuple[int, ...]
    state: BeamformerState
    final: bcd.BcdResult
    stages: list[StageRecord]


def _stage_scores(result: bcd.BcdResult, power_budget_w: float,
                  options: SelectionOptions) -> np.ndarray:
    if options.score_source == "digital":
        return row_energies(result.w, result.v)
    if options.score_source == "hybrid":
        if options.num_rf_chains is None:
            raise ConfigurationError("hybrid scoring needs num_rf_chains")
        from .hybrid import fit_hybrid
        n_rf = min(options.num_rf_chains, result.w.shape[0])
        fit = fit_hybrid(np.column_stack([result.w, result.v]), n_rf,
                         power_budget_w)
        return row_energies(fit.w_hb, fit.v_hb)
    raise ConfigurationError(f"unknown score source {options.score_source!r}")


def select_ports(h_bob_full: np.ndarray, h_eve_full: np.ndarray,
                 num_active: int, power_budget_w: float, num_streams: int,
                 rng: np.random.Generator,
                 options: SelectionOptions | None = None) -> SelectionResult:
    """Batched prune-and-refit selection of the active ports.

    Args:
        h_bob_full, h_eve_full: whitened channels over the whole rail.
        num_active: target support size.
        power_budget_w: transmit budget used in every refit.
        num_streams: data stream count.
        rng: source for the first refit's random start.
        options: pruning schedule and refit budgets.

    Returns:
        SelectionResult with the final support (ascending), the long-refit
        state on it, and per-stage records.
    """
    opts = options or SelectionOptions()
    num_ports = h_bob_full.shape[1]
    if not (num_streams <= num_active <= num_ports):
        raise ConfigurationError(
            f"need num_streams <= num_active <= num_ports, got "
            f"{num_streams}/{num_active}/{num_ports}")

    support = np.arange(num_ports)
    w, v = bcd.random_init(rng, num_ports, num_streams, power_budget_w,
                           with_an=opts.enable_an)
    scores = row_energies(w, v)
    refit_opts = bcd.BcdOptions(max_iters=opts.refit_iters,
                                tol_rel=opts.tol_rel,
                                enable_an=opts.enable_an, balance=False)
    stages: list[StageRecord] = []
    while support.size > num_active:
        failed = False
        try:
            result = bcd.bcd_optimize(h_bob_full[:, support],
                                      h_eve_full[:, support],
                                      power_budget_w, init=(w, v),
                                      options=refit_opts)
            w, v = result.w, result.v
            scores = _stage_scores(result, power_budget_w, opts)
        except NumericalError as exc:
            # Keep pruning on the previous iterate's scores.
            failed = True
            logger.warning("refit failed on %d ports (%s); reusing scores",
                           support.size, exc)
        drop = batch_size(support.size, num_active, opts.eta, opts.m_min)
        kept, dropped = prune_support(support, scores, drop)
        keep_mask = np.isin(support, kept)
        stages.append(StageRecord(tuple(support), scores.copy(),
                                  tuple(dropped), failed))
        support = kept
        w, v, scores = w[keep_mask], v[keep_mask], scores[keep_mask]

    final_opts = bcd.BcdOptions(max_iters=opts.final_iters,
                                tol_rel=opts.tol_rel,
                                enable_an=opts.enable_an, balance=True)
    final = bcd.bcd_optimize(h_bob_full[:, support], h_eve_full[:, support],
                             power_budget_w, init=(w, v), options=final_opts)
    state = BeamformerState(final.w, final.v, power_budget_w,
                            tuple(int(i) for i in support))
    return SelectionResult(state.support, state, final, stages)
