"""Monte Carlo experiment harness: sweeps, field maps, port reports.

Each trial redraws only the optimizer start; channels follow
deterministically from geometry. Per-trial generators are split from the
master seed by a counter-style key (cell, sweep point, trial), so any
single trial can be reproduced in isolation and results do not depend on
which other variants were requested. CSV exports carry no timing, which
keeps reruns of the same config and seed byte-identical; timings go to
the run manifest instead.
"""

import concurrent.futures
import json
import logging
import time
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bcd, hybrid, metrics, ports
from .config import ExperimentConfig, Variant
from .errors import NumericalError, TrialFailureError
from .geometry import ScenarioGeometry, channel_pair
from .units import dbm_to_watts

logger = logging.getLogger(__name__)

MAX_FAILURE_SHARE = 0.10

_SWEEP_CODE = {"power": 0, "distance": 1, "fixed": 2}


@dataclass(frozen=True)
class ResultRow:
    """Aggregated Monte Carlo means for one variant at one sweep point."""

    variant: str
    sweep_value: float
    mean_secrecy_bits: float
    mean_rate_bob_bits: float
    mean_rate_eve_bits: float
    mean_an_fraction: float
    std_secrecy_bits: float
    trials: int
    wall_time_s: float


@dataclass(frozen=True)
class CellDesign:
    """Digital (and optionally hybrid) design from one trial of a cell."""

    support: tuple[int, ...]
    w: np.ndarray
    v: np.ndarray
    w_hb: np.ndarray | None
    v_hb: np.ndarray | None
    optimize_s: float
    hybrid_fit_s: float


def trial_rng(seed: int, cell: str, sweep_kind: str, sweep_index: int,
              trial: int) -> np.random.Generator:
    """Per-trial generator, reproducible independently of other trials."""
    key = (zlib.crc32(cell.encode()), _SWEEP_CODE[sweep_kind],
           sweep_index, trial)
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=key))


def optimize_cell(config: ExperimentConfig, scenario: ScenarioGeometry,
                  cell: str, power_w: float, rng: np.random.Generator,
                  want_hybrid: bool) -> CellDesign:
    """Run one trial's optimization pipeline for an array/AN cell."""
    fluid = cell.startswith("fa")
    an = cell.endswith("an")
    pair = channel_pair(scenario, config.channel_model)
    t0 = time.perf_counter()
    if fluid:
        sel_opts = ports.SelectionOptions(
            eta=config.select_eta, m_min=config.select_m_min,
            refit_iters=config.select_refit_iters,
            final_iters=config.select_final_iters,
            tol_rel=config.bcd_tol_rel, enable_an=an)
        sel = ports.select_ports(pair.h_bob, pair.h_eve,
                                 scenario.num_active, power_w,
                                 scenario.num_streams, rng, sel_opts)
        support, w, v = np.asarray(sel.support), sel.state.w, sel.state.v
    else:
        support = ports.uniform_support(scenario.num_ports,
                                        scenario.num_active)
        h_bob, h_eve = pair.restrict(support)
        opts = bcd.BcdOptions(max_iters=config.bcd_max_iters,
                              tol_rel=config.bcd_tol_rel, enable_an=an)
        res = bcd.bcd_optimize(h_bob, h_eve, power_w,
                               num_streams=scenario.num_streams, rng=rng,
                               options=opts)
        w, v = res.w, res.v
    optimize_s = time.perf_counter() - t0

    w_hb = v_hb = None
    hybrid_fit_s = 0.0
    if want_hybrid:
        t0 = time.perf_counter()
        fit = hybrid.fit_hybrid(np.column_stack([w, v]),
                                scenario.num_rf_chains, power_w)
        w_hb, v_hb = fit.w_hb, fit.v_hb
        hybrid_fit_s = time.perf_counter() - t0
    return CellDesign(tuple(int(i) for i in support), w, v, w_hb, v_hb,
                      optimize_s, hybrid_fit_s)


@dataclass(frozen=True)
class TrialOutcome:
    ok: bool
    error: str = ""
    # impl tag -> (secrecy, rate_bob, rate_eve, an_fraction)
    rates: dict | None = None
    optimize_s: float = 0.0
    hybrid_fit_s: float = 0.0


def _rate_tuple(h_bob, h_eve, w, v, power_w):
    rb = metrics.rate_bob(h_bob, w, v)
    re_ = metrics.rate_eve(h_eve, w, v)
    an_frac = float(np.sum(np.abs(v) ** 2)) / power_w
    return (max(0.0, rb - re_), rb, re_, an_frac)


def run_cell_trial(config: ExperimentConfig, cell: str, sweep_kind: str,
                   sweep_index: int, trial: int,
                   want_hybrid: bool) -> TrialOutcome:
    """One Monte Carlo trial; numerical failures are caught and reported."""
    if sweep_kind == "power":
        scenario = config.scenario
        power_w = dbm_to_watts(config.power_grid_dbm[sweep_index])
    elif sweep_kind == "distance":
        scenario = config.with_eve_distance(
            config.eve_distance_grid_m[sweep_index])
        power_w = dbm_to_watts(config.power_dbm)
    else:
        scenario = config.scenario
        power_w = dbm_to_watts(config.power_dbm)
    rng = trial_rng(config.seed, cell, sweep_kind, sweep_index, trial)
    try:
        design = optimize_cell(config, scenario, cell, power_w, rng,
                               want_hybrid)
        pair = channel_pair(scenario, config.channel_model)
        h_bob, h_eve = pair.restrict(design.support)
        rates = {"digital": _rate_tuple(h_bob, h_eve, design.w, design.v,
                                        power_w)}
        if want_hybrid:
            rates["hybrid"] = _rate_tuple(h_bob, h_eve, design.w_hb,
                                          design.v_hb, power_w)
        return TrialOutcome(True, rates=rates, optimize_s=design.optimize_s,
                            hybrid_fit_s=design.hybrid_fit_s)
    except NumericalError as exc:
        logger.warning("trial failed (%s, %s point %d, trial %d): %s",
                       cell, sweep_kind, sweep_index, trial, exc)
        return TrialOutcome(False, error=str(exc))


def _pool_entry(args) -> TrialOutcome:
    return run_cell_trial(*args)


def _run_tasks(config: ExperimentConfig, tasks: list[tuple]) -> list:
    if config.workers <= 1:
        return [_pool_entry(task) for task in tasks]
    with concurrent.futures.ProcessPoolExecutor(
            max_workers=config.workers) as pool:
        return list(pool.map(_pool_entry, tasks))


def run_sweep(config: ExperimentConfig,
              sweep_kind: str) -> tuple[list[ResultRow], dict]:
    """Monte Carlo sweep over power or Eve distance.

    Returns the aggregated rows ordered by (variant, sweep point) and a
    summary dict (failure counts, per-variant timing) for the manifest.
    Aborts with TrialFailureError if more than 10% of trials fail.
    """
    if sweep_kind == "power":
        values = config.power_grid_dbm
    elif sweep_kind == "distance":
        values = config.eve_distance_grid_m
    else:
        raise ValueError(f"unknown sweep kind {sweep_kind!r}")

    cells: dict[str, list[Variant]] = {}
    for variant in config.variants:
        cells.setdefault(variant.cell, []).append(variant)

    tasks = []
    for cell, members in cells.items():
        want_hybrid = any(m.hybrid for m in members)
        for si in range(len(values)):
            for trial in range(config.trials):
                tasks.append((config, cell, sweep_kind, si, trial,
                              want_hybrid))
    outcomes = _run_tasks(config, tasks)

    by_key: dict[tuple, list] = {}
    failures: dict[str, int] = {}
    timings: dict[str, float] = {}
    n_failed = 0
    for task, outcome in zip(tasks, outcomes):
        _, cell, _, si, _, _ = task
        if not outcome.ok:
            n_failed += 1
            failures[cell] = failures.get(cell, 0) + 1
            continue
        by_key.setdefault((cell, si), []).append(outcome)
    if n_failed > MAX_FAILURE_SHARE * len(tasks):
        raise TrialFailureError(
            f"{n_failed} of {len(tasks)} trials failed")

    rows: list[ResultRow] = []
    for variant in config.variants:
        impl = "hybrid" if variant.hybrid else "digital"
        total_s = 0.0
        for si, value in enumerate(values):
            good = by_key.get((variant.cell, si), [])
            samples = np.array([o.rates[impl] for o in good])
            span = sum(o.optimize_s + (o.hybrid_fit_s if variant.hybrid
                                       else 0.0) for o in good)
            total_s += span
            if samples.size == 0:
                rows.append(ResultRow(variant.tag, value, np.nan, np.nan,
                                      np.nan, np.nan, np.nan, 0, span))
                continue
            means = samples.mean(axis=0)
            std = (float(samples[:, 0].std(ddof=1))
                   if len(good) > 1 else 0.0)
            rows.append(ResultRow(variant.tag, value, means[0], means[1],
                                  means[2], means[3], std, len(good),
                                  span))
        timings[variant.tag] = total_s
    summary = {"failures": failures, "failed_trials": n_failed,
               "total_trials": len(tasks), "timings_s": timings,
               "fa_fpa_gap_bits": _fa_fpa_gaps(rows)}
    return rows, summary


def _fa_fpa_gaps(rows: list[ResultRow]) -> dict[str, float]:
    """Mean-SR advantage of the fluid rail over the fixed baseline.

    Keyed per matching (AN/impl flavor, sweep point) pair so the manifest
    records the observed gap wherever both array types were requested.
    """
    means = {(r.variant, r.sweep_value): r.mean_secrecy_bits for r in rows}
    gaps = {}
    for (tag, value), fa_mean in means.items():
        if not tag.startswith("fa-"):
            continue
        fpa_mean = means.get(("fpa-" + tag[3:], value))
        if fpa_mean is not None:
            gaps[f"{tag[3:]}@{value:g}"] = float(fa_mean - fpa_mean)
    return gaps


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_rows_csv(path: Path, rows: list[ResultRow],
                   sweep_column: str) -> None:
    lines = [",".join(["variant", sweep_column,
                       "mean_secrecy_rate_bps_hz", "mean_rate_bob_bps_hz",
                       "mean_rate_eve_bps_hz", "mean_an_power_fraction",
                       "std_secrecy_rate_bps_hz", "trials"])]
    for r in rows:
        lines.append(",".join([
            r.variant, _fmt(r.sweep_value), _fmt(r.mean_secrecy_bits),
            _fmt(r.mean_rate_bob_bits), _fmt(r.mean_rate_eve_bits),
            _fmt(r.mean_an_fraction), _fmt(r.std_secrecy_bits),
            str(r.trials)]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_manifest(out_dir: Path, command: str, config: ExperimentConfig,
                   summary: dict) -> Path:
    manifest = {"command": command,
                "config_sha256": config.sha256,
                "seed": config.seed,
                "variants": [v.tag for v in config.variants],
                "trials": config.trials}
    manifest.update(summary)
    path = out_dir / "run_manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def run_power_sweep(config: ExperimentConfig,
                    out_dir: str | Path) -> list[ResultRow]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, summary = run_sweep(config, "power")
    write_rows_csv(out / "power_sweep.csv", rows, "power_dbm")
    write_manifest(out, "power-sweep", config, summary)
    return rows


def run_distance_sweep(config: ExperimentConfig,
                       out_dir: str | Path) -> list[ResultRow]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, summary = run_sweep(config, "distance")
    write_rows_csv(out / "distance_sweep.csv", rows, "eve_distance_m")
    write_manifest(out, "distance-sweep", config, summary)
    return rows


def _best_map_design(config: ExperimentConfig, scenario: ScenarioGeometry,
                     cell: str, power_w: float) -> CellDesign:
    """Best-of-restarts design for a map cell.

    A single random start can land on a poor stationary point whose map
    shows no beam structure at all, so the map design takes the best
    unclamped rate difference over config.fieldmap_restarts starts (the
    restart index doubles as the trial index in the rng stream).
    """
    pair = channel_pair(scenario, config.channel_model)
    best = None
    best_obj = -np.inf
    spent = 0.0
    for restart in range(config.fieldmap_restarts):
        rng = trial_rng(config.seed, cell, "fixed", 0, restart)
        design = optimize_cell(config, scenario, cell, power_w, rng,
                               want_hybrid=True)
        spent += design.optimize_s + design.hybrid_fit_s
        h_bob, h_eve = pair.restrict(np.asarray(design.support))
        obj = (metrics.rate_bob(h_bob, design.w, design.v)
               - metrics.rate_eve(h_eve, design.w, design.v))
        if obj > best_obj:
            best, best_obj = design, obj
    # timing reflects the full restart budget, not just the winner
    return CellDesign(best.support, best.w, best.v, best.w_hb, best.v_hb,
                      spent, 0.0)


def run_field_maps(config: ExperimentConfig,
                   out_dir: str | Path) -> dict[str, dict]:
    """Signal/interference power maps for each variant at the fixed power.

    One design per variant cell (best of a few restarts of the
    fixed-power stream); the map probes every grid point plus the exact
    Bob and Eve positions, which land in the manifest.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    power_w = dbm_to_watts(config.power_dbm)
    points = config.grid_points()
    scenario = config.scenario
    bob_xy = np.array(scenario.bob.xy)
    eve_xy = np.array(scenario.eve.xy)

    designs: dict[str, CellDesign] = {}
    observed: dict[str, dict] = {}
    timings: dict[str, float] = {}
    for variant in config.variants:
        cell = variant.cell
        if cell not in designs:
            designs[cell] = _best_map_design(config, scenario, cell,
                                             power_w)
        design = designs[cell]
        if variant.hybrid:
            w, v = design.w_hb, design.v_hb
        else:
            w, v = design.w, design.v
        state = metrics.BeamformerState(w, v, power_w,
                                        support=design.support)
        t0 = time.perf_counter()
        maps = metrics.field_power_maps(scenario, state, points)
        at_rx = metrics.field_power_maps(scenario, state,
                                         np.vstack([bob_xy, eve_xy]))
        timings[variant.tag] = (time.perf_counter() - t0
                                + design.optimize_s
                                + (design.hybrid_fit_s if variant.hybrid
                                   else 0.0))
        lines = ["x_m,y_m,rsp_dbm,inp_dbm"]
        for (x, y), rsp, inp in zip(points, maps["rsp_dbm"],
                                    maps["inp_dbm"]):
            lines.append(",".join([_fmt(x), _fmt(y), _fmt(rsp), _fmt(inp)]))
        csv_path = out / f"field_map_{variant.tag}.csv"
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        observed[variant.tag] = {
            "rsp_dbm_at_bob": float(at_rx["rsp_dbm"][0]),
            "rsp_dbm_at_eve": float(at_rx["rsp_dbm"][1]),
            "inp_dbm_at_bob": float(at_rx["inp_dbm"][0]),
            "inp_dbm_at_eve": float(at_rx["inp_dbm"][1]),
            "support": list(design.support)}
    write_manifest(out, "field-map", config,
                   {"power_dbm": config.power_dbm, "observed": observed,
                    "timings_s": timings})
    return observed


def run_port_report(config: ExperimentConfig,
                    out_dir: str | Path) -> dict[str, list[int]]:
    """Selected-port layout for the fluid rail next to the fixed baseline."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenario = config.scenario
    power_w = dbm_to_watts(config.power_dbm)
    fluid_cells = [v.cell for v in config.variants if v.fluid]
    cell = fluid_cells[0] if fluid_cells else "fa-an"

    t0 = time.perf_counter()
    design = optimize_cell(config, scenario, cell, power_w,
                           trial_rng(config.seed, cell, "fixed", 0, 0),
                           want_hybrid=False)
    fa_seconds = time.perf_counter() - t0
    fpa_support = ports.uniform_support(scenario.num_ports,
                                        scenario.num_active)
    pair = channel_pair(scenario, config.channel_model)
    h_bob, h_eve = pair.restrict(fpa_support)
    an = cell.endswith("an")
    fpa_res = bcd.bcd_optimize(
        h_bob, h_eve, power_w, num_streams=scenario.num_streams,
        rng=trial_rng(config.seed, "fpa-" + cell.split("-")[1], "fixed",
                      0, 0),
        options=bcd.BcdOptions(max_iters=config.bcd_max_iters,
                               tol_rel=config.bcd_tol_rel, enable_an=an))

    offsets = scenario.port_offsets()
    rows = ["variant,port_index,offset_m,selected,row_power_w"]
    for tag, support, w, v in (
            ("fa", np.asarray(design.support), design.w, design.v),
            ("fpa", fpa_support, fpa_res.w, fpa_res.v)):
        power = np.zeros(scenario.num_ports)
        power[support] = ports.row_energies(w, v) ** 2
        chosen = np.zeros(scenario.num_ports, dtype=int)
        chosen[support] = 1
        for idx in range(scenario.num_ports):
            rows.append(",".join([tag, str(idx), _fmt(offsets[idx]),
                                  str(chosen[idx]), _fmt(power[idx])]))
    (out / "port_report.csv").write_text("\n".join(rows) + "\n",
                                         encoding="utf-8")
    supports = {"fa": [int(i) for i in design.support],
                "fpa": [int(i) for i in fpa_support]}
    write_manifest(out, "port-report", config,
                   {"power_dbm": config.power_dbm, "supports": supports,
                    "timings_s": {"fa": fa_seconds}})
    return supports
