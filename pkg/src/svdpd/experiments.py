"""Experiment drivers behind the command line: they write CSV, XYZ and the effective config."""

import csv
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import write_config
from .diagnostics import equilibrated_average, total_momentum
from .dpd import run_dpd
from .errors import SvdpdError
from .kubo import kubo_ensemble

__all__ = ["run_kubo_experiment", "run_dpd_sweep", "run_dpd_single", "SWEEP_COLUMNS", "slug"]

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("scheme", "alpha", "beta", "lambda1", "lambda2", "noise_mode", "dt", "n_steps",
                 "kT_mean", "kT_error", "kT_abs_error", "stderr", "status")


def slug(label):
    return re.sub(r"[^A-Za-z0-9.-]+", "_", label).strip("_")


def _fmt(x):
    return repr(float(x)) if x is not None and math.isfinite(x) else "nan"


def _prepare(cfg):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_config(cfg, out / "effective_config.ini")
    return out


def run_kubo_experiment(cfg, threads=1):
    """One ensemble per scheme; returns ``{label: KuboEnsembleResult}``."""
    out = _prepare(cfg)
    results = {}
    t_tail = 0.5 * cfg.t_end
    with open(out / "kubo_summary.csv", "w", newline="") as fh:
        summary = csv.writer(fh)
        summary.writerow(["scheme", "noise_mode", "dt", "n_paths", "max_abs_error",
                          "max_abs_error_late"])
        for label, spec in cfg.schemes:
            log.info("kubo: %s", label)
            res = kubo_ensemble(spec, cfg.kubo, cfg.dts[0], cfg.t_end, cfg.n_paths, cfg.seed,
                                threads=threads)
            results[label] = res
            table = np.column_stack([res.times, res.mean_H, res.exact_EH, res.error])
            np.savetxt(out / f"kubo_{slug(label)}.csv", table, delimiter=",", fmt="%.17g",
                       header="t,mean_H,exact_EH,error", comments="")
            summary.writerow([label, spec.noise_mode.value, _fmt(cfg.dts[0]), cfg.n_paths,
                              _fmt(res.max_abs_error()), _fmt(res.max_abs_error(t_min=t_tail))])
            fh.flush()
    return results


def _sweep_point(job):
    label, spec, params, dt, t_end, seed, discard = job
    row = {"scheme": label, "alpha": spec.alpha, "beta": spec.beta, "lambda1": spec.lambda1,
           "lambda2": spec.lambda2, "noise_mode": spec.noise_mode.value, "dt": dt,
           "n_steps": max(1, int(round(t_end / dt)))}
    try:
        run = run_dpd(params, spec, dt, t_end, seed, discard_fraction=discard)
        mean, err = equilibrated_average(run.temperature)
    except SvdpdError as exc:
        row.update(kT_mean=None, kT_error=None, kT_abs_error=None, stderr=None,
                   status=f"failed: {type(exc).__name__}: {exc}".replace("\n", " "))
        return row
    if not math.isfinite(mean):
        row.update(kT_mean=None, kT_error=None, kT_abs_error=None, stderr=None,
                   status="failed: non-finite temperature")
        return row
    deviation = mean - params.kT_target
    row.update(kT_mean=mean, kT_error=deviation, kT_abs_error=abs(deviation), stderr=err, status="ok")
    return row


def _write_row(writer, row):
    writer.writerow([row["scheme"]] + [_fmt(row[k]) for k in ("alpha", "beta", "lambda1", "lambda2")]
                    + [row["noise_mode"], _fmt(row["dt"]), row["n_steps"]]
                    + [_fmt(row[k]) for k in ("kT_mean", "kT_error", "kT_abs_error", "stderr")]
                    + [row["status"]])


def run_dpd_sweep(cfg, threads=1):
    """Temperature error over every (scheme, dt) pair.

    Rows land in ``dpd_sweep.csv`` in sweep order as soon as each point
    finishes; a failing point is recorded and the sweep moves on.
    """
    out = _prepare(cfg)
    jobs = [(label, spec, cfg.dpd, dt, cfg.t_end, cfg.seed, cfg.discard_fraction)
            for label, spec in cfg.schemes for dt in cfg.dts]
    rows = []
    with open(out / "dpd_sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        fh.flush()
        pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
        try:
            results = pool.map(_sweep_point, jobs) if pool else map(_sweep_point, jobs)
            for row in results:
                log.info("dpd sweep: %s dt=%g %s", row["scheme"], row["dt"], row["status"])
                _write_row(writer, row)
                fh.flush()
                rows.append(row)
        finally:
            if pool:
                pool.shutdown()
    return rows


def run_dpd_single(cfg, threads=1):
    """One scheme at one step: temperature series, optional XYZ frames, summary."""
    out = _prepare(cfg)
    label, spec = cfg.schemes[0]
    dt = cfg.dts[0]
    momenta = []
    xyz = open(out / "trajectory.xyz", "w") if cfg.snapshot_interval else None
    try:
        run = run_dpd(cfg.dpd, spec, dt, cfg.t_end, cfg.seed, discard_fraction=cfg.discard_fraction,
                      snapshot_interval=cfg.snapshot_interval, xyz=xyz,
                      observe=lambda s: momenta.append(np.linalg.norm(total_momentum(s))))
    finally:
        if xyz is not None:
            xyz.close()
    series = run.temperature
    np.savetxt(out / "temperature.csv", np.column_stack([series.times, series.values, momenta]),
               delimiter=",", fmt="%.17g", header="t,kT,abs_total_momentum", comments="")
    mean, err = equilibrated_average(series)
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "dt", "n_steps", "kT_mean", "kT_error", "stderr"])
        writer.writerow([label, _fmt(dt), run.n_steps, _fmt(mean), _fmt(mean - cfg.dpd.kT_target), _fmt(err)])
    return run
