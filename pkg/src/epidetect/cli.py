"""Command-line surface: ingestion, prospective detector execution, scan
statistics, the point-process detector, simulation and evaluation.

Every analysis at time t sees only data with time index <= t (the slicer
enforces it), one JSON line is emitted per analysis, and a CSV mirror plus
optional SVG plots accompany the JSON. Alarms are data, not errors: the
exit code stays 0 unless --fail-on-alarm is set or the configuration is
invalid. All randomness flows from --seed.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover - py 3.10 path
    import tomli as tomllib

from . import __version__
from .bayes import OutbreakPriors, bayes_scan
from .data import (AlarmRecord, CountPanel, CountSeries, StudyGeometry,
                   aggregate, ingest_count_panel, ingest_events,
                   ingest_geometry)
from .evaluation import (PlantedOutbreak, SimScenario, evaluate, simulate,
                         write_report_csv)
from .multivariate import MvBaseline, hotelling_t2
from .plots import emit_plots
from .pointproc import SrConfig, estimate_in_control_arl, sr_run
from .scan import (MonteCarloConfig, ReplicatePool,
                   estimate_baselines_history, estimate_baselines_population,
                   ltss_scan, scan_eb_poisson, scan_permutation,
                   scan_poisson_conditional)
from .univariate import EarsConfig, FarringtonConfig, ears, farrington
from .zones import flexible_zones, knn_zones, population_capped_zones, windows


def _load_config(path, section):
    if path is None:
        return {}
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return data.get(section, {})


def _merged(ctx, config: dict, name: str, value):
    """Flag value if given on the command line, else config file, else default."""
    source = ctx.get_parameter_source(name)
    if source is not None and source.name == "COMMANDLINE":
        return value
    return config.get(name.replace("_", "-"), config.get(name, value))


def _merge_all(ctx, config: dict, params: dict) -> dict:
    """Resolve every tunable: explicit flags win over config-file values,
    which win over click defaults."""
    return {name: _merged(ctx, config, name, value)
            for name, value in params.items()}


def _write_records(records, out_prefix, plots: bool, geometry=None):
    from .plots import records_csv

    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    jsonl = prefix.with_suffix(".jsonl")
    with open(jsonl, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_jsonable(), sort_keys=True) + "\n")
    written = [jsonl, prefix.with_suffix(".csv")]
    records_csv(records, written[-1])
    if plots:
        written += emit_plots(records, "trajectory", prefix)[1:]
        alarm_recs = [r for r in records
                      if r.alarm and r.detail.get("mlc_regions")]
        if geometry is not None and alarm_recs:
            written += emit_plots(records, "cluster-map",
                                  prefix.with_name(prefix.name + "_cluster"),
                                  geometry=geometry,
                                  cluster_regions=alarm_recs[-1].detail["mlc_regions"])
    return written


def run_prospective(panel: CountPanel, step, start: int, stop: int):
    """Iterate analyses oldest to newest; every step sees only the slice
    panel.up_to(t), so no detector can read data beyond its analysis time."""
    records = []
    for t in range(start, stop + 1):
        records.append(step(panel.up_to(t), t))
    return records


def _echo_summary(records):
    n_alarm = sum(1 for r in records if r.alarm)
    click.echo(f"{len(records)} analyses, {n_alarm} alarms", err=True)


def _exit_for(records, fail_on_alarm: bool):
    if fail_on_alarm and any(r.alarm for r in records):
        sys.exit(2)


@click.group()
@click.version_option(version=__version__, prog_name="epidetect")
def main():
    """Prospective outbreak detection toolkit."""


# ---------------------------------------------------------------------------
# detect (univariate + Hotelling)
# ---------------------------------------------------------------------------

@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True),
              help="Counts CSV (region,time,count).")
@click.option("--method", type=click.Choice(["ears", "farrington", "hotelling"]),
              default="ears", show_default=True)
@click.option("--region", default=None,
              help="Monitor one region; default: the all-region total.")
@click.option("--period", type=int, default=12, show_default=True,
              help="Season length P in time steps.")
@click.option("--k", type=int, default=7, show_default=True, help="EARS baseline length.")
@click.option("--multiplier", type=float, default=3.0, show_default=True)
@click.option("--alpha", type=float, default=None,
              help="EARS: switch to the t-quantile rule; Farrington/Hotelling level.")
@click.option("--b", type=int, default=3, show_default=True, help="Farrington years back.")
@click.option("--w", type=int, default=3, show_default=True, help="Farrington half-window.")
@click.option("--scale", type=click.Choice(["identity", "sqrt", "two-thirds",
                                            "negbin-quantile"]),
              default="identity", show_default=True)
@click.option("--reweight/--no-reweight", default=False, show_default=True,
              help="Farrington: second fit weighted by Anscombe residuals.")
@click.option("--no-trend", is_flag=True, help="Farrington: intercept-only model.")
@click.option("--baseline-through", type=int, default=None,
              help="Hotelling: last time index of the baseline period.")
@click.option("--baseline-policy", type=click.Choice(["frozen", "expanding"]),
              default="expanding", show_default=True)
@click.option("--from-index", type=int, default=None, help="First analysis time.")
@click.option("--to-index", type=int, default=None, help="Last analysis time.")
@click.option("--out", "out_prefix", default="detect_out", show_default=True)
@click.option("--plots", is_flag=True, help="Also emit SVG plots.")
@click.option("--fail-on-alarm", is_flag=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML config ([detect] section); flags win.")
@click.pass_context
def detect(ctx, data_path, method, region, period, k, multiplier, alpha, b, w,
           scale, reweight, no_trend, baseline_through, baseline_policy,
           from_index, to_index, out_prefix, plots, fail_on_alarm, seed,
           config_path):
    """Run a univariate or Hotelling detector prospectively over a series."""
    cfg = _load_config(config_path, "detect")
    merged = _merge_all(ctx, cfg, dict(
        method=method, region=region, period=period, k=k,
        multiplier=multiplier, alpha=alpha, b=b, w=w, scale=scale,
        reweight=reweight, no_trend=no_trend,
        baseline_through=baseline_through, baseline_policy=baseline_policy,
        from_index=from_index, to_index=to_index, seed=seed))
    (method, region, period, k, multiplier, alpha, b, w, scale, reweight,
     no_trend, baseline_through, baseline_policy, from_index, to_index,
     seed) = (merged[n] for n in (
         "method", "region", "period", "k", "multiplier", "alpha", "b", "w",
         "scale", "reweight", "no_trend", "baseline_through",
         "baseline_policy", "from_index", "to_index", "seed"))
    panel = ingest_count_panel(data_path, period_length=period)

    if method == "hotelling":
        if baseline_through is None:
            raise click.UsageError("--baseline-through is required for hotelling")
        if baseline_through + 1 <= panel.n_regions:
            raise click.UsageError("baseline must be longer than the number "
                                   "of monitored regions (n > p)")
        baseline = MvBaseline.from_rows(panel.counts[:, : baseline_through + 1].T,
                                        policy=baseline_policy)
        start = baseline_through + 1 if from_index is None else from_index
        stop = panel.n_time - 1 if to_index is None else to_index
        a = alpha if alpha is not None else 1.0 / 36.0

        def step(avail, t):
            nonlocal baseline
            y_t = avail.counts[:, -1].astype(float)
            rec = hotelling_t2(y_t, baseline, a)
            baseline = baseline.updated(y_t)
            return AlarmRecord(time_index=t,
                               statistic_value=rec.statistic_value,
                               threshold=rec.threshold, alarm=rec.alarm,
                               detail=rec.detail)

        records = run_prospective(panel, step, start, stop)
        _write_records(records, out_prefix, plots)
        _echo_summary(records)
        _exit_for(records, fail_on_alarm)
        return

    series = panel.series(region)
    series_panel = CountPanel(series.values[None, :], ("series",), period)
    if method == "ears":
        econf = EarsConfig(k=k, multiplier=multiplier, alpha=alpha)
        min_start = econf.k

        def step(avail, t):
            return ears(avail.series(None), t, econf)
    else:
        fconf = FarringtonConfig(b=b, w=w,
                                 alpha=alpha if alpha is not None else 0.00135,
                                 scale=scale, trend_rules_enabled=not no_trend,
                                 reweight_enabled=reweight)
        min_start = fconf.b * period

        def step(avail, t):
            return farrington(avail.series(None), t, fconf)

    start = min_start if from_index is None else from_index
    stop = len(series) - 1 if to_index is None else to_index
    records = run_prospective(series_panel, step, start, stop)
    _write_records(records, out_prefix, plots)
    _echo_summary(records)
    _exit_for(records, fail_on_alarm)


# ---------------------------------------------------------------------------
# scan
# ---------------------------------------------------------------------------

def _build_zones(geometry: StudyGeometry, kind: str, kmax: int,
                 popcap_fraction: float):
    if kind == "knn":
        return knn_zones(geometry, kmax)
    if kind == "popcap":
        return population_capped_zones(geometry, popcap_fraction)
    if kind == "flex":
        return flexible_zones(geometry, kmax)
    raise click.UsageError(f"unknown zone kind {kind}")


@main.command("scan")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--geometry", "geometry_path", required=True,
              type=click.Path(exists=True))
@click.option("--adjacency", "adjacency_path", type=click.Path(exists=True),
              default=None, help="Adjacency CSV, needed for --zones flex.")
@click.option("--method", type=click.Choice(["kulldorff", "permutation",
                                             "eb-poisson", "ltss", "bayes"]),
              default="kulldorff", show_default=True)
@click.option("--zones", "zone_kind", type=click.Choice(["knn", "popcap", "flex"]),
              default="knn", show_default=True)
@click.option("--kmax", type=int, default=10, show_default=True)
@click.option("--popcap-fraction", type=float, default=0.5, show_default=True)
@click.option("--dmax", type=int, default=3, show_default=True)
@click.option("--window-length", type=int, default=6, show_default=True,
              help="Trailing time steps fed to each analysis.")
@click.option("--baselines", "baseline_kind",
              type=click.Choice(["population", "permutation", "history-mean",
                                 "history-harmonic"]),
              default="population", show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--replicates", "-R", type=int, default=999, show_default=True)
@click.option("--pool-depth", type=int, default=0, show_default=True,
              help="Number of past analyses whose replicates stay pooled.")
@click.option("--period", type=int, default=12, show_default=True)
@click.option("--p-h1", type=float, default=1e-7, show_default=True,
              help="Bayes: total prior outbreak probability.")
@click.option("--posterior-threshold", type=float, default=0.5, show_default=True)
@click.option("--from-index", type=int, default=None)
@click.option("--to-index", type=int, default=None)
@click.option("--keep-windows", is_flag=True,
              help="Also write a CSV of per-window statistics.")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", "out_prefix", default="scan_out", show_default=True)
@click.option("--plots", is_flag=True)
@click.option("--fail-on-alarm", is_flag=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.pass_context
def scan_cmd(ctx, data_path, geometry_path, adjacency_path, method, zone_kind,
             kmax, popcap_fraction, dmax, window_length, baseline_kind, alpha,
             replicates, pool_depth, period, p_h1, posterior_threshold,
             from_index, to_index, keep_windows, workers, out_prefix, plots,
             fail_on_alarm, seed, config_path):
    """Prospective space-time scan over a region x time count panel."""
    cfg = _load_config(config_path, "scan")
    merged = _merge_all(ctx, cfg, dict(
        method=method, zone_kind=zone_kind, kmax=kmax,
        popcap_fraction=popcap_fraction, dmax=dmax,
        window_length=window_length, baseline_kind=baseline_kind,
        alpha=alpha, replicates=replicates, pool_depth=pool_depth,
        period=period, p_h1=p_h1, posterior_threshold=posterior_threshold,
        from_index=from_index, to_index=to_index, workers=workers, seed=seed))
    (method, zone_kind, kmax, popcap_fraction, dmax, window_length,
     baseline_kind, alpha, replicates, pool_depth, period, p_h1,
     posterior_threshold, from_index, to_index, workers, seed) = (
         merged[n] for n in (
             "method", "zone_kind", "kmax", "popcap_fraction", "dmax",
             "window_length", "baseline_kind", "alpha", "replicates",
             "pool_depth", "period", "p_h1", "posterior_threshold",
             "from_index", "to_index", "workers", "seed"))
    # these two flags carry short public names; honor them in config files
    if ctx.get_parameter_source("zone_kind").name != "COMMANDLINE":
        zone_kind = cfg.get("zones", zone_kind)
    if ctx.get_parameter_source("baseline_kind").name != "COMMANDLINE":
        baseline_kind = cfg.get("baselines", baseline_kind)

    panel = ingest_count_panel(data_path, period_length=period)
    geometry = ingest_geometry(geometry_path, adjacency_path).reorder(panel.region_ids)
    zone_list = _build_zones(geometry, zone_kind, kmax, popcap_fraction)

    start = (window_length - 1 if baseline_kind in ("population", "permutation")
             else window_length) if from_index is None else from_index
    stop = panel.n_time - 1 if to_index is None else to_index
    pool = ReplicatePool(pool_depth)
    priors = OutbreakPriors(p_h1=p_h1, reporting_threshold=posterior_threshold)
    window_rows = []

    def step(avail, t):
        nonlocal priors
        analysis_idx = t - start
        length = min(window_length, avail.n_time)
        counts = avail.counts[:, avail.n_time - length:]
        d_eff = min(dmax, length)
        wins = windows(zone_list, d_eff)
        mc = MonteCarloConfig(n_replicates=replicates, seed=seed,
                              analysis_index=analysis_idx, n_workers=workers)
        if method == "bayes":
            b = estimate_baselines_population(counts, geometry)
            result, rec = bayes_scan(counts, b, wins, priors, time_index=t)
            priors = result.updated_priors
        elif method == "ltss":
            b = _baselines_for(baseline_kind, counts, geometry, avail, length,
                               period)
            y_region = counts[:, -d_eff:].sum(axis=1).astype(float)
            b_region = b[:, -d_eff:].sum(axis=1)
            lres = ltss_scan(y_region, b_region)
            rec = AlarmRecord(time_index=t, statistic_value=lres.score,
                              threshold=float("inf"), alarm=False,
                              detail={"method": "ltss",
                                      "regions": list(lres.subset),
                                      "duration": d_eff})
        else:
            b = _baselines_for(baseline_kind, counts, geometry, avail, length,
                               period)
            if method == "kulldorff":
                result, rec = scan_poisson_conditional(
                    counts, b, wins, alpha, mc, pool,
                    keep_windows=keep_windows, time_index=t)
            elif method == "permutation":
                result, rec = scan_permutation(
                    counts, wins, alpha, mc, pool,
                    keep_windows=keep_windows, time_index=t)
            else:
                result, rec = scan_eb_poisson(
                    counts, b, wins, alpha, mc, pool,
                    keep_windows=keep_windows, time_index=t)
            if keep_windows and result.window_stats:
                for win, value in result.window_stats:
                    window_rows.append((t, ";".join(
                        panel.region_ids[i] for i in win.zone.regions),
                        win.duration, value))
        return rec

    records = run_prospective(panel, step, start, stop)
    _write_records(records, out_prefix, plots, geometry=geometry)
    if keep_windows and window_rows:
        import csv as _csv
        path = Path(out_prefix).with_suffix(".windows.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["time_index", "zone", "duration", "log_lr"])
            writer.writerows(window_rows)
    _echo_summary(records)
    _exit_for(records, fail_on_alarm)


def _baselines_for(kind, counts, geometry, avail: CountPanel, length: int,
                   period: int):
    if kind == "population":
        return estimate_baselines_population(counts, geometry)
    if kind == "permutation":
        from .scan import estimate_baselines_permutation
        return estimate_baselines_permutation(counts)
    method = "mean" if kind == "history-mean" else "harmonic"
    if avail.n_time <= length:
        raise click.UsageError("history baselines need data before the "
                               "scanned block; increase --from-index")
    return estimate_baselines_history(avail.counts, length, method=method,
                                      period_length=period)


# ---------------------------------------------------------------------------
# stcd (point-process detector)
# ---------------------------------------------------------------------------

@main.command()
@click.option("--data", "data_path", type=click.Path(exists=True), default=None)
@click.option("--projection", type=click.Choice(["planar", "lonlat"]),
              default="planar", show_default=True)
@click.option("--rho", type=float, default=75.0, show_default=True,
              help="Cluster radius in km.")
@click.option("--epsilon", type=float, default=0.2, show_default=True)
@click.option("--arl", type=float, default=30.0, show_default=True)
@click.option("--continue", "continue_after_alarm", is_flag=True,
              help="Keep monitoring after the first alarm.")
@click.option("--calibrate", is_flag=True,
              help="Estimate the in-control run length by simulation instead "
                   "of running on data.")
@click.option("--rate", type=float, default=1.0, show_default=True,
              help="Calibration: events per day.")
@click.option("--area", nargs=2, type=float, default=(500.0, 500.0),
              show_default=True, help="Calibration: rectangle size in km.")
@click.option("--runs", type=int, default=100, show_default=True)
@click.option("--out", "out_prefix", default="stcd_out", show_default=True)
@click.option("--fail-on-alarm", is_flag=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.pass_context
def stcd(ctx, data_path, projection, rho, epsilon, arl, continue_after_alarm,
         calibrate, rate, area, runs, out_prefix, fail_on_alarm, seed,
         config_path):
    """Shiryaev-Roberts space-time point-process detector."""
    cfg = _load_config(config_path, "stcd")
    merged = _merge_all(ctx, cfg, dict(projection=projection, rho=rho,
                                       epsilon=epsilon, arl=arl, rate=rate,
                                       runs=runs, seed=seed))
    projection, rho, epsilon, arl, rate, runs, seed = (
        merged[n] for n in ("projection", "rho", "epsilon", "arl", "rate",
                            "runs", "seed"))
    config = SrConfig(rho=rho, epsilon=epsilon, arl=arl)
    if calibrate:
        report = estimate_in_control_arl(config, tuple(area), rate,
                                         n_runs=runs, seed=seed)
        click.echo(json.dumps(report, sort_keys=True))
        return
    if data_path is None:
        raise click.UsageError("--data is required unless --calibrate is set")
    stream = ingest_events(data_path, projection=projection)
    result = sr_run(stream, config, continue_after_alarm=continue_after_alarm)
    _write_records(result.records, out_prefix, plots=False)
    if result.first_cluster is not None:
        c = result.first_cluster
        click.echo(json.dumps({
            "cluster_center": list(c.center), "radius": c.radius,
            "t_start": c.t_start, "t_end": c.t_end,
            "n_members": len(c.member_events)}, sort_keys=True))
    _echo_summary(result.records)
    _exit_for(result.records, fail_on_alarm)


# ---------------------------------------------------------------------------
# simulate / eval
# ---------------------------------------------------------------------------

def _scenario_from_toml(path, seed=None) -> SimScenario:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    geom_cfg = raw.get("geometry", {})
    if "file" in geom_cfg:
        geometry = ingest_geometry(geom_cfg["file"])
    else:
        n = int(geom_cfg.get("n_regions", 9))
        side = int(np.ceil(np.sqrt(n)))
        spacing = float(geom_cfg.get("spacing_km", 50.0))
        coords = np.array([(spacing * (i % side), spacing * (i // side))
                           for i in range(n)], dtype=float)
        pops = np.full(n, float(geom_cfg.get("population", 10000.0)))
        geometry = StudyGeometry(tuple(f"r{i:03d}" for i in range(n)),
                                 coords, pops)
    panel_cfg = raw.get("panel", {})
    outbreak = None
    if "outbreak" in raw:
        ob = raw["outbreak"]
        outbreak = PlantedOutbreak(zone=tuple(int(r) for r in ob["regions"]),
                                   onset=int(ob["onset"]), q=float(ob["q"]),
                                   end=ob.get("end"))
    return SimScenario(
        geometry=geometry,
        n_time=int(panel_cfg.get("n_time", 24)),
        baseline_kind=panel_cfg.get("baseline", "constant"),
        baseline_params={k: v for k, v in panel_cfg.items()
                         if k not in ("n_time", "baseline", "period")},
        outbreak=outbreak,
        period_length=int(panel_cfg.get("period", 12)),
        seed=int(raw.get("seed", seed if seed is not None else 0)))


@main.command("simulate")
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_path", default="simulated_counts.csv",
              show_default=True)
@click.option("--seed", type=int, default=None)
def simulate_cmd(scenario_path, out_path, seed):
    """Draw one panel from a scenario TOML and write it as counts CSV."""
    scenario = _scenario_from_toml(scenario_path, seed=seed)
    panel = simulate(scenario, seed=seed)
    from .data import write_count_panel
    write_count_panel(panel, out_path)
    click.echo(f"wrote {panel.n_regions} x {panel.n_time} panel to {out_path}",
               err=True)


@main.command("eval")
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True))
@click.option("--reps", type=int, default=50, show_default=True)
@click.option("--out", "out_path", default="eval_report.csv", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def eval_cmd(scenario_path, reps, out_path, seed):
    """Evaluate the configured detector over scenario replicates."""
    with open(scenario_path, "rb") as fh:
        raw = tomllib.load(fh)
    scenario = _scenario_from_toml(scenario_path, seed=seed)
    det_cfg = raw.get("detector", {"method": "farrington"})
    method = det_cfg.get("method", "farrington")
    start_t = int(raw.get("eval", {}).get("start_t",
                                          scenario.period_length))

    if method == "ears":
        econf = EarsConfig(k=int(det_cfg.get("k", 7)),
                           multiplier=float(det_cfg.get("multiplier", 3.0)),
                           alpha=det_cfg.get("alpha"))

        def detector(panel, t):
            return ears(panel.series(None), t, econf)
    elif method == "farrington":
        fconf = FarringtonConfig(b=int(det_cfg.get("b", 1)),
                                 w=int(det_cfg.get("w", 1)),
                                 alpha=float(det_cfg.get("alpha", 0.00135)),
                                 scale=det_cfg.get("scale", "identity"))

        def detector(panel, t):
            return farrington(panel.series(None), t, fconf)
    elif method == "scan-kulldorff":
        zone_list = knn_zones(scenario.geometry, int(det_cfg.get("kmax", 2)))
        dmax = int(det_cfg.get("dmax", 2))
        alpha = float(det_cfg.get("alpha", 0.05))
        n_rep = int(det_cfg.get("replicates", 99))
        length = int(det_cfg.get("window_length", 6))

        def detector(panel, t):
            n_cols = min(length, panel.n_time)
            counts = panel.counts[:, panel.n_time - n_cols:]
            b = estimate_baselines_population(counts, scenario.geometry)
            wins = windows(zone_list, min(dmax, n_cols))
            mc = MonteCarloConfig(n_replicates=n_rep, seed=seed,
                                  analysis_index=t)
            _, rec = scan_poisson_conditional(counts, b, wins, alpha, mc,
                                              time_index=t)
            return rec
    else:
        raise click.UsageError(f"unknown detector method {method!r}")

    report = evaluate(detector, scenario, reps, start_t,
                      detector_name=method, seed=seed)
    write_report_csv([report], out_path)
    click.echo(json.dumps(report.rows()[0], sort_keys=True))


# ---------------------------------------------------------------------------
# aggregate helper
# ---------------------------------------------------------------------------

@main.command("aggregate")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--partition", "partition_path", type=click.Path(exists=True),
              default=None, help="CSV region,state mapping regions to groups.")
@click.option("--time-block", type=int, default=1, show_default=True)
@click.option("--period", type=int, default=12, show_default=True)
@click.option("--out", "out_path", default="aggregated.csv", show_default=True)
def aggregate_cmd(data_path, partition_path, time_block, period, out_path):
    """Aggregate a panel over a region partition and/or time blocks."""
    panel = ingest_count_panel(data_path, period_length=period)
    partition = None
    if partition_path:
        import csv as _csv
        partition = {}
        with open(partition_path, newline="", encoding="utf-8") as fh:
            for row in _csv.DictReader(fh):
                partition.setdefault(row["state"], []).append(row["region"])
    out = aggregate(panel, partition, time_block)
    from .data import write_count_panel
    write_count_panel(out, out_path)
    click.echo(f"wrote {out.n_regions} x {out.n_time} panel to {out_path}",
               err=True)


if __name__ == "__main__":
    main()
