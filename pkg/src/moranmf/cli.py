"""Command-line entry point: ``moranmf CONFIG.toml [--out DIR]``.

Exit codes: 0 success, 2 configuration error, 3 infeasible parameters
(``validate`` also returns 3 when a hard constraint fails).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import auxiliary, estimators, spectra
from .config import ConfigError, RunConfig, load_config
from .errors import InfeasibleParameters, MoranError
from .model import require_valid, validate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def fmt(value) -> str:
    """Shortest round-trip text for floats; ``inf``/``-inf``/``nan`` spelled out."""
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if value is None:
        return ""
    return str(value)


class Writer:
    """Collects CSV outputs for one run and writes the manifest."""

    def __init__(self, cfg: RunConfig, out_dir: Path):
        self.cfg = cfg
        self.out = out_dir
        self.files: list[str] = []

    def header(self) -> str:
        resolved = json.dumps(self.cfg.resolved, sort_keys=True)
        return f"# config_hash: {self.cfg.hash}\n# config: {resolved}\n"

    def csv(self, name: str, columns: list[str], rows) -> Path:
        buf = io.StringIO()
        buf.write(self.header())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
        return self.text(name, buf.getvalue(), comment=False)

    def text(self, name: str, body: str, comment: bool = True) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        content = (self.header() + body) if comment else body
        path.write_text(content)
        self.files.append(name)
        return path

    def manifest(self) -> None:
        lines = [f"config_hash: {self.cfg.hash}", f"command: {self.cfg.command}", "files:"]
        lines += [f"  {name}" for name in self.files]
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "manifest.txt").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(cfg: RunConfig, wr: Writer) -> int:
    report = validate(cfg.params)
    text = report.text()
    print(text)
    wr.text("validate.txt", text + "\n")
    return EXIT_OK if report.ok else EXIT_INFEASIBLE


def cmd_spectra(cfg: RunConfig, wr: Writer) -> int:
    params = cfg.params
    run = cfg.run
    cols = ["alpha", "dim_hausdorff", "dim_packing", "region"]
    for which in ("lower", "upper"):
        curve = spectra.level_set_curve(params, which, run["grid"])
        wr.csv(f"{which}_level_sets.csv", cols, curve.rows())
    n = run["grid_joint"]
    for kind in ("hausdorff", "packing"):
        alphas, alpha_ps, values, tags = spectra.joint_grid(params, n, n, kind)
        rows = ((a, ap, values[i, j], tags[i, j])
                for i, a in enumerate(alphas) for j, ap in enumerate(alpha_ps))
        wr.csv(f"joint_{kind}.csv", ["alpha", "alpha_p", "dim", "region"], rows)
    sd = spectra.support_dimensions(params)
    lm = spectra.landmarks(params)
    rows = [("dim_hausdorff_support", sd.dim_hausdorff), ("dim_packing_support", sd.dim_packing),
            ("ae_lower_local_dim", sd.ae_lower_local_dim), ("ae_upper_local_dim", sd.ae_upper_local_dim),
            ("local_dim_min", sd.local_dim_min), ("local_dim_max", sd.local_dim_max)]
    rows += [(name, getattr(lm, name)) for name in ("a1", "b1", "c1", "d1", "a2", "b2", "c2", "d2")]
    wr.csv("summary.csv", ["quantity", "value"], rows)
    return EXIT_OK


def _address(cfg: RunConfig, n: int) -> np.ndarray:
    kind = cfg.run["address"]
    if kind == "zeros":
        return np.zeros(n, dtype=np.uint8)
    if kind == "ones":
        return np.ones(n, dtype=np.uint8)
    if kind == "alternating":
        return (np.arange(n) % 2).astype(np.uint8)
    aux = auxiliary.build_aux(cfg.params, "mu", depth=cfg.params.schedule.phase_index(n))
    return auxiliary.sample_point(aux, n, cfg.run["seed"])


def cmd_localdim(cfg: RunConfig, wr: Writer) -> int:
    n = cfg.run["n_levels"]
    if n > auxiliary.EXPLICIT_DEPTH_MAX:
        raise ConfigError(f"run.n_levels is capped at {auxiliary.EXPLICIT_DEPTH_MAX}")
    sched = cfg.params.schedule
    cps = [sched.N(i) for i in range(1, sched.phase_index(n) + 1) if sched.N(i) <= n]
    traj = estimators.local_dim_trajectory(cfg.params, _address(cfg, n), n, cps)
    cp_set = set(traj.checkpoints)
    rows = ((int(lv), v, "1" if k in cp_set else "0")
            for k, (lv, v) in enumerate(zip(traj.levels, traj.values)))
    wr.csv("trajectory.csv", ["n", "d", "breakpoint"], rows)
    return EXIT_OK


def cmd_lq(cfg: RunConfig, wr: Writer) -> int:
    params = cfg.params
    depth = cfg.run["depth_index"]
    levels = estimators.sampled_levels(params, depth)
    s_values = cfg.run["s_values"]
    rows = ((n, s, estimators.tau_estimate(params, n, s)) for s in s_values for n in levels)
    wr.csv("tau_estimates.csv", ["n", "s", "tau_estimate"], rows)
    summary = []
    for s in s_values:
        est = estimators.tau_liminf_limsup(params, s, depth)
        summary.append((s, est.lower, est.upper, spectra.tau_closed(params, s, "lower"),
                        spectra.tau_closed(params, s, "upper")))
    wr.csv("tau_summary.csv", ["s", "tau_lower_estimate", "tau_upper_estimate", "tau_lower_closed",
                               "tau_upper_closed"], summary)
    return EXIT_OK


def cmd_ld(cfg: RunConfig, wr: Writer) -> int:
    params = cfg.params
    lm = spectra.landmarks(params)
    alpha = cfg.run["alpha"] if cfg.run["alpha"] is not None else lm.b1
    beta_ = cfg.run["beta"] if cfg.run["beta"] is not None else alpha
    table = estimators.ld_spectrum_table(params, alpha, beta_, cfg.run["depth_index"], cfg.run["eps"])
    rows = ((e.eps, c.n, c.count, c.log_count, c.exponent, c.method)
            for e in table for c in e.counts)
    wr.csv("ld_counts.csv", ["eps", "n", "count", "log_count", "log_count_over_neg_log_r", "method"], rows)
    wr.csv("ld_summary.csv", ["eps", "alpha", "beta", "liminf_estimate", "level_liminf",
                              "limsup_estimate", "level_limsup"],
           ((e.eps, alpha, beta_, e.lower, e.level_lower, e.upper, e.level_upper) for e in table))
    return EXIT_OK


def _aux_from(cfg: RunConfig, depth: int):
    run = cfg.run
    return auxiliary.build_aux(cfg.params, run["target"], alpha=run["alpha"], alpha_p=run["alpha_p"],
                               case=run["case"], depth=depth)


def cmd_aux(cfg: RunConfig, wr: Writer) -> int:
    aux = _aux_from(cfg, cfg.run["depth_index"])
    rows = ((first, seg.end, seg.weight, seg.phase, seg.label)
            for first, seg in zip(aux.starts(), aux.segments))
    wr.csv("aux_segments.csv", ["first", "last", "weight", "phase", "label"], rows)
    levels = auxiliary.strong_law_levels(cfg.params, aux)
    r_mu = auxiliary.strong_law_sequence(cfg.params, aux, "mu", levels)
    r_mp = auxiliary.strong_law_sequence(cfg.params, aux, "mu_prime", levels)
    wr.csv("aux_strong_law.csv", ["level", "R_mu", "R_muprime"],
           zip(levels, r_mu.ratio, r_mp.ratio))
    wr.text("aux_provenance.txt", aux.provenance_tag + "\n")
    return EXIT_OK


def cmd_sample(cfg: RunConfig, wr: Writer) -> int:
    depth_index = cfg.run["depth_index"]
    aux = _aux_from(cfg, depth_index)
    sched = cfg.params.schedule
    cps = [sched.N(i) for i in range(1, depth_index + 1)]
    res = auxiliary.monte_carlo_local_dims(cfg.params, aux, cps[-1], cps, cfg.run["n_samples"],
                                           cfg.run["seed"], workers=cfg.run["workers"])
    cols = ["level", "mean_d_mu", "sd_d_mu", "min_d_mu", "max_d_mu", "mean_d_muprime", "sd_d_muprime",
            "deterministic_R", "deterministic_R_prime"]
    rows = ((s.level, s.mean_d_mu, s.sd_d_mu, s.min_d_mu, s.max_d_mu, s.mean_d_muprime, s.sd_d_muprime,
             s.deterministic_R, s.deterministic_R_prime) for s in res.summaries)
    wr.csv("sample_summary.csv", cols, rows)
    return EXIT_OK


COMMAND_TABLE = {
    "validate": cmd_validate,
    "spectra": cmd_spectra,
    "localdim": cmd_localdim,
    "lq": cmd_lq,
    "ld": cmd_ld,
    "aux": cmd_aux,
    "sample": cmd_sample,
}


def run(cfg: RunConfig, out_dir: str | Path | None = None) -> int:
    """Execute one configured run and write its artifacts; returns the exit status."""
    wr = Writer(cfg, Path(out_dir if out_dir is not None else cfg.run["out"]))
    if cfg.command != "validate":
        require_valid(cfg.params)
    status = COMMAND_TABLE[cfg.command](cfg, wr)
    wr.manifest()
    return status


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="moranmf", description="Two-phase Moran multifractal spectra")
    ap.add_argument("config", help="TOML run configuration")
    ap.add_argument("--out", help="output directory (overrides run.out)")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return run(cfg, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleParameters as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except MoranError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
