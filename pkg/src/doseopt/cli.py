"""Command-line shell: batch simulation, the validation suite, and the
trial-conduct service.

The CLI stays thin: ``simulate`` and ``validate`` drive the library
directly, ``serve`` hands the FastAPI app to uvicorn.
"""

import csv
import datetime
import json
import sys
import time
from pathlib import Path

import click

from .config import ConfigError, RunConfig, load_config
from .simulate import OperatingCharacteristics, run_replications
from .validation import run_all

CSV_COLUMNS = ("dose_index", "dose_amount", "true_tox", "true_eff",
               "utility", "avg_n", "sel_pct", "sel_pct_with_u")


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def write_oc_csv(oc: OperatingCharacteristics, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for i, amount in enumerate(oc.dose_amounts):
            writer.writerow([
                i + 1, _fmt(amount), _fmt(oc.true_tox[i]), _fmt(oc.true_eff[i]),
                _fmt(oc.utilities[i]), _fmt(float(oc.avg_patients_total[i])),
                _fmt(float(oc.sel_pct[i])), _fmt(float(oc.sel_pct_with_u[i])),
            ])
        if oc.control_utility is not None:
            writer.writerow([
                0, "", _fmt(oc.config_echo.get("control_tox", 0.0)),
                _fmt(oc.config_echo.get("control_eff", 0.0)),
                _fmt(oc.control_utility), _fmt(oc.avg_control_patients), "", "",
            ])


@click.group()
def main():
    """Dose-optimization trial engine."""


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="YAML run configuration.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Output directory for per-scenario CSVs and the run manifest.")
def simulate(config_path: str, out_dir: str):
    """Run replicated trial simulations and write operating characteristics."""
    try:
        cfg: RunConfig = load_config(config_path)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    t0 = time.time()
    written = []
    for scenario in cfg.scenarios:
        click.echo(f"running {scenario.label}: {cfg.n_reps} replicates "
                   f"(parallelism {cfg.parallelism})")
        oc = run_replications(scenario, cfg.design, cfg.n_reps,
                              cfg.master_seed, cfg.parallelism)
        if scenario.has_control:
            oc.config_echo["control_tox"] = scenario.control_tox
            oc.config_echo["control_eff"] = scenario.control_eff
        path = out / f"{scenario.label}.csv"
        write_oc_csv(oc, path)
        written.append({
            "scenario": scenario.label,
            "csv": path.name,
            "n_reps": oc.n_reps,
            "failures": len(oc.failures),
            "pct_no_recommendation": oc.pct_no_recommendation,
            "avg_total_n": oc.avg_total_n,
        })
        click.echo(f"  wrote {path}")

    manifest = {
        "config_path": str(config_path),
        "config_hash": cfg.config_hash(),
        "master_seed": cfg.master_seed,
        "n_reps": cfg.n_reps,
        "parallelism": cfg.parallelism,
        "started_at": started,
        "finished_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "elapsed_seconds": round(time.time() - t0, 3),
        "outputs": written,
    }
    with (out / "run_manifest.json").open("w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    click.echo(f"manifest: {out / 'run_manifest.json'}")


@main.command()
def validate():
    """Run the numerical oracle suite; nonzero exit on any failure."""
    results = run_all()
    failed = 0
    for res in results:
        click.echo(res.line())
        failed += 0 if res.passed else 1
    if failed:
        click.echo(f"{failed}/{len(results)} checks failed", err=True)
        sys.exit(1)
    click.echo(f"all {len(results)} checks passed")


@main.command()
@click.option("--data-dir", required=True, type=click.Path(file_okay=False),
              help="Directory for trial event logs.")
@click.option("--port", default=8000, type=int, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(data_dir: str, port: int, host: str):
    """Start the trial-conduct HTTP service."""
    import uvicorn

    from .service.app import create_app

    Path(data_dir).mkdir(parents=True, exist_ok=True)
    uvicorn.run(create_app(data_dir), host=host, port=port)


if __name__ == "__main__":
    main()
