"""End-to-end run of every subcommand on a small synthetic region."""

import json
import tempfile
from pathlib import Path

from commutenet.cli import main

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    fixture = root / "fixture"

    # ── Fixture ──────────────────────────────────────────────────────────────

    assert main(["synth", "--n", "40", "--m", "70", "--commuters", "20000", "--seed", "3", "--out", str(fixture)]) == 0
    meta = json.loads((fixture / "synth.json").read_text())
    print(f"Fixture: {meta['config']['n']} region / {meta['config']['m']} municipalities, "
          f"{meta['commuters']} commuters, planted beta={meta['config']['beta']}")

    inputs = [
        "--municipalities", str(fixture / "municipalities.csv"),
        "--aggregates", str(fixture / "aggregates.csv"),
    ]
    observed = ["--observed", str(fixture / "flows.csv")]

    # ── Generate ─────────────────────────────────────────────────────────────

    assert main(["generate", *inputs, "--replications", "3", "--out", str(root / "gen")]) == 0
    print(f"\nGenerated: {sorted(p.name for p in (root / 'gen').iterdir())}")

    # ── Compare ──────────────────────────────────────────────────────────────

    assert main(["compare", *inputs, *observed, "--replications", "5", "--out", str(root / "cmp")]) == 0
    summary = json.loads((root / "cmp" / "compare.json").read_text())["summary"]
    print(f"\nCPC mean={summary['cpc']['mean']:.4f}  cv={summary['cpc']['cv']:.4%}")
    print(f"KS  mean={summary['ks']['mean']:.4f}")

    # ── Calibrate ────────────────────────────────────────────────────────────

    assert main(["calibrate", *inputs, *observed, "--replications", "3", "--tolerance", "1e-3",
                 "--out", str(root / "cal")]) == 0
    report = json.loads((root / "cal" / "calibration.json").read_text())
    print(f"\nCalibrated beta={report['beta_average']:.4g} "
          f"(min {report['beta_min']:.4g}, max {report['beta_max']:.4g})")

    # ── Distances ────────────────────────────────────────────────────────────

    assert main(["distances", *inputs, *observed, "--bins", "25", "--out", str(root / "dist")]) == 0
    ks = json.loads((root / "dist" / "rep_00" / "ks.json").read_text())
    print(f"\nDistance KS (seed {ks['seed']}): {ks['ks']:.4f}")

print("\nDone.")
