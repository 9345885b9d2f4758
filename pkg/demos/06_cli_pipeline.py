"""The command-line pipeline end to end in a scratch directory.

init writes a snapshot plus a plain-text manifest, run executes the
manifest into a CSV series (and SVG plots), check runs the invariant
suite on any snapshot, and spectrum reports the spectral gap.  The whole
pipeline is driven here exactly as a shell user would drive it.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

CLI = [sys.executable, "-m", "hkflow.cli"]


def sh(workdir, *args):
    cmd = CLI + list(args)
    print(f"$ hkflow {' '.join(args)}")
    out = subprocess.run(cmd, cwd=workdir, capture_output=True, text=True)
    if out.returncode != 0:
        print(out.stderr.strip())
        raise SystemExit(f"command failed with exit code {out.returncode}")
    return out.stdout


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)

        sh(
            tmp, "init", "--scenario", "perturbed-complex-torus", "--eps", "0.1",
            "--nu", "32", "--nv", "32", "--steps", "600", "--out", "demo",
        )
        print("  manifest head:")
        for line in (tmp / "demo.manifest").read_text().splitlines()[:8]:
            print(f"    {line}")

        print()
        out = sh(tmp, "run", "demo.manifest", "--plot")
        for line in out.strip().splitlines():
            print(f"  {line}")
        rows = (tmp / "demo.csv").read_text().splitlines()
        print(f"  CSV: {len(rows) - 1} data rows, header {rows[0].split(',')[:4]} ...")
        print(f"  last row t, energy = {rows[-1].split(',')[0]}, {rows[-1].split(',')[3]}")

        print()
        out = sh(tmp, "check", "demo.final.json", "--json", "report.json")
        for line in out.strip().splitlines():
            print(f"  {line}")
        report = json.loads((tmp / "report.json").read_text())
        print(f"  JSON report: all_pass = {report['all_pass']}")

        print()
        out = sh(tmp, "spectrum", "demo.final.json")
        for line in out.strip().splitlines():
            print(f"  {line}")

        print("\n  files produced:")
        for p in sorted(tmp.iterdir()):
            print(f"    {p.name:<28} {p.stat().st_size:>8} bytes")


if __name__ == "__main__":
    main()
