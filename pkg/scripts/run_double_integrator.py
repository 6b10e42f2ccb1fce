#!/usr/bin/env python3
"""Reproduce the double-integrator experiments.

Solves the bang-bang benchmark at beta = 0 (optimal cost 23/30, switch
at t = 1) and sweeps beta over {0, 0.1, ..., 0.5} to show the artifact:
the NLP objective grows with beta while the cost of the projected
bang-bang rollout stays at the true optimum.  Outputs land in
out/double-integrator/.

Usage: python3 scripts/run_double_integrator.py
"""

import sys
from pathlib import Path

from switchopt.cli import main as cli_main

OUT = Path("out/double-integrator")


def main() -> int:
    rc = cli_main(
        [
            "solve",
            "--problem",
            "double-integrator",
            "--beta",
            "0",
            "--mesh-n",
            "200",
            "--scheme",
            "trapezoidal",
            "--out",
            str(OUT / "solve-beta-0"),
        ]
    )
    if rc:
        return rc
    return cli_main(
        [
            "sweep",
            "--problem",
            "double-integrator",
            "--betas",
            "0,0.1,0.2,0.3,0.4,0.5",
            "--mesh-n",
            "50",
            "--scheme",
            "hermite-simpson",
            "--out",
            str(OUT / "sweep"),
        ]
    )


if __name__ == "__main__":
    sys.exit(main())
