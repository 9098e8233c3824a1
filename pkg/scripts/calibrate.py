"""Pre-build calibration: choose the bandwidth prefactors and Laplacian error thresholds.

Writes ``src/sepfluct/calibration.json``.  Run once before the test suite;
the result is committed so the suite never recalibrates.

    python scripts/calibrate.py [--out PATH]
"""

import argparse
import json
import warnings
from pathlib import Path

import numpy as np

from sepfluct import calibration as cal
from sepfluct.manifold import from_tag

CANDIDATES = {
    "circle": np.arange(1.0, 4.51, 0.25),
    "torus1": np.arange(1.0, 4.51, 0.25),
    "torus2": np.arange(1.0, 4.51, 0.25),
    "sphere": np.arange(0.25, 4.01, 0.25),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    default = Path(__file__).resolve().parents[1] / "src" / "sepfluct" / "calibration.json"
    ap.add_argument("--out", type=Path, default=default)
    args = ap.parse_args()
    warnings.simplefilter("ignore", RuntimeWarning)  # tiny trial bandwidths isolate points

    result = {
        "reference_n": cal.REFERENCE_N,
        "max_eigenvalue": cal.MAX_EIGENVALUE,
        "bandwidth_seeds": list(cal.BANDWIDTH_SEEDS),
        "threshold_seeds": list(cal.THRESHOLD_SEEDS),
        "bandwidth": {},
        "objective": {},
        "thresholds": {},
    }
    for tag, cands in CANDIDATES.items():
        m = from_tag(tag)
        best, scores = cal.calibrate_bandwidth(m, cands)
        th = cal.calibrate_thresholds(m, best)
        result["bandwidth"][tag] = best
        result["objective"][tag] = {f"{a:.2f}": round(s, 6) for a, s in scores.items()}
        result["thresholds"][tag] = {
            name: {"mean": float(mu), "std": float(sd), "threshold": float(t)}
            for name, mu, sd, t in zip(th.names, th.mean, th.std, th.threshold)
        }
        print(f"{tag}: A = {best:.2f}, mean E_f = {scores[best]:.4f}", flush=True)
    args.out.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
