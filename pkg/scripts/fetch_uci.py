#!/usr/bin/env python3
"""Download the car and cylinder-bands datasets from the UCI repository.

The other benchmark tables ship with the package (generated or bundled with
scikit-learn); these two must be fetched over the network, which sandboxed
environments may not allow.  Files land in data/ next to the repo root and
match the shipped schemas in schemas/.
"""

import sys
import urllib.request
from pathlib import Path

BASE = "https://archive.ics.uci.edu/ml/machine-learning-databases"
FILES = {
    "car.csv": f"{BASE}/car/car.data",
    "cylinder-bands.csv": f"{BASE}/cylinder-bands/bands.data",
}


def main():
    out_dir = Path(__file__).resolve().parent.parent / "data"
    out_dir.mkdir(exist_ok=True)
    failures = 0
    for name, url in FILES.items():
        dest = out_dir / name
        if dest.exists():
            print(f"{dest} already present, skipping")
            continue
        try:
            print(f"fetching {url}")
            with urllib.request.urlopen(url, timeout=60) as resp:
                dest.write_bytes(resp.read())
            print(f"wrote {dest}")
        except OSError as e:
            print(f"failed to fetch {name}: {e}", file=sys.stderr)
            failures += 1
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
