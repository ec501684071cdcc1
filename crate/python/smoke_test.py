#!/usr/bin/env python3
"""Smoke test for the tbd_glmb Python extension.

Builds the extension with cargo, loads it, and runs a short end-to-end
pipeline: simulate a truncated two-vehicle scenario, track it frame by frame
through the Filter class as well as the batch API, and sanity-check the
metrics and determinism.

Usage: python3 python/smoke_test.py
"""

import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def build_extension() -> Path:
    subprocess.run(
        ["cargo", "build", "--release", "-p", "tbd-glmb-py"],
        cwd=REPO,
        check=True,
    )
    built = REPO / "target" / "release" / "libtbd_glmb.so"
    if not built.exists():  # e.g. macOS
        built = REPO / "target" / "release" / "libtbd_glmb.dylib"
    staged = Path(tempfile.mkdtemp(prefix="tbd_glmb_py_")) / "tbd_glmb.so"
    shutil.copyfile(built, staged)
    return staged.parent


def main() -> int:
    sys.path.insert(0, str(build_extension()))
    import tbd_glmb

    out_dir = Path(tempfile.mkdtemp(prefix="tbd_glmb_smoke_"))

    config = tbd_glmb.Config()
    config.n_frames = 30
    assert config.seed == 2024

    # Config round-trips through its text form.
    text = config.serialize()
    config2 = tbd_glmb.Config.parse(text)
    assert config2.serialize() == text

    cubes_path, truth_path = tbd_glmb.simulate(config, str(out_dir))
    cubes = tbd_glmb.read_cubes(Path(cubes_path))
    assert len(cubes) == 30
    assert cubes[0].shape == (64, 32, 16)
    assert min(cubes[0].intensities()) >= 0.0

    # Frame-by-frame filtering through the class API.
    filt = tbd_glmb.Filter(config)
    cardinalities = []
    for cube in cubes:
        estimates = filt.step(cube)
        cardinalities.append(len(estimates))
    assert cardinalities[-1] == 2, f"expected 2 tracks, got {cardinalities[-1]}"
    dist = filt.cardinality_distribution()
    assert abs(sum(dist) - 1.0) < 1e-9
    assert filt.n_hypotheses >= 1

    # Batch pipeline + evaluation.
    tracks_csv = out_dir / "tracks.csv"
    n_records = tbd_glmb.track(config, Path(cubes_path), tracks_csv)
    assert n_records > 0
    mean_ospa, consistency = tbd_glmb.evaluate(
        tracks_csv, Path(truth_path), out_dir / "metrics.csv"
    )
    assert mean_ospa < 3.0, f"mean OSPA {mean_ospa}"
    assert consistency > 0.9, f"label consistency {consistency}"

    # Determinism: tracking the same stream twice gives identical bytes.
    tracks_csv2 = out_dir / "tracks2.csv"
    tbd_glmb.track(config, Path(cubes_path), tracks_csv2)
    assert tracks_csv.read_bytes() == tracks_csv2.read_bytes()

    # Metric helpers.
    d = tbd_glmb.ospa([(0.0, 0.0)], [(2.0, 0.0)], cutoff=5.0, order=1.0)
    assert abs(d - 2.0) < 1e-12
    per_target = tbd_glmb.label_consistency(
        [(0, 0, 0, 10.0, 0.0), (1, 0, 0, 10.0, 0.0)],
        [(0, 7, 10.0, 0.0), (1, 7, 10.0, 0.0)],
    )
    assert per_target == [(7, 1.0)]

    print("smoke test passed:")
    print(f"  cardinalities over 30 frames: {cardinalities}")
    print(f"  mean OSPA {mean_ospa:.3f} m, label consistency {consistency:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
