"""Smoke test for the pyatomcurrent extension.

Build first:
    cargo build --release -p atomcurrent-py --features extension-module
then run:
    python3 python/smoke_test.py
"""

import json
import math
import shutil
import sys
import sysconfig
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load():
    lib = ROOT / "target" / "release" / "libpyatomcurrent.so"
    if not lib.exists():
        sys.exit(f"missing {lib}; build the extension first")
    tmp = Path(tempfile.mkdtemp())
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy(lib, tmp / f"pyatomcurrent{suffix}")
    sys.path.insert(0, str(tmp))
    import pyatomcurrent

    return pyatomcurrent


def main():
    ac = load()
    print("version", ac.version())

    e = ac.spectrum(3, 1, 0.0)
    assert len(e) == 3 and abs(e[0] + 2) < 1e-12, e

    points = ac.degeneracy_points(3)
    assert any(abs(p - math.pi / 3) < 1e-12 for p in points), points

    dark = json.loads(ac.dark_states(3, 3, math.pi / 3, 1))
    assert len(dark) == 1
    norm = sum(re * re + im * im for re, im in dark[0]["amplitudes"])
    assert abs(norm - 1) < 1e-12
    assert json.loads(ac.dark_states(3, 3, 0.4, 1)) == []

    v = ac.tls_potential(math.pi, 4 * math.pi / 3, 4 * math.pi / 3)
    assert abs(v + 3) < 1e-12, v

    r = ac.trajectory(3, 3, math.pi / 3, 1.0, 1e-3, 1.0, seed=7, stride=10)
    assert len(r["t"]) == len(r["dq"]) == len(r["J_tot"]) == 101
    assert all(math.isfinite(d) and d < 0.5 for d in r["norm_drift"])
    again = ac.trajectory(3, 3, math.pi / 3, 1.0, 1e-3, 1.0, seed=7, stride=10)
    assert again["dq"] == r["dq"]

    try:
        ac.spectrum(3, 1, 0.0, hopping=float("nan"))
    except ValueError:
        pass
    else:
        raise AssertionError("NaN hopping accepted")

    with tempfile.TemporaryDirectory() as out:
        manifest = json.loads(Path(ac.run_scenario("fig9a", out)).read_text())
        assert manifest["scenario"] == "fig9a"
        assert manifest["cases"][0]["kind"] == "spectrum"

    print("smoke test passed")


if __name__ == "__main__":
    main()
