"""Smoke test for the censgof extension.

Build first with `cargo build --release -p censored-gof-py`, or install the
module with maturin. Run: python3 python/smoke_test.py
"""

import importlib.util
import json
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import censgof

        return censgof
    except ImportError:
        pass
    for name in ("libcensgof.so", "libcensgof.dylib", "censgof.dll"):
        built = ROOT / "target" / "release" / name
        if built.exists():
            break
    else:
        sys.exit("censgof not found; run `cargo build --release -p censored-gof-py` first")
    tmp = pathlib.Path(tempfile.mkdtemp())
    suffix = ".pyd" if built.suffix == ".dll" else ".so"
    shutil.copy(built, tmp / ("censgof" + suffix))
    spec = importlib.util.spec_from_file_location("censgof", tmp / ("censgof" + suffix))
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    cg = load()
    print("censgof", cg.__version__)

    s = cg.CensoredSample([1.0, 2.0], [True, True])
    assert len(s) == 2
    m = cg.m_statistic(s, "PR", 1.0, method="closed")
    assert abs(m - 1.0 / 120.0) < 1e-14, m
    assert abs(cg.m_statistic(s, "PR", 1.0) - m) < 1e-12

    sample = cg.CensoredSample.generate("weibull:1.4", 0.1, 50, seed=7)
    print(sample)
    assert sum(sample.events) < len(sample)

    spec = cg.StatisticSpec("J:PR:a=1")
    assert spec.label == "J^P_1" and spec.sidedness == "absolute"
    j = cg.j_statistic(sample, "PR", 1.0)
    assert math.isclose(spec.evaluate(sample), j)

    out = cg.bootstrap(sample, spec, b=200, seed=3)
    again = cg.bootstrap(sample, spec, b=200, seed=3)
    assert out.to_json() == again.to_json()
    meta = json.loads(out.to_json())
    assert meta["meta"]["B"] == 200
    print(f"bootstrap {spec}: stat={out.statistic:.5f} p={out.p_value:.3f} reject={out.reject}")

    for name in ("cvm", "chi2:r=3", "qns", "delta", "M:D:a=2:closed"):
        value = cg.StatisticSpec(name).evaluate(sample, hypothesis="composite")
        assert math.isfinite(value), name

    asym = cg.j_asymptotic(sample, "D", 1.0)
    assert 0.0 <= asym.p_value <= 1.0
    eig = cg.eigenvalues(sample, "PR", k=5)
    assert len(eig) == 5 and all(a >= b >= 0.0 for a, b in zip(eig, eig[1:]))

    table = cg.power_study(
        "n = 20\nN = 10\nB = 100\nrates = 0.1\nalternatives = exp:1\nstatistics = J:PR:a=1, cvm\nseed = 5\n"
    )
    rows = [line for line in table.splitlines() if line and not line.startswith("#")]
    assert len(rows) == 3, table

    try:
        cg.StatisticSpec("nonsense")
    except ValueError as e:
        print("rejected bad spec:", e)
    else:
        raise AssertionError("bad spec accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
