"""Smoke test for the pyholescope extension.

Run after `maturin develop` (or `cargo build -p holescope-py`; the built
library is then loaded from target/ directly).
"""

import importlib
import math
import pathlib
import shutil
import sys
import tempfile


def load():
    try:
        return importlib.import_module("pyholescope")
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    built = [root / "target" / p / "libpyholescope.so" for p in ("release", "debug")]
    built = [lib for lib in built if lib.exists()]
    if not built:
        raise SystemExit("pyholescope not built")
    # newest build wins
    lib = max(built, key=lambda b: b.stat().st_mtime)
    tmp = tempfile.mkdtemp()
    shutil.copy(lib, pathlib.Path(tmp) / "pyholescope.so")
    sys.path.insert(0, tmp)
    return importlib.import_module("pyholescope")


def main():
    hs = load()
    gef = hs.CoefficientModel.gef()
    assert gef.log_coeff(0) == 0.0

    p = hs.growth_profile(gef, 2.0)
    assert p.nu == 4 and p.n1 == 9, p
    assert abs(hs.integral_residual(gef, 5.0)) < 1e-6

    gd = hs.CoefficientModel.gaussian_decay(1.0)
    row = hs.growth_profile(gd, math.exp(2.0))
    assert (row.nu, row.n1, row.s) == (1, 3, 2.0), row

    draws = hs.sample_coefficients(7, 0, 10)
    assert len(draws) == 11 and draws == hs.sample_coefficients(7, 0, 10)

    # z^2 - 1/4 rescaled into a table model: zeros at +-1/2
    table = hs.CoefficientModel.table([0.0, -1.0, -2.0])
    zc = hs.count_zeros(table, [-0.25, 0.0, math.exp(2.0)], 1.0)
    assert zc.certified and zc.count == 2, zc

    est = hs.hole_probability(gef, 0.5, method="direct", n_samples=2000, seed=1)
    assert est.log_ci_low <= est.log_p <= est.log_ci_high <= 0.0, est

    cert = hs.hole_probability(gef, 2.0, method="certificate")
    assert cert.point_estimate and cert.log_p < 0.0

    assert abs(hs.log_det_covariance(table, 1, 1.0) - math.log(1 + math.exp(-2) + math.exp(-4))) < 1e-12
    exact, bound = hs.volume(2, 1.0, 1.0)
    assert exact == 1.0

    try:
        hs.CoefficientModel.mittag_leffler(-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative alpha accepted")

    print("pyholescope smoke test ok")


if __name__ == "__main__":
    main()
