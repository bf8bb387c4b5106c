"""The pure Python kernels must agree with the compiled ones."""

import json
import os
import subprocess
import sys

import pytest

PROBE = r"""
import json
from superneumann._jit import USE_NUMBA
from superneumann.core import ProblemParams
from superneumann.sublinear import GammaCurve, s_infinity, shoot
from superneumann.superlinear import t1_map
from superneumann.timemaps import CurveOrbitGeometry, tau_j
from superneumann.matching import scan_roots

p = ProblemParams.symmetric(-30.0, alpha=0.1)
g = CurveOrbitGeometry(p, n_scan=60)
sh = shoot(0.7, 0.3, -1.0, 1.0, 3.0)
print(json.dumps({
    "numba": USE_NUMBA,
    "s_inf": s_infinity(0.3, -1.0, 1.0, 3.0),
    "shot": [sh.x, sh.y, sh.dx_ds, sh.dy_ds],
    "t1": t1_map(2.0, -30.0, 1.0, 3.0),
    "x_t": g.x_t,
    "x_h": g.x_h,
    "tau": [tau_j(j, 0.5 * g.x_t, g) for j in (1, 2, 3)],
    "roots": [[x, j] for s, x, j, d in scan_roots(p, g).roots],
}))
"""


def probe(disable):
    env = dict(os.environ, SUPERNEUMANN_NO_NUMBA="1" if disable else "")
    out = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True,
                         check=True, timeout=1200)
    return json.loads(out.stdout.strip().splitlines()[-1])


@pytest.mark.slow
def test_pure_python_matches_numba():
    fast, slow = probe(False), probe(True)
    assert fast["numba"] and not slow["numba"]
    for key in ("s_inf", "t1", "x_t", "x_h"):
        assert slow[key] == pytest.approx(fast[key], rel=1e-10)
    assert slow["shot"] == pytest.approx(fast["shot"], rel=1e-10)
    assert slow["tau"] == pytest.approx(fast["tau"], rel=1e-10)
    assert [j for _, j in slow["roots"]] == [j for _, j in fast["roots"]]
    assert [x for x, _ in slow["roots"]] == pytest.approx([x for x, _ in fast["roots"]], rel=1e-10)
