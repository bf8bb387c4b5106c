import math

import numpy as np
import pytest

from superneumann.core import ProblemParams
from superneumann.records import Residuals, profile_grid, single_shot


def test_profile_grid_hits_interfaces():
    t = profile_grid(0.137, 101)
    assert t[0] == 0 and t[-1] == 1
    assert 0.137 in t and (1 - 0.137) in t
    assert np.all(np.diff(t) > 0)


def test_single_shot_constant_at_center():
    end = single_shot(ProblemParams.symmetric(-1.0), 1.0)
    assert np.allclose(end, [1.0, 0.0], atol=1e-12)


def test_single_shot_reports_blow_up():
    end = single_shot(ProblemParams.symmetric(-1.0, alpha=0.3), 1e4)
    assert np.all(np.isnan(end))


def test_residual_failures_and_nan():
    good = Residuals(1e-9, 1e-9, 0.0, 1e-12, 1e-9, 1e-9, 0.5)
    assert good.passes() and good.failures() == []
    bad = Residuals(1e-9, 1e-3, 0.0, math.nan, 1e-9, 1e-9, -0.1)
    assert set(bad.failures()) == {"neumann_right", "energy_drift", "min_u"}
