import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from drivenbh.basis import ModelParams, seeded_mixed_state
from drivenbh.meanfield import PropagateOpts, propagate_to_ness


@pytest.fixture(scope="session", autouse=True)
def _warm_jit():
    # compile the integrator kernel once so timings below stay honest
    p = ModelParams(J=0.02, Omega=0.2, Gamma_l=0.05, Gamma_p=1.0, gamma=1e-3)
    propagate_to_ness(seeded_mixed_state(p.basis()), p, PropagateOpts(t_max=2.0))
