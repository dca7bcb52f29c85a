"""Shared expensive runs: computed once per session, reused across modules."""

import pytest

import joulefem as jf
from joulefem import harness


@pytest.fixture(scope="session")
def p1_spec():
    return jf.make_problem1()


@pytest.fixture(scope="session")
def p1_reference_ie(p1_spec):
    """Implicit-Euler reference for the Problem 1 studies (nx=32, nt=512)."""
    study = harness.StudyConfig(
        nx_list=[4, 8, 16], nt_list=[8, 32, 128], scheme="semi",
        ref_scheme="ie", ref_nx=32, ref_nt=512,
    )
    return harness.run_reference(p1_spec, study)


@pytest.fixture(scope="session")
def p1_semi_runs(p1_spec):
    """Semi-implicit Problem 1 runs at nx = 4, 8, 16 with nt = nx^2/2."""
    return {
        nx: jf.run_simulation(p1_spec, nx, nx * nx // 2, jf.StepperConfig(scheme="semi"))
        for nx in (4, 8, 16)
    }


@pytest.fixture(scope="session")
def p1_ie_runs(p1_spec):
    """Implicit-Euler Problem 1 runs at nx = 8, 16 with nt = nx^2/2."""
    return {
        nx: jf.run_simulation(p1_spec, nx, nx * nx // 2, jf.StepperConfig(scheme="ie"))
        for nx in (8, 16)
    }
