import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


import pytest

from leashguide.cli import main


def run_cli(*args):
    rc = main([str(a) for a in args])
    assert rc == 0, f"leashguide {' '.join(map(str, args))} exited with {rc}"


@pytest.fixture(scope="session")
def small_workspace(tmp_path_factory):
    """Two short subjects and predictors trained with the default recipe."""
    root = tmp_path_factory.mktemp("small")
    common = ["--set", "data.subjects=2", "--set", "data.session_s=60"]
    run_cli("generate", "--out", root / "data", *common)
    run_cli("train", "--out", root / "weights", "--set", f"paths.dataset={root / 'data'}", *common)
    return root
