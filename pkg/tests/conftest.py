"""Shared fixtures.

The kernel-table cache is redirected to a per-session temp directory so
tests never read or write the user's cache; tables built once (demo d=1,
Keller-Segel d=2, Coulomb d=3) are reused across test modules.
"""

import os
from dataclasses import replace
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parents[1]
CONFIGS = REPO / "configs"


@pytest.fixture(scope="session", autouse=True)
def _session_cache(tmp_path_factory):
    cache = tmp_path_factory.mktemp("kernel-cache")
    old = os.environ.get("MOLLSIM_CACHE_DIR")
    os.environ["MOLLSIM_CACHE_DIR"] = str(cache)
    yield cache
    if old is None:
        os.environ.pop("MOLLSIM_CACHE_DIR", None)
    else:
        os.environ["MOLLSIM_CACHE_DIR"] = old


def load_experiment(name, outdir):
    """Load a shipped config with its output redirected into a tmp dir."""
    from mollsim.config import load_config

    cfg = load_config(CONFIGS / ("%s.toml" % name))
    return replace(cfg, output_dir=str(outdir))


@pytest.fixture(scope="session")
def config_dir():
    return CONFIGS
