import logging
import math

import pytest

from ntnlink import e2e_metrics as em
from ntnlink.fso_link import fso_params
from ntnlink.rf_link import rf_params
from ntnlink.scenario import ScenarioConfig, derive_geometry, table2

logging.getLogger("ntnlink").setLevel(logging.ERROR)


@pytest.fixture(scope="session")
def raw_cfg():
    """Reference scenario with the RF budget as computed (no override)."""
    return ScenarioConfig()


@pytest.fixture(scope="session")
def cfg():
    """Packaged reference scenario with the calibrated RF mean SNRs."""
    return table2()


@pytest.fixture(scope="session")
def geom(cfg):
    return derive_geometry(cfg)


@pytest.fixture(scope="session")
def fso(cfg, geom):
    return fso_params(cfg, geom)


@pytest.fixture(scope="session")
def rf_r(cfg, geom):
    return rf_params(cfg, "R", geom)


@pytest.fixture(scope="session")
def rf_t(cfg, geom):
    return rf_params(cfg, "T", geom)


@pytest.fixture(scope="session")
def e2e_factory(cfg):
    cache = {}

    def make(user="R", gamma_h_db=50.0, detection=1, **changes):
        key = (user, gamma_h_db, detection, tuple(sorted(changes.items())))
        if key not in cache:
            c = cfg.replace(detection=detection, **changes)
            cache[key] = em.e2e_params(c, user, gamma_h_db)
        return cache[key]

    return make


GAMMA_TH = 10 ** 0.2
