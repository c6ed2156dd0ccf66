import numpy as np
import pytest

from padnas import LatencyBand, build_space, sample_uniform, synth_latency_table
from padnas.space import scaled_profile


def toy_space(profile: str, reps=(1, 2, 2, 2, 2)):
    names = [f"T{i + 1}" for i in range(len(reps))]
    return build_space(scaled_profile(profile, list(zip(names, reps))))


def quantile_band(space, table, lo_q=0.1, hi_q=0.9, n=600, seed=0):
    """Band spanning the [lo_q, hi_q] latency quantiles of uniform samples."""
    rng = np.random.default_rng(seed)
    lats = sorted(table.predict(sample_uniform(space, rng)) for _ in range(n))
    return LatencyBand(lats[int(lo_q * n)], lats[int(hi_q * n)])


@pytest.fixture(scope="session")
def toy_large():
    space = toy_space("large")
    table = synth_latency_table(space, rng=1)
    band = quantile_band(space, table)
    return space, table, band


@pytest.fixture(scope="session")
def toy_basic():
    space = toy_space("basic")
    table = synth_latency_table(space, rng=1)
    band = quantile_band(space, table)
    return space, table, band


def tiny_profile(menus: list[list[str]], identity_layers=()):
    """Hand-rolled custom profile; menus list candidate ids per layer."""
    ops = sorted({cid for menu in menus for cid in menu})
    catalog = {}
    for cid in ops:
        if cid == "Identity":
            catalog[cid] = {"kernel": None, "expansion": None, "is_identity": True}
        else:
            k, e = cid.split("_")[1][1:], cid.split("_")[2][1:]
            catalog[cid] = {"kernel": int(k), "expansion": int(e), "is_identity": False}
    return {
        "layers": [
            {
                "stage": f"L{j}",
                "allows_identity": j in identity_layers or "Identity" in menu,
                "fixed_expansion_one": False,
                "candidates": list(menu),
            }
            for j, menu in enumerate(menus)
        ],
        "catalog": catalog,
    }
