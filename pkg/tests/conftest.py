import numpy as np
import pytest

from gcsgp.covariance import GCSParams, GroupPartition


def random_psd(rng, n, rank=None, scale=1.0):
    if n == 0:
        return np.zeros((0, 0))
    rank = n if rank is None else rank
    A = rng.normal(size=(n, max(rank, 0)))
    S = A @ A.T * scale / max(n, 1)
    if rank == n:
        S += 1e-3 * scale * np.eye(n)
    return 0.5 * (S + S.T)


def random_partition(rng, max_groups=6, max_levels=30):
    G = int(rng.integers(1, max_groups + 1))
    L = int(rng.integers(G, max_levels + 1))
    # random composition of L into G positive parts
    cuts = np.sort(rng.choice(np.arange(1, L), size=G - 1, replace=False)) if G > 1 else []
    sizes = np.diff(np.concatenate([[0], cuts, [L]])).astype(int)
    return GroupPartition(sizes)


def random_params(rng, partition=None, **kw):
    part = partition or random_partition(rng, **kw)
    B = random_psd(rng, part.n_groups)
    Ms = tuple(random_psd(rng, n - 1) for n in part.group_sizes)
    return GCSParams(part, B, Ms)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
