"""Shared test utilities."""
import numpy as np

from dfmnet.weights import init_random


def randomize_bn(w, seed):
    """Replace identity BN statistics with random ones so folding is actually exercised."""
    rng = np.random.default_rng(seed)
    updates = {}
    for name, arr in w.items():
        if name.endswith(".bn.gamma"):
            updates[name] = rng.uniform(0.5, 1.5, arr.shape)
        elif name.endswith(".bn.beta") or name.endswith(".bn.mean"):
            updates[name] = rng.uniform(-0.2, 0.2, arr.shape)
        elif name.endswith(".bn.var"):
            updates[name] = rng.uniform(0.5, 2.0, arr.shape)
    return w.replace(updates)


def random_weights(manifest, seed, bn_seed=None):
    w = init_random(manifest, seed)
    return w if bn_seed is None else randomize_bn(w, bn_seed)
