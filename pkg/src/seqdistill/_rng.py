"""Named random sub-streams derived from a single integer seed."""
import numpy as np

STREAMS = {"init": 0, "sampling": 1, "noise": 2, "structure": 3, "shuffle": 4, "data": 5}


def stream(seed, name, *extra):
    """Independent generator for ``name``; ``extra`` ints (e.g. layer index) refine it."""
    key = (STREAMS[name],) + tuple(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))
