"""Seed handling: one master seed, named substreams per subsystem.

Every source of randomness in a run (scene construction, parameter init,
the patch sampler, evaluation) gets its own generator derived from the
master seed and a fixed stream name, so changing how often one subsystem
draws cannot perturb another.
"""

from __future__ import annotations

import numpy as np

# Fixed name -> tag mapping; appending new names is fine, reordering is not.
_STREAM_TAGS = {
    "scene": 1,
    "init": 2,
    "sampler": 3,
    "eval": 4,
    "decompose": 5,
}


def substream(seed: int, name: str) -> np.random.Generator:
    """Return a fresh PCG64 generator for the named stream of ``seed``."""
    try:
        tag = _STREAM_TAGS[name]
    except KeyError:
        raise ValueError(f"unknown rng stream {name!r}") from None
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, tag])))


def generator_state(gen: np.random.Generator) -> dict:
    """JSON-serializable snapshot of a generator's position in its stream."""
    state = gen.bit_generator.state
    return {
        "bit_generator": state["bit_generator"],
        "state": str(state["state"]["state"]),
        "inc": str(state["state"]["inc"]),
        "has_uint32": int(state["has_uint32"]),
        "uinteger": int(state["uinteger"]),
    }


def restore_generator(snapshot: dict) -> np.random.Generator:
    """Rebuild a generator from :func:`generator_state` output."""
    if snapshot["bit_generator"] != "PCG64":
        raise ValueError(f"unsupported bit generator {snapshot['bit_generator']!r}")
    gen = np.random.Generator(np.random.PCG64())
    gen.bit_generator.state = {
        "bit_generator": "PCG64",
        "state": {"state": int(snapshot["state"]), "inc": int(snapshot["inc"])},
        "has_uint32": int(snapshot["has_uint32"]),
        "uinteger": int(snapshot["uinteger"]),
    }
    return gen
