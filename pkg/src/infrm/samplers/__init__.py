from infrm.samplers.base import ModelConfig, TraceRecord
from infrm.samplers.cinfmm import CollapsedInfMMSampler
from infrm.samplers.inflf import InfLFSampler
from infrm.samplers.infmm import InfMMSampler

_ENGINES = {
    "infmm": InfMMSampler,
    "immm": InfMMSampler,
    "cinfmm": CollapsedInfMMSampler,
    "inflf": InfLFSampler,
    "lfrm": InfLFSampler,
}


def make_sampler(cfg, net, phi, rng, recorder=None):
    """Build the Gibbs engine for cfg.model on the Train cells of `net`."""
    if net.kind != cfg.family:
        raise ValueError(f"data kind {net.kind!r} does not match family {cfg.family!r}")
    phi = phi if cfg.uses_metadata else None
    return _ENGINES[cfg.model](net, phi, cfg, rng, recorder=recorder)


__all__ = ["ModelConfig", "TraceRecord", "make_sampler", "InfMMSampler",
           "CollapsedInfMMSampler", "InfLFSampler"]
