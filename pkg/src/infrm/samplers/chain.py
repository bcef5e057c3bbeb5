"""
Chain orchestration: burn-in, thinning, traces, retained snapshots and
JSON checkpoints that restore the exact RNG stream.
"""
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from infrm.netdata import TEST
from infrm.samplers import make_sampler
from infrm.samplers.base import ModelConfig, TraceRecord, from_jsonable, to_jsonable

CHECKPOINT_VERSION = 1


@dataclass
class RunConfig:
    iterations: int = 10000
    burn_in: int = 5000
    thinning: int = 1
    chains: int = 30
    seed: int = 0
    checkpoint_every: int = 0       # 0 disables checkpoints
    heldout_every: int = 1          # compute held-out AUC/log-lik every k retained records

    def __post_init__(self):
        if self.iterations < 0 or self.burn_in < 0 or self.thinning < 1:
            raise ValueError("invalid iteration settings")

    def retained(self, iteration):
        """Whether sweep number `iteration` (1-based) is kept."""
        return iteration > self.burn_in and (iteration - self.burn_in) % self.thinning == 0


@dataclass
class ChainResult:
    samples: list
    traces: list
    sampler: object = field(repr=False, default=None)


def chain_seed(master_seed, chain):
    """Independent per-chain seed derived from the master seed."""
    return int(np.random.SeedSequence([int(master_seed), int(chain)]).generate_state(1)[0])


def run_chain(cfg, net, phi, run, seed=None, checkpoint_path=None, resume=None, on_record=None):
    """Run one chain; returns retained snapshots and one TraceRecord per retained sweep.

    `resume` is a checkpoint dict (see load_checkpoint); the run continues
    from its iteration with the saved RNG state, samples and traces.
    """
    from infrm import evalx

    seed = run.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    sampler = make_sampler(cfg, net, phi, rng)
    samples, traces = [], []
    if resume is not None:
        sampler.load_state_dict(resume["state"])
        samples = list(resume.get("samples", []))
        traces = [TraceRecord(**t) for t in resume.get("traces", [])]
    has_test = bool((net.mask == TEST).any())
    truth = (net.edges > 0).astype(float)
    while sampler.iteration < run.iterations:
        sampler.sweep()
        it = sampler.iteration
        if run.retained(it):
            snap = sampler.snapshot()
            samples.append(snap)
            rec = TraceRecord(it, int(snap["K"]), sampler.log_joint())
            if has_test and (len(traces) % run.heldout_every == 0):
                pred = evalx.predictive_scores([snap], net, cfg)
                try:
                    rec.auc = evalx.auc(pred.scores, truth if cfg.family != "unit"
                                        else (net.edges > evalx.UNIT_THRESHOLD).astype(float),
                                        net.mask, TEST)
                except ValueError:
                    pass
                rec.loglik = evalx.test_loglik([snap], net, cfg)
            traces.append(rec)
            if on_record is not None:
                on_record(rec)
        if checkpoint_path and run.checkpoint_every and it % run.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, sampler, samples, traces, cfg)
    return ChainResult(samples, traces, sampler)


def save_checkpoint(path, sampler, samples, traces, cfg):
    doc = {"version": CHECKPOINT_VERSION, "model_config": cfg.to_dict(),
           "state": sampler.state_dict(), "samples": samples,
           "traces": [asdict(t) for t in traces]}
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(to_jsonable(doc), fh)
    os.replace(tmp, path)


def load_checkpoint(path):
    with open(path) as fh:
        doc = from_jsonable(json.load(fh))
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    doc["model_config"] = ModelConfig(**doc["model_config"])
    return doc


def write_trace_csv(path, traces):
    with open(path, "w") as fh:
        fh.write("iteration,K,log_joint,auc,loglik\n")
        for t in traces:
            fh.write(f"{t.iteration},{t.K},{float(t.log_joint)!r},{float(t.auc)!r},{float(t.loglik)!r}\n")


def read_trace_csv(path):
    import csv
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError("empty trace file")
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def save_samples(path, samples):
    """One .npz archive for a chain's retained snapshots."""
    arrays = {}
    for t, snap in enumerate(samples):
        for key, val in snap.items():
            if key == "model":
                continue
            arrays[f"{t:06d}/{key}"] = np.asarray(val)
    arrays["model"] = np.array(samples[0]["model"] if samples else "")
    np.savez_compressed(path, **arrays)


def load_samples(path):
    data = np.load(path)
    model = str(data["model"])
    out = {}
    for key in data.files:
        if key == "model":
            continue
        t, name = key.split("/")
        out.setdefault(int(t), {"model": model})[name] = data[key]
    for snap in out.values():
        snap["K"] = int(snap["K"])
    return [out[t] for t in sorted(out)]
