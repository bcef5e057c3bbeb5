"""
Command-line entry point.

    infrm simulate | fit | crossval | diagnose | importance  [options]

Options come from three layers, highest first: command-line flags, a flat
`key = value` file given with --config, built-in defaults. Every run writes
the merged settings to `resolved_config.txt`, which reproduces the run when
passed back through --config, plus a MANIFEST of sha256 hashes of all
artifacts. Outputs carry no timestamps, so identical inputs and seed give
identical bytes.

Exit codes: 0 ok, 1 usage or invalid configuration, 2 data error, 3 runtime failure.
"""
import argparse
import hashlib
import json
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from infrm import diagnostics, evalx, genmodel
from infrm.linkmodels import BHyper
from infrm.netdata import (TEST, DataError, MetadataMatrix, load_metadata, make_cv_folds,
                           read_edge_list, read_metadata_csv, write_edge_list,
                           write_metadata_csv)
from infrm.priors import EtaHyper, importance_summary, participation_weights
from infrm.samplers.base import ModelConfig, to_jsonable
from infrm.samplers.chain import (RunConfig, chain_seed, load_checkpoint, load_samples,
                                  read_trace_csv, run_chain, save_samples, write_trace_csv)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {v!r}")


def _opt_int(v):
    return None if v is None or str(v).strip().lower() in ("", "none") else int(v)


def _opt_float(v):
    return None if v is None or str(v).strip().lower() in ("", "none") else float(v)


def _opt_str(v):
    return None if v is None or str(v).strip().lower() in ("", "none") else str(v)


# name -> (converter, default, help)
MODEL_OPTS = {
    "model": (str, "infmm", "infmm | cinfmm | inflf | immm | lfrm"),
    "family": (str, "binary", "binary | count | unit"),
    "K_max": (int, 20, "fixed K (cinfmm), truncation (inflf, truncated infmm)"),
    "K_init": (int, 5, "initial communities for the infinite sampler"),
    "truncate": (_bool, False, "run infmm/immm with a K_max-truncated stick"),
    "alpha": (float, 1.0, "concentration of immm"),
    "eta_init": (float, 1.0, "initial importance indicators"),
    "freeze_eta": (_bool, False, "keep eta fixed at eta_init"),
    "resample_hyper": (_bool, False, "Metropolis-resample hyperparameters each sweep"),
    "random_scan": (_bool, False, "random block order within a sweep"),
    "b_mh_steps": (int, 1, "Metropolis passes over B per sweep (inflf binary)"),
    "b_mh_scale": (float, 0.1, "random-walk scale for B (inflf binary)"),
    "eta_mh_scale": (float, 0.5, "log random-walk scale for eta (cinfmm)"),
    "alpha_eta": (float, 1.0, "Gamma shape of eta"),
    "beta_eta": (float, 1.0, "Gamma rate of eta"),
    "alpha_B": (float, 1.0, "Gamma shape of B (count, unit)"),
    "beta_B": (float, 1.0, "Gamma rate of B (count, unit)"),
    "a_B": (float, 1.0, "Beta a of B (binary)"),
    "b_B": (float, 1.0, "Beta b of B (binary)"),
    "sigma_B": (float, 1.0, "Gaussian prior sd of B (inflf binary)"),
}
DATA_OPTS = {
    "edges": (_opt_str, None, "edge list file: 'src dst value' per line"),
    "n": (_opt_int, None, "number of entities (default: largest id + 1)"),
    "metadata": (_opt_str, None, "metadata CSV (first column entity id)"),
    "rules": (_opt_str, None, "binarization rules file"),
    "missing": (str, "zero", "missing attribute values: zero | error"),
    "remap_zero": (_bool, False, "map unit values of exactly 0 to a small positive value"),
}
RUN_OPTS = {
    "iterations": (int, 10000, "sweeps per chain"),
    "burn_in": (int, 5000, "discarded sweeps"),
    "thinning": (int, 1, "keep every k-th sweep after burn-in"),
    "chains": (int, 30, "independent chains"),
    "heldout_every": (int, 1, "held-out metrics every k retained sweeps"),
    "jobs": (int, 1, "parallel worker processes"),
}
COMMON_OPTS = {
    "seed": (int, 0, "master seed"),
    "outdir": (_opt_str, None, "output directory"),
}
COMMANDS = {
    "simulate": {
        **COMMON_OPTS,
        "model": (str, "infmm", "infmm | cinfmm | inflf"),
        "family": (str, "binary", "binary | count | unit"),
        "n": (int, 20, "entities"),
        "F": (int, 0, "binary attributes"),
        "K_max": (int, 5, "truncation level"),
        "attr_prob": (float, 0.5, "probability that an entity holds an attribute"),
        "plant": (int, 0, "if > 0, plant this many hard blocks instead"),
        "separation": (float, 4.0, "planted within/between gap on the natural scale"),
        "within": (_opt_float, None, "planted within-block parameter"),
        "between": (_opt_float, None, "planted between-block parameter"),
    },
    "fit": {**COMMON_OPTS, **DATA_OPTS, **MODEL_OPTS, **RUN_OPTS,
            "test_fold": (int, -1, "hold out this fold (-1: none)"),
            "n_folds": (int, 10, "folds for --test-fold"),
            "checkpoint_every": (int, 0, "sweeps between checkpoints (0: off)"),
            "resume": (_bool, False, "continue chains from checkpoints in outdir"),
            "save_samples": (_bool, True, "write retained snapshots per chain")},
    "crossval": {**COMMON_OPTS, **DATA_OPTS, **MODEL_OPTS, **RUN_OPTS,
                 "n_folds": (int, 10, "folds"),
                 "folds": (str, "all", "comma-separated fold ids or 'all'"),
                 "binarize_loglik": (_bool, False, "score test log-likelihood on e > 0")},
    "diagnose": {"outdir": (_opt_str, None, "output directory"),
                 "trace": (_opt_str, None, "trace CSV"),
                 "column": (str, "K", "trace column to diagnose")},
    "importance": {"outdir": (_opt_str, None, "output directory"),
                   "fit_dir": (_opt_str, None, "output directory of a previous fit")},
}
REQUIRED = {"simulate": ("outdir",), "fit": ("outdir", "edges"),
            "crossval": ("outdir", "edges"), "diagnose": ("outdir", "trace"),
            "importance": ("outdir", "fit_dir")}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="infrm", description="Metadata-informed relational models")
    sub = p.add_subparsers(dest="command")
    for name, opts in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="key = value settings file")
        for key, (_, default, help_) in opts.items():
            flag = "--" + key.replace("_", "-")
            sp.add_argument(flag, dest=key, default=None, help=f"{help_} (default {default})")
    return p


def parse_config_file(path):
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def resolve(command, flags, file_values=None):
    """Merge defaults < config file < flags, converting each value."""
    opts = COMMANDS[command]
    file_values = file_values or {}
    unknown = sorted(set(file_values) - set(opts))
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")
    out = {}
    for key, (conv, default, _) in opts.items():
        raw = flags.get(key)
        if raw is None:
            raw = file_values.get(key)
        try:
            out[key] = default if raw is None else conv(raw)
        except (TypeError, ValueError):
            raise UsageError(f"bad value for {key}: {raw!r}") from None
    for key in REQUIRED[command]:
        if out.get(key) is None:
            raise UsageError(f"--{key.replace('_', '-')} is required")
    return out


def format_config(command, conf):
    lines = [f"# infrm {command}"]
    for key in COMMANDS[command]:
        v = conf[key]
        lines.append(f"{key} = {'none' if v is None else str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(lines) + "\n"


def model_config(conf):
    try:
        return ModelConfig(model=conf["model"], family=conf["family"], K_max=conf["K_max"],
                           K_init=conf["K_init"], truncate=conf["truncate"], alpha=conf["alpha"],
                           eta_init=conf["eta_init"], freeze_eta=conf["freeze_eta"],
                           resample_hyper=conf["resample_hyper"], random_scan=conf["random_scan"],
                           b_mh_steps=conf["b_mh_steps"], b_mh_scale=conf["b_mh_scale"],
                           eta_mh_scale=conf["eta_mh_scale"],
                           eta=EtaHyper(conf["alpha_eta"], conf["beta_eta"]),
                           B=BHyper(conf["alpha_B"], conf["beta_B"], conf["a_B"], conf["b_B"],
                                    conf["sigma_B"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def run_config(conf):
    try:
        return RunConfig(iterations=conf["iterations"], burn_in=conf["burn_in"],
                         thinning=conf["thinning"], chains=conf["chains"], seed=conf["seed"],
                         checkpoint_every=conf.get("checkpoint_every", 0),
                         heldout_every=conf["heldout_every"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read(path):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def load_inputs(conf, cfg):
    """NetworkData and metadata phi (n x F) per the resolved config."""
    try:
        net = read_edge_list(conf["edges"], n=conf["n"], kind=conf["family"],
                             remap_zero=conf["remap_zero"])
    except OSError as exc:
        raise DataError(f"cannot read {conf['edges']}: {exc.strerror}") from None
    meta = MetadataMatrix.empty(net.n)
    if conf["metadata"]:
        if not cfg.uses_metadata:
            warnings.warn(f"metadata ignored under {cfg.model}", stacklevel=2)
            print(f"warning: metadata ignored under {cfg.model}", file=sys.stderr)
        else:
            if not conf["rules"]:
                raise UsageError("--rules is required with --metadata")
            meta = load_metadata(_read(conf["metadata"]), _read(conf["rules"]), net.n,
                                 missing=conf["missing"])
    return net, meta


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: NaN/inf become null, numpy scalars become Python ones."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def write_matrix_csv(path, M, header=None):
    with open(path, "w") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in np.atleast_2d(M):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def write_manifest(outdir):
    entries = []
    for root, _, files in os.walk(outdir):
        for f in files:
            path = os.path.join(root, f)
            rel = os.path.relpath(path, outdir)
            if rel == "MANIFEST" or f.endswith(".tmp"):
                continue
            with open(path, "rb") as fh:
                entries.append((rel, hashlib.sha256(fh.read()).hexdigest()))
    write_text(os.path.join(outdir, "MANIFEST"),
               "".join(f"{h}  {rel}\n" for rel, h in sorted(entries)))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(conf):
    out = conf["outdir"]
    rng = np.random.default_rng(conf["seed"])
    n, F = conf["n"], conf["F"]
    phi = (rng.random((n, F)) < conf["attr_prob"]).astype(np.int8)
    meta = MetadataMatrix(phi, tuple(f"attr{f}" for f in range(F)))
    if conf["plant"] > 0:
        net, labels = genmodel.plant_communities(
            n, conf["plant"], separation=conf["separation"], family=conf["family"],
            seed=int(rng.integers(2 ** 31)), within=conf["within"], between=conf["between"])
        latents = {"labels": labels}
        write_text(os.path.join(out, "labels.csv"),
                   "id,label\n" + "".join(f"{i},{l}\n" for i, l in enumerate(labels)))
    else:
        try:
            spec = genmodel.SyntheticSpec(n=n, F=F, model=conf["model"], family=conf["family"],
                                          K_max=conf["K_max"], seed=conf["seed"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        net, latents = genmodel.simulate(spec, phi, rng=rng)
    write_text(os.path.join(out, "edges.txt"), write_edge_list(net))
    write_text(os.path.join(out, "metadata.csv"), write_metadata_csv(meta))
    write_json(os.path.join(out, "latents.json"), to_jsonable(latents))
    return {"n": n, "F": F}


def sample_importance(snap, phi):
    """(log weighted, log unweighted) importance summaries of one snapshot, F x 2.

    Weights are the holders' membership mass per community (pi for the
    mixed-membership models, feature indicators z for latent features).
    """
    eta = snap["eta"]
    K = eta.shape[1]
    member = snap["pi"][:, :K] if "pi" in snap else snap["z"][:, :K]
    w = participation_weights(phi, member)
    return np.log(np.column_stack([importance_summary(eta, w), importance_summary(eta)]))


def _fit_job(args):
    cfg, net, phi, run, chain, outdir, resume, save = args
    cdir = os.path.join(outdir, "chains", f"chain_{chain:02d}")
    os.makedirs(cdir, exist_ok=True)
    ckpt = os.path.join(cdir, "checkpoint.json")
    state = load_checkpoint(ckpt) if resume and os.path.exists(ckpt) else None
    res = run_chain(cfg, net, phi, run, seed=chain_seed(run.seed, chain),
                    checkpoint_path=ckpt if run.checkpoint_every else None, resume=state)
    write_trace_csv(os.path.join(cdir, "trace.csv"), res.traces)
    if save and res.samples:
        save_samples(os.path.join(cdir, "samples.npz"), res.samples)
    return res.samples, res.traces


def _map_jobs(fn, jobs, n_jobs):
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def cmd_fit(conf):
    cfg = model_config(conf)
    run = run_config(conf)
    if run.chains < 1:
        raise UsageError("chains must be >= 1")
    net, meta = load_inputs(conf, cfg)
    out = conf["outdir"]
    if conf["test_fold"] >= 0:
        plan = make_cv_folds(net, conf["seed"], conf["n_folds"])
        try:
            net = plan.apply(net, conf["test_fold"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    jobs = [(cfg, net, meta.phi, run, c, out, conf["resume"], conf["save_samples"])
            for c in range(run.chains)]
    results = _map_jobs(_fit_job, jobs, conf["jobs"])

    traces0 = results[0][1]
    write_trace_csv(os.path.join(out, "trace.csv"), traces0)
    with open(os.path.join(out, "auc_trace.csv"), "w") as fh:
        fh.write("chain,iteration,auc\n")
        for c, (_, traces) in enumerate(results):
            for t in traces:
                fh.write(f"{c},{t.iteration},{float(t.auc)!r}\n")

    report = evalx.MetricsReport()
    chains = []
    imp = []
    for c, (samples, traces) in enumerate(results):
        Ks = np.array([t.K for t in traces], dtype=float)
        info = {"chain": c, "retained": len(samples),
                "K_mean": float(Ks.mean()) if Ks.size else None,
                "K_final": int(Ks[-1]) if Ks.size else None}
        if samples:
            row = {"fold": conf["test_fold"], "chain": c}
            row.update(evalx.evaluate(samples, net, cfg))
            report.rows.append(row)
            info.update(row)
            if meta.F and cfg.uses_metadata:
                imp.append(np.mean([sample_importance(s, meta.phi) for s in samples
                                    if s["eta"].shape[1] > 0], axis=0))
        chains.append(info)
    last = results[0][0][-1] if results[0][0] else None
    if last is not None:
        write_matrix_csv(os.path.join(out, "B_final.csv"), last["B"])
        write_matrix_csv(os.path.join(out, "eta_final.csv"), last["eta"])
    write_text(os.path.join(out, "metadata_binary.csv"), write_metadata_csv(meta))
    with open(os.path.join(out, "eta_importance.csv"), "w") as fh:
        fh.write("attribute,importance,importance_unweighted\n")
        if imp:
            mean_imp = np.exp(np.mean(imp, axis=0))
            for name, (w, u) in zip(meta.attribute_names, mean_imp):
                fh.write(f"{name},{float(w)!r},{float(u)!r}\n")
    agg = report.aggregate() if report.rows else {}
    write_json(os.path.join(out, "report.json"), {
        "model": cfg.model, "family": cfg.family, "n": net.n, "F": meta.F,
        "attribute_names": list(meta.attribute_names),
        "test_cells": int((net.mask == TEST).sum()),
        "chains": chains,
        "metrics": {m: {"mean": v[0], "std": v[1]} for m, v in agg.items()},
    })
    return {"chains": run.chains}


def cmd_crossval(conf):
    cfg = model_config(conf)
    run = run_config(conf)
    net, meta = load_inputs(conf, cfg)
    out = conf["outdir"]
    if conf["folds"].strip().lower() == "all":
        folds = None
    else:
        try:
            folds = [int(f) for f in conf["folds"].split(",")]
        except ValueError:
            raise UsageError(f"bad fold list {conf['folds']!r}") from None
        if any(not 0 <= f < conf["n_folds"] for f in folds):
            raise UsageError("fold id out of range")
    report, plan = evalx.crossvalidate(cfg, net, meta.phi, run, n_folds=conf["n_folds"],
                                       folds=folds, jobs=conf["jobs"],
                                       binarize_loglik=conf["binarize_loglik"])
    write_text(os.path.join(out, "folds.csv"), plan.to_csv())
    write_text(os.path.join(out, "metrics.csv"), report.to_csv())
    write_text(os.path.join(out, "table.csv"),
               "model,train_error,test_error,test_loglik,auc\n" + report.table_row(cfg.model) + "\n")
    agg = report.aggregate()
    write_json(os.path.join(out, "report.json"), {
        "model": cfg.model, "family": cfg.family, "rows": report.rows,
        "aggregate": {m: {"mean": v[0], "std": v[1]} for m, v in agg.items()}})
    return {"rows": len(report.rows)}


def cmd_diagnose(conf):
    try:
        trace = read_trace_csv(conf["trace"])
    except OSError as exc:
        raise DataError(f"cannot read {conf['trace']}: {exc.strerror}") from None
    except (ValueError, KeyError) as exc:
        raise DataError(f"malformed trace file: {exc}") from None
    col = conf["column"]
    if col not in trace:
        raise UsageError(f"no column {col!r} in trace (have {', '.join(trace)})")
    try:
        rep = diagnostics.iat_ess(trace[col])
    except ValueError as exc:
        raise DataError(str(exc)) from None
    out = conf["outdir"]
    d = rep.to_dict()
    rho = d.pop("rho")
    d["column"] = col
    d["ess_conventional_note"] = "M / (1 + 2 sum rho), not the tau_hat-based ESS"
    write_json(os.path.join(out, "report.json"), d)
    with open(os.path.join(out, "rho.csv"), "w") as fh:
        fh.write("lag,rho\n")
        for l, r in enumerate(rho):
            fh.write(f"{l},{float(r)!r}\n")
    return d


def cmd_importance(conf):
    fit_dir = conf["fit_dir"]
    try:
        with open(os.path.join(fit_dir, "report.json")) as fh:
            model = json.load(fh).get("model", "")
        with open(os.path.join(fit_dir, "metadata_binary.csv")) as fh:
            ids, columns = read_metadata_csv(fh.read())
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read fit outputs in {fit_dir}: {exc}") from None
    names = list(columns)
    if not names:
        raise DataError("fit has no metadata attributes")
    order = np.argsort(ids)
    phi = np.column_stack([np.array(columns[c], dtype=np.int8)[order] for c in names])
    cdir = os.path.join(fit_dir, "chains")
    paths = sorted(os.path.join(cdir, c, "samples.npz") for c in os.listdir(cdir)) \
        if os.path.isdir(cdir) else []
    paths = [p for p in paths if os.path.exists(p)]
    if not paths:
        raise DataError(f"no retained samples under {fit_dir}")
    per_sample = [sample_importance(snap, phi) for p in paths for snap in load_samples(p)
                  if snap["eta"].size and snap["eta"].shape[1]]
    if not per_sample:
        raise DataError("no samples with active communities")
    arr = np.exp(np.array(per_sample))            # samples x F x 2
    mean, std = arr.mean(axis=0), arr.std(axis=0)
    # mixed-membership: small eta promotes; latent features: large eta promotes
    polarity = "larger" if model in ("inflf", "lfrm") else "smaller"
    ranks = np.argsort(np.argsort(mean[:, 0] if polarity == "smaller" else -mean[:, 0]))
    out = conf["outdir"]
    with open(os.path.join(out, "importance.csv"), "w") as fh:
        fh.write("attribute,mean,std,mean_unweighted,std_unweighted,rank\n")
        for f, name in enumerate(names):
            fh.write(f"{name},{float(mean[f, 0])!r},{float(std[f, 0])!r},"
                     f"{float(mean[f, 1])!r},{float(std[f, 1])!r},{int(ranks[f]) + 1}\n")
    write_json(os.path.join(out, "report.json"),
               {"model": model, "samples": len(per_sample),
                "influence": f"{polarity} values indicate larger influence"})
    return {"samples": len(per_sample)}


HANDLERS = {"simulate": cmd_simulate, "fit": cmd_fit, "crossval": cmd_crossval,
            "diagnose": cmd_diagnose, "importance": cmd_importance}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + " | ".join(COMMANDS))
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
        file_values = parse_config_file(args.config) if args.config else {}
        conf = resolve(args.command, flags, file_values)
        os.makedirs(conf["outdir"], exist_ok=True)
        write_text(os.path.join(conf["outdir"], "resolved_config.txt"),
                   format_config(args.command, conf))
        HANDLERS[args.command](conf)
        write_manifest(conf["outdir"])
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:   # noqa: BLE001 - last-resort exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
