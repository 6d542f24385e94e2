"""Command-line interface.

Every command is a pure function of (config, seed): given the same
configuration document and seed it reproduces its output files byte for
byte.  Invalid configurations exit with status 2 and a message naming the
offending field.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import estimators, oracle, tasks
from .channel import LogSnr
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_config
from .denoise import ConditionId, GmmDenoiser, GmmSpec, Sample, gmm_mmse
from .flow import intervene as flow_intervene
from .mlp import MlpDenoiser, train_mlp
from .reports import report_to_dict, write_csv, write_json, write_pgm, write_report_csv

LN2 = math.log(2.0)


def _load_spec(cfg: RunConfig) -> GmmSpec:
    if cfg.data is None:
        raise ConfigError("this command needs a 'data' section", "data")
    if cfg.data.gmm is not None:
        return cfg.data.gmm
    if cfg.data.checkpoint is not None:
        obj = load_checkpoint(cfg.data.checkpoint)
        if not isinstance(obj, GmmSpec):
            raise ConfigError("data.checkpoint must contain a mixture spec", "data.checkpoint")
        return obj
    raise ConfigError("the 'data' section needs 'gmm' or 'checkpoint'", "data")


def _build_denoiser(cfg: RunConfig, spec: GmmSpec):
    if cfg.denoiser.kind == "closed_form":
        return gmm_mmse(spec)
    obj = load_checkpoint(cfg.denoiser.path)
    if isinstance(obj, GmmSpec):
        return gmm_mmse(obj)
    if isinstance(obj, MlpDenoiser):
        return obj
    raise ConfigError("denoiser.path holds no usable checkpoint", "denoiser.path")


def _build_dataset(cfg: RunConfig, spec: GmmSpec, rng) -> list[Sample]:
    """Samples from the data section: explicit points, or draws with conditions."""
    samples: list[Sample] = []
    if cfg.data.points is not None:
        if cfg.data.points.shape[1] != spec.dim:
            raise ConfigError(
                f"data.points have dimension {cfg.data.points.shape[1]} "
                f"but the spec has dimension {spec.dim}",
                "data.points",
            )
        samples.extend(Sample(x=row) for row in cfg.data.points)
    if cfg.data.n_samples is not None:
        conds = cfg.data.component_conditions
        if conds is not None and len(conds) != spec.n_components:
            raise ConfigError(
                f"data.component_conditions has {len(conds)} entries "
                f"for {spec.n_components} components",
                "data.component_conditions",
            )
        x, comps = spec.sample(cfg.data.n_samples, rng)
        for xi, k in zip(x, comps):
            condition = context = None
            if conds is not None and conds[k] is not None:
                condition = conds[k]
                if condition.context:
                    context = ConditionId(context=condition.context)
            samples.append(Sample(x=xi, condition=condition, context=context))
    if not samples:
        raise ConfigError("the 'data' section yields no samples (need points or n_samples)", "data")
    return samples


def _maybe_bits(report, bits: bool):
    return report.to_bits() if bits else report


def _streams(seed: int):
    """Fixed-order child seeds: dataset draws, estimation, training, editing."""
    return np.random.SeedSequence(seed).spawn(4)


def cmd_estimate(cfg: RunConfig) -> int:
    if cfg.estimate is None:
        raise ConfigError("the estimate command needs an 'estimate' section", "estimate")
    spec = _load_spec(cfg)
    den = _build_denoiser(cfg, spec)
    s_data, s_est, _, _ = _streams(cfg.seed)
    dataset = _build_dataset(cfg, spec, s_data)
    kind = cfg.estimate.kind
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if kind == "nll":
        children = s_est.spawn(len(dataset))
        reports = [
            estimators.nll(den, s.x, cfg.sampler, cfg.n_eps, child, condition=s.condition)
            for s, child in zip(dataset, children)
        ]
        aggregate = None
    elif kind in ("pointwise_s", "pointwise_o"):
        reports = estimators.pointwise_dataset(
            den, den, dataset, cfg.sampler, kind, cfg.n_eps, s_est
        )
        aggregate = None
    elif kind in ("mi", "cmi"):
        reports = estimators.pointwise_dataset(
            den,
            den,
            dataset,
            cfg.sampler,
            cfg.estimate.estimator_kind,
            cfg.n_eps,
            s_est,
            condition_on_context=(kind == "cmi"),
        )
        aggregate = estimators.aggregate_reports(reports, kind, cfg.sampler, cfg.n_eps)
    else:  # pragma: no cover - kinds are validated at parse time
        raise ConfigError(f"unsupported estimate kind {kind!r}", "estimate.kind")

    reports = [_maybe_bits(r, cfg.bits) for r in reports]
    write_report_csv(out / "estimates.csv", reports)
    payload = {
        "config": cfg.resolved(),
        "units": "bits" if cfg.bits else "nats",
        "reports": [report_to_dict(r) for r in reports],
    }
    if aggregate is not None:
        payload["aggregate"] = report_to_dict(_maybe_bits(aggregate, cfg.bits))
    write_json(out / "estimates.json", payload)
    return 0


def cmd_decompose(cfg: RunConfig) -> int:
    if cfg.decompose is None:
        raise ConfigError("the decompose command needs a 'decompose' section", "decompose")
    spec = _load_spec(cfg)
    den = _build_denoiser(cfg, spec)
    s_data, s_est, _, _ = _streams(cfg.seed)
    dataset = _build_dataset(cfg, spec, s_data)
    kind = cfg.decompose.kind
    reports = estimators.pointwise_dataset(
        den,
        den,
        dataset,
        cfg.sampler,
        "pointwise_o" if kind == "cmi" else kind,
        cfg.n_eps,
        s_est,
        condition_on_context=(kind == "cmi"),
    )
    reports = [_maybe_bits(r, cfg.bits) for r in reports]

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = spec.dim
    header = ["id", "total", "std_error"] + [f"dim_{j}" for j in range(d)]
    rows = [(i, r.total, r.std_error, *r.per_dim) for i, r in enumerate(reports)]
    write_csv(out / "decompose.csv", header, rows)

    mean_heatmap = np.mean([np.maximum(r.per_dim, 0.0) for r in reports], axis=0)
    payload = {
        "config": cfg.resolved(),
        "units": "bits" if cfg.bits else "nats",
        "reports": [report_to_dict(r) for r in reports],
        "mean_heatmap": [float(v) for v in mean_heatmap],
    }
    if cfg.data.grid is not None:
        rows_, cols = cfg.data.grid
        if rows_ * cols != d:
            raise ConfigError(
                f"data.grid {cfg.data.grid} does not tile dimension {d}", "data.grid"
            )
        write_pgm(out / "heatmap_mean.pgm", mean_heatmap.reshape(rows_, cols))
        for i, r in enumerate(reports):
            write_pgm(out / f"heatmap_{i}.pgm", np.maximum(r.per_dim, 0.0).reshape(rows_, cols))
    if cfg.data.truth_mask is not None:
        if cfg.data.truth_mask.shape[0] != d:
            raise ConfigError("data.truth_mask length must match the data dimension", "data.truth_mask")
        sweeps = [
            tasks.sweep_threshold(np.maximum(r.per_dim, 0.0), cfg.data.truth_mask) for r in reports
        ]
        payload["miou"] = float(np.mean([s.iou for s in sweeps]))
        payload["mean_heatmap_iou"] = tasks.sweep_threshold(mean_heatmap, cfg.data.truth_mask).iou
    write_json(out / "decompose.json", payload)
    return 0


def cmd_rank(cfg: RunConfig) -> int:
    if cfg.rank is None:
        raise ConfigError("the rank command needs a 'rank' section", "rank")
    spec = _load_spec(cfg)
    den = _build_denoiser(cfg, spec)
    tokens = cfg.rank.candidates or tuple(sorted(spec.condition_map))
    if len(tokens) < 2:
        raise ConfigError("ranking needs at least two candidate tokens", "rank.candidates")
    label_of = {}
    for token in tokens:
        if token not in spec.condition_map:
            raise ConfigError(f"unknown candidate token {token!r}", "rank.candidates")
        for k in spec.condition_map[token]:
            label_of[k] = token
    s_data, s_est, _, _ = _streams(cfg.seed)
    x, comps = spec.sample(cfg.rank.n_samples, s_data)
    missing = {int(k) for k in comps if int(k) not in label_of}
    if missing:
        raise ConfigError(
            f"components {sorted(missing)} carry no candidate token", "rank.candidates"
        )
    candidates = {t: ConditionId(label=t) for t in tokens}
    samples = tuple(
        tasks.RankingSample(
            x=xi,
            true_condition=candidates[label_of[int(k)]],
            distractors=tuple(candidates[t] for t in tokens if t != label_of[int(k)]),
        )
        for xi, k in zip(x, comps)
    )
    report = tasks.evaluate_ranking(
        tasks.RankingTask(samples=samples),
        den,
        den,
        cfg.sampler,
        n_eps=cfg.n_eps,
        seed=s_est,
        estimator_kind=cfg.rank.estimator_kind,
    )

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = ["id", "true", "chosen", "tie", "correct"] + [f"score_{t}" for t in tokens]
    rows = []
    for i, (sample, result) in enumerate(report.outcomes):
        ordered = [sample.true_condition, *sample.distractors]
        by_token = {c.label: s for c, s in zip(ordered, result.scores)}
        rows.append(
            (
                i,
                sample.true_condition.label,
                result.chosen.label,
                result.tie,
                result.chosen == sample.true_condition,
                *[by_token[t] for t in tokens],
            )
        )
    write_csv(out / "rank.csv", header, rows)
    write_json(
        out / "rank.json",
        {
            "config": cfg.resolved(),
            "accuracy": report.accuracy,
            "n_ties": report.n_ties,
            "per_condition": {c.label: acc for c, acc in report.per_condition.items()},
        },
    )
    return 0


def cmd_intervene(cfg: RunConfig) -> int:
    if cfg.intervene is None:
        raise ConfigError("the intervene command needs an 'intervene' section", "intervene")
    spec = _load_spec(cfg)
    den = _build_denoiser(cfg, spec)
    if cfg.data is None or cfg.data.component_conditions is None:
        raise ConfigError(
            "intervention needs data.component_conditions to label the samples",
            "data.component_conditions",
        )
    s_data, s_est, _, _ = _streams(cfg.seed)
    dataset = _build_dataset(cfg, spec, s_data)
    if any(s.condition is None or s.condition.label is None for s in dataset):
        raise ConfigError("every sampled component needs a labeled condition", "data.component_conditions")
    swap = cfg.intervene.swap
    children = s_est.spawn(len(dataset))

    rows = []
    scores, deltas = [], []
    for i, (sample, child) in enumerate(zip(dataset[: cfg.intervene.n_samples], children)):
        label = sample.condition.label
        if label not in swap:
            raise ConfigError(f"intervene.swap does not cover label {label!r}", "intervene.swap")
        cond_out = ConditionId(label=swap[label], context=sample.condition.context)
        roundtrip = flow_intervene(sample.x, den, sample.condition, sample.condition, cfg.solver)
        edited = flow_intervene(sample.x, den, sample.condition, cond_out, cfg.solver)
        score = estimators.pointwise_o(
            den,
            den,
            sample.x,
            sample.condition,
            cfg.sampler,
            n_eps=cfg.n_eps,
            seed=child,
            uncond_condition=sample.context,
        ).total
        if cfg.bits:
            score /= LN2
        scores.append(score)
        deltas.append(edited.delta_l2)
        rows.append(
            (
                i,
                label,
                "|".join(sample.condition.context),
                score,
                roundtrip.delta_l2,
                edited.delta_l2,
            )
        )

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "intervene.csv", ["id", "label", "context", "cmi", "roundtrip_l2", "delta_l2"], rows)
    summary = {
        "config": cfg.resolved(),
        "units": "bits" if cfg.bits else "nats",
        "n_samples": len(rows),
    }
    try:
        r = tasks.intervention_correlation(scores, deltas)
        summary["pearson_image_level"] = r
        if len(scores) >= 4:
            lo, hi = tasks.pearson_confidence(r, len(scores))
            summary["pearson_ci95"] = [lo, hi]
    except ValueError as exc:
        summary["pearson_image_level"] = None
        summary["pearson_note"] = str(exc)
    write_json(out / "intervene.json", summary)
    return 0


def cmd_train(cfg: RunConfig) -> int:
    if cfg.train is None:
        raise ConfigError("the train command needs a 'train' section", "train")
    spec = _load_spec(cfg)
    if cfg.data.n_samples is None:
        raise ConfigError("training needs data.n_samples", "data.n_samples")
    s_data, _, s_train, _ = _streams(cfg.seed)
    dataset = _build_dataset(cfg, spec, s_data)
    denoiser, trace = train_mlp(dataset, cfg.train.mlp, cfg.sampler, seed=s_train)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(denoiser, out / cfg.train.checkpoint_name)
    write_csv(out / "loss_trace.csv", ["step", "loss"], [(i + 1, v) for i, v in enumerate(trace)])
    write_json(
        out / "train.json",
        {
            "config": cfg.resolved(),
            "final_loss": float(trace[-1]),
            "vocabulary": list(denoiser.vocabulary),
            "checkpoint": cfg.train.checkpoint_name,
        },
    )
    return 0


def cmd_oracle(cfg: RunConfig) -> int:
    if cfg.oracle is None:
        raise ConfigError("the oracle command needs an 'oracle' section", "oracle")
    op, params = cfg.oracle.op, cfg.oracle.params
    if op == "gaussian_mi":
        result = oracle.gaussian_mi(params["correlation"])
    elif op == "mmse_gaussian":
        result = oracle.mmse_gaussian(params["variance"], LogSnr(params["alpha"]))
    elif op == "gaussian_pointwise":
        result = oracle.gaussian_pointwise(
            np.asarray(params["x"], dtype=float),
            np.asarray(params["y"], dtype=float),
            np.asarray(params["joint_covariance"], dtype=float),
        )
    else:
        spec = _load_spec(cfg)
        result = oracle.gmm_mi_numeric(spec, labels=params.get("labels"))
    value, bound = result.value, result.abs_error_bound
    if cfg.bits and op != "mmse_gaussian":
        value, bound = value / LN2, bound / LN2
    payload = {
        "op": op,
        "value": value,
        "method": result.method,
        "abs_error_bound": bound,
        "units": "mse" if op == "mmse_gaussian" else ("bits" if cfg.bits else "nats"),
    }
    print(json.dumps(payload, sort_keys=True))
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "oracle.json", {"config": cfg.resolved(), **payload})
    return 0


_COMMANDS = {
    "estimate": cmd_estimate,
    "decompose": cmd_decompose,
    "rank": cmd_rank,
    "intervene": cmd_intervene,
    "train": cmd_train,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffinfo",
        description="Information estimates, decompositions and flow interventions for denoising models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="path to the JSON configuration")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--bits", action="store_true", help="report information in bits instead of nats")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if args.out is not None:
            cfg = dataclasses.replace(cfg, out_dir=args.out)
        if args.bits:
            cfg = dataclasses.replace(cfg, bits=True)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
