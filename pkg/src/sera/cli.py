"""Command-line driver: ``sera gen|weights|recover|separate|verify``."""
from __future__ import annotations

import hashlib
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import click
import numpy as np

from . import io
from .exceptions import ConfigurationError, DomainError, RecoveryError
from .quadrature import A_SERO, QuadratureMeasure, SampleSet, solve_weights
from .recovery import RecoveryParams, recover, separate_exponential_sum
from .synthesis import (ClutterSpec, TargetSpec, eval_blurred, eval_exp_sum, eval_model_G,
                        gen_clutter, gen_sample_points, gen_target, observation_noise)
from .verify import run_checks

EXIT_OK, EXIT_INPUT, EXIT_RECOVERY = 0, 2, 3


@dataclass
class RunConfig:
    """All knobs of a run. Every output embeds the resolved config."""

    q: int = 1
    n: float = 4.0
    rho: float = 2.0
    mu: float = 1.0
    eta: float = 2.0
    S: int = None
    v: float = 0.5
    refine: str = "fixed"
    weights_mode: str = "moment-exact"
    amplitude_mode: str = "normalized"
    rescale_mode: str = "derived"
    seed: int = 0
    # target generation
    kind: str = "spikes"
    L: int = 3
    target_radius: float = 3.0
    amp_min: float = 1.0
    amp_max: float = 2.0
    centers: list = None
    amplitudes: list = None
    exponents: list = None
    coefficients: list = None
    clutter_count: int = 0
    clutter_bv: float = 0.0
    noise_level: float = 0.0
    input_scale: str = "scaled"
    # sampling and recovery
    sample_level: float = None
    density_factor: float = 1.0
    beta: float = 0.25
    box_radius: float = None
    M_hint: float = None
    grid_spacing: float = None
    check_precision: bool = True
    validate_clusters: bool = True
    tolerances: dict = None
    # paths
    samples: str = None
    weights: str = None
    out: str = "sera_out"

    def __post_init__(self):
        if self.q < 1 or self.n <= 0:
            raise ConfigurationError("q must be >= 1 and n > 0")
        if self.rho < 1:
            raise ConfigurationError("rho must be >= 1")
        if self.kind not in ("spikes", "expsum"):
            raise ConfigurationError("kind must be 'spikes' or 'expsum'")
        if self.input_scale not in ("scaled", "model"):
            raise ConfigurationError("input_scale must be 'scaled' or 'model'")
        if self.v <= 0:
            raise ConfigurationError("v must be positive")

    @property
    def level(self):
        """Level of the sample box and quadrature."""
        return self.sample_level if self.sample_level is not None else self.rho * self.n

    def outdir(self):
        p = Path(self.out)
        p.mkdir(parents=True, exist_ok=True)
        return p

    def samples_path(self):
        return Path(self.samples) if self.samples else Path(self.out) / "samples.csv"

    def weights_path(self):
        return Path(self.weights) if self.weights else Path(self.out) / "weights.csv"

    def recovery_params(self):
        return RecoveryParams(n=self.n, rho=self.rho, mu=self.mu, eta=self.eta, S=self.S,
                              amplitude_mode=self.amplitude_mode, rescale_mode=self.rescale_mode,
                              refine=self.refine, scale_v=self.v, box_radius=self.box_radius,
                              M_hint=self.M_hint, grid_spacing=self.grid_spacing,
                              check_precision=self.check_precision,
                              validate_clusters=self.validate_clusters)

    def to_dict(self):
        return asdict(self)


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(name, raw):
    f = _FIELDS[name]
    default = RunConfig.__dataclass_fields__[name].default
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", "str")
    if raw.lower() in ("none", "null"):
        return None
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes"):
            return True
        if raw.lower() in ("0", "false", "no"):
            return False
        raise ConfigurationError(f"--{name} expects true/false")
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind in ("list", "dict"):
            import json
            return json.loads(raw)
    except ValueError:
        raise ConfigurationError(f"--{name}: cannot parse {raw!r}") from None
    return raw if default is None or isinstance(default, str) else raw


def parse_overrides(args):
    """``--key value`` pairs (dashes or underscores) to a dict of typed values."""
    out = {}
    i = 0
    while i < len(args):
        tok = args[i]
        if not tok.startswith("--"):
            raise ConfigurationError(f"unexpected argument {tok!r}")
        key = tok[2:].replace("-", "_")
        if "=" in key:
            key, raw = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(args):
                raise ConfigurationError(f"missing value for {tok}")
            raw = args[i + 1]
            i += 2
        if key not in _FIELDS:
            raise ConfigurationError(f"unknown config key {key!r}")
        out[key] = _coerce(key, raw)
    return out


def load_config(path, overrides, defaults=None):
    """Command defaults, then the JSON file, then flag overrides."""
    base = dict(defaults or {})
    if path:
        data = io.read_json(path)
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a JSON object")
        unknown = set(data) - set(_FIELDS)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        base.update(data)
    base.update(overrides)
    try:
        return RunConfig(**base)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


def _apply_threads():
    raw = os.environ.get("SERA_THREADS")
    if not raw:
        return None
    try:
        k = int(raw)
        if k < 1:
            raise ValueError
    except ValueError:
        raise ConfigurationError(f"SERA_THREADS must be a positive integer, got {raw!r}") from None
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=k)


def _run(action, ctx, defaults=None):
    try:
        cfg = load_config(ctx.obj.get("config"), parse_overrides(ctx.args), defaults)
        limiter = _apply_threads()
        try:
            action(cfg)
        finally:
            if limiter is not None:
                limiter.restore_original_limits()
    except RecoveryError as exc:
        click.echo(f"recovery failed: {exc}", err=True)
        sys.exit(EXIT_RECOVERY)
    except (DomainError, ConfigurationError, FileNotFoundError, OSError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    sys.exit(EXIT_OK)


_CTX = {"ignore_unknown_options": True, "allow_extra_args": True}


@click.group()
@click.option("--config", "config", type=click.Path(dir_okay=False), default=None,
              help="JSON config file; --key value flags override its fields.")
@click.pass_context
def main(ctx, config):
    """Spike recovery and exponential-sum separation from scattered samples."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = config


def _with_config(f, defaults=None):
    # accept --config after the subcommand too
    def wrapper(ctx):
        args = list(ctx.args)
        if "--config" in args:
            i = args.index("--config")
            ctx.obj["config"] = args[i + 1]
            del args[i:i + 2]
            ctx.args = args
        _run(f, ctx, defaults)
    wrapper.__name__ = f.__name__
    wrapper.__doc__ = f.__doc__
    return wrapper


def _model_points(cfg, pts):
    return 2 * cfg.v * pts if cfg.input_scale == "model" else pts


def do_gen(cfg):
    """Write a target JSON and a samples CSV."""
    out = cfg.outdir()
    samples = gen_sample_points(cfg.q, A_SERO, cfg.level, cfg.density_factor, cfg.beta, cfg.seed)
    pts = samples.points
    meta = {"config": cfg.to_dict(), "sample_count": len(samples), "sample_level": cfg.level}
    if cfg.kind == "expsum":
        ex = np.asarray(cfg.exponents if cfg.exponents is not None else [[1.0]], dtype=float)
        ex = ex.reshape(-1, cfg.q)
        co = np.asarray(cfg.coefficients if cfg.coefficients is not None else [1.0], dtype=float)
        values = eval_exp_sum(ex, co, pts)
        meta.update({"kind": "expsum", "exponents": ex.tolist(), "coefficients": co.tolist()})
    else:
        if cfg.centers is not None:
            target = TargetSpec(np.asarray(cfg.centers, dtype=float).reshape(-1, cfg.q),
                                cfg.amplitudes, cfg.v, cfg.eta)
        else:
            target = gen_target(cfg.seed, cfg.L, cfg.q, cfg.target_radius, cfg.eta,
                                (cfg.amp_min, cfg.amp_max), cfg.v)
        clutter = None
        if cfg.clutter_count > 0 and cfg.clutter_bv > 0:
            clutter = gen_clutter(cfg.seed + 1, cfg.clutter_count, cfg.q, cfg.target_radius,
                                  cfg.clutter_bv)
        if cfg.input_scale == "model":
            values = eval_model_G(target, 2 * cfg.v * pts)
            if clutter is not None:
                values = values + (4 * math.pi * cfg.v ** 2) ** (-cfg.q / 2) * clutter.blur(pts)
        else:
            values = eval_blurred(target, clutter, pts)
        meta.update({"kind": "spikes", "target": target.to_dict(),
                     "clutter": clutter.to_dict() if clutter is not None else None})
    if cfg.noise_level > 0:
        values = values + observation_noise(cfg.seed + 2, values.size, cfg.noise_level)
        meta["observation_noise"] = {"level": cfg.noise_level,
                                     "note": "i.i.d. uniform per sample, outside the clutter model"}
    io.write_table(cfg.samples_path(), _model_points(cfg, pts), values)
    io.write_json(out / "target.json", meta)
    click.echo(f"wrote {len(samples)} samples to {cfg.samples_path()}")


def _read_samples(cfg):
    pts, vals = io.read_table(cfg.samples_path())
    if pts.shape[1] != cfg.q:
        raise ConfigurationError(f"samples have q={pts.shape[1]}, config says q={cfg.q}")
    if cfg.input_scale == "model":
        pts = pts / (2 * cfg.v)
        vals = (4 * math.pi * cfg.v ** 2) ** (cfg.q / 2) * vals
    return pts, vals


def _weights_key(cfg, pts):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(pts).tobytes())
    h.update(repr((cfg.level, cfg.weights_mode, A_SERO, cfg.beta)).encode())
    return h.hexdigest()


def _weights(cfg, pts, force=False):
    """Weights for ``pts``; reuses the cached CSV when the hash matches."""
    wpath = cfg.weights_path()
    dpath = wpath.with_suffix(".json")
    key = _weights_key(cfg, pts)
    if not force and wpath.exists() and dpath.exists():
        meta = io.read_json(dpath)
        if meta.get("hash") == key:
            wpts, w = io.read_weights(wpath)
            qm = QuadratureMeasure(wpts, w, A_SERO, cfg.level, meta["degree_budget"],
                                   meta["mode"], meta.get("diagnostics", {}))
            return qm, True
    qm = solve_weights(SampleSet(pts, A=A_SERO, n=cfg.level), mode=cfg.weights_mode,
                       beta=cfg.beta, check_mesh=cfg.q == 1)
    io.write_weights(wpath, qm)
    io.write_json(dpath, {"hash": key, "config": cfg.to_dict(), **qm.to_dict()})
    return qm, False


def do_weights(cfg):
    """Solve (or reuse) quadrature weights for the samples."""
    cfg.outdir()
    pts, _ = _read_samples(cfg)
    qm, cached = _weights(cfg, pts)
    d = qm.diagnostics
    click.echo(f"{'cached' if cached else 'solved'} weights: residual {d.get('residual_norm', float('nan')):.3g}, "
               f"product orthogonality {d.get('product_orthogonality_residual', float('nan')):.3g}")


def _write_failure(path, cfg, exc):
    payload = {"config": cfg.to_dict(), "error": type(exc).__name__, "message": str(exc)}
    for attr in ("report", "floor", "limit", "level"):
        if getattr(exc, attr, None) is not None:
            payload[attr] = getattr(exc, attr)
    io.write_json(path, payload)


def _dump_fields(out, res, prefix):
    for key, fv in res.fields.items():
        io.write_field(out / f"{prefix}_{key}.csv", fv.points, fv.values)


def do_recover(cfg):
    """Recover spikes; writes spikes JSON and field CSVs."""
    out = cfg.outdir()
    pts, vals = _read_samples(cfg)
    qm, _ = _weights(cfg, pts)
    try:
        res = recover(vals, qm, cfg.recovery_params())
    except RecoveryError as exc:
        _write_failure(out / "spikes.json", cfg, exc)
        raise
    payload = res.to_dict()
    payload["config"] = cfg.to_dict()
    payload["quadrature"] = qm.to_dict()
    io.write_json(out / "spikes.json", payload)
    _dump_fields(out, res, "field")
    click.echo(f"recovered {res.count} spikes")


def do_separate(cfg):
    """Separate an exponential sum from samples of f."""
    out = cfg.outdir()
    pts, vals = io.read_table(cfg.samples_path())
    if pts.shape[1] != cfg.q:
        raise ConfigurationError(f"samples have q={pts.shape[1]}, config says q={cfg.q}")
    qm, _ = _weights(cfg, pts)
    try:
        res = separate_exponential_sum(qm, vals, cfg.recovery_params())
    except RecoveryError as exc:
        _write_failure(out / "separation.json", cfg, exc)
        raise
    payload = res.to_dict()
    payload["config"] = cfg.to_dict()
    io.write_json(out / "separation.json", payload)
    click.echo(f"separated {res.count} exponentials")


def do_verify(cfg):
    """Run the oracle suite and write verify.json."""
    out = cfg.outdir()
    report = run_checks(q=cfg.q, n=cfg.n, seed=cfg.seed, tolerances=cfg.tolerances)
    report["config"] = cfg.to_dict()
    io.write_json(out / "verify.json", report)
    for item in report["items"]:
        click.echo(f"{'PASS' if item['passed'] else 'FAIL'} {item['name']}: "
                   f"{item['value']:.3g} (tol {item['tolerance']:.1g})")


# verify checks the oracle fixture at n = 3 unless told otherwise
for _name, _fn, _defaults in (("gen", do_gen, None), ("weights", do_weights, None),
                              ("recover", do_recover, None), ("separate", do_separate, None),
                              ("verify", do_verify, {"n": 3.0})):
    main.command(name=_name, context_settings=_CTX, help=_fn.__doc__)(
        click.pass_context(_with_config(_fn, _defaults)))


if __name__ == "__main__":
    main()
