"""Command line entry point: analytic, simulate and compare BER sweeps.

Configuration is YAML with three mandatory sections plus optional
``quad`` and ``outputs``::

    net:
      lambda_ap: 1.0e-2        # APs per m^2
      rho_blk: 1.0e-3          # blockages per m^2
      sigma_sense_dbw: -60     # sensing threshold, dB relative to 1 W
      q_int_dbm: 30            # interferer transmit power
      q_srv_dbm: 30            # serving AP transmit power
      alpha: 2.5
      m_shape: 3
      phi_deg: 15              # beamwidth
      len_rx: 0.15             # m
      dist_srv: 5              # m
      mod_c: 1
      eps_cont: 1.0e-3
      beam_geom_mode: half_angle
      contention_mode: tail_bound
      allow_zero_blockage: false
    sim:
      n_realizations: 20000
      seed: 0
      disc_radius: null        # m, null picks a noise-based radius
      blockage_mode: bernoulli
      serving_suppression: false
      engine: palm
      sense_tail: 1.0e-7
    sweep:
      variable: snr            # snr | sigma_sense | lambda_ap | rho_blk
      values: [0, 5, 10, 15, 20, 25, 30]
      snr_db: 20               # fixed SNR when the sweep is not over snr
    quad:
      abs_tol: 1.0e-10
      rel_tol: 1.0e-8
      max_subdivisions: 2000
      infinite_tail_transform: exp_substitution
    outputs:
      path: ber.csv
      format: csv              # csv | json-lines

Sweep values carry the unit of the swept key: dB for ``snr``, dBW for
``sigma_sense``, per m^2 for the densities. Every key has a default, so
a section may list only what differs.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from importlib import metadata
from pathlib import Path

import numpy as np
import yaml

from .estimators import AnalyticBerModel, MonteCarloBerModel
from .params import NetworkParams, ParameterError, dbm_to_watts, watts_to_dbm
from .simulator import SimParams, estimate_active_density
from .specfun import QuadratureSpec

__all__ = [
    "ConfigError",
    "SweepSpec",
    "OutputSpec",
    "ExperimentConfig",
    "BerCurvePoint",
    "parse_config",
    "config_to_dict",
    "load_config",
    "preset_configs",
    "run_analytic_curve",
    "run_simulated_curve",
    "run_compare",
    "flag_rows",
    "emit_output",
    "main",
]

COLUMNS = ("sweep_value", "ber_analytic", "ber_mc", "ci_half_width", "n_realizations", "lambda_active")
SWEEP_VARIABLES = ("snr", "sigma_sense", "lambda_ap", "rho_blk")
FORMATS = ("csv", "json-lines")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_FLAGGED = 0, 1, 2, 3

# acceptance tolerance used to flag compare rows
FLAG_MIN_BER = 1e-3
FLAG_REL_TOL = 0.15
FLAG_CI_MULT = 2.0


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class SweepSpec:
    variable: str = "snr"
    values: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    snr_db: float = 20.0


@dataclass(frozen=True)
class OutputSpec:
    path: str | None = None
    format: str = "csv"


@dataclass(frozen=True)
class ExperimentConfig:
    sim: SimParams
    sweep: SweepSpec = field(default_factory=SweepSpec)
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    outputs: OutputSpec = field(default_factory=OutputSpec)

    @property
    def net(self) -> NetworkParams:
        return self.sim.net


@dataclass(frozen=True)
class BerCurvePoint:
    sweep_value: float
    ber_analytic: float | None = None
    ber_mc: float | None = None
    ci_half_width: float | None = None
    n_realizations: int | None = None
    lambda_active: float | None = None


# ---------------------------------------------------------------------------
# configuration

_NET_LINEAR = ("lambda_ap", "rho_blk", "alpha", "m_shape", "len_rx", "dist_srv", "mod_c", "eps_cont")
_NET_FLAGS = ("beam_geom_mode", "contention_mode", "allow_zero_blockage")
_NET_KEYS = set(_NET_LINEAR) | set(_NET_FLAGS) | {"sigma_sense_dbw", "q_int_dbm", "q_srv_dbm", "phi_deg"}
_SIM_KEYS = {"n_realizations", "seed", "disc_radius", "blockage_mode", "serving_suppression", "engine", "sense_tail"}
_QUAD_KEYS = {f.name for f in fields(QuadratureSpec)}


def _section(raw, name, allowed):
    sec = raw.get(name)
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected a mapping")
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"{name}: unknown key(s) {sorted(unknown)}")
    return sec


def _number(sec, section, key, default):
    v = sec.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{section}.{key}: expected a number, got {v!r}")
    return float(v)


def _parse_net(sec) -> NetworkParams:
    d = NetworkParams()
    kw = {k: _number(sec, "net", k, getattr(d, k)) for k in _NET_LINEAR}
    kw["sigma_sense"] = 10.0 ** (_number(sec, "net", "sigma_sense_dbw", 10 * math.log10(d.sigma_sense)) / 10.0)
    kw["q_int"] = dbm_to_watts(_number(sec, "net", "q_int_dbm", watts_to_dbm(d.q_int)))
    kw["q_srv"] = dbm_to_watts(_number(sec, "net", "q_srv_dbm", watts_to_dbm(d.q_srv)))
    kw["phi"] = math.radians(_number(sec, "net", "phi_deg", math.degrees(d.phi)))
    for k in _NET_FLAGS:
        kw[k] = sec.get(k, getattr(d, k))
    if not isinstance(kw["allow_zero_blockage"], bool):
        raise ConfigError("net.allow_zero_blockage: expected true or false")
    try:
        return NetworkParams(**kw)
    except ParameterError as exc:
        raise ConfigError(f"net: {exc}") from exc


def parse_config(raw: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a parsed YAML/JSON mapping."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    unknown = set(raw) - {"net", "sim", "sweep", "quad", "outputs"}
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}")
    net = _parse_net(_section(raw, "net", _NET_KEYS))

    sim_sec = _section(raw, "sim", _SIM_KEYS)
    sd = SimParams(net=net)
    n_real = sim_sec.get("n_realizations", sd.n_realizations)
    seed = sim_sec.get("seed", sd.seed)
    for key, v in (("n_realizations", n_real), ("seed", seed)):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"sim.{key}: expected an integer, got {v!r}")
    radius = sim_sec.get("disc_radius")
    if radius is not None:
        radius = _number(sim_sec, "sim", "disc_radius", None)
    try:
        sim = SimParams(
            net=net,
            disc_radius=radius,
            n_realizations=n_real,
            seed=seed,
            blockage_mode=sim_sec.get("blockage_mode", sd.blockage_mode),
            serving_suppression=bool(sim_sec.get("serving_suppression", sd.serving_suppression)),
            engine=sim_sec.get("engine", sd.engine),
            sense_tail=_number(sim_sec, "sim", "sense_tail", sd.sense_tail),
        )
    except ParameterError as exc:
        raise ConfigError(f"sim: {exc}") from exc

    sw = _section(raw, "sweep", {"variable", "values", "snr_db"})
    variable = sw.get("variable", SweepSpec.variable)
    if variable not in SWEEP_VARIABLES:
        raise ConfigError(f"sweep.variable: must be one of {SWEEP_VARIABLES}, got {variable!r}")
    values = sw.get("values", list(SweepSpec.values))
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError("sweep.values: expected a non-empty list")
    try:
        values = tuple(float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sweep.values: {exc}") from exc
    if any(math.isnan(v) for v in values) or any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("sweep.values: must be strictly increasing")
    sweep = SweepSpec(variable, values, _number(sw, "sweep", "snr_db", SweepSpec.snr_db))
    _check_sweep_values(net, sweep)

    q = _section(raw, "quad", _QUAD_KEYS)
    try:
        quad = QuadratureSpec(**{**asdict(QuadratureSpec()), **q})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"quad: {exc}") from exc

    out = _section(raw, "outputs", {"path", "format"})
    fmt = out.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"outputs.format: must be one of {FORMATS}, got {fmt!r}")
    path = out.get("path")
    return ExperimentConfig(sim=sim, sweep=sweep, quad=quad, outputs=OutputSpec(None if path is None else str(path), fmt))


def _check_sweep_values(net, sweep):
    for v in sweep.values:
        try:
            _point_params(net, sweep.variable, v)
        except ParameterError as exc:
            raise ConfigError(f"sweep.values: {v!r} is invalid for {sweep.variable}: {exc}") from exc


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Inverse of :func:`parse_config` (units as in the file format)."""
    net = cfg.net
    net_d = {k: getattr(net, k) for k in _NET_LINEAR}
    net_d.update(
        sigma_sense_dbw=10.0 * math.log10(net.sigma_sense),
        q_int_dbm=watts_to_dbm(net.q_int),
        q_srv_dbm=watts_to_dbm(net.q_srv),
        phi_deg=math.degrees(net.phi),
    )
    net_d.update({k: getattr(net, k) for k in _NET_FLAGS})
    sim = cfg.sim
    sim_d = {k: getattr(sim, k) for k in sorted(_SIM_KEYS)}
    return {
        "net": net_d,
        "sim": sim_d,
        "sweep": {"variable": cfg.sweep.variable, "values": list(cfg.sweep.values), "snr_db": cfg.sweep.snr_db},
        "quad": asdict(cfg.quad),
        "outputs": {"path": cfg.outputs.path, "format": cfg.outputs.format},
    }


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    return parse_config(raw or {})


_SNR_GRID = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
_PRESETS = {
    # caption parameter sets; one curve per value of the listed key
    "fig3": ({"lambda_ap": 1e-1, "rho_blk": 1e-3}, "sigma_sense_dbw", [-70.0, -60.0, -50.0]),
    "fig4": ({"rho_blk": 1e-3, "sigma_sense_dbw": -60.0}, "lambda_ap", [1e-3, 1e-2, 1e-1]),
    "fig5": ({"lambda_ap": 1e-2, "sigma_sense_dbw": -60.0}, "rho_blk", [1e-4, 1e-3, 1e-2]),
}


def preset_configs(name: str, seed: int = 0, n_realizations: int | None = None) -> list[tuple[str, ExperimentConfig]]:
    """(curve label, config) pairs for a figure preset, one per curve."""
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(_PRESETS)}")
    base, key, curve_values = _PRESETS[name]
    out = []
    for v in curve_values:
        sim = {"seed": seed}
        if n_realizations is not None:
            sim["n_realizations"] = n_realizations
        raw = {"net": {**base, key: v}, "sim": sim, "sweep": {"variable": "snr", "values": _SNR_GRID}}
        out.append((f"{key}={v:g}", parse_config(raw)))
    return out


# ---------------------------------------------------------------------------
# runs


def _point_params(net: NetworkParams, variable: str, value: float) -> NetworkParams:
    if variable == "sigma_sense":
        return net.replace(sigma_sense=10.0 ** (value / 10.0))
    if variable in ("lambda_ap", "rho_blk"):
        return net.replace(**{variable: value})
    return net


def _net_kwargs(net: NetworkParams) -> dict:
    d = net.to_dict()
    d.pop("noise_pow")
    return d


def _analytic(cfg: ExperimentConfig):
    """(rows of BER, lambda_active) per sweep value."""
    sw = cfg.sweep
    model = AnalyticBerModel(**asdict(cfg.quad), **_net_kwargs(cfg.net))
    if sw.variable == "snr":
        model.fit()
        ber = model.predict(np.array(sw.values))
        return [(b, model.lambda_active_) for b in ber]
    out = []
    for v in sw.values:
        model.set_params(**_net_kwargs(_point_params(cfg.net, sw.variable, v))).fit()
        out.append((float(model.predict([sw.snr_db])[0]), model.lambda_active_))
    return out


def _monte_carlo(cfg: ExperimentConfig, workers: int):
    """(ber, half-width, n) per sweep value."""
    sw, sim = cfg.sweep, cfg.sim
    common = dict(
        n_realizations=sim.n_realizations,
        seed=sim.seed,
        disc_radius=sim.disc_radius,
        blockage_mode=sim.blockage_mode,
        serving_suppression=sim.serving_suppression,
        engine=sim.engine,
        sense_tail=sim.sense_tail,
        n_jobs=workers,
    )
    if sw.variable == "snr":
        finite = [v for v in sw.values if math.isfinite(v)]
        model = MonteCarloBerModel(max_snr_db=max(finite) if finite else 0.0, **common, **_net_kwargs(cfg.net))
        model.fit()
        ber, hw = model.predict_interval(np.array(sw.values))
        return [(float(b), float(h), sim.n_realizations) for b, h in zip(ber, hw)]
    out = []
    for v in sw.values:
        net = _point_params(cfg.net, sw.variable, v)
        model = MonteCarloBerModel(max_snr_db=sw.snr_db, **common, **_net_kwargs(net)).fit()
        ber, hw = model.predict_interval([sw.snr_db])
        out.append((float(ber[0]), float(hw[0]), sim.n_realizations))
    return out


def run_analytic_curve(cfg: ExperimentConfig) -> list[BerCurvePoint]:
    """Analytic BER per sweep value; Monte-Carlo fields left empty."""
    return [
        BerCurvePoint(sweep_value=v, ber_analytic=float(b), lambda_active=float(lam))
        for v, (b, lam) in zip(cfg.sweep.values, _analytic(cfg))
    ]


def run_simulated_curve(cfg: ExperimentConfig, workers: int = 1) -> list[BerCurvePoint]:
    """Monte-Carlo BER per sweep value; ``lambda_active`` is the simulated density."""
    sw = cfg.sweep
    mc = _monte_carlo(cfg, workers)
    dens_n = max(100, min(cfg.sim.n_realizations, 2000))
    rows = []
    for i, v in enumerate(sw.values):
        net = _point_params(cfg.net, sw.variable, v)
        if i == 0 or sw.variable != "snr":
            lam = estimate_active_density(cfg.sim.replace(net=net, n_realizations=dens_n), workers=workers).value
        b, hw, n = mc[i]
        rows.append(BerCurvePoint(sweep_value=v, ber_mc=b, ci_half_width=hw, n_realizations=n, lambda_active=lam))
    return rows


def run_compare(cfg: ExperimentConfig, workers: int = 1) -> list[BerCurvePoint]:
    """Both engines per sweep value; ``lambda_active`` is the analytic density."""
    an = _analytic(cfg)
    mc = _monte_carlo(cfg, workers)
    return [
        BerCurvePoint(
            sweep_value=v,
            ber_analytic=float(a),
            ber_mc=b,
            ci_half_width=hw,
            n_realizations=n,
            lambda_active=float(lam),
        )
        for v, (a, lam), (b, hw, n) in zip(cfg.sweep.values, an, mc)
    ]


def flag_rows(rows: list[BerCurvePoint]) -> list[int]:
    """Indices of compare rows outside the cross-engine tolerance.

    Only rows with analytic BER >= 1e-3 are judged; they are flagged when
    |mc - analytic| > max(15% of analytic, 2 x the 95% half-width).
    """
    bad = []
    for i, r in enumerate(rows):
        if r.ber_analytic is None or r.ber_mc is None or r.ber_analytic < FLAG_MIN_BER:
            continue
        tol = max(FLAG_REL_TOL * r.ber_analytic, FLAG_CI_MULT * (r.ci_half_width or 0.0))
        if abs(r.ber_mc - r.ber_analytic) > tol:
            bad.append(i)
    return bad


# ---------------------------------------------------------------------------
# output


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _json_value(v):
    if v is None:
        return None
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def render_rows(rows: list[BerCurvePoint], fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_cell(getattr(r, c)) for c in COLUMNS])
        return buf.getvalue()
    if fmt == "json-lines":
        return "".join(
            json.dumps({c: _json_value(getattr(r, c)) for c in COLUMNS}) + "\n" for r in rows
        )
    raise ConfigError(f"unknown format {fmt!r}")


def emit_output(rows: list[BerCurvePoint], outputs: OutputSpec, meta: dict | None = None) -> str:
    """Write rows (and a ``<path>.meta.json`` sidecar if ``meta`` is given).

    With no path the rows are returned and nothing is written.
    """
    text = render_rows(rows, outputs.format)
    if outputs.path is None:
        return text
    path = Path(outputs.path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        if meta is not None:
            Path(str(path) + ".meta.json").write_text(
                json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return text


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def build_metadata(cfg: ExperimentConfig, command: str, flagged=()) -> dict:
    net = cfg.net
    return {
        "command": command,
        "tool_version": _version(),
        "seed": cfg.sim.seed,
        "kappa_sign_mode": "plus",
        "laplace_argument_sign": "plus",
        "beam_geom_mode": net.beam_geom_mode,
        "contention_mode": net.contention_mode,
        "config": config_to_dict(cfg),
        "unit_conversions": {
            "sigma_sense": {"dbw": 10.0 * math.log10(net.sigma_sense), "watts": net.sigma_sense},
            "q_int": {"dbm": watts_to_dbm(net.q_int), "watts": net.q_int},
            "q_srv": {"dbm": watts_to_dbm(net.q_srv), "watts": net.q_srv},
            "phi": {"degrees": math.degrees(net.phi), "radians": net.phi},
            "snr": "SNR = q_srv * dist_srv^-alpha / noise_pow",
        },
        "flagged_rows": list(flagged),
    }


# ---------------------------------------------------------------------------
# entry point


def _parser():
    p = argparse.ArgumentParser(
        prog="mmwave-interference",
        description="Analytic and Monte-Carlo BER of directional mmWave networks with blockage and carrier sensing.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("analytic", "closed-form BER curve"),
        ("simulate", "Monte-Carlo BER curve"),
        ("compare", "both engines; exit status 3 if any row disagrees"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="YAML experiment file")
        s.add_argument("--preset", choices=sorted(_PRESETS), help="figure parameter set (one output per curve)")
        s.add_argument("--seed", type=int, help="override sim.seed")
        s.add_argument("--n-realizations", type=int, help="override sim.n_realizations")
        s.add_argument("--out", help="output path (default: stdout)")
        s.add_argument("--format", choices=FORMATS, help="output format (default: csv)")
        s.add_argument("--workers", type=int, default=1, help="worker processes for Monte-Carlo runs")
    return p


def _jobs(args) -> list[tuple[str | None, ExperimentConfig]]:
    if args.preset and args.config:
        raise ConfigError("--preset and --config are mutually exclusive")
    if args.preset:
        jobs = preset_configs(args.preset, seed=args.seed or 0, n_realizations=args.n_realizations)
    else:
        cfg = load_config(args.config) if args.config else parse_config({})
        jobs = [(None, cfg)]
    out = []
    for label, cfg in jobs:
        sim = cfg.sim
        if args.seed is not None:
            sim = sim.replace(seed=args.seed)
        if args.n_realizations is not None:
            sim = sim.replace(n_realizations=args.n_realizations)
        path = args.out if args.out is not None else cfg.outputs.path
        if path is not None and label is not None:
            p = Path(path)
            path = str(p.with_name(f"{p.stem}_{label}{p.suffix}"))
        fmt = args.format or cfg.outputs.format
        out.append((label, ExperimentConfig(sim=sim, sweep=cfg.sweep, quad=cfg.quad, outputs=OutputSpec(path, fmt))))
    return out


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        jobs = _jobs(args)
        status = EXIT_OK
        for label, cfg in jobs:
            if args.command == "analytic":
                rows, flagged = run_analytic_curve(cfg), []
            elif args.command == "simulate":
                rows, flagged = run_simulated_curve(cfg, args.workers), []
            else:
                rows = run_compare(cfg, args.workers)
                flagged = flag_rows(rows)
            meta = build_metadata(cfg, args.command, flagged)
            text = emit_output(rows, cfg.outputs, meta)
            if cfg.outputs.path is None:
                # keep stdout pure data; the header goes to stderr instead of a sidecar
                print("# meta " + json.dumps(meta, sort_keys=True), file=sys.stderr)
                if label is not None:
                    sys.stdout.write(f"# {label}\n")
                sys.stdout.write(text)
            for i in flagged:
                r = rows[i]
                print(
                    f"flagged: sweep_value={r.sweep_value:g} analytic={r.ber_analytic:.4e} "
                    f"mc={r.ber_mc:.4e} +/- {r.ci_half_width:.2e}",
                    file=sys.stderr,
                )
            if flagged:
                status = EXIT_FLAGGED
        return status
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ArithmeticError as exc:  # quadrature, series and divergence failures
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
