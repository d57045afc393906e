"""Command-line front end: run, sweep, mitigate, report.

The tool reads a TOML config, runs the simulator in exact-enumeration or
shot-sampling mode, and writes plot-ready CSV tables plus a JSON manifest
recording the resolved configuration.  All CSV output is UTF-8 with LF
line endings, a header row, and 12-significant-digit values, so files are
byte-stable for a fixed seed and config.

Exit codes: 0 on success, 2 for configuration or input-data problems,
3 for numerical-domain failures.
"""

from __future__ import annotations

import functools
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:                      # Python < 3.11
    import tomli as tomllib

from . import __version__
from .circuit import prepare_w
from .errors import (ConfigError, DataError, InvalidArgumentError,
                     NumericalDomainError)
from .measures import (PSI_PLUS, bennett_lower_bound, concurrence,
                       eof_from_concurrence, expected_entanglement,
                       fully_entangled_fraction, success_probability)
from .noise import (CountsTable, NoisyWParams, ReadoutModel,
                    degrade_to_fidelity, depolarizing_weight_for_fidelity,
                    load_readout_model, make_fidelity_ramp, mitigate_readout)
from .protocol import (EpsilonSchedule, ProtocolConfig, StageHook, Variant,
                       run_no_mcm, run_random_party, run_specific_party)
from .qstate import DensityMatrix, fidelity
from .stats import (ShotPlan, conditioned_fidelity, estimate_rate,
                    sample_protocol)

DEFAULT_SHOTS = 100_000
DEFAULT_TRIALS = 5
DEFAULT_SEED = 20240817
DEFAULT_PREP_FIDELITY = 0.97

_W_TARGET = prepare_w(3)

_VARIANTS = {
    "mcm": Variant.MCM,
    "no-mcm": Variant.NO_MCM,
    "specific": Variant.SPECIFIC_PARTY,
    "specific-party": Variant.SPECIFIC_PARTY,
}
_MODES = {"exact": "exact", "mc": "mc", "montecarlo": "mc"}
_SWEEP_AXES = ("rounds", "epsilon", "initial_fidelity")


@dataclass(frozen=True)
class RunConfig:
    """Resolved tool configuration (config file plus CLI overrides)."""

    variant: Variant
    rounds: int
    schedule_kind: str                  # "optimal" | "explicit"
    schedule_values: Optional[tuple]    # explicit strengths, round order
    initial_fidelity: Optional[float]   # None = ideal preparation
    fidelity_step: Optional[float]      # linear per-stage degradation
    fidelity_targets: Optional[tuple]   # explicit per-stage fidelity targets
    readout_path: Optional[str]
    shots: int
    trials: int
    seed: int
    mode: str                           # "exact" | "mc"
    sweep: Optional[dict] = None

    def epsilon_schedule(self, rounds: Optional[int] = None) -> EpsilonSchedule:
        n = self.rounds if rounds is None else rounds
        if self.schedule_kind == "explicit":
            return EpsilonSchedule(self.schedule_values)
        return EpsilonSchedule.optimal(n)

    def stage_hook(self) -> Optional[StageHook]:
        if self.initial_fidelity is None:
            return None
        if self.fidelity_targets is not None:
            return _targets_hook(self.fidelity_targets)
        if self.fidelity_step:
            return make_fidelity_ramp(self.initial_fidelity, self.fidelity_step)
        return None

    def noise_params(self) -> Optional[NoisyWParams]:
        if self.initial_fidelity is None:
            return None
        return NoisyWParams(depolarizing_weight_for_fidelity(self.initial_fidelity))

    def initial_state(self):
        params = self.noise_params()
        return prepare_w(3) if params is None else params.prepared_state()

    def readout_model(self) -> Optional[ReadoutModel]:
        if self.readout_path is None:
            return None
        return load_readout_model(self.readout_path)

    def protocol_config(self, rounds: Optional[int] = None,
                        schedule: Optional[EpsilonSchedule] = None,
                        hook: Optional[StageHook] = "default") -> ProtocolConfig:
        n = self.rounds if rounds is None else rounds
        if hook == "default":
            hook = self.stage_hook()
        return ProtocolConfig(
            n_rounds=n,
            schedule=self.epsilon_schedule(n) if schedule is None else schedule,
            variant=self.variant,
            stage_hook=hook)

    def shot_plan(self) -> ShotPlan:
        return ShotPlan(self.shots, self.trials, self.seed)

    def manifest_dict(self) -> dict:
        noise = None
        if self.initial_fidelity is not None:
            noise = {"initial_fidelity": self.initial_fidelity}
            if self.fidelity_targets is not None:
                noise["per_round_fidelity"] = list(self.fidelity_targets)
            else:
                noise["fidelity_step"] = self.fidelity_step or 0.0
        return {
            "variant": self.variant.value,
            "rounds": self.rounds,
            "schedule": list(self.epsilon_schedule().values),
            "mode": self.mode,
            "shots": self.shots,
            "trials": self.trials,
            "seed": self.seed,
            "noise": noise,
            "readout": self.readout_path,
        }


def _targets_hook(targets: tuple) -> StageHook:
    """Degrade the state to an explicit fidelity target before each stage."""
    def hook(state: DensityMatrix, stage: int) -> DensityMatrix:
        if 1 <= stage <= len(targets):
            return degrade_to_fidelity(state, targets[stage - 1])
        return state
    return hook


def _section(data: dict, name: str) -> dict:
    got = data.get(name, {})
    if not isinstance(got, dict):
        raise ConfigError(f"[{name}] must be a table")
    return dict(got)


def _take(table: dict, key: str, default=None):
    return table.pop(key, default)


def _reject_unknown(table: dict, where: str) -> None:
    if table:
        names = ", ".join(sorted(table))
        raise ConfigError(f"unknown {where} key(s): {names}")


def load_run_config(path: str, seed: Optional[int] = None,
                    mode: Optional[str] = None, shots: Optional[int] = None,
                    trials: Optional[int] = None) -> RunConfig:
    """Parse a TOML config file and apply command-line overrides."""
    config_path = Path(path)
    try:
        with open(config_path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    top = dict(data)

    variant_name = str(_take(top, "variant", "mcm"))
    if variant_name not in _VARIANTS:
        raise ConfigError(f"unknown variant {variant_name!r}; "
                          f"choose from mcm, no-mcm, specific")
    variant = _VARIANTS[variant_name]

    rounds = _take(top, "rounds", 1)
    if isinstance(rounds, bool) or not isinstance(rounds, int) or rounds < 1:
        raise ConfigError(f"rounds must be a positive integer, got {rounds!r}")

    config_mode = _take(top, "mode", "exact")
    mode_name = str(mode) if mode is not None else str(config_mode)
    if mode_name not in _MODES:
        raise ConfigError(f"unknown mode {mode_name!r}; choose exact or mc")

    def _int_setting(name, override, default):
        config_value = _take(top, name, default)
        value = override if override is not None else config_value
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise ConfigError(f"{name} must be a non-negative integer")
        return value

    shots_v = _int_setting("shots", shots, DEFAULT_SHOTS)
    trials_v = _int_setting("trials", trials, DEFAULT_TRIALS)
    seed_v = _int_setting("seed", seed, DEFAULT_SEED)
    if shots_v < 1 or trials_v < 1:
        raise ConfigError("shots and trials must be at least 1")

    sched = _section(top, "schedule")
    _take(top, "schedule")
    kind = str(_take(sched, "kind", "optimal"))
    values = _take(sched, "values")
    _reject_unknown(sched, "[schedule]")
    if kind not in ("optimal", "explicit"):
        raise ConfigError(f"schedule kind must be optimal or explicit, got {kind!r}")
    if kind == "explicit":
        if not isinstance(values, list) or not values:
            raise ConfigError("explicit schedule needs a values list")
        if len(values) != rounds:
            raise ConfigError(f"schedule has {len(values)} entries "
                              f"for {rounds} rounds")
        values = tuple(float(v) for v in values)
    else:
        if values is not None:
            raise ConfigError("schedule values are only valid with kind = explicit")
        values = None

    noise = _section(top, "noise")
    _take(top, "noise")
    initial_fidelity = _take(noise, "initial_fidelity")
    fidelity_step = _take(noise, "fidelity_step")
    per_round = _take(noise, "per_round_fidelity")
    _reject_unknown(noise, "[noise]")
    fidelity_targets = None
    if initial_fidelity is not None or fidelity_step is not None \
            or per_round is not None:
        if initial_fidelity is None:
            raise ConfigError("[noise] needs initial_fidelity")
        initial_fidelity = float(initial_fidelity)
        if not 0.125 <= initial_fidelity <= 1.0:
            raise ConfigError(
                f"initial_fidelity {initial_fidelity} outside [1/8, 1]")
        if fidelity_step is not None and per_round is not None:
            raise ConfigError(
                "give fidelity_step or per_round_fidelity, not both")
        if per_round is not None:
            if not isinstance(per_round, list) or not per_round:
                raise ConfigError("per_round_fidelity must be a non-empty list")
            fidelity_targets = tuple(float(v) for v in per_round)
            for v in fidelity_targets:
                if not 0.125 <= v <= 1.0:
                    raise ConfigError(f"fidelity target {v} outside [1/8, 1]")
        if fidelity_step is not None:
            fidelity_step = float(fidelity_step)
            if fidelity_step < 0.0:
                raise ConfigError("fidelity_step must be non-negative")

    readout = _section(top, "readout")
    _take(top, "readout")
    readout_path = _take(readout, "model")
    _reject_unknown(readout, "[readout]")
    if readout_path is not None:
        readout_path = str(config_path.parent / str(readout_path))

    sweep = _take(top, "sweep")
    if sweep is not None and not isinstance(sweep, dict):
        raise ConfigError("[sweep] must be a table")

    _reject_unknown(top, "config")
    return RunConfig(
        variant=variant, rounds=rounds, schedule_kind=kind,
        schedule_values=values, initial_fidelity=initial_fidelity,
        fidelity_step=fidelity_step, fidelity_targets=fidelity_targets,
        readout_path=readout_path, shots=shots_v, trials=trials_v,
        seed=seed_v, mode=_MODES[mode_name], sweep=sweep)


# ---------------------------------------------------------------------------
# output helpers


def _format_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.12g" % float(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format_value(v) for v in row) + "\n")


def _write_manifest(out_dir: Path, command: str, config: Optional[dict],
                    outputs, extra: Optional[dict] = None) -> None:
    manifest = {"version": __version__, "command": command,
                "outputs": sorted(outputs)}
    if config is not None:
        manifest["config"] = config
    if extra:
        manifest.update(extra)
    text = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    with open(out_dir / "manifest.json", "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(text)


def _pair_quality(pair: Optional[DensityMatrix]):
    """(fidelity to the triplet state, EoF lower bound) of a kept pair."""
    if pair is None:
        return None
    return (fidelity(pair, PSI_PLUS),
            bennett_lower_bound(fully_entangled_fraction(pair)))


def _pair_eof(pair: Optional[DensityMatrix]) -> Optional[float]:
    if pair is None:
        return None
    return eof_from_concurrence(concurrence(pair))


def _nanmean_sigma(values):
    """Mean and ddof-1 sigma over present values; (nan, nan) when empty."""
    vals = [v for v in values if v is not None]
    if not vals:
        return float("nan"), float("nan")
    mean = float(np.mean(vals))
    sigma = float(np.std(vals, ddof=1)) if len(vals) > 1 else float("nan")
    return mean, sigma


# ---------------------------------------------------------------------------
# exact / sampled run engines


def _run_exact(cfg: RunConfig):
    """One exact-enumeration run -> (success_row, fidelity_rows, ent_rows)."""
    initial = cfg.initial_state()
    if cfg.variant is Variant.SPECIFIC_PARTY:
        if cfg.stage_hook() is not None:
            raise ConfigError(
                "stage degradation does not apply to the specific-party variant")
        result = run_specific_party(initial)
    elif cfg.variant is Variant.NO_MCM:
        result = run_no_mcm(cfg.protocol_config(), initial)
    else:
        result = run_random_party(cfg.protocol_config(), initial)

    p_success = success_probability(result)
    expected = expected_entanglement(result)
    n = result.n_rounds
    success_row = (0 if cfg.variant is Variant.SPECIFIC_PARTY else n,
                   p_success, 0.0, False, expected, 0.0)

    fidelity_rows = []
    for rec in result.rounds:
        if rec.w_state_after is None:
            fidelity_rows.append((rec.round_index, float("nan"), 0.0))
        else:
            fidelity_rows.append(
                (rec.round_index, fidelity(rec.w_state_after, _W_TARGET), 0.0))

    ent_rows = []
    for rec in result.rounds:
        acc = np.zeros((4, 4), dtype=complex)
        weight = 0.0
        for party, p in enumerate(rec.p_epr_by_party):
            state = rec.distilled_states.get(party)
            if state is None or p <= 0.0:
                continue
            acc += p * state.elements
            weight += p
        quality = _pair_quality(DensityMatrix(acc / weight) if weight > 0 else None)
        if quality is None:
            ent_rows.append((rec.round_index, float("nan"), float("nan"), 0.0))
        else:
            ent_rows.append((rec.round_index, quality[0], quality[1], 0.0))
    strong = result.strong_record
    quality = None
    if strong is not None and strong.p_epr > 0.0 and strong.distilled_state is not None:
        quality = _pair_quality(strong.distilled_state)
    if quality is None:
        ent_rows.append((n + 1, float("nan"), float("nan"), 0.0))
    else:
        ent_rows.append((n + 1, quality[0], quality[1], 0.0))
    return success_row, fidelity_rows, ent_rows


def _trial_expected_eof(trial, mitigated: bool,
                        readout: Optional[ReadoutModel]) -> float:
    """Per-trial expected EoF: success weights times their pairs' EoF."""
    survival = 1.0
    total = 0.0
    for k, table in enumerate(trial.rounds):
        if table.shots <= 0:
            raise DataError(
                f"round {k + 1} has no recorded shots; the estimate is undefined")
        if mitigated:
            table = mitigate_readout(readout, table, clamp=True)
        vec = table.vector()
        norm = float(vec.sum())
        one_hot = float(vec[1] + vec[2] + vec[4]) / norm
        eof = _pair_eof(trial.pair_states[k])
        if eof is not None and one_hot > 0.0:
            total += survival * one_hot * eof
        survival *= float(vec[0]) / norm
    if trial.strong.shots <= 0:
        raise DataError(
            "no shots reached the strong measurement; the estimate is undefined")
    strong_one = float(trial.strong.counts.get("1", 0.0)) / float(trial.strong.shots)
    eof = _pair_eof(trial.strong_pair_state)
    if eof is not None and strong_one > 0.0:
        total += survival * strong_one * eof
    return total


def _run_sampled(cfg: RunConfig, mitigated: bool):
    """One shot-sampled run -> (success_row, fidelity_rows, ent_rows)."""
    readout = cfg.readout_model()
    if mitigated and readout is None:
        raise ConfigError("--mitigated needs a [readout] model in the config")
    pcfg = cfg.protocol_config()
    trials = sample_protocol(pcfg, cfg.shot_plan(),
                             noise=cfg.noise_params(), readout=readout)
    rates = estimate_rate(trials, mitigated=mitigated, readout=readout)
    eof_mean, eof_sigma = _nanmean_sigma(
        [_trial_expected_eof(t, mitigated, readout) for t in trials])
    n = 0 if cfg.variant is Variant.SPECIFIC_PARTY else cfg.rounds
    success_row = (n, rates.p_success.mean, rates.p_success.sigma, mitigated,
                   eof_mean, eof_sigma)

    fidelity_rows = []
    for k in range(1, n + 1):
        est = conditioned_fidelity(trials, _W_TARGET, round_index=k)
        fidelity_rows.append((k, est.mean, est.sigma))

    ent_rows = []
    for k in range(1, n + 1):
        qualities = [_pair_quality(t.pair_states[k - 1]) for t in trials]
        fid_mean, _ = _nanmean_sigma([q and q[0] for q in qualities])
        bound_mean, bound_sigma = _nanmean_sigma([q and q[1] for q in qualities])
        ent_rows.append((k, fid_mean, bound_mean, bound_sigma))
    qualities = [_pair_quality(t.strong_pair_state) for t in trials]
    fid_mean, _ = _nanmean_sigma([q and q[0] for q in qualities])
    bound_mean, bound_sigma = _nanmean_sigma([q and q[1] for q in qualities])
    ent_rows.append((n + 1, fid_mean, bound_mean, bound_sigma))
    return success_row, fidelity_rows, ent_rows


def _specific_expected_eof(initial) -> float:
    return expected_entanglement(run_specific_party(initial))


# ---------------------------------------------------------------------------
# commands


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NumericalDomainError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except (ValueError, OSError, NotImplementedError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
    return wrapper


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


_CONFIG_OPT = click.option("--config", "config_path", required=True,
                           type=click.Path(exists=True, dir_okay=False),
                           help="TOML configuration file.")
_OUT_OPT = click.option("--out", "out_path", required=True,
                        type=click.Path(file_okay=False),
                        help="Output directory (created if missing).")


@click.group()
@click.version_option(__version__)
def main():
    """Weak-measurement pair-distillation simulator."""


@main.command("run")
@_CONFIG_OPT
@_OUT_OPT
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--mode", type=click.Choice(sorted(_MODES)), default=None,
              help="Override the config mode.")
@click.option("--shots", type=int, default=None, help="Override shots per trial.")
@click.option("--trials", type=int, default=None, help="Override trial count.")
@click.option("--mitigated", is_flag=True,
              help="Apply readout mitigation to sampled estimates.")
@_guarded
def cmd_run(config_path, out_path, seed, mode, shots, trials, mitigated):
    """Run the protocol once and write success/fidelity/entanglement tables.

    success.csv has one row: rounds, p_success, sigma, mitigated_flag,
    expected_eof, eof_sigma.  fidelity.csv lists the post-selected shared
    state's fidelity per round; entanglement.csv lists the kept pairs'
    fidelity and EoF lower bound per round, the final row (round = N+1)
    being the strong-measurement stage.
    """
    cfg = load_run_config(config_path, seed, mode, shots, trials)
    if mitigated and cfg.mode == "exact":
        raise ConfigError("--mitigated only applies to sampled (mc) runs")
    if cfg.mode == "exact":
        success_row, fidelity_rows, ent_rows = _run_exact(cfg)
    else:
        success_row, fidelity_rows, ent_rows = _run_sampled(cfg, mitigated)
    out = _out_dir(out_path)
    _write_csv(out / "success.csv",
               ("rounds", "p_success", "sigma", "mitigated_flag",
                "expected_eof", "eof_sigma"),
               [success_row])
    _write_csv(out / "fidelity.csv", ("round", "w_fidelity", "sigma"),
               fidelity_rows)
    _write_csv(out / "entanglement.csv",
               ("round", "pair_fidelity", "eof_lower_bound", "sigma"),
               ent_rows)
    _write_manifest(out, "run", cfg.manifest_dict(),
                    ["success.csv", "fidelity.csv", "entanglement.csv"],
                    extra={"mitigated": bool(mitigated)})
    click.echo(f"p_success = {_format_value(success_row[1])}  "
               f"expected_eof = {_format_value(success_row[4])}")


def _sweep_values(cfg: RunConfig) -> tuple:
    sweep = dict(cfg.sweep or {})
    axis = str(sweep.pop("axis", ""))
    if axis not in _SWEEP_AXES:
        raise ConfigError(
            f"[sweep] axis must be one of {', '.join(_SWEEP_AXES)}")
    values = sweep.pop("values", None)
    start = sweep.pop("start", None)
    stop = sweep.pop("stop", None)
    step = sweep.pop("step", None)
    _reject_unknown(sweep, "[sweep]")
    if values is None:
        if start is None or stop is None:
            raise ConfigError("[sweep] needs either values or start/stop")
        if axis == "rounds":
            step = int(step if step is not None else 1)
            if step < 1:
                raise ConfigError("rounds sweep step must be a positive integer")
            values = list(range(int(start), int(stop) + 1, step))
        else:
            step = float(step if step is not None else 0.01)
            if step <= 0:
                raise ConfigError("sweep step must be positive")
            count = int(math.floor((float(stop) - float(start)) / step + 1.5))
            values = [float(start) + i * step for i in range(max(count, 0))]
    if not values:
        raise ConfigError("[sweep] produced no points")
    if axis == "rounds":
        out = []
        for v in values:
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"rounds value {v!r} must be a positive integer")
            out.append(v)
        return axis, tuple(out)
    return axis, tuple(float(v) for v in values)


def _sweep_point_rounds(cfg: RunConfig, n: int):
    pcfg = cfg.protocol_config(rounds=n, schedule=EpsilonSchedule.optimal(n))
    result = run_random_party(pcfg, cfg.initial_state())
    return (success_probability(result), expected_entanglement(result))


def _sweep_point_epsilon(cfg: RunConfig, eps: float):
    schedule = EpsilonSchedule.uniform(eps, cfg.rounds)
    pcfg = cfg.protocol_config(schedule=schedule)
    result = run_random_party(pcfg, cfg.initial_state())
    return (success_probability(result), expected_entanglement(result))


def _sweep_point_fidelity(cfg: RunConfig, f_round1: float):
    """Random-party run whose shared state enters round 1 at ``f_round1``.

    Preparation stays at the configured anchor fidelity; the per-stage
    degradation makes up the difference, continuing at the same rate for
    later stages.  Points above the anchor prepare at the point value
    with no degradation.
    """
    anchor = cfg.initial_fidelity
    if anchor is None:
        anchor = DEFAULT_PREP_FIDELITY
    if f_round1 <= anchor:
        prep, step = anchor, anchor - f_round1
    else:
        prep, step = f_round1, 0.0
    hook = make_fidelity_ramp(prep, step) if step > 0 else None
    initial = NoisyWParams(
        depolarizing_weight_for_fidelity(prep)).prepared_state()
    pcfg = cfg.protocol_config(hook=hook)
    result = run_random_party(pcfg, initial)
    return (success_probability(result), expected_entanglement(result),
            _specific_expected_eof(initial))


@main.command("sweep")
@_CONFIG_OPT
@_OUT_OPT
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@_guarded
def cmd_sweep(config_path, out_path, seed):
    """Sweep one axis and write a CSV row per point.

    The sweep axis and grid come from the config's [sweep] table
    (axis = rounds | epsilon | initial_fidelity, plus values or
    start/stop/step).  Every row carries the random-party success
    probability and expected EoF next to the specific-party expected EoF,
    all from exact enumeration.  A rounds sweep additionally writes
    success.csv in the run command's schema.
    """
    cfg = load_run_config(config_path, seed=seed)
    axis, values = _sweep_values(cfg)
    out = _out_dir(out_path)
    outputs = ["sweep.csv"]
    rows = []
    if axis == "rounds":
        specific = _specific_expected_eof(cfg.initial_state())
        success_rows = []
        for n in values:
            p, e = _sweep_point_rounds(cfg, n)
            rows.append((n, p, e, specific))
            success_rows.append((n, p, 0.0, False, e, 0.0))
        _write_csv(out / "success.csv",
                   ("rounds", "p_success", "sigma", "mitigated_flag",
                    "expected_eof", "eof_sigma"),
                   success_rows)
        outputs.append("success.csv")
    elif axis == "epsilon":
        specific = _specific_expected_eof(cfg.initial_state())
        for eps in values:
            p, e = _sweep_point_epsilon(cfg, eps)
            rows.append((eps, p, e, specific))
    else:
        for f in values:
            p, e, specific = _sweep_point_fidelity(cfg, f)
            rows.append((f, p, e, specific))
    _write_csv(out / "sweep.csv",
               (axis, "p_success", "expected_eof_random",
                "expected_eof_specific"),
               rows)
    _write_manifest(out, "sweep", cfg.manifest_dict(), outputs,
                    extra={"sweep_axis": axis,
                           "sweep_points": [v for v in values]})
    click.echo(f"{len(values)} sweep points written to {out / 'sweep.csv'}")


def _read_counts_csv(path: str) -> CountsTable:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines or lines[0].replace(" ", "") != "outcome,count":
        raise DataError(f"{path}: expected header 'outcome,count'")
    counts = {}
    width = None
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 2:
            raise DataError(f"{path}: malformed row {line!r}")
        outcome = parts[0].strip()
        if width is None:
            width = len(outcome)
        try:
            value = float(parts[1])
        except ValueError as exc:
            raise DataError(f"{path}: bad count in row {line!r}") from exc
        counts[outcome] = counts.get(outcome, 0.0) + value
    if width is None:
        raise DataError(f"{path}: no counts rows")
    return CountsTable(counts, float(sum(counts.values())), width)


@main.command("mitigate")
@click.option("--counts", "counts_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="CSV of recorded counts (header: outcome,count).")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Readout model file.")
@_OUT_OPT
@_guarded
def cmd_mitigate(counts_path, model_path, out_path):
    """Invert a readout model on a counts table.

    Writes mitigated.csv with one row per outcome: the raw recorded
    count, the plain inverse-model weight (possibly negative), and the
    clamped weight (negatives zeroed, total preserved).
    """
    table = _read_counts_csv(counts_path)
    model = load_readout_model(model_path)
    plain = mitigate_readout(model, table, clamp=False).vector()
    clamped = mitigate_readout(model, table, clamp=True).vector()
    raw = table.vector()
    out = _out_dir(out_path)
    rows = []
    for index in range(2 ** table.width):
        outcome = "".join(str((index >> i) & 1) for i in range(table.width))
        rows.append((outcome, raw[index], plain[index], clamped[index]))
    _write_csv(out / "mitigated.csv",
               ("outcome", "count", "mitigated", "mitigated_clamped"), rows)
    _write_manifest(out, "mitigate", None, ["mitigated.csv"],
                    extra={"counts_file": str(counts_path),
                           "model_file": str(model_path),
                           "total_weight": float(raw.sum())})
    click.echo(f"mitigated {table.width}-bit table "
               f"({_format_value(raw.sum())} total weight)")


def _echo_csv_summary(out: Path, name: str) -> None:
    path = out / name
    if not path.exists():
        return
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines:
        return
    click.echo(f"{name}:")
    header = lines[0].split(",")
    for line in lines[1:]:
        fields = line.split(",")
        pairs = ", ".join(f"{k}={v}" for k, v in zip(header, fields))
        click.echo(f"  {pairs}")


@main.command("report")
@_OUT_OPT
@_guarded
def cmd_report(out_path):
    """Print a text summary of a previous run's output directory."""
    out = Path(out_path)
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"no manifest.json in {out}")
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed manifest: {exc}") from exc
    command = manifest.get("command", "?")
    click.echo(f"command: {command}  (version {manifest.get('version', '?')})")
    config = manifest.get("config")
    if isinstance(config, dict):
        keys = ("variant", "rounds", "mode", "shots", "trials", "seed")
        summary = "  ".join(f"{k}={config[k]}" for k in keys if k in config)
        click.echo(summary)
        schedule = config.get("schedule")
        if schedule:
            click.echo("schedule: " + ", ".join(
                _format_value(v) for v in schedule))
    for name in manifest.get("outputs", []):
        _echo_csv_summary(out, name)


if __name__ == "__main__":
    main()
