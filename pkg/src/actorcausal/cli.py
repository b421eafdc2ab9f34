"""Pipeline orchestration and the command-line interface.

Every stage reads the previous stage's artifact from the output directory,
so stages can be re-run independently; ``run`` chains them all and writes a
manifest. Configuration is one YAML file whose defaults mirror the reference
evaluation setup (22-day lag window, the two lambda grids, top-5 lags,
alpha = 0.05).
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Callable, Sequence

import click
import yaml

from . import behavior, causal_graph, event_log, granger, lag_selector, stationarity
from . import synth as synth_mod
from . import timeseries
from .errors import ActorCausalError, ConfigError

ARTIFACTS = {
    "events": "events.csv",
    "transitions": "transitions.csv",
    "panel": "panel.csv",
    "masks": "masks.json",
    "panel_stationary": "panel_stationary.csv",
    "masks_stationary": "masks_stationary.json",
    "stationarity": "stationarity.json",
    "lag_frequency": "lag_frequency.csv",
    "lag_selection": "lag_selection.json",
    "granger_csv": "granger_results.csv",
    "granger_json": "granger_results.json",
    "graph_dot": "graph.dot",
    "graph_json": "graph.json",
    "manifest": "manifest.json",
}


@dataclass
class OutcomeSpec:
    name: str
    rule: timeseries.OutcomeRule


@dataclass
class PipelineConfig:
    output_dir: Path
    format: str = "csv"
    input: Path | None = None
    mapping: dict[str, str] = field(
        default_factory=lambda: {
            "case": "case",
            "activity": "activity",
            "timestamp": "timestamp",
            "actor": "actor",
        }
    )
    timestamp_format: str | None = None
    delimiter: str = ","
    case_attribute_columns: tuple[str, ...] = ()
    outcomes: list[OutcomeSpec] = field(default_factory=list)
    per_actor: bool = False
    per_activity: bool = False
    top_k_groups: int = 10
    min_quiet_days: float = 1.0
    end_activities: tuple[str, ...] | None = None
    lasso: lag_selector.LassoConfig = field(default_factory=lag_selector.LassoConfig)
    alpha: float = 0.05
    seed: int = 0
    workers: int = 1
    synth: synth_mod.SynthLogConfig | None = None
    raw: dict = field(default_factory=dict)

    def path(self, key: str) -> Path:
        return self.output_dir / ARTIFACTS[key]


def _parse_outcome(entry: dict) -> OutcomeSpec:
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError(f"outcome entry needs a name: {entry!r}")
    families = [k for k in ("keywords", "last_event_prefix", "attribute") if k in entry]
    if len(families) != 1:
        raise ConfigError(
            f"outcome {entry.get('name')!r} must use exactly one rule family "
            f"(keywords | last_event_prefix | attribute), got {families}"
        )
    family = families[0]
    rule: timeseries.OutcomeRule
    if family == "keywords":
        kws = entry["keywords"]
        if not isinstance(kws, list):
            raise ConfigError("keywords must be a list")
        rule = timeseries.KeywordRule(tuple(str(k) for k in kws))
    elif family == "last_event_prefix":
        rule = timeseries.LastEventRule(str(entry["last_event_prefix"]))
    else:
        rule = timeseries.AttributeRule(str(entry["attribute"]))
    return OutcomeSpec(name=str(entry["name"]), rule=rule)


def load_config(path: str | Path) -> PipelineConfig:
    """Parse and validate the YAML pipeline configuration."""
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")

    fmt = str(raw.get("format", "csv")).lower()
    if fmt not in ("csv", "xes", "synth"):
        raise ConfigError(f"unknown input format {fmt!r}")
    if "output_dir" not in raw:
        raise ConfigError("config must set output_dir")
    if fmt != "synth" and "input" not in raw:
        raise ConfigError("config must set input for csv/xes formats")

    outcomes_raw = raw.get("outcomes")
    if not outcomes_raw:
        raise ConfigError("config must define at least one outcome rule")
    outcomes = [_parse_outcome(e) for e in outcomes_raw]
    names = [o.name for o in outcomes]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate outcome names: {names}")
    if "TT" in names:
        raise ConfigError("outcome name 'TT' collides with the throughput series")

    csv_cfg = raw.get("csv", {}) or {}
    mapping = dict(csv_cfg.get("mapping", {}))
    for role, default in (
        ("case", "case"),
        ("activity", "activity"),
        ("timestamp", "timestamp"),
    ):
        mapping.setdefault(role, default)
    mapping.setdefault("actor", "actor")

    gran = raw.get("granularity", {}) or {}
    completion = raw.get("completion", {}) or {}
    lasso_raw = dict(raw.get("lasso", {}) or {})
    if "lambda_group" in lasso_raw:
        lasso_raw["lambda_group_grid"] = tuple(lasso_raw.pop("lambda_group"))
    if "lambda_l1" in lasso_raw:
        lasso_raw["lambda_l1_grid"] = tuple(lasso_raw.pop("lambda_l1"))
    try:
        lasso = lag_selector.LassoConfig(**lasso_raw)
    except TypeError as exc:
        raise ConfigError(f"bad lasso settings: {exc}") from exc

    seed = int(raw.get("seed", 0))
    synth_cfg = None
    if fmt == "synth":
        synth_raw = dict(raw.get("synth", {}) or {})
        planted = None
        if "planted" in synth_raw:
            p = synth_raw.pop("planted")
            planted = synth_mod.PlantedEffect(
                behavior=behavior.BehaviorType(str(p["behavior"])),
                lag=int(p["lag"]),
                beta=float(p["beta"]),
            )
        synth_raw.setdefault("seed", seed)
        try:
            synth_cfg = synth_mod.SynthLogConfig(planted=planted, **synth_raw)
        except TypeError as exc:
            raise ConfigError(f"bad synth settings: {exc}") from exc
        synth_cfg.validate()

    alpha = float(raw.get("alpha", 0.05))
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")

    end_acts = completion.get("end_activities")
    return PipelineConfig(
        output_dir=Path(raw["output_dir"]),
        format=fmt,
        input=Path(raw["input"]) if "input" in raw else None,
        mapping=mapping,
        timestamp_format=csv_cfg.get("timestamp_format"),
        delimiter=str(csv_cfg.get("delimiter", ",")),
        case_attribute_columns=tuple(csv_cfg.get("case_attribute_columns", ()) or ()),
        outcomes=outcomes,
        per_actor=bool(gran.get("per_actor", False)),
        per_activity=bool(gran.get("per_activity", False)),
        top_k_groups=int(gran.get("top_k", 10)),
        min_quiet_days=float(completion.get("min_quiet_days", 1.0)),
        end_activities=tuple(end_acts) if end_acts else None,
        lasso=lasso,
        alpha=alpha,
        seed=seed,
        workers=int(raw.get("workers", 1)),
        synth=synth_cfg,
        raw=raw,
    )


def _load_log(config: PipelineConfig) -> event_log.EventLog:
    return event_log.read_canonical_csv(str(config.path("events")))


def stage_synth(config: PipelineConfig) -> Path:
    if config.synth is None:
        raise ConfigError("synth stage needs a synth section in the config")
    log = synth_mod.generate_log(config.synth)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    event_log.write_csv(log, str(config.path("events")))
    return config.path("events")


def stage_ingest(config: PipelineConfig) -> Path:
    """Parse the raw input and write the canonical sorted event CSV."""
    config.output_dir.mkdir(parents=True, exist_ok=True)
    if config.format == "synth":
        return stage_synth(config)
    assert config.input is not None
    if not config.input.exists():
        raise ConfigError(f"input file does not exist: {config.input}")
    if config.format == "csv":
        log = event_log.parse_csv(
            str(config.input),
            config.mapping,
            timestamp_format=config.timestamp_format,
            delimiter=config.delimiter,
            case_attribute_columns=config.case_attribute_columns,
        )
    else:
        log = event_log.parse_xes(str(config.input))
    log = event_log.validate_and_sort(log)
    event_log.write_csv(log, str(config.path("events")))
    return config.path("events")


def stage_classify(config: PipelineConfig) -> Path:
    log = _load_log(config)
    result = behavior.classify_log(log)
    behavior.write_transitions_csv(result.transitions, str(config.path("transitions")))
    return config.path("transitions")


def stage_series(config: PipelineConfig) -> Path:
    log = _load_log(config)
    if config.per_activity:
        transitions = behavior.classify_log(log).transitions
    else:
        transitions = behavior.read_transitions_csv(str(config.path("transitions")))
    series = timeseries.behavior_series(transitions, "global")
    if config.per_actor:
        series += timeseries.behavior_series(
            transitions, "per_actor", top_k=config.top_k_groups
        )
    if config.per_activity:
        series += timeseries.behavior_series(
            transitions, "per_activity", top_k=config.top_k_groups
        )
    series.append(
        timeseries.throughput_series(
            log,
            min_quiet_days=config.min_quiet_days,
            end_activities=config.end_activities,
        )
    )
    for outcome in config.outcomes:
        series.append(timeseries.outcome_series(log, outcome.rule, name=outcome.name))
    panel = timeseries.align(series)
    timeseries.write_panel(panel, str(config.path("panel")), str(config.path("masks")))
    return config.path("panel")


def stage_adf(config: PipelineConfig) -> Path:
    panel = timeseries.read_panel(str(config.path("panel")), str(config.path("masks")))
    processed, report = stationarity.ensure_stationary(panel)
    timeseries.write_panel(
        processed,
        str(config.path("panel_stationary")),
        str(config.path("masks_stationary")),
    )
    config.path("stationarity").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return config.path("stationarity")


def _load_stationary_panel(config: PipelineConfig) -> timeseries.Panel:
    return timeseries.read_panel(
        str(config.path("panel_stationary")), str(config.path("masks_stationary"))
    )


def stage_select_lags(config: PipelineConfig) -> Path:
    panel = _load_stationary_panel(config)
    targets = panel.columns_with_role("kpi")
    selection = lag_selector.lag_frequency(
        panel, targets, config.lasso, workers=config.workers
    )
    with open(config.path("lag_frequency"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lag", "count"])
        for lag in range(1, selection.max_lag + 1):
            writer.writerow([lag, selection.frequency.get(lag, 0)])
    config.path("lag_selection").write_text(
        json.dumps(selection.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return config.path("lag_selection")


def stage_granger(config: PipelineConfig) -> Path:
    panel = _load_stationary_panel(config)
    selection = json.loads(config.path("lag_selection").read_text(encoding="utf-8"))
    lag_orders = [int(l) for l in selection["selected"]]
    outcome = granger.test_all_pairs(panel, lag_orders, alpha=config.alpha)
    with open(config.path("granger_csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(
            "source,target,lag,f_statistic,p_value,reverse_p_value,significant,asymmetric\n"
        )
        for r in outcome.results:
            fh.write(
                f"{r.source},{r.target},{r.lag_order},{r.f_statistic!r},"
                f"{r.p_value!r},{r.reverse_p_value!r},"
                f"{int(r.significant)},{int(r.asymmetric)}\n"
            )
    try:
        ratio: float | None = granger.asymmetry_ratio(outcome.results, alpha=config.alpha)
    except ActorCausalError:
        ratio = None
    payload = {
        "alpha": config.alpha,
        "asymmetry_ratio": ratio,
        "results": [
            {
                "source": r.source,
                "target": r.target,
                "lag": r.lag_order,
                "f_statistic": r.f_statistic,
                "p_value": r.p_value,
                "reverse_p_value": r.reverse_p_value,
                "significant": r.significant,
                "asymmetric": r.asymmetric,
            }
            for r in outcome.results
        ],
        "skipped": [
            {"source": s.source, "target": s.target, "lag": s.lag_order, "reason": s.reason}
            for s in outcome.skipped
        ],
    }
    config.path("granger_json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return config.path("granger_json")


def stage_graph(config: PipelineConfig) -> Path:
    payload = json.loads(config.path("granger_json").read_text(encoding="utf-8"))
    results = [
        granger.GrangerResult(
            source=r["source"],
            target=r["target"],
            lag_order=int(r["lag"]),
            f_statistic=float(r["f_statistic"]),
            p_value=float(r["p_value"]),
            significant=bool(r["significant"]),
            reverse_p_value=float(r["reverse_p_value"]),
            asymmetric=bool(r["asymmetric"]),
        )
        for r in payload["results"]
    ]
    graph = causal_graph.build_graph(results, alpha=float(payload["alpha"]))
    config.path("graph_dot").write_text(causal_graph.export_dot(graph), encoding="utf-8")
    causal_graph.write_graph_json(graph, str(config.path("graph_json")))
    return config.path("graph_dot")


_STAGES: list[tuple[str, Callable[[PipelineConfig], Path]]] = [
    ("ingest", stage_ingest),
    ("classify", stage_classify),
    ("series", stage_series),
    ("adf", stage_adf),
    ("select-lags", stage_select_lags),
    ("granger", stage_granger),
    ("graph", stage_graph),
]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_pipeline(config: PipelineConfig) -> dict[str, Any]:
    """Execute every stage in order and write the run manifest.

    Any stage failure is re-raised with the stage name attached so the CLI
    exit code and message identify where the pipeline stopped.
    """
    for name, fn in _STAGES:
        try:
            fn(config)
        except ActorCausalError as exc:
            exc.args = (f"[stage {name}] {exc}",)
            raise
    config_hash = hashlib.sha256(
        json.dumps(config.raw, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()
    try:
        version = metadata.version("actorcausal")
    except metadata.PackageNotFoundError:
        version = "unknown"
    artifacts = {
        name: _sha256(config.path(key))
        for key, name in ((k, v) for k, v in ARTIFACTS.items() if k != "manifest")
        if config.path(key).exists()
    }
    manifest = {
        "package": "actorcausal",
        "version": version,
        "seed": config.seed,
        "config_sha256": config_hash,
        "artifacts": artifacts,
    }
    config.path("manifest").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def _invoke(stage: Callable[[PipelineConfig], Path], config_path: str, workers: int | None) -> None:
    try:
        config = load_config(config_path)
        if workers is not None:
            config.workers = workers
        out = stage(config)
        click.echo(f"wrote {out}")
    except ActorCausalError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)


@click.group()
def main() -> None:
    """Actor-behavior causal analysis of process event logs."""


def _config_option(fn: Callable) -> Callable:
    return click.option(
        "--config", "-c", "config_path", required=True, type=click.Path(), help="YAML config"
    )(fn)


@main.command()
@_config_option
@click.option("--workers", type=int, default=None, help="parallel lasso grid workers")
def run(config_path: str, workers: int | None) -> None:
    """Run the full pipeline and write all artifacts plus a manifest."""
    try:
        config = load_config(config_path)
        if workers is not None:
            config.workers = workers
        manifest = run_pipeline(config)
        click.echo(f"pipeline complete; manifest at {config.path('manifest')}")
        click.echo(json.dumps(manifest["artifacts"], indent=2, sort_keys=True))
    except ActorCausalError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)


@main.command()
@_config_option
def synth(config_path: str) -> None:
    """Generate a synthetic event log into the output directory."""
    _invoke(stage_synth, config_path, None)


@main.command()
@_config_option
def ingest(config_path: str) -> None:
    """Parse the raw input into the canonical event CSV."""
    _invoke(stage_ingest, config_path, None)


@main.command()
@_config_option
def classify(config_path: str) -> None:
    """Classify actor transitions from the canonical event CSV."""
    _invoke(stage_classify, config_path, None)


@main.command()
@_config_option
def series(config_path: str) -> None:
    """Build the aligned daily panel from events and transitions."""
    _invoke(stage_series, config_path, None)


@main.command()
@_config_option
def adf(config_path: str) -> None:
    """Test panel columns for unit roots and difference the failures."""
    _invoke(stage_adf, config_path, None)


@main.command(name="select-lags")
@_config_option
@click.option("--workers", type=int, default=None, help="parallel lasso grid workers")
def select_lags(config_path: str, workers: int | None) -> None:
    """Run the sparse group lasso grid and select the top lags."""
    _invoke(stage_select_lags, config_path, workers)


@main.command(name="granger")
@_config_option
def granger_cmd(config_path: str) -> None:
    """Granger-test all behavior/KPI pairs at the selected lags."""
    _invoke(stage_granger, config_path, None)


@main.command(name="graph")
@_config_option
def graph_cmd(config_path: str) -> None:
    """Assemble and export the significance-filtered causal graph."""
    _invoke(stage_graph, config_path, None)


if __name__ == "__main__":
    main()
