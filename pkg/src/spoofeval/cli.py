"""Command-line interface.

Subcommands cover the full pipeline: ``features`` (WAV -> cepstral
feature files), ``train-gmm`` (feature files -> mixture model),
``score-cm`` (features + two models -> log-likelihood-ratio scores),
``evaluate`` (scores + protocols -> pooled and per-condition tandem
cost), ``fuse train`` / ``fuse apply`` (multi-system score fusion), and
``oracle-sweep`` (greedy subset selection).

Shared behaviour:

* ``--config FILE`` loads an INI-style run configuration; unknown
  sections or keys abort.  ``--set section.key=value`` (repeatable)
  overrides file values, and dedicated flags override both.
* every command writes the effective configuration next to its outputs
  (``effective.cfg`` in an output directory, ``<out>.cfg`` otherwise);
* per-item work (feature extraction, trial scoring) continues past
  individual failures, records them in an ``errors.log`` next to the
  outputs, and exits non-zero iff at least one item failed;
* ``--jobs N`` parallelises per-item computation with threads; results
  are written sequentially in input order afterwards, so outputs are
  byte-identical whatever the job count.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import analysis
from .config import ConfigError, RunConfig
from .frontends import cqcc, lfcc, load_wav, read_features, write_features, write_features_csv
from .fusion import (
    apply_fusion,
    combine_score_tables,
    load_fusion_model,
    oracle_sweep,
    save_fusion_model,
    train_lr,
)
from .gmm import llr_score, load_gmm, save_gmm, train_em
from .metrics import asv_operating_point, tdcf_coefficients
from .trialdata import (
    CmKey,
    format_score,
    join,
    parse_protocol,
    parse_scores,
    serialize_scores,
)

_GROUPINGS = ("attack", "env", "attack-env", "s", "t60", "ds", "da", "q")
_AXES = ("s", "t60", "ds", "da", "q")


def _fail(message: str) -> "click.ClickException":
    return click.ClickException(message)


def _load_config(config_path, sets) -> RunConfig:
    try:
        config = RunConfig.load(config_path)
        for item in sets:
            target, eq, value = item.partition("=")
            section, dot, key = target.partition(".")
            if not eq or not dot or not section.strip() or not key.strip():
                raise ConfigError(f"--set expects section.key=value, got {item!r}")
            config.override(section.strip(), key.strip(), value.strip())
        return config
    except ConfigError as exc:
        raise _fail(str(exc)) from None


def _write_effective(config: RunConfig, directory: Path | None = None, sibling: Path | None = None):
    if directory is not None:
        target = directory / "effective.cfg"
    elif sibling is not None:
        target = Path(str(sibling) + ".cfg")
    else:
        return
    target.write_text(config.render(), encoding="utf-8")


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _fail(f"cannot read {path}: {exc}") from None


def _run_items(items, worker, jobs: int):
    """Apply ``worker`` to every item, returning (result, error) pairs in order."""
    if jobs < 1:
        raise _fail("--jobs must be >= 1")

    def guarded(item):
        try:
            return worker(item), None
        except Exception as exc:  # noqa: BLE001 -- per-item isolation is the point
            return None, str(exc)

    if jobs == 1 or len(items) <= 1:
        return [guarded(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(guarded, items))


def _write_error_log(path: Path, failures: list[tuple[str, str]]):
    if failures:
        lines = [f"{name}: {message}" for name, message in failures]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_named_scores(pairs) -> dict[str, dict[str, float]]:
    tables: dict[str, dict[str, float]] = {}
    for item in pairs:
        name, eq, path = item.partition("=")
        if not eq or not name or not path:
            raise _fail(f"--scores expects NAME=FILE, got {item!r}")
        if name in tables:
            raise _fail(f"duplicate system name {name!r}")
        tables[name] = parse_scores(_read_text(path))
    if not tables:
        raise _fail("at least one --scores NAME=FILE is required")
    return tables


def _labels_for(matrix_ids, records) -> np.ndarray:
    by_id = {record.trial_id: record for record in records}
    missing = [trial_id for trial_id in matrix_ids if trial_id not in by_id]
    if missing:
        raise _fail(
            f"{len(missing)} scored trials missing from the protocol; "
            f"first: {missing[:10]}"
        )
    return np.array([by_id[t].cm_key is CmKey.BONA_FIDE for t in matrix_ids], dtype=bool)


@click.group()
@click.version_option(package_name="spoofeval")
def cli():
    """Spoofing-countermeasure evaluation toolkit."""


def _config_options(fn):
    fn = click.option(
        "--set",
        "sets",
        multiple=True,
        metavar="SECTION.KEY=VALUE",
        help="Override one config value; repeatable.",
    )(fn)
    fn = click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="INI-style run configuration.",
    )(fn)
    return fn


@cli.command()
@click.option("--wav-list", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Text file with one WAV path per line (relative to the list).")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False),
              help="Directory for <stem>.fea outputs and the manifest.")
@click.option("--frontend", type=click.Choice(["cqcc", "lfcc"]), default=None,
              help="Feature type; overrides the config.")
@click.option("--jobs", default=1, show_default=True, help="Worker threads.")
@click.option("--csv", "emit_csv", is_flag=True, help="Also write per-file CSV matrices.")
@_config_options
def features(wav_list, out_dir, frontend, jobs, emit_csv, config_path, sets):
    """Extract cepstral features from a list of WAV files.

    Each input ``<stem>.wav`` produces ``<stem>.fea``; ``manifest.csv``
    records file, frame count, and dimension per input in list order.
    Unreadable or malformed files are skipped, logged to ``errors.log``,
    and make the exit status non-zero.
    """
    config = _load_config(config_path, sets)
    if frontend is not None:
        config.override("features", "frontend", frontend)
    name = config.frontend()
    rate = config.sample_rate()
    feature_config = config.cqcc_config() if name == "cqcc" else config.lfcc_config()
    extract = cqcc if name == "cqcc" else lfcc

    list_path = Path(wav_list)
    entries = []
    for _, line in _iter_list_lines(list_path):
        wav_path = Path(line)
        if not wav_path.is_absolute():
            wav_path = list_path.parent / wav_path
        entries.append((wav_path.stem, wav_path))
    if not entries:
        raise _fail(f"{wav_list}: no WAV paths listed")
    stems = [stem for stem, _ in entries]
    if len(set(stems)) != len(stems):
        dup = next(s for i, s in enumerate(stems) if s in stems[:i])
        raise _fail(f"duplicate output stem {dup!r} in the WAV list")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def worker(entry):
        _, wav_path = entry
        return extract(load_wav(wav_path, expected_rate=rate), feature_config)

    outcomes = _run_items(entries, worker, jobs)

    manifest = ["file,frames,dims"]
    failures: list[tuple[str, str]] = []
    for (stem, wav_path), (matrix, error) in zip(entries, outcomes):
        if error is not None:
            failures.append((str(wav_path), error))
            continue
        write_features(out / f"{stem}.fea", matrix)
        if emit_csv:
            write_features_csv(out / f"{stem}.csv", matrix)
        manifest.append(f"{stem}.fea,{matrix.shape[0]},{matrix.shape[1]}")
    (out / "manifest.csv").write_text("\n".join(manifest) + "\n", encoding="utf-8")
    _write_error_log(out / "errors.log", failures)
    _write_effective(config, directory=out)
    click.echo(
        f"features: {len(entries) - len(failures)}/{len(entries)} files extracted", err=True
    )
    if failures:
        raise SystemExit(1)


def _iter_list_lines(path: Path):
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


@cli.command("train-gmm")
@click.option("--features-list", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Text file with one feature-file path per line.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Output model file.")
@click.option("--components", type=int, default=None, help="Mixture size; overrides the config.")
@click.option("--seed", type=int, default=None, help="Initialisation seed; overrides the config.")
@_config_options
def train_gmm(features_list, out_path, components, seed, config_path, sets):
    """Train a diagonal-covariance GMM on pooled feature frames.

    Writes the model plus ``<out>.trace.csv`` holding the average
    log-likelihood at initialisation and after each EM iteration.
    """
    config = _load_config(config_path, sets)
    if components is not None:
        config.override("em", "n_components", components)
    if seed is not None:
        config.override("em", "seed", seed)
    em_config = config.em_config()
    n_components = config.n_components()

    list_path = Path(features_list)
    matrices = []
    for lineno, line in _iter_list_lines(list_path):
        fea_path = Path(line)
        if not fea_path.is_absolute():
            fea_path = list_path.parent / fea_path
        try:
            matrices.append(read_features(fea_path))
        except (OSError, ValueError) as exc:
            raise _fail(f"{features_list}:{lineno}: {exc}") from None
    if not matrices:
        raise _fail(f"{features_list}: no feature files listed")
    dims = {m.shape[1] for m in matrices}
    if len(dims) != 1:
        raise _fail(f"feature dimensions differ across files: {sorted(dims)}")

    frames = np.concatenate(matrices, axis=0)
    try:
        model, trace = train_em(frames, n_components, em_config)
    except ValueError as exc:
        raise _fail(str(exc)) from None
    out = Path(out_path)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    save_gmm(out, model)
    trace_lines = ["iteration,avg_loglik"] + [
        f"{i},{format_score(v, full_precision=True)}" for i, v in enumerate(trace)
    ]
    Path(str(out) + ".trace.csv").write_text("\n".join(trace_lines) + "\n", encoding="utf-8")
    _write_effective(config, sibling=out)
    click.echo(
        f"train-gmm: {n_components} components on {frames.shape[0]} frames, "
        f"{len(trace) - 1} iterations",
        err=True,
    )


@cli.command("score-cm")
@click.option("--protocol", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--keys", type=click.Choice(["cm", "asv"]), default="cm", show_default=True,
              help="Key vocabulary of the protocol's fifth field.")
@click.option("--features-dir", required=True, type=click.Path(exists=True, file_okay=False),
              help="Directory holding <trial_id>.fea files.")
@click.option("--bona-model", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--spoof-model", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--jobs", default=1, show_default=True, help="Worker threads.")
@click.option("--full-precision", is_flag=True,
              help="Write shortest round-trip representations instead of 6 significant digits.")
@_config_options
def score_cm(protocol, keys, features_dir, bona_model, spoof_model, out_path, jobs,
             full_precision, config_path, sets):
    """Score every protocol trial with a bona fide/spoof model pair.

    Each trial's score is the difference in average per-frame
    log-likelihood between the two models (higher = more bona fide).
    Failing trials are skipped, logged to ``<out>.errors.log``, and make
    the exit status non-zero.
    """
    config = _load_config(config_path, sets)
    records = parse_protocol(_read_text(protocol), keys=keys)
    if not records:
        raise _fail(f"{protocol}: no trials")
    bona = load_gmm(bona_model)
    spoof = load_gmm(spoof_model)
    features_root = Path(features_dir)

    def worker(record):
        matrix = read_features(features_root / f"{record.trial_id}.fea")
        return llr_score(bona, spoof, matrix)

    outcomes = _run_items(records, worker, jobs)

    pairs = []
    failures: list[tuple[str, str]] = []
    for record, (value, error) in zip(records, outcomes):
        if error is not None:
            failures.append((record.trial_id, error))
        else:
            pairs.append((record.trial_id, value))
    if not pairs:
        raise _fail("every trial failed to score")
    out = Path(out_path)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(
        serialize_scores(pairs, full_precision=full_precision), encoding="utf-8"
    )
    _write_error_log(Path(str(out) + ".errors.log"), failures)
    _write_effective(config, sibling=out)
    click.echo(f"score-cm: {len(pairs)}/{len(records)} trials scored", err=True)
    if failures:
        raise SystemExit(1)


def _category_fn(by: str, axis: str):
    axis = axis.lower()
    if axis in ("s", "t60", "ds"):
        if by == "env":
            return lambda key: analysis.eid_category(key, axis)
        if by == "attack-env":
            return lambda key: analysis.eid_category(key.split("/", 1)[1], axis)
        raise _fail(f"--report-axis {axis} requires --by env or --by attack-env")
    if by == "attack":
        return lambda key: analysis.aid_category(key, axis)
    if by == "attack-env":
        return lambda key: analysis.aid_category(key.split("/", 1)[0], axis)
    raise _fail(f"--report-axis {axis} requires --by attack or --by attack-env")


@cli.command()
@click.option("--cm-scores", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--protocol", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--keys", type=click.Choice(["cm", "asv"]), default="cm", show_default=True)
@click.option("--asv-scores", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Speaker-verification scores; enables the tandem cost.")
@click.option("--asv-protocol", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Protocol for --asv-scores (defaults to --protocol when --keys asv).")
@click.option("--coeffs-from", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Borrow cost coefficients from this ASV score file instead.")
@click.option("--coeffs-protocol", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Protocol for --coeffs-from.")
@click.option("--by", "by", type=click.Choice(_GROUPINGS), default=None,
              help="Per-condition breakdown over this grouping.")
@click.option("--report-axis", type=click.Choice(_AXES), default=None,
              help="Also summarise groups per category of this axis.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None,
              help="Write pooled.json / conditions.csv / report.csv here.")
@_config_options
def evaluate(cm_scores, protocol, keys, asv_scores, asv_protocol, coeffs_from,
             coeffs_protocol, by, report_axis, out_dir, config_path, sets):
    """Pooled (and optionally per-condition) tandem cost and EER.

    The verification operating point is fixed at the target/non-target
    equal-error threshold of the ASV scores; per-condition breakdowns
    keep it fixed and recompute only spoof-dependent quantities.
    """
    config = _load_config(config_path, sets)
    cost = config.cost_model()
    records = parse_protocol(_read_text(protocol), keys=keys)
    cm_set = join(records, parse_scores(_read_text(cm_scores)))

    asv_set = None
    coeffs = None
    if (asv_scores is None) == (coeffs_from is None):
        raise _fail("exactly one of --asv-scores or --coeffs-from is required")
    if asv_scores is not None:
        if asv_protocol is not None:
            asv_records = parse_protocol(_read_text(asv_protocol), keys="asv")
        elif keys == "asv":
            asv_records = records
        else:
            raise _fail("--asv-scores needs --asv-protocol (or --keys asv)")
        asv_set = join(asv_records, parse_scores(_read_text(asv_scores)))
    else:
        if coeffs_protocol is None:
            raise _fail("--coeffs-from needs --coeffs-protocol")
        coeff_records = parse_protocol(_read_text(coeffs_protocol), keys="asv")
        coeff_set = join(coeff_records, parse_scores(_read_text(coeffs_from)))
        _, rates = asv_operating_point(coeff_set)
        coeffs = tdcf_coefficients(rates, cost)

    pooled = analysis.pooled_summary(cm_set, asv_set, cost, coeffs=coeffs)
    click.echo(f"pooled min t-DCF: {pooled.tdcf.min_tdcf_norm:.6f}")
    click.echo(f"CM EER: {pooled.eer:.6f}")
    click.echo(f"ASV floor: {pooled.tdcf.asv_floor:.6f}")

    results = None
    rows = None
    worst_line = None
    if by is not None:
        results = analysis.condition_breakdown(
            cm_set, asv_set, cost, grouping=by, coeffs=coeffs
        )
        worst, worst_keys = analysis.max_min_tdcf(results)
        worst_line = f"worst: {worst:.6f} ({','.join(worst_keys)})"
        click.echo(worst_line)
        if report_axis is not None:
            rows = analysis.group_report(results, _category_fn(by, report_axis), worst_keys)
    elif report_axis is not None:
        raise _fail("--report-axis requires --by")

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = {
            "min_tdcf": pooled.tdcf.min_tdcf_norm,
            "threshold": pooled.tdcf.threshold,
            "asv_floor": pooled.tdcf.asv_floor,
            "eer": pooled.eer,
            "eer_threshold": pooled.eer_threshold,
            "coefficients": {
                "c0": pooled.coeffs.c0,
                "c1": pooled.coeffs.c1,
                "c2": pooled.coeffs.c2,
            },
            "asv_threshold": pooled.asv_threshold,
        }
        (out / "pooled.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        if results is not None:
            (out / "conditions.csv").write_text(analysis.condition_csv(results), encoding="utf-8")
            (out / "conditions.json").write_text(
                analysis.condition_json(results), encoding="utf-8"
            )
            (out / "worst.txt").write_text(worst_line + "\n", encoding="utf-8")
        if rows is not None:
            (out / "report.csv").write_text(analysis.report_csv(rows), encoding="utf-8")
            (out / "report.json").write_text(analysis.report_json(rows), encoding="utf-8")
        _write_effective(config, directory=out)


@cli.group()
def fuse():
    """Train and apply multi-system score fusion."""


@fuse.command("train")
@click.option("--scores", "scores", multiple=True, required=True, metavar="NAME=FILE",
              help="Per-system score file; repeatable, order fixes the columns.")
@click.option("--protocol", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--keys", type=click.Choice(["cm", "asv"]), default="cm", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--prior", type=float, default=None, help="Bona fide prior; overrides the config.")
@_config_options
def fuse_train(scores, protocol, keys, out_path, prior, config_path, sets):
    """Fit prior-weighted logistic fusion weights on labelled scores."""
    config = _load_config(config_path, sets)
    if prior is not None:
        config.override("fusion", "prior", prior)
    kwargs = config.fusion_kwargs()
    tables = _parse_named_scores(scores)
    matrix = combine_score_tables(tables)
    records = parse_protocol(_read_text(protocol), keys=keys)
    labels = _labels_for(matrix.trial_ids, records)
    try:
        model = train_lr(matrix, labels, **kwargs)
    except (ValueError, RuntimeError) as exc:
        raise _fail(str(exc)) from None
    out = Path(out_path)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    save_fusion_model(out, model)
    _write_effective(config, sibling=out)
    rendered = ", ".join(
        f"{name}={weight:.6f}" for name, weight in zip(model.systems, model.weights)
    )
    click.echo(f"fuse train: {rendered}, bias={model.bias:.6f}", err=True)


@fuse.command("apply")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--scores", "scores", multiple=True, required=True, metavar="NAME=FILE")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--full-precision", is_flag=True,
              help="Write shortest round-trip representations instead of 6 significant digits.")
def fuse_apply(model_path, scores, out_path, full_precision):
    """Write the fused score of every trial covered by all systems."""
    model = load_fusion_model(model_path)
    tables = _parse_named_scores(scores)
    if model.systems is not None:
        if set(tables) != set(model.systems):
            raise _fail(
                f"systems {sorted(tables)} do not match the model's {list(model.systems)}"
            )
        tables = {name: tables[name] for name in model.systems}
    matrix = combine_score_tables(tables)
    try:
        fused = apply_fusion(model, matrix)
    except ValueError as exc:
        raise _fail(str(exc)) from None
    out = Path(out_path)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(
        serialize_scores(zip(matrix.trial_ids, fused), full_precision=full_precision),
        encoding="utf-8",
    )
    click.echo(f"fuse apply: {matrix.n_trials} trials fused", err=True)


@cli.command("oracle-sweep")
@click.option("--scores", "scores", multiple=True, required=True, metavar="NAME=FILE")
@click.option("--protocol", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--keys", type=click.Choice(["cm", "asv"]), default="cm", show_default=True)
@click.option("--asv-scores", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--asv-protocol", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Protocol for --asv-scores (defaults to --protocol when --keys asv).")
@click.option("--k-max", type=int, default=None, help="Largest subset size (default: all).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Also write the selection curve as CSV.")
@_config_options
def oracle_sweep_cmd(scores, protocol, keys, asv_scores, asv_protocol, k_max, out_path,
                     config_path, sets):
    """Greedy forward selection of systems by minimum tandem cost."""
    config = _load_config(config_path, sets)
    cost = config.cost_model()
    kwargs = config.fusion_kwargs()
    kwargs.pop("normalize", None)
    tables = _parse_named_scores(scores)
    matrix = combine_score_tables(tables)
    records = parse_protocol(_read_text(protocol), keys=keys)
    labels = _labels_for(matrix.trial_ids, records)
    if asv_protocol is not None:
        asv_records = parse_protocol(_read_text(asv_protocol), keys="asv")
    elif keys == "asv":
        asv_records = records
    else:
        raise _fail("--asv-scores needs --asv-protocol (or --keys asv)")
    asv_set = join(asv_records, parse_scores(_read_text(asv_scores)))
    _, rates = asv_operating_point(asv_set)
    coeffs = tdcf_coefficients(rates, cost)
    try:
        entries = oracle_sweep(matrix, labels, coeffs, k_max=k_max, **kwargs)
    except (ValueError, RuntimeError) as exc:
        raise _fail(str(exc)) from None
    lines = ["k,systems,min_tdcf"]
    for entry in entries:
        lines.append(f"{entry.k},{'+'.join(entry.systems)},{entry.min_tdcf:.6f}")
        click.echo(f"k={entry.k}: {'+'.join(entry.systems)} -> {entry.min_tdcf:.6f}")
    if out_path is not None:
        out = Path(out_path)
        if out.parent != Path(""):
            out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text("\n".join(lines) + "\n", encoding="utf-8")
        _write_effective(config, sibling=out)


def main():
    cli(prog_name="spoofeval")


if __name__ == "__main__":
    main()
