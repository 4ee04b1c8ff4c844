"""Command-line entry point wiring corpus preparation, training, topic
modeling, evaluation, the synthetic generator, and the annotation service.

Every command reads an optional JSON config file (unknown keys are
rejected) that individual options override.  The effective configuration
is echoed into every JSON artifact; line-delimited artifacts carry it in a
``<name>.meta.json`` sidecar together with the timestamp, so the artifact
bytes themselves are deterministic for a fixed seed.

Exit codes: 0 success, 1 validation error, 2 internal error.
"""

from __future__ import annotations

import dataclasses
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from . import __version__
from .corpus import (
    AnnotationSet,
    Chat,
    CorpusFormatError,
    DEFAULT_VOCAB_CAP,
    DEFAULT_WINDOW,
    build_vocab,
    exchange_ratio,
    filter_chats,
    load_annotations,
    load_corpus,
    majority_distances,
    normalize_chat,
    replace_special_tokens,
    save_corpus,
)
from .evaluation import (
    agreement_upper_bound,
    corpus_accuracy,
    fleiss_kappa,
    human_performance,
    kfold_split,
    pooled_weighted_f1,
    rule1,
    rule2,
)
from .features import ParamIndexer, annotate_features
from .lexicons import LexiconSet, bundled_lexicons, load_lexicons
from .model import (
    LinkClassifier,
    Parameters,
    TrainConfig,
    load_model,
    nll_and_gradient,
    predict_links,
    save_model,
)
from .optim import grad_check
from .synth import SynthConfig, make_annotations, preset_theta, sample_corpus
from .topics import LdaConfig, load_lda, save_lda, topic_dist_map, train_message_lda


@dataclass
class RunConfig:
    """Effective settings shared by the subcommands.

    Loaded from a JSON file, overridden by command-line options, and echoed
    into every artifact.
    """

    window: int = DEFAULT_WINDOW
    l2: float = 1.0
    label_policy: str = "majority"
    vocab_cap: int = DEFAULT_VOCAB_CAP
    lexicons: str = "all"
    folds: int = 5
    seed: int = 0
    memory: int = 10
    max_iters: int = 500
    grad_tol: float = 1e-6
    min_len: int = 10
    max_len: int = 35
    min_ratio: float = 0.4
    max_ratio: float = 0.6
    lda_topics: int = 20
    lda_alpha: float = 0.1
    lda_beta: float = 0.01
    lda_iterations: int = 1000
    lda_burn_in: int = 500
    lda_sample_lag: int = 10
    synth_chats: int = 100
    synth_min_len: int = 10
    synth_max_len: int = 35
    synth_alternation: float = 0.5
    synth_preset: str = "pairwise"
    synth_annotators: int = 3
    synth_disagreement: float = 0.0
    synth_feature_noise: float = 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def build_config(config_path: str | None, **overrides) -> RunConfig:
    values: dict = {}
    if config_path is not None:
        raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = set(raw) - set(_FIELD_TYPES)
        if unknown:
            raise ValueError(
                f"unknown config keys: {', '.join(sorted(unknown))}"
            )
        values.update(raw)
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    return RunConfig(**values)


def resolve_lexicons(config: RunConfig) -> LexiconSet:
    if config.lexicons in ("all", "en", "zh"):
        return bundled_lexicons(config.lexicons)
    return load_lexicons(config.lexicons)


# ---------------------------------------------------------------------------
# artifact helpers


def write_json_artifact(path: str | Path, payload: dict, config: RunConfig) -> None:
    """Deterministic JSON artifact with the effective config embedded."""
    document = {"config": config.to_dict()}
    document.update(payload)
    Path(path).write_text(
        json.dumps(document, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    write_sidecar(path, config)


def write_sidecar(path: str | Path, config: RunConfig) -> None:
    """Timestamped metadata next to the artifact, outside the deterministic
    byte surface."""
    sidecar = Path(str(path) + ".meta.json")
    sidecar.write_text(
        json.dumps(
            {
                "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
                "tool_version": __version__,
                "config": config.to_dict(),
            },
            ensure_ascii=False,
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )


def save_predictions(path: str | Path, preds_by_chat: dict[str, list[int]]) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for chat_id, distances in preds_by_chat.items():
            record = {
                "chat_id": chat_id,
                "annotator_id": "model",
                "distances": distances,
            }
            json.dump(record, handle, ensure_ascii=False)
            handle.write("\n")


def format_table(rows: list[dict]) -> str:
    """Aligned plain-text metric table, one row per method."""
    name_width = max(len("method"), max((len(r["name"]) for r in rows), default=0))
    header = f"{'method'.ljust(name_width)}  {'accuracy':>10}  {'weighted F1':>12}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row['name'].ljust(name_width)}  {row['accuracy']:>10.4f}  "
            f"{row['weighted_f1']:>12.4f}"
        )
    return "\n".join(lines) + "\n"


def _score_method(
    preds_by_chat: dict[str, list[int]],
    annotation_sets: list[AnnotationSet],
    window: int,
) -> dict:
    gold = {a.chat_id: majority_distances(a) for a in annotation_sets}
    report = pooled_weighted_f1(preds_by_chat, gold, window)
    return {
        "accuracy": corpus_accuracy(preds_by_chat, annotation_sets),
        "weighted_f1": report.weighted_f1,
        "per_class": report.to_dict()["per_class"],
        "n_messages": report.n_messages,
    }


def _load_labeled(config: RunConfig, corpus: str, annotations: str | None):
    chats, embedded = load_corpus(corpus, window=config.window)
    annotation_sets = list(embedded)
    if annotations is not None:
        annotation_sets.extend(load_annotations(annotations, chats, config.window))
    return chats, annotation_sets


def _train_classifier(
    config: RunConfig,
    chats: list[Chat],
    labels: list,
    lexicons: LexiconSet,
    phi_map=None,
) -> LinkClassifier:
    clf = LinkClassifier(
        window=config.window,
        l2=config.l2,
        label_policy=config.label_policy,
        use_lda=phi_map is not None,
        lexicons=lexicons,
        memory=config.memory,
        max_iters=config.max_iters,
        grad_tol=config.grad_tol,
        seed=config.seed,
    )
    return clf.fit(chats, labels, phi=phi_map)


def _annotated_subset(
    chats: list[Chat], annotation_sets: list[AnnotationSet]
) -> tuple[list[Chat], list[AnnotationSet]]:
    by_id = {a.chat_id: a for a in annotation_sets}
    kept = [chat for chat in chats if chat.chat_id in by_id]
    return kept, [by_id[chat.chat_id] for chat in kept]


# ---------------------------------------------------------------------------
# command plumbing


class CliError(click.ClickException):
    exit_code = 1


def run_guarded(fn, *args, **kwargs):
    """Map validation failures to exit 1 and unexpected errors to exit 2."""
    try:
        return fn(*args, **kwargs)
    except (
        CorpusFormatError,
        FileNotFoundError,
        ValueError,
        TypeError,
        KeyError,
    ) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except click.ClickException:
        raise
    except Exception as exc:  # pragma: no cover - defensive
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(2)


def config_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(),
                      default=None, help="JSON config file.")(fn)
    fn = click.option("--window", type=int, default=None)(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """Learn and evaluate reply-to dependency links in two-party chats."""


# -- ingest ------------------------------------------------------------------


@main.command()
@config_options
@click.option("--corpus", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--vocab-out", type=click.Path(), default=None)
@click.option("--vocab-cap", type=int, default=None)
@click.option("--lexicons", "lexicons_opt", type=str, default=None)
@click.option("--filter/--no-filter", "apply_filter", default=False,
              help="Keep only chats passing the length/exchange-ratio filter.")
def ingest(config_path, window, seed, corpus, out, vocab_out, vocab_cap,
           lexicons_opt, apply_filter):
    """Validate, normalize, and optionally filter a corpus."""

    def body():
        config = build_config(
            config_path, window=window, seed=seed, vocab_cap=vocab_cap,
            lexicons=lexicons_opt,
        )
        lexicons = resolve_lexicons(config)
        chats, annotation_sets = load_corpus(corpus, window=config.window)
        replaced = [
            Chat(
                chat_id=c.chat_id,
                messages=tuple(
                    dataclasses.replace(
                        m, tokens=replace_special_tokens(m.tokens, lexicons)
                    )
                    for m in c.messages
                ),
            )
            for c in chats
        ]
        ranked = build_vocab(replaced, cap=config.vocab_cap)
        normalized = [normalize_chat(c, ranked, lexicons) for c in replaced]
        if apply_filter:
            normalized = filter_chats(
                normalized, config.min_len, config.max_len,
                config.min_ratio, config.max_ratio,
            )
            kept = {c.chat_id for c in normalized}
            annotation_sets = [a for a in annotation_sets if a.chat_id in kept]
        save_corpus(out, normalized, annotation_sets)
        write_sidecar(out, config)
        if vocab_out is not None:
            write_json_artifact(
                vocab_out,
                {
                    "cap": ranked.cap,
                    "vocab_hash": ranked.fingerprint(),
                    "words": list(ranked.words),
                    "counts": list(ranked.counts),
                },
                config,
            )
        click.echo(
            f"ingested {len(chats)} chats -> kept {len(normalized)} "
            f"({len(ranked)} vocabulary words)"
        )

    run_guarded(body)


# -- stats -------------------------------------------------------------------


@main.command()
@config_options
@click.option("--corpus", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
def stats(config_path, window, seed, corpus, out):
    """Exchange ratios and a chat-length histogram."""

    def body():
        config = build_config(config_path, window=window, seed=seed)
        chats, _ = load_corpus(corpus, window=config.window)
        histogram: dict[str, int] = {}
        ratios = {}
        for chat in chats:
            histogram[str(len(chat))] = histogram.get(str(len(chat)), 0) + 1
            if len(chat) >= 2:
                ratios[chat.chat_id] = exchange_ratio(chat)
        payload = {
            "n_chats": len(chats),
            "n_messages": sum(len(c) for c in chats),
            "length_histogram": dict(sorted(histogram.items(), key=lambda kv: int(kv[0]))),
            "exchange_ratios": ratios,
            "mean_exchange_ratio": (
                sum(ratios.values()) / len(ratios) if ratios else None
            ),
        }
        write_json_artifact(out, payload, config)
        click.echo(f"wrote stats for {len(chats)} chats to {out}")

    run_guarded(body)


# -- vocab -------------------------------------------------------------------


@main.command()
@config_options
@click.option("--corpus", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--vocab-cap", type=int, default=None)
def vocab(config_path, window, seed, corpus, out, vocab_cap):
    """Build the frequency-ranked vocabulary."""

    def body():
        config = build_config(config_path, window=window, seed=seed, vocab_cap=vocab_cap)
        chats, _ = load_corpus(corpus, window=config.window)
        ranked = build_vocab(chats, cap=config.vocab_cap)
        write_json_artifact(
            out,
            {
                "cap": ranked.cap,
                "vocab_hash": ranked.fingerprint(),
                "words": list(ranked.words),
                "counts": list(ranked.counts),
            },
            config,
        )
        click.echo(f"wrote {len(ranked)} words to {out}")

    run_guarded(body)


# -- lda-train ---------------------------------------------------------------


@main.command("lda-train")
@config_options
@click.option("--corpus", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--lda-topics", type=int, default=None)
@click.option("--lda-iterations", type=int, default=None)
@click.option("--lda-burn-in", type=int, default=None)
@click.option("--lda-sample-lag", type=int, default=None)
def lda_train(config_path, window, seed, corpus, out, lda_topics,
              lda_iterations, lda_burn_in, lda_sample_lag):
    """Train the message topic model on the full corpus."""

    def body():
        config = build_config(
            config_path, window=window, seed=seed, lda_topics=lda_topics,
            lda_iterations=lda_iterations, lda_burn_in=lda_burn_in,
            lda_sample_lag=lda_sample_lag,
        )
        chats, _ = load_corpus(corpus, window=config.window)
        model = train_message_lda(chats, _lda_config(config))
        save_lda(out, model)
        write_sidecar(out, config)
        click.echo(
            f"trained {config.lda_topics}-topic model on "
            f"{model.n_docs} messages -> {out}"
        )

    run_guarded(body)


def _lda_config(config: RunConfig) -> LdaConfig:
    return LdaConfig(
        n_topics=config.lda_topics,
        alpha=config.lda_alpha,
        beta=config.lda_beta,
        iterations=config.lda_iterations,
        burn_in=config.lda_burn_in,
        sample_lag=config.lda_sample_lag,
        seed=config.seed,
    )


# -- train -------------------------------------------------------------------


@main.command()
@config_options
@click.option("--corpus", required=True, type=click.Path())
@click.option("--annotations", type=click.Path(), default=None,
              help="Annotation file; may also be embedded in the corpus.")
@click.option("--out", required=True, type=click.Path())
@click.option("--lda", "lda_path", type=click.Path(), default=None,
              help="Topic model file; enables the cross-entropy feature.")
@click.option("--l2", type=float, default=None)
@click.option("--label-policy", type=click.Choice(["majority", "all"]), default=None)
def train(config_path, window, seed, corpus, annotations, out, lda_path, l2,
          label_policy):
    """Fit the link classifier on annotated chats."""

    def body():
        config = build_config(
            config_path, window=window, seed=seed, l2=l2, label_policy=label_policy,
        )
        chats, annotation_sets = _load_labeled(config, corpus, annotations)
        labeled, labels = _annotated_subset(chats, annotation_sets)
        if not labeled:
            raise ValueError("no annotated chats to train on")
        lexicons = resolve_lexicons(config)
        phi_map = None
        if lda_path is not None:
            phi_map = topic_dist_map(load_lda(lda_path))
        clf = _train_classifier(config, labeled, labels, lexicons, phi_map)
        report = clf.optim_report_
        metadata = {
            "config": config.to_dict(),
            "lexicon_hashes": lexicons.fingerprints(),
            "training": {
                "n_chats": len(labeled),
                "n_messages": sum(len(c) for c in labeled),
                "iterations": report.iterations,
                "final_value": report.value,
                "final_grad_norm": report.grad_norm,
                "status": report.status.value,
            },
        }
        save_model(out, clf.params_, metadata)
        write_sidecar(out, config)
        click.echo(
            f"trained on {len(labeled)} chats: {report.status.value} after "
            f"{report.iterations} iterations (grad norm {report.grad_norm:.2e})"
        )

    run_guarded(body)


# -- predict -----------------------------------------------------------------


@main.command()
@config_options
@click.option("--corpus", required=True, type=click.Path())
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--lda", "lda_path", type=click.Path(), default=None)
def predict(config_path, window, seed, corpus, model_path, out, lda_path):
    """Decode the most probable link per message."""

    def body():
        config = build_config(config_path, window=window, seed=seed)
        params, _ = load_model(model_path)
        chats, _ = load_corpus(corpus, window=params.indexer.window)
        chats = annotate_features(chats, resolve_lexicons(config))
        phi_map = None
        if params.indexer.with_cross:
            if lda_path is None:
                raise ValueError("with-lda model requires --lda")
            phi_map = topic_dist_map(load_lda(lda_path))
        elif lda_path is not None:
            raise ValueError("mode mismatch: base model given --lda")
        preds = {}
        for chat in chats:
            phi = phi_map[chat.chat_id] if phi_map is not None else None
            preds[chat.chat_id] = [
                label.distance for label in predict_links(chat, params, phi)
            ]
        save_predictions(out, preds)
        write_sidecar(out, config)
        click.echo(f"wrote predictions for {len(preds)} chats to {out}")

    run_guarded(body)


# -- eval --------------------------------------------------------------------


@main.command("eval")
@config_options
@click.option("--corpus", required=True, type=click.Path())
@click.option("--annotations", type=click.Path(), default=None)
@click.option("--preds", "preds_specs", multiple=True,
              help="NAME=PATH of a predictions file to score; repeatable.")
@click.option("--out", required=True, type=click.Path())
@click.option("--table-out", type=click.Path(), default=None,
              help="Also write the plain-text table here (default: stdout).")
def eval_cmd(config_path, window, seed, corpus, annotations, preds_specs, out,
             table_out):
    """Score the rule baselines and prediction files against annotations."""

    def body():
        config = build_config(config_path, window=window, seed=seed)
        chats, annotation_sets = _load_labeled(config, corpus, annotations)
        labeled, labels = _annotated_subset(chats, annotation_sets)
        if not labeled:
            raise ValueError("no annotated chats to evaluate")
        rows = []
        rule_preds = {
            "Rule1": {c.chat_id: [l.distance for l in rule1(c)] for c in labeled},
            "Rule2": {c.chat_id: [l.distance for l in rule2(c)] for c in labeled},
        }
        for name, preds in rule_preds.items():
            rows.append({"name": name, **_score_method(preds, labels, config.window)})
        for entry in preds_specs:
            if "=" not in entry:
                raise ValueError(f"--preds expects NAME=PATH, got {entry!r}")
            name, _, path = entry.partition("=")
            loaded = load_annotations(path, labeled, window=config.window)
            preds = {
                a.chat_id: a.distances(a.annotators[0]) for a in loaded
            }
            missing = {c.chat_id for c in labeled} - set(preds)
            if missing:
                raise ValueError(
                    f"predictions {name!r} miss {len(missing)} annotated chats"
                )
            rows.append({"name": name, **_score_method(preds, labels, config.window)})
        payload = {
            "n_chats": len(labeled),
            "n_messages": sum(len(c) for c in labeled),
            "rows": rows,
        }
        write_json_artifact(out, payload, config)
        table = format_table(rows)
        if table_out is not None:
            Path(table_out).write_text(table, encoding="utf-8")
            write_sidecar(table_out, config)
        else:
            click.echo(table, nl=False)

    run_guarded(body)


# -- crossval ----------------------------------------------------------------


@main.command()
@config_options
@click.option("--corpus", required=True, type=click.Path())
@click.option("--annotations", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path())
@click.option("--folds", type=int, default=None)
@click.option("--with-lda/--no-lda", "with_lda", default=False,
              help="Also train the topic-feature variant per fold.")
@click.option("--lda-topics", type=int, default=None)
@click.option("--lda-iterations", type=int, default=None)
@click.option("--lda-burn-in", type=int, default=None)
@click.option("--lda-sample-lag", type=int, default=None)
@click.option("--l2", type=float, default=None)
def crossval(config_path, window, seed, corpus, annotations, out, folds,
             with_lda, lda_topics, lda_iterations, lda_burn_in,
             lda_sample_lag, l2):
    """K-fold cross validation of the baselines and trained models."""

    def body():
        config = build_config(
            config_path, window=window, seed=seed, folds=folds, l2=l2,
            lda_topics=lda_topics, lda_iterations=lda_iterations,
            lda_burn_in=lda_burn_in, lda_sample_lag=lda_sample_lag,
        )
        chats, annotation_sets = _load_labeled(config, corpus, annotations)
        labeled, _ = _annotated_subset(chats, annotation_sets)
        if not labeled:
            raise ValueError("no annotated chats for cross validation")
        by_id = {a.chat_id: a for a in annotation_sets}
        lexicons = resolve_lexicons(config)
        phi_map = None
        if with_lda:
            # the topic model is unsupervised and trained once on all chats
            phi_map = topic_dist_map(train_message_lda(labeled, _lda_config(config)))
        fold_reports = []
        for fold_index, (train_chats, test_chats) in enumerate(
            kfold_split(labeled, k=config.folds, seed=config.seed)
        ):
            train_labels = [by_id[c.chat_id] for c in train_chats]
            test_annots = [by_id[c.chat_id] for c in test_chats]
            rows = []
            for name, rule in (("Rule1", rule1), ("Rule2", rule2)):
                preds = {c.chat_id: [l.distance for l in rule(c)] for c in test_chats}
                rows.append(
                    {"name": name, **_score_method(preds, test_annots, config.window)}
                )
            clf = _train_classifier(config, train_chats, train_labels, lexicons)
            preds = {
                c.chat_id: [l.distance for l in labels]
                for c, labels in zip(test_chats, clf.predict(test_chats))
            }
            rows.append(
                {
                    "name": "Discriminative",
                    **_score_method(preds, test_annots, config.window),
                }
            )
            if with_lda:
                clf_lda = _train_classifier(
                    config, train_chats, train_labels, lexicons, phi_map
                )
                preds = {
                    c.chat_id: [l.distance for l in labels]
                    for c, labels in zip(
                        test_chats, clf_lda.predict(test_chats, phi=phi_map)
                    )
                }
                rows.append(
                    {
                        "name": "Discriminative+LDA",
                        **_score_method(preds, test_annots, config.window),
                    }
                )
            fold_reports.append({"fold": fold_index, "rows": rows})
        method_names = [row["name"] for row in fold_reports[0]["rows"]]
        mean_rows = []
        for name in method_names:
            rows = [
                row
                for report in fold_reports
                for row in report["rows"]
                if row["name"] == name
            ]
            mean_rows.append(
                {
                    "name": name,
                    "accuracy": float(np.mean([r["accuracy"] for r in rows])),
                    "weighted_f1": float(np.mean([r["weighted_f1"] for r in rows])),
                }
            )
        payload = {
            "n_chats": len(labeled),
            "folds": fold_reports,
            "mean": mean_rows,
        }
        write_json_artifact(out, payload, config)
        click.echo(format_table(mean_rows), nl=False)

    run_guarded(body)


# -- kappa -------------------------------------------------------------------


@main.command()
@config_options
@click.option("--corpus", required=True, type=click.Path())
@click.option("--annotations", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path())
def kappa(config_path, window, seed, corpus, annotations, out):
    """Inter-annotator agreement statistics."""

    def body():
        config = build_config(config_path, window=window, seed=seed)
        chats, annotation_sets = _load_labeled(config, corpus, annotations)
        if not annotation_sets:
            raise ValueError("no annotations found")
        n_messages = 0
        unanimous = 0
        at_least_two = 0
        for annots in annotation_sets:
            for i in range(annots.n_messages()):
                votes = [labels[i].distance for labels in annots.entries.values()]
                counts = max(votes.count(v) for v in set(votes))
                n_messages += 1
                if counts == len(votes):
                    unanimous += 1
                if counts >= 2:
                    at_least_two += 1
        mean, std = human_performance(annotation_sets)
        payload = {
            "n_chats": len(annotation_sets),
            "n_messages": n_messages,
            "kappa": fleiss_kappa(annotation_sets, window=config.window),
            "unanimous_share": unanimous / n_messages,
            "at_least_two_share": at_least_two / n_messages,
            "human_performance": {"mean": mean, "std": std},
            "agreement_upper_bound": agreement_upper_bound(annotation_sets),
        }
        write_json_artifact(out, payload, config)
        click.echo(
            f"kappa {payload['kappa']:.4f} over {n_messages} messages "
            f"({len(annotation_sets)} chats)"
        )

    run_guarded(body)


# -- synth -------------------------------------------------------------------


@main.command()
@config_options
@click.option("--out-corpus", required=True, type=click.Path())
@click.option("--out-annotations", type=click.Path(), default=None)
@click.option("--theta-out", type=click.Path(), default=None,
              help="Write the generating coefficients as a model file.")
@click.option("--synth-preset", type=click.Choice(["uniform", "recency", "pairwise"]),
              default=None)
@click.option("--synth-chats", type=int, default=None)
@click.option("--synth-disagreement", type=float, default=None)
@click.option("--synth-feature-noise", type=float, default=None)
def synth(config_path, window, seed, out_corpus, out_annotations, theta_out,
          synth_preset, synth_chats, synth_disagreement, synth_feature_noise):
    """Generate a synthetic corpus with known gold links."""

    def body():
        config = build_config(
            config_path, window=window, seed=seed, synth_preset=synth_preset,
            synth_chats=synth_chats, synth_disagreement=synth_disagreement,
            synth_feature_noise=synth_feature_noise,
        )
        indexer = ParamIndexer(window=config.window)
        theta = preset_theta(config.synth_preset, indexer)
        synth_config = SynthConfig(
            n_chats=config.synth_chats,
            min_len=config.synth_min_len,
            max_len=config.synth_max_len,
            alternation=config.synth_alternation,
            feature_noise=config.synth_feature_noise,
            theta_star=theta,
            seed=config.seed,
        )
        chats, gold = sample_corpus(synth_config)
        annotation_sets = make_annotations(
            chats, gold,
            n_annotators=config.synth_annotators,
            disagreement=config.synth_disagreement,
            seed=config.seed,
            window=config.window,
        )
        save_corpus(out_corpus, chats)
        write_sidecar(out_corpus, config)
        if out_annotations is not None:
            save_corpus(Path(out_annotations), [], annotation_sets)
            write_sidecar(out_annotations, config)
        if theta_out is not None:
            save_model(
                theta_out, theta,
                metadata={"config": config.to_dict(), "preset": config.synth_preset},
            )
            write_sidecar(theta_out, config)
        click.echo(
            f"generated {len(chats)} chats "
            f"({sum(len(c) for c in chats)} messages) with preset "
            f"{config.synth_preset!r}"
        )

    run_guarded(body)


# -- gradcheck ---------------------------------------------------------------


@main.command()
@config_options
@click.option("--tolerance", type=float, default=1e-6, show_default=True)
@click.option("--trials", type=int, default=3, show_default=True)
def gradcheck(config_path, window, seed, tolerance, trials):
    """Compare the analytic training gradient with central differences."""

    def body():
        config = build_config(config_path, window=window, seed=seed)
        rng = np.random.default_rng(config.seed)
        worst = 0.0
        for trial in range(trials):
            synth_config = SynthConfig(
                n_chats=3, min_len=4, max_len=7,
                theta_star=preset_theta("pairwise"),
                seed=config.seed + trial,
            )
            chats, gold = sample_corpus(synth_config)
            chats = annotate_features(chats)
            phi_map = {
                chat.chat_id: [
                    row / row.sum() for row in rng.random((len(chat), 4)) + 0.05
                ]
                for chat in chats
            }
            for with_cross in (False, True):
                indexer = ParamIndexer(window=config.window, with_cross=with_cross)
                theta0 = rng.normal(scale=0.5, size=indexer.dim)
                train_config = TrainConfig(l2=0.5, window=config.window)

                def objective(theta):
                    return nll_and_gradient(
                        Parameters(theta, indexer), chats, gold, train_config,
                        phi_map if with_cross else None,
                    )

                worst = max(worst, grad_check(objective, theta0))
        click.echo(f"max relative gradient error: {worst:.3e} (tolerance {tolerance:g})")
        if worst >= tolerance:
            raise CliError(f"gradient check failed: {worst:.3e} >= {tolerance:g}")

    run_guarded(body)


# -- serve -------------------------------------------------------------------


@main.command()
@config_options
@click.option("--corpus", required=True, type=click.Path())
@click.option("--annotations-dir", required=True, type=click.Path())
@click.option("--model", "model_path", type=click.Path(), default=None)
@click.option("--lda", "lda_path", type=click.Path(), default=None)
@click.option("--static-dir", type=click.Path(), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8230, show_default=True)
def serve(config_path, window, seed, corpus, annotations_dir, model_path,
          lda_path, static_dir, host, port):
    """Run the annotation HTTP service (loopback by default)."""

    def body():
        import uvicorn

        from .server import create_app

        config = build_config(config_path, window=window, seed=seed)
        app = create_app(
            corpus_path=corpus,
            annotations_dir=annotations_dir,
            model_path=model_path,
            lda_path=lda_path,
            static_dir=static_dir,
            window=config.window,
        )
        uvicorn.run(app, host=host, port=port, log_level="info")

    run_guarded(body)


if __name__ == "__main__":
    main()
