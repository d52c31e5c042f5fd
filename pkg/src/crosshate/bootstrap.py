"""Ensemble majority-vote labeling of unlabeled data and fine-tuning rounds.

An ensemble of exactly three trained models (odd, so a binary vote never
ties) labels target-language text; each member's vote is stored next to the
assigned majority label. Gold labels, when the "unlabeled" data actually has
them, ride along in a shadow map that fine-tuning never sees, and an audit
can compare the assigned labels against them.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .data import Dataset, Example, Label, make_dataset
from .errors import ValidationError
from .evaluation import ConfusionMatrix, confusion
from .models import TrainingHyperparams, fine_tune, predict

ENSEMBLE_SIZE = 3


@dataclass(frozen=True)
class Ensemble:
    """Exactly three trained members (canonically CNN, BiLSTM, transformer)."""

    members: tuple

    def __post_init__(self):
        if len(self.members) != ENSEMBLE_SIZE:
            raise ValidationError(f"ensemble needs exactly {ENSEMBLE_SIZE} members, got {len(self.members)}")

    def architectures(self) -> list[str]:
        return [m.arch for m in self.members]


@dataclass
class BootstrappedDataset:
    """Majority-labeled dataset plus per-example vote records.

    ``gold`` holds the shadow labels (never shown to fine-tuning);
    ``dropped`` lists (id, reason) for examples a member failed on.
    """

    dataset: Dataset
    votes: dict[str, tuple[Label, ...]]
    gold: dict[str, Label] = field(default_factory=dict)
    dropped: tuple[tuple[str, str], ...] = ()
    provenance: dict = field(default_factory=dict)

    def class_counts(self):
        return self.dataset.class_counts()


def majority(votes: tuple[Label, ...]) -> Label:
    """Strict majority of an odd number of binary votes. With three voters a
    majority always exists; the tie branch is unreachable and guarded."""
    counts = Counter(votes)
    label, top = counts.most_common(1)[0]
    if top * 2 <= len(votes):
        raise ValidationError(f"no strict majority in votes {votes!r}")
    return label


def ensemble_label(ensemble: Ensemble, unlabeled: Dataset) -> BootstrappedDataset:
    """Label every example by majority vote of the members.

    Any labels already present on the input are treated as hidden gold: they
    are preserved in the shadow map for auditing and stripped from the
    output dataset's training view.
    """
    member_predictions = [predict(member, unlabeled) for member in ensemble.members]
    examples = []
    votes: dict[str, tuple[Label, ...]] = {}
    gold: dict[str, Label] = {}
    dropped: list[tuple[str, str]] = []
    for i, ex in enumerate(unlabeled):
        per_member = [preds[i] for preds in member_predictions]
        failed = [(arch, p.error) for arch, p in zip(ensemble.architectures(), per_member) if p.error]
        if failed:
            arch, why = failed[0]
            dropped.append((ex.id, f"{arch}: {why}"))
            continue
        ballot = tuple(p.label for p in per_member)
        assigned = majority(ballot)
        votes[ex.id] = ballot
        if ex.label is not None:
            gold[ex.id] = ex.label
        examples.append(Example(id=ex.id, text=ex.text, label=assigned, source=ex.source))

    labeled = make_dataset(f"{unlabeled.name}-REL", examples, language=unlabeled.language)
    counts = labeled.class_counts()
    provenance = {
        "source": unlabeled.name,
        "members": ensemble.architectures(),
        "input_size": len(unlabeled),
        "labeled_size": len(labeled),
        "dropped": len(dropped),
        "class_counts": {"noHate": counts.no_hate, "Hate": counts.hate},
    }
    return BootstrappedDataset(
        dataset=labeled, votes=votes, gold=gold, dropped=tuple(dropped), provenance=provenance
    )


def audit_against_gold(boot: BootstrappedDataset, gold: Dataset) -> ConfusionMatrix:
    """Confusion matrix of assigned labels against id-aligned gold labels
    (gold on rows, ensemble labels on columns)."""
    gold_by_id = {ex.id: ex.label for ex in gold}
    missing = [ex.id for ex in boot.dataset if ex.id not in gold_by_id]
    if missing:
        shown = ", ".join(missing[:5])
        raise ValidationError(
            f"{len(missing)} bootstrapped ids missing from the gold dataset (first: {shown})"
        )
    unlabeled_gold = [ex.id for ex in boot.dataset if gold_by_id[ex.id] is None]
    if unlabeled_gold:
        raise ValidationError(f"gold dataset has unlabeled ids: {unlabeled_gold[:5]}")
    gold_seq = [gold_by_id[ex.id] for ex in boot.dataset]
    pred_seq = [ex.label for ex in boot.dataset]
    return confusion(gold_seq, pred_seq)


def bootstrap_round(
    ensemble: Ensemble,
    unlabeled: Dataset,
    per_model_hp: dict[str, TrainingHyperparams],
    dev: Dataset | None = None,
    rounds: int = 1,
) -> tuple[Ensemble, BootstrappedDataset]:
    """Label the data with the current ensemble, then fine-tune every member
    on the frozen labeled copy. Returns the new ensemble and the (last)
    bootstrapped dataset; the input ensemble is untouched.

    ``rounds`` > 1 repeats label-then-tune with the updated ensemble.
    """
    missing = [arch for arch in ensemble.architectures() if arch not in per_model_hp]
    if missing:
        raise ValidationError(f"missing fine-tuning hyperparameters for: {missing}")
    if rounds < 1:
        raise ValidationError("rounds must be >= 1")

    current = ensemble
    boot: BootstrappedDataset | None = None
    for _ in range(rounds):
        boot = ensemble_label(current, unlabeled)
        members = tuple(
            fine_tune(member, boot.dataset, per_model_hp[member.arch], dev=dev)
            for member in current.members
        )
        current = Ensemble(members=members)
    assert boot is not None
    return current, boot


# --- persistence ---------------------------------------------------------------


def write_votes_sidecar(boot: BootstrappedDataset, path: str | Path) -> None:
    """``id<TAB>vote1<TAB>vote2<TAB>vote3<TAB>majority`` next to the TSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in boot.dataset:
            ballot = boot.votes[ex.id]
            cells = [ex.id] + [v.value for v in ballot] + [ex.label.value]
            fh.write("\t".join(cells) + "\n")


def read_votes_sidecar(path: str | Path) -> dict[str, tuple[Label, ...]]:
    votes: dict[str, tuple[Label, ...]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2 + ENSEMBLE_SIZE:
                raise ValidationError(f"{path}:{lineno}: expected {2 + ENSEMBLE_SIZE} fields")
            ballot = tuple(Label.from_string(v) for v in parts[1:-1])
            if majority(ballot) is not Label.from_string(parts[-1]):
                raise ValidationError(f"{path}:{lineno}: stored majority disagrees with votes")
            votes[parts[0]] = ballot
    return votes
