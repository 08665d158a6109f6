"""Scenario splits and the tabular evaluation the toolkit reports.

Shows split manifests (replayable pool assignments) and runs two scenario
rows on a synthetic pool: dataset-specific and user-agnostic. Rows match
the results-table layout: Train / Test / Acc. / F1 / FAR / FRR.
"""

from kdi.cli import PipelineConfig, run_scenario_row
from kdi.events import DatasetTag
from kdi.scenarios import Axis, ScenarioKind, SplitMode, user_agnostic
from kdi.synth import generate_corpus

corpus = generate_corpus(n_users=12, seqs_per_user_per_condition=3, seed=9)

spec = user_agnostic(corpus, ratios=(50, 25, 25), seed=9)
print(f"split '{spec.name}': {len(spec.train_pool)} train / {len(spec.val_pool)} val / "
      f"{len(spec.test_pool)} test sequences")
print("manifest head:")
print("\n".join(spec.to_manifest().splitlines()[:6]))

cfg = PipelineConfig(
    m=50, hidden=16, embed_dim=16, epochs=10, lr=0.005, batch_size=32,
    pairs_train=600, pairs_val=150, pairs_test=200, seed=9,
)
kinds = [
    ScenarioKind(
        axis=Axis.DATASET, mode=SplitMode.SPECIFIC,
        train_sets=frozenset({DatasetTag.SYNTHETIC}),
        test_sets=frozenset({DatasetTag.SYNTHETIC}),
    ),
    ScenarioKind(axis=Axis.USER, mode=SplitMode.AGNOSTIC, ratios=(50, 25, 25)),
]

print(f"\n{'Train':<12}{'Test':<12}{'Acc.':>8}{'F1':>8}{'FAR':>8}{'FRR':>8}")
for kind in kinds:
    row, _ = run_scenario_row(corpus, kind, cfg)
    print(f"{row['train']:<12}{row['test']:<12}"
          f"{100 * row['acc']:>8.2f}{100 * row['f1']:>8.2f}"
          f"{100 * row['far']:>8.2f}{100 * row['frr']:>8.2f}")
print("\n(user-agnostic rows are the hard setting: unseen typists at test time)")
