"""Train a small detector end to end and read its evaluation report.

Synthetic corpus -> disjoint pools -> balanced pairs -> Adam over the
Siamese cosine/BCE loss -> threshold calibrated at the validation EER ->
accuracy / F1 / FAR / FRR on held-out test pairs. Runs in about a minute on
one CPU core; larger settings push accuracy well past 0.9 (see the
acceptance suite).
"""

from kdi import (
    FilterPolicy,
    HyperParams,
    ScoredPair,
    TowerConfig,
    eer_threshold,
    evaluate,
    make_pairs,
    pair_scores,
    process_pool,
    roc,
    train,
    verdict,
)
from kdi.events import Condition
from kdi.nncore import Mode
from kdi.synth import generate_corpus

M = 50
corpus = generate_corpus(n_users=16, seqs_per_user_per_condition=4, seed=42)
policy = FilterPolicy()

# user-disjoint pools so no typist leaks across train/val/test
train_seqs = [s for s in corpus if s.meta.user_id < "synth010"]
val_seqs = [s for s in corpus if "synth010" <= s.meta.user_id < "synth013"]
test_seqs = [s for s in corpus if s.meta.user_id >= "synth013"]
pools = [process_pool(p, policy, M)[0] for p in (train_seqs, val_seqs, test_seqs)]
pairs_train = make_pairs(pools[0], seed=1, target_count=600)
pairs_val = make_pairs(pools[1], seed=2, target_count=120)
pairs_test = make_pairs(pools[2], seed=3, target_count=160)

config = TowerConfig(m=M, hidden=16, embed_dim=16, dropout=0.2, recurrent_dropout=0.1)
hp = HyperParams(m=M, batch_size=32, lr=0.005, epochs=12, l2_lambda=1e-4, seed=0)

run = train(pairs_train, pairs_val, hp, config)
for rec in run.records:
    print(f"epoch {rec.epoch:2d}  loss {rec.mean_loss:.4f}  val EER {rec.val_eer:.3f}")
print(f"kept epoch {run.best_epoch}; decision threshold {run.model.threshold:.4f}")

scores = pair_scores(run.model, pairs_test, Mode.INFER)
scored = [ScoredPair(float(s), p.label) for s, p in zip(scores, pairs_test)]
report = evaluate(scored, run.model.threshold)
_, test_eer = eer_threshold(roc(scored))
print(
    f"\ntest: accuracy {report.accuracy:.3f}, F1 {report.f1:.3f}, "
    f"FAR {report.far:.3f}, FRR {report.frr:.3f}, EER {test_eer:.3f}"
)

# single-document decision against a known bona fide gallery
gallery = [p for p in pools[2] if p.meta.condition == Condition.BONA_FIDE][:6]
probe_assisted = next(p for p in pools[2] if p.meta.condition == Condition.ASSISTED)
label, score = verdict(run.model, probe_assisted, gallery)
print(f"\nverdict for an assisted probe vs {len(gallery)} bona fide gallery items: "
      f"label={label} (1=assisted), mean score {score:.3f}")
