"""Build a miniature supervised corpus, run the estimator over its test
split, and score the predictions.

This is the whole pipeline the command line wires together: generate
writes one binary shard of maps per split plus a JSON manifest with
seeds, checksums and label vectors; estimate consumes the test shard;
evaluate reports per-wall and per-room errors plus the label-space loss.
A real training corpus only changes the counts.
"""

import pathlib

import roomgeo
from roomgeo import dataset, estimator, metrics

OUT = pathlib.Path(__file__).parent / "out" / "mini_corpus"

counts = {"train": 3, "val": 1, "test": 2}
print(f"generating {counts} at full protocol scale ...")
manifest = dataset.generate(counts, OUT, base_seed=42,
                            log=lambda sid: print(f"  {sid}"))
print(f"manifest: {OUT / 'manifest.json'}")

sid = manifest.split_ids("train")[0]
rmap, labels = dataset.read_sample(manifest, sid)
print(f"\n{sid}: map {rmap.values.shape}, "
      f"loss against itself = {dataset.compute_loss(labels, labels)}")

print("\nestimating the test split ...")
items = []
comparisons = []
losses = []
for sid, rmap, truth in dataset.iter_split(manifest, "test"):
    est_labels = roomgeo.estimate_labels(rmap, manifest.constraints)
    items.append((sid, est_labels))
    rec = manifest.records[sid]
    comparisons.append(
        metrics.room_error(rec.room, roomgeo.room_from_labels(est_labels)))
    losses.append(dataset.compute_loss(est_labels, truth))

pred_path = OUT / "predictions.json"
estimator.write_predictions(pred_path, items, estimator="classical",
                            grid_hash=manifest.grid.fingerprint())
print(f"wrote {pred_path}\n")

print(metrics.render_report(metrics.aggregate(comparisons)))
print(f"\nmean label loss: {100 * sum(losses) / len(losses):.2f} cm")
print("\ncommand line equivalent:")
print("  roomgeo dataset --out corpus --seed 42 --train 3 --val 1 --test 2")
print("  roomgeo estimate --dataset corpus --split test --out pred.json")
print("  roomgeo evaluate --predictions pred.json --dataset corpus "
      "--split test --out report.json --table")
