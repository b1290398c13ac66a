"""Writes the synthetic human-annotation fixture (250 English samples).

Each sample has a latent quality per criterion. Four annotators each rate a
subset of the samples with integer noise; five judge setups produce
continuous scores whose noise level differs per setup.
"""
import csv
import random

rng = random.Random(20241015)
CRITERIA = ["in_character", "entertaining", "fluency"]
ANNOTATORS = ["ann1", "ann2", "ann3", "ann4"]
SETUPS = {  # name -> noise sd
    "Claude 3.5 Sonnet": 0.55,
    "Llama 3.1 70B": 0.65,
    "GPT-4o": 0.6,
    "GPT-4o Mini": 0.8,
    "Claude 3 Haiku": 1.1,
}


def clip(x, lo=1, hi=5):
    return max(lo, min(hi, x))


samples = [f"s{i:03d}" for i in range(1, 251)]
latent = {s: {c: rng.uniform(1.5, 5.0) for c in CRITERIA} for s in samples}

with open("annotations_en.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["sample_id", "annotator_id", "criterion", "score"])
    for s in samples:
        raters = rng.sample(ANNOTATORS, rng.choice([2, 3, 3]))
        for a in sorted(raters):
            for c in CRITERIA:
                w.writerow([s, a, c, clip(round(latent[s][c] + rng.gauss(0, 0.6)))])

with open("auto_scores_en.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["sample_id", "setup", "criterion", "score"])
    for name, sd in SETUPS.items():
        for s in samples:
            for c in CRITERIA:
                w.writerow([s, name, c, f"{clip(latent[s][c] + rng.gauss(0, sd)):.2f}"])
