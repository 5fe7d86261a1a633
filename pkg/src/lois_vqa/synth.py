"""Planted synthetic VQA data that exercises the whole pipeline.

Every image is a feature map on a square pixel grid split into cells. Each
instance covers one whole cell and carries a key pattern plus a value
pattern. One uncovered background cell carries a key pattern alone. The
answer is the value of the instance whose key matches that background key,
so it cannot be read off either view on its own.

Feature layout (``feature_dim`` >= keys + answers + 1): dims [0, keys) hold
key one-hots, the next ``answers`` dims hold value one-hots, and the last
dim is an objectness flag set on instance pixels.
"""

import json
import os
from dataclasses import dataclass, asdict

import numpy as np

from . import question, tensorfile
from .masks import MaskSet
from .nms import suppress
from .training import Sample
from .views import separate

ANSWER_WORDS = ("red", "green", "blue", "yellow", "white", "black", "brown", "pink")
QUESTIONS = (
    "what color is the object that matches the background",
    "which color does the matching object have",
    "what is the color of the object paired with the scene",
)


@dataclass(frozen=True)
class SynthSpec:
    samples: int = 64
    size: int = 12  # pixels per side
    grid: int = 3  # background cells per side
    feature_dim: int = 8
    instances: int = 3
    keys: int = 3
    answers: int = 4
    noise: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.samples < 0:
            raise ValueError("samples must be >= 0")
        if self.size % self.grid:
            raise ValueError("size must be a multiple of grid")
        if self.instances > self.keys:
            raise ValueError("each instance needs its own key")
        if self.instances >= self.grid * self.grid:
            raise ValueError("need at least one uncovered background cell")
        if self.feature_dim < self.keys + self.answers + 1:
            raise ValueError("feature_dim too small for the planted layout")
        if self.answers > len(ANSWER_WORDS):
            raise ValueError(f"at most {len(ANSWER_WORDS)} answers")


def answer_vocabulary(spec):
    return list(ANSWER_WORDS[:spec.answers])


def _cell_slice(cell, spec):
    step = spec.size // spec.grid
    r, c = divmod(cell, spec.grid)
    return slice(r * step, (r + 1) * step), slice(c * step, (c + 1) * step)


def generate(spec):
    """Arrays and text for ``spec.samples`` planted samples."""
    rng = np.random.default_rng(spec.seed)
    n, s, L = spec.samples, spec.size, spec.feature_dim
    features = np.zeros((n, s, s, L))
    masks = np.zeros((n, spec.instances, s, s), dtype=np.float32)
    scores = np.zeros((n, spec.instances))
    labels, questions = [], []
    obj = L - 1
    for i in range(n):
        cells = rng.permutation(spec.grid * spec.grid)
        inst_cells, key_cell = cells[:spec.instances], cells[spec.instances]
        keys = rng.permutation(spec.keys)[:spec.instances]
        values = rng.integers(spec.answers, size=spec.instances)
        target = int(rng.integers(spec.instances))
        fmap = spec.noise * rng.standard_normal((s, s, L))
        for j, cell in enumerate(inst_cells):
            rows, cols = _cell_slice(cell, spec)
            fmap[rows, cols, keys[j]] += 1.0
            fmap[rows, cols, spec.keys + values[j]] += 1.0
            fmap[rows, cols, obj] += 1.0
            masks[i, j, rows, cols] = 1.0
        rows, cols = _cell_slice(key_cell, spec)
        fmap[rows, cols, keys[target]] += 1.0
        features[i] = fmap
        scores[i] = np.sort(rng.uniform(0.5, 1.0, spec.instances))[::-1]
        labels.append(int(values[target]))
        questions.append(QUESTIONS[int(rng.integers(len(QUESTIONS)))])
    return {"features": features, "masks": masks, "scores": scores,
            "labels": labels, "questions": questions}


def write_dataset(directory, spec):
    os.makedirs(directory, exist_ok=True)
    data = generate(spec)
    vocab = answer_vocabulary(spec)
    tensorfile.write_tensor(os.path.join(directory, "features.lotf"), data["features"])
    tensorfile.write_tensor(os.path.join(directory, "masks.lotf"), data["masks"])
    tensorfile.write_tensor(os.path.join(directory, "scores.lotf"), data["scores"])
    with open(os.path.join(directory, "questions.txt"), "w", encoding="utf-8", newline="\n") as f:
        f.writelines(q + "\n" for q in data["questions"])
    with open(os.path.join(directory, "labels.txt"), "w", encoding="utf-8", newline="\n") as f:
        f.writelines(f"{y}\n" for y in data["labels"])
    with open(os.path.join(directory, "answers.txt"), "w", encoding="utf-8", newline="\n") as f:
        f.writelines(w + "\n" for w in vocab)
    with open(os.path.join(directory, "annotations.jsonl"), "w", encoding="utf-8", newline="\n") as f:
        for i, y in enumerate(data["labels"]):
            f.write(json.dumps({"id": i, "qtype": "other", "counts": {vocab[y]: 10}}, sort_keys=True) + "\n")
    with open(os.path.join(directory, "spec.json"), "w", encoding="utf-8", newline="\n") as f:
        json.dump(asdict(spec), f, sort_keys=True, indent=1)
        f.write("\n")
    return data


def _read_lines(path):
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f]


def load_dataset(directory, grid, question_dim, question_len, post_threshold=0.05, seed=0):
    """Run masks through suppression and view separation; returns samples and the vocabulary."""
    features = tensorfile.read_tensor(os.path.join(directory, "features.lotf"))
    masks = tensorfile.read_tensor(os.path.join(directory, "masks.lotf"))
    scores = tensorfile.read_tensor(os.path.join(directory, "scores.lotf"))
    questions = _read_lines(os.path.join(directory, "questions.txt"))
    labels = [int(x) for x in _read_lines(os.path.join(directory, "labels.txt"))]
    vocab = _read_lines(os.path.join(directory, "answers.txt"))
    if not (len(features) == len(masks) == len(scores) == len(questions) == len(labels)):
        raise ValueError("dataset files disagree on the sample count")
    samples = []
    for i in range(len(labels)):
        result = suppress(MaskSet.from_binary(masks[i] > 0.5, scores[i]), post_threshold)
        views = separate(features[i], result, grid)
        q = question.encode(questions[i], question_dim, question_len, seed)
        samples.append(Sample(views.instance, views.background, q, labels[i]))
    return samples, vocab


def probe_answer(spec, D, B):
    """Hand-built decoder: match the background key against instance keys, read the value."""
    bg_key = int(np.argmax(B[:spec.keys].max(axis=1)))
    inst = int(np.argmax(D[bg_key]))
    return int(np.argmax(D[spec.keys:spec.keys + spec.answers, inst]))
