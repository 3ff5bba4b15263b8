"""Clustered split of a synthetic image collection with temporal scenes.

Each scene is a burst of near-identical frames; a random split would scatter
a burst across train and test, the clustered split keeps it together.

    python3 scripts/leakage_demo.py --scenes 12 --frames 25 --seed 0
"""
import argparse
from dataclasses import dataclass

import numpy as np

from monometry.leakage import (NOISE, TSNEConfig, build_embedding, cluster_split, dbcv, dbscan,
                               standardize, tsne)


@dataclass(frozen=True)
class Config:
    scenes: int = 12
    frames: int = 25
    seed: int = 0
    perplexity: float = 30.0
    eps: float = 5.0
    min_samples: int = 10


def make_collection(cfg: Config, rng):
    embs, scene_of = [], {}
    for s in range(cfg.scenes):
        base = rng.normal(0, 1, 256) * 3
        t0 = s * 3600.0
        for f in range(cfg.frames):
            image_id = f"s{s:02d}f{f:02d}"
            embs.append(build_embedding(image_id, base + rng.normal(0, 0.5, 256), [], t0 + f))
            scene_of[image_id] = s
    return embs, scene_of


def leaked_scenes(split, scene_of):
    subsets = {}
    for image_id, s in scene_of.items():
        subsets.setdefault(s, set()).add(split[image_id])
    return sum(len(v) > 1 for v in subsets.values())


def run(cfg: Config):
    rng = np.random.default_rng(cfg.seed)
    embs, scene_of = make_collection(cfg, rng)
    std = standardize(embs)
    ids = [e.image_id for e in std]
    reduced = tsne([e.full_vector for e in std], ids, TSNEConfig(perplexity=cfg.perplexity),
                   seed=cfg.seed)
    y = np.array([[r.x, r.y] for r in reduced])
    labels = dbscan(y, cfg.eps, cfg.min_samples)
    n_clusters = len(set(labels.tolist()) - {NOISE})
    score = dbcv(y, labels) if n_clusters >= 2 else None
    part = cluster_split(dict(zip(ids, labels.tolist())), seed=cfg.seed, dbcv=score)

    shuffled = rng.permutation(len(ids))
    cut = [int(0.8 * len(ids)), int(0.9 * len(ids))]
    naive = {}
    for rank, k in enumerate(shuffled):
        naive[ids[k]] = "train" if rank < cut[0] else "val" if rank < cut[1] else "test"
    return {
        "clusters": n_clusters,
        "noise": int(np.sum(labels == NOISE)),
        "dbcv": score,
        "proportions": part.proportions,
        "leaked scenes (clustered)": leaked_scenes(part.split, scene_of),
        "leaked scenes (random)": leaked_scenes(naive, scene_of),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenes", type=int, default=Config.scenes)
    ap.add_argument("--frames", type=int, default=Config.frames)
    ap.add_argument("--seed", type=int, default=Config.seed)
    args = ap.parse_args()
    for k, v in run(Config(scenes=args.scenes, frames=args.frames, seed=args.seed)).items():
        print(f"{k:26s} {v}")


if __name__ == "__main__":
    main()
