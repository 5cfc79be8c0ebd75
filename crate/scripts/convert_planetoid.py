#!/usr/bin/env python3
"""Convert the public Cora (LINQS) and Citeseer (Planetoid) releases into the
plain-text dataset directory layout read by `hole` (meta.json, edges.tsv,
features.tsv, labels.tsv).

Usage:
    convert_planetoid.py cora     <dir with cora.content, cora.cites> <out dir>
    convert_planetoid.py citeseer <dir with ind.citeseer.*>           <out dir>
"""
import json
import os
import pickle
import sys

import numpy as np
import scipy.sparse as sp


def write_dataset(out, name, edges, feats, labels, k):
    os.makedirs(out, exist_ok=True)
    feats = sp.csr_matrix(feats)
    n, f = feats.shape
    with open(os.path.join(out, "meta.json"), "w") as fh:
        json.dump({"n": n, "f": f, "k": k, "name": name, "features": "sparse"}, fh)
        fh.write("\n")
    with open(os.path.join(out, "edges.tsv"), "w") as fh:
        for u, v in edges:
            fh.write(f"{u}\t{v}\n")
    with open(os.path.join(out, "features.tsv"), "w") as fh:
        for i in range(n):
            lo, hi = feats.indptr[i], feats.indptr[i + 1]
            toks = []
            for j, x in zip(feats.indices[lo:hi], feats.data[lo:hi]):
                toks.append(f"{j}:{x:g}")
            fh.write(" ".join(toks) + "\n")
    with open(os.path.join(out, "labels.tsv"), "w") as fh:
        for y in labels:
            fh.write(f"{int(y)}\n")


def cora(src, out):
    ids, rows, classes = [], [], []
    with open(os.path.join(src, "cora.content")) as fh:
        for line in fh:
            parts = line.split()
            ids.append(parts[0])
            rows.append([float(x) for x in parts[1:-1]])
            classes.append(parts[-1])
    index = {pid: i for i, pid in enumerate(ids)}
    names = sorted(set(classes))
    labels = [names.index(c) for c in classes]
    edges = []
    with open(os.path.join(src, "cora.cites")) as fh:
        for line in fh:
            a, b = line.split()
            edges.append((index[a], index[b]))
    write_dataset(out, "cora", edges, np.array(rows), labels, len(names))


def load_pickle(path):
    with open(path, "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def citeseer(src, out):
    p = lambda s: os.path.join(src, f"ind.citeseer.{s}")
    allx, ally = load_pickle(p("allx")), load_pickle(p("ally"))
    tx, ty = load_pickle(p("tx")), load_pickle(p("ty"))
    graph = load_pickle(p("graph"))
    test_idx = [int(x) for x in open(p("test.index"))]
    lo, hi = min(test_idx), max(test_idx)
    # Some test ids have no feature row; they stay all-zero with label 0.
    tx_ext = sp.lil_matrix((hi - lo + 1, tx.shape[1]))
    ty_ext = np.zeros((hi - lo + 1, ty.shape[1]))
    tx_ext[np.array(sorted(test_idx)) - lo, :] = tx
    ty_ext[np.array(sorted(test_idx)) - lo, :] = ty
    feats = sp.vstack((allx, tx_ext)).tolil()
    y = np.vstack((ally, ty_ext))
    feats[test_idx, :] = feats[sorted(test_idx), :]
    y[test_idx, :] = y[sorted(test_idx), :]
    labels = y.argmax(axis=1)
    n = feats.shape[0]
    edges = []
    for u, nbrs in graph.items():
        for v in nbrs:
            if u < n and v < n:
                edges.append((u, v))
    write_dataset(out, "citeseer", edges, feats, labels, y.shape[1])


if __name__ == "__main__":
    if len(sys.argv) != 4 or sys.argv[1] not in ("cora", "citeseer"):
        sys.exit(__doc__)
    {"cora": cora, "citeseer": citeseer}[sys.argv[1]](sys.argv[2], sys.argv[3])
