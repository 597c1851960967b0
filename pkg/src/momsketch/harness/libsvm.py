"""Reader and writer for the LIBSVM sparse text format.

Each line is ``label idx:val idx:val ...`` with 1-based feature indices.
Labels are read but discarded by the experiments.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)


class LibSVMFormatError(ValueError):
    pass


def parse_libsvm(path: str | Path, return_labels: bool = False):
    """Parse a LIBSVM file into a CSR matrix with n = largest index seen."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LibSVMFormatError(f"cannot read {path}: {exc}") from exc

    labels, indptr, indices, data = [], [0], [], []
    n = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise LibSVMFormatError(
                f"{path}:{lineno}: non-numeric label {tokens[0]!r}"
            ) from None
        row = {}
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise LibSVMFormatError(
                    f"{path}:{lineno}: malformed feature {tok!r}"
                ) from None
            if not sep:
                raise LibSVMFormatError(f"{path}:{lineno}: malformed feature {tok!r}")
            if idx <= 0:
                raise LibSVMFormatError(
                    f"{path}:{lineno}: feature index must be >= 1, got {idx}"
                )
            row[idx - 1] = val
            n = max(n, idx)
        if not row:
            log.warning("%s:%d: no features, row is all zeros", path, lineno)
        for j in sorted(row):
            indices.append(j)
            data.append(row[j])
        indptr.append(len(indices))

    m = len(labels)
    A = sp.csr_matrix(
        (np.array(data, float), np.array(indices, np.int64), np.array(indptr, np.int64)),
        shape=(m, n),
    )
    if return_labels:
        return A, np.array(labels)
    return A


def write_libsvm(path: str | Path, A, labels=None) -> None:
    A = sp.csr_matrix(A)
    if labels is None:
        labels = np.zeros(A.shape[0])
    out = []
    for i in range(A.shape[0]):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        feats = " ".join(f"{j + 1}:{float(v)!r}" for j, v in zip(A.indices[lo:hi], A.data[lo:hi]))
        out.append(f"{labels[i]:g} {feats}".rstrip())
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
