"""Labeled multi-subsystem operators.

Every state, Choi matrix and process matrix in the package is a
:class:`LabeledOperator`: a square complex matrix together with an ordered
list of named subsystems. The composite index is row-major over the label
list, i.e. the first label is the most significant digit, matching
``numpy.kron``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_TOL = 1e-9


class LabelError(ValueError):
    """Unknown, duplicated or dimension-mismatched subsystem label."""


class NonHermitianError(ValueError):
    """Raised by :func:`is_psd` when the operator is not Hermitian."""


@dataclass(frozen=True)
class SystemLabel:
    name: str
    dim: int

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise LabelError(f"label name must be a non-empty string, got {self.name!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise LabelError(f"label {self.name!r} has invalid dimension {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))


def _as_labels(labels) -> tuple[SystemLabel, ...]:
    out = []
    for lab in labels:
        if isinstance(lab, SystemLabel):
            out.append(lab)
        elif isinstance(lab, Mapping):
            out.append(SystemLabel(lab["name"], lab["dim"]))
        else:
            name, dim = lab
            out.append(SystemLabel(name, dim))
    return tuple(out)


class LabeledOperator:
    """Immutable complex matrix over named subsystems.

    Parameters
    ----------
    labels : sequence of SystemLabel or (name, dim) pairs
    matrix : array_like
        Square matrix of side ``prod(dims)``.
    """

    __slots__ = ("labels", "matrix")

    def __init__(self, labels, matrix):
        labels = _as_labels(labels)
        names = [lab.name for lab in labels]
        seen = set()
        for name in names:
            if name in seen:
                raise LabelError(f"duplicate label {name!r}")
            seen.add(name)
        mat = np.array(matrix, dtype=complex)
        if mat.ndim == 0:
            mat = mat.reshape(1, 1)
        size = int(np.prod([lab.dim for lab in labels], dtype=int))
        if mat.shape != (size, size):
            raise ValueError(
                f"matrix shape {mat.shape} does not match label dims "
                f"{[lab.dim for lab in labels]} (expected {(size, size)})"
            )
        mat.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "matrix", mat)

    def __setattr__(self, key, value):
        raise AttributeError("LabeledOperator is immutable")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(lab.name for lab in self.labels)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(lab.dim for lab in self.labels)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def dim_of(self, name: str) -> int:
        for lab in self.labels:
            if lab.name == name:
                return lab.dim
        raise LabelError(f"unknown label {name!r}; operator has {list(self.names)}")

    def label(self, name: str) -> SystemLabel:
        return SystemLabel(name, self.dim_of(name))

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def tensor(self) -> np.ndarray:
        """Matrix reshaped to ``dims + dims`` (row axes first, then column axes)."""
        return self.matrix.reshape(self.dims + self.dims)

    def __add__(self, other: "LabeledOperator") -> "LabeledOperator":
        other = permute_to(other, self.names)
        _check_same_labels(self, other)
        return LabeledOperator(self.labels, self.matrix + other.matrix)

    def __sub__(self, other: "LabeledOperator") -> "LabeledOperator":
        other = permute_to(other, self.names)
        _check_same_labels(self, other)
        return LabeledOperator(self.labels, self.matrix - other.matrix)

    def __mul__(self, scalar) -> "LabeledOperator":
        return LabeledOperator(self.labels, self.matrix * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "LabeledOperator":
        return LabeledOperator(self.labels, self.matrix / scalar)

    def __repr__(self):
        labs = ", ".join(f"{lab.name}:{lab.dim}" for lab in self.labels)
        return f"LabeledOperator([{labs}])"


def _check_same_labels(a: LabeledOperator, b: LabeledOperator):
    if a.labels != b.labels:
        raise LabelError(f"label mismatch: {a.labels} vs {b.labels}")


def _resolve(M: LabeledOperator, names: Iterable[str]) -> list[int]:
    if isinstance(names, str):
        names = [names]
    idx = []
    for name in names:
        try:
            idx.append(M.names.index(name))
        except ValueError:
            raise LabelError(f"unknown label {name!r}; operator has {list(M.names)}") from None
    return idx


def identity(labels) -> LabeledOperator:
    """Unnormalized identity on the given labels."""
    labels = _as_labels(labels)
    size = int(np.prod([lab.dim for lab in labels], dtype=int))
    return LabeledOperator(labels, np.eye(size))


def ket_operator(labels, ket) -> LabeledOperator:
    """Rank-one projector ``|ket><ket|``."""
    ket = np.asarray(ket, dtype=complex).reshape(-1)
    return LabeledOperator(labels, np.outer(ket, ket.conj()))


def relabel(M: LabeledOperator, mapping: Mapping[str, str]) -> LabeledOperator:
    _resolve(M, mapping.keys())
    labels = [SystemLabel(mapping.get(lab.name, lab.name), lab.dim) for lab in M.labels]
    return LabeledOperator(labels, M.matrix)


def tensor_product(M: LabeledOperator, N: LabeledOperator) -> LabeledOperator:
    clash = set(M.names) & set(N.names)
    if clash:
        raise LabelError(f"duplicate label {sorted(clash)[0]!r} in tensor product")
    return LabeledOperator(M.labels + N.labels, np.kron(M.matrix, N.matrix))


def permute_to(M: LabeledOperator, order: Sequence[str]) -> LabeledOperator:
    order = list(order)
    if sorted(order) != sorted(M.names) or len(set(order)) != len(order):
        raise LabelError(f"{order} is not a permutation of {list(M.names)}")
    if tuple(order) == M.names:
        return M
    perm = _resolve(M, order)
    n = len(perm)
    t = M.tensor().transpose(perm + [p + n for p in perm])
    labels = [M.labels[i] for i in perm]
    return LabeledOperator(labels, t.reshape(M.matrix.shape))


def partial_trace(M: LabeledOperator, over: Iterable[str]) -> LabeledOperator:
    over = [over] if isinstance(over, str) else list(over)
    idx = _resolve(M, over)
    if not idx:
        return M
    keep = [i for i in range(len(M.labels)) if i not in idx]
    n = len(M.labels)
    # einsum with shared row/column subscripts on traced axes
    row = list(range(n))
    col = [i if i in idx else n + i for i in range(n)]
    out = keep + [n + i for i in keep]
    t = np.einsum(M.tensor(), row + col, out)
    labels = [M.labels[i] for i in keep]
    size = int(np.prod([lab.dim for lab in labels], dtype=int))
    return LabeledOperator(labels, t.reshape(size, size))


def partial_transpose(M: LabeledOperator, on: Iterable[str]) -> LabeledOperator:
    on = [on] if isinstance(on, str) else list(on)
    idx = _resolve(M, on)
    n = len(M.labels)
    axes = list(range(2 * n))
    for i in idx:
        axes[i], axes[n + i] = axes[n + i], axes[i]
    t = M.tensor().transpose(axes)
    return LabeledOperator(M.labels, t.reshape(M.matrix.shape))


def trace_replace(M: LabeledOperator, X: Iterable[str]) -> LabeledOperator:
    """Discard ``X`` and put back the normalized identity in its place.

    Label order of ``M`` is preserved.
    """
    X = [X] if isinstance(X, str) else list(X)
    idx = _resolve(M, X)
    if not idx:
        return M
    replaced = [M.labels[i] for i in idx]
    d = int(np.prod([lab.dim for lab in replaced], dtype=int))
    reduced = partial_trace(M, X)
    out = tensor_product(reduced, identity(replaced) / d)
    return permute_to(out, M.names)


def link_product(M: LabeledOperator, N: LabeledOperator) -> LabeledOperator:
    """Link product ``Tr_s[M^{T_s} N]`` over the shared labels ``s``.

    Result labels are M's unshared labels followed by N's unshared labels.
    With no shared labels this is the tensor product.
    """
    shared = [name for name in M.names if name in N.names]
    for name in shared:
        if M.dim_of(name) != N.dim_of(name):
            raise LabelError(
                f"shared label {name!r} has dim {M.dim_of(name)} vs {N.dim_of(name)}"
            )
    if not shared:
        return tensor_product(M, N)

    # integer subscripts: each shared label gets one row id and one col id
    # common to both factors; Tr_s[M^{T_s} N] = sum M[a s2, a' s1] N[s2 c, s1 c']
    counter = iter(range(10**6))
    sub_row, sub_col = {}, {}
    for name in shared:
        sub_row[name] = next(counter)
        sub_col[name] = next(counter)
    m_row, m_col, n_row, n_col = [], [], [], []
    out_row, out_col, out_labels = [], [], []
    for lab in M.labels:
        if lab.name in shared:
            m_row.append(sub_row[lab.name])
            m_col.append(sub_col[lab.name])
        else:
            r, c = next(counter), next(counter)
            m_row.append(r)
            m_col.append(c)
            out_row.append(r)
            out_col.append(c)
            out_labels.append(lab)
    for lab in N.labels:
        if lab.name in shared:
            n_row.append(sub_row[lab.name])
            n_col.append(sub_col[lab.name])
        else:
            r, c = next(counter), next(counter)
            n_row.append(r)
            n_col.append(c)
            out_row.append(r)
            out_col.append(c)
            out_labels.append(lab)
    t = np.einsum(M.tensor(), m_row + m_col, N.tensor(), n_row + n_col, out_row + out_col,
                  optimize=True)
    size = int(np.prod([lab.dim for lab in out_labels], dtype=int))
    return LabeledOperator(out_labels, np.asarray(t).reshape(size, size))


def opnorm(M) -> float:
    """Operator (spectral) norm of a LabeledOperator or array."""
    mat = M.matrix if isinstance(M, LabeledOperator) else np.asarray(M)
    if mat.size == 0:
        return 0.0
    return float(np.linalg.norm(mat, 2))


def distance(M: LabeledOperator, N: LabeledOperator) -> float:
    """Spectral-norm distance, after aligning N's label order to M's."""
    return opnorm(M - N)


def allclose(M: LabeledOperator, N: LabeledOperator, tol: float = DEFAULT_TOL) -> bool:
    if set(M.names) != set(N.names):
        return False
    if any(M.dim_of(n) != N.dim_of(n) for n in M.names):
        return False
    return distance(M, N) <= tol * max(1.0, opnorm(M))


def is_hermitian(M: LabeledOperator, tol: float = DEFAULT_TOL) -> bool:
    return opnorm(M.matrix - M.matrix.conj().T) <= tol * opnorm(M)


def min_eigenvalue(M: LabeledOperator) -> float:
    herm = (M.matrix + M.matrix.conj().T) / 2
    return float(np.linalg.eigvalsh(herm)[0])


def is_psd(M: LabeledOperator, tol: float = DEFAULT_TOL) -> bool:
    """PSD test on the Hermitian part.

    Raises NonHermitianError instead of returning False when
    ``||M - M^dag|| > tol ||M||``.
    """
    if not is_hermitian(M, tol):
        raise NonHermitianError(
            f"operator on {list(M.names)} is not Hermitian within tol={tol:g}"
        )
    herm = (M.matrix + M.matrix.conj().T) / 2
    evals = np.linalg.eigvalsh(herm)
    scale = max(1.0, float(np.max(np.abs(evals))))
    return bool(evals[0] >= -tol * scale)


# --- JSON --------------------------------------------------------------

def matrix_to_json(mat) -> list:
    mat = np.asarray(mat, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def matrix_from_json(data) -> np.ndarray:
    """Accepts rows of ``[re, im]`` pairs or plain real numbers."""
    rows = []
    for row in data:
        vals = []
        for z in row:
            if isinstance(z, (list, tuple)):
                if len(z) != 2:
                    raise ValueError(f"complex entry must be [re, im], got {z!r}")
                vals.append(complex(z[0], z[1]))
            else:
                vals.append(complex(z))
        rows.append(vals)
    return np.array(rows, dtype=complex)


def labels_to_json(labels) -> list:
    return [{"name": lab.name, "dim": lab.dim} for lab in labels]


def operator_to_json(M: LabeledOperator) -> dict:
    """Serialize with labels sorted by name, so output does not depend on
    the internal label order."""
    M = permute_to(M, sorted(M.names))
    return {"labels": labels_to_json(M.labels), "matrix": matrix_to_json(M.matrix)}


def operator_from_json(data: Mapping) -> LabeledOperator:
    return LabeledOperator(_as_labels(data["labels"]), matrix_from_json(data["matrix"]))
