"""Quantum channels in Choi form.

The Choi matrix of ``M: L(H_in) -> L(H_out)`` is
``sum_ij M(|i><j|) (x) |i><j|`` on ``H_out (x) H_in`` (unnormalized, trace
``d_in`` for a trace-preserving map). A state is a channel with no inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .operators import (
    DEFAULT_TOL,
    LabelError,
    LabeledOperator,
    SystemLabel,
    _as_labels,
    identity,
    is_psd,
    labels_to_json,
    link_product,
    matrix_from_json,
    min_eigenvalue,
    opnorm,
    operator_from_json,
    operator_to_json,
    partial_trace,
    permute_to,
    relabel,
    tensor_product,
)


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class Channel:
    choi: LabeledOperator
    in_labels: tuple[str, ...]
    out_labels: tuple[str, ...]

    def __post_init__(self):
        in_labels = tuple(self.in_labels)
        out_labels = tuple(self.out_labels)
        object.__setattr__(self, "in_labels", in_labels)
        object.__setattr__(self, "out_labels", out_labels)
        if set(in_labels) & set(out_labels):
            raise LabelError(f"labels both input and output: {set(in_labels) & set(out_labels)}")
        if set(in_labels) | set(out_labels) != set(self.choi.names) or (
            len(in_labels) + len(out_labels) != len(self.choi.names)
        ):
            raise LabelError(
                f"choi labels {list(self.choi.names)} != in {list(in_labels)} + out {list(out_labels)}"
            )

    @property
    def matrix(self) -> np.ndarray:
        return self.choi.matrix

    @property
    def is_state(self) -> bool:
        return not self.in_labels

    def in_dim(self) -> int:
        return int(np.prod([self.choi.dim_of(n) for n in self.in_labels], dtype=int))

    def out_dim(self) -> int:
        return int(np.prod([self.choi.dim_of(n) for n in self.out_labels], dtype=int))

    def in_system(self) -> list[SystemLabel]:
        return [self.choi.label(n) for n in self.in_labels]

    def out_system(self) -> list[SystemLabel]:
        return [self.choi.label(n) for n in self.out_labels]

    def canonical(self) -> LabeledOperator:
        """Choi matrix ordered as (outputs, inputs)."""
        return permute_to(self.choi, self.out_labels + self.in_labels)

    def relabel(self, mapping: Mapping[str, str]) -> "Channel":
        mapping = {k: v for k, v in mapping.items() if k in self.choi.names}
        return Channel(
            relabel(self.choi, mapping),
            tuple(mapping.get(n, n) for n in self.in_labels),
            tuple(mapping.get(n, n) for n in self.out_labels),
        )


@dataclass(frozen=True)
class CPTPReport:
    psd: bool
    tp_residual: float
    min_eigenvalue: float

    def passed(self, tol: float = DEFAULT_TOL) -> bool:
        return self.psd and self.tp_residual <= tol


def state(matrix, labels) -> Channel:
    """Density operator on ``labels`` (a SystemLabel, (name, dim) pair or list)."""
    labels = _labels_arg(labels)
    op = LabeledOperator(labels, matrix)
    return Channel(op, (), op.names)


def state_from_operator(op: LabeledOperator) -> Channel:
    return Channel(op, (), op.names)


def pure_state(ket, labels) -> Channel:
    ket = np.asarray(ket, dtype=complex).reshape(-1)
    return state(np.outer(ket, ket.conj()), labels)


def basis_state(index: int, label) -> Channel:
    (lab,) = _labels_arg(label)
    ket = np.zeros(lab.dim)
    ket[index] = 1.0
    return pure_state(ket, [lab])


def max_entangled(d: int, names=("C", "A_E")) -> Channel:
    """Normalized maximally entangled state ``Phi+`` on two ``d``-dim systems."""
    ket = np.eye(d).reshape(-1) / np.sqrt(d)
    return pure_state(ket, [(names[0], d), (names[1], d)])


def _labels_arg(labels) -> tuple[SystemLabel, ...]:
    if isinstance(labels, SystemLabel):
        return (labels,)
    if isinstance(labels, tuple) and len(labels) == 2 and isinstance(labels[0], str):
        return _as_labels([labels])
    if isinstance(labels, Mapping):
        return _as_labels([labels])
    return _as_labels(labels)


def choi_from_kraus(kraus: Sequence, in_label, out_label) -> Channel:
    """Choi matrix of ``rho -> sum_k K rho K^dag``.

    ``in_label`` / ``out_label`` may be single labels or lists; Kraus
    operators act on the composite (row-major) spaces. Trace preservation is
    not enforced here; use :func:`is_cptp`.
    """
    ins = _labels_arg(in_label)
    outs = _labels_arg(out_label)
    d_in = int(np.prod([lab.dim for lab in ins], dtype=int))
    d_out = int(np.prod([lab.dim for lab in outs], dtype=int))
    kraus = [np.atleast_2d(np.asarray(K, dtype=complex)) for K in kraus]
    if not kraus:
        raise ChannelError("empty Kraus list")
    for K in kraus:
        if K.shape != (d_out, d_in):
            raise ChannelError(f"Kraus operator of shape {K.shape}, expected {(d_out, d_in)}")
    # |K>> = sum_i K|i> (x) |i>, i.e. K flattened row-major over (out, in)
    vecs = np.stack([K.reshape(-1) for K in kraus])
    choi = vecs.T @ vecs.conj()
    return Channel(LabeledOperator(outs + ins, choi),
                   tuple(l.name for l in ins), tuple(l.name for l in outs))


def is_cptp(C: Channel, tol: float = DEFAULT_TOL) -> CPTPReport:
    reduced = partial_trace(C.choi, C.out_labels)
    reduced = permute_to(reduced, C.in_labels)
    tp = opnorm(reduced.matrix - np.eye(reduced.size))
    try:
        psd = is_psd(C.choi, tol)
    except ValueError:
        psd = False
    return CPTPReport(psd=psd, tp_residual=tp, min_eigenvalue=min_eigenvalue(C.choi))


def apply(C: Channel, rho: Channel) -> Channel:
    """Output state of ``C`` on ``rho``.

    ``rho`` must carry all of ``C``'s input labels; any further labels are
    left untouched (identity extension).
    """
    if not rho.is_state:
        raise ChannelError("apply expects a state (channel without inputs)")
    missing = [n for n in C.in_labels if n not in rho.choi.names]
    if missing:
        raise LabelError(f"state lacks channel inputs {missing}")
    clash = [n for n in C.out_labels if n in rho.choi.names]
    if clash:
        raise LabelError(f"state already carries channel outputs {clash}")
    out = link_product(rho.choi, C.choi)
    return state_from_operator(out)


def compose(C2: Channel, C1: Channel) -> Channel:
    """``C2 o C1``, linked over ``C1.out & C2.in``.

    Unmatched wires stay open: remaining inputs of C2 become inputs of the
    composite, remaining outputs of C1 become outputs.
    """
    shared = [n for n in C1.out_labels if n in C2.in_labels]
    bad = [n for n in C1.in_labels if n in C2.choi.names] + [
        n for n in C2.out_labels if n in C1.choi.names
    ]
    if bad:
        raise LabelError(f"labels {bad} would form a loop or collide")
    for n in shared:
        if C1.choi.dim_of(n) != C2.choi.dim_of(n):
            raise ChannelError(f"wire {n!r}: dim {C1.choi.dim_of(n)} vs {C2.choi.dim_of(n)}")
    choi = link_product(C1.choi, C2.choi)
    ins = C1.in_labels + tuple(n for n in C2.in_labels if n not in shared)
    outs = tuple(n for n in C1.out_labels if n not in shared) + C2.out_labels
    return Channel(choi, ins, outs)


def identity_channel(d: int, in_name: str = "in", out_name: str = "out") -> Channel:
    return choi_from_kraus([np.eye(d)], (in_name, d), (out_name, d))


def trace_channel(d: int, in_name: str = "in") -> Channel:
    return Channel(identity([(in_name, d)]), (in_name,), ())


def preparation_channel(sigma: Channel) -> Channel:
    """Channel with no input that outputs ``sigma``."""
    if not sigma.is_state:
        raise ChannelError("preparation_channel expects a state")
    return Channel(sigma.choi, (), sigma.out_labels)


def erasure_channel(p: float, d: int, in_name: str = "in", out_name: str = "out") -> Channel:
    """``rho -> p rho + (1-p) |e><e|`` with flag ``|e>`` = basis vector ``d``."""
    if not 0.0 <= p <= 1.0:
        raise ChannelError(f"erasure probability parameter p={p} outside [0, 1]")
    if d < 2:
        raise ChannelError("erasure channel needs d >= 2")
    embed = np.eye(d + 1, d)
    kraus = [np.sqrt(p) * embed]
    for i in range(d):
        K = np.zeros((d + 1, d))
        K[d, i] = np.sqrt(1 - p)
        kraus.append(K)
    return choi_from_kraus(kraus, (in_name, d), (out_name, d + 1))


def _sqrt_psd(mat: np.ndarray, cutoff: float = 1e-14) -> np.ndarray:
    evals, vecs = np.linalg.eigh((mat + mat.conj().T) / 2)
    # rounding noise on null directions would otherwise turn into ~1e-8 roots
    evals = np.where(evals > cutoff * max(1.0, evals[-1]), evals, 0.0)
    return (vecs * np.sqrt(evals)) @ vecs.conj().T


def fidelity(rho: Channel, sigma: Channel) -> float:
    """Squared Uhlmann fidelity ``(Tr sqrt(sqrt(sigma) rho sqrt(sigma)))^2``,
    evaluated as the squared trace norm of ``sqrt(rho) sqrt(sigma)``."""
    for s in (rho, sigma):
        if not s.is_state:
            raise ChannelError("fidelity expects states")
    if set(rho.choi.names) != set(sigma.choi.names):
        raise LabelError(f"fidelity of states on {rho.choi.names} and {sigma.choi.names}")
    a = rho.choi.matrix
    b = permute_to(sigma.choi, rho.choi.names).matrix
    if a.shape != b.shape:
        raise LabelError("dimension mismatch in fidelity")
    svals = np.linalg.svd(_sqrt_psd(a) @ _sqrt_psd(b), compute_uv=False)
    f = float(np.sum(svals) ** 2)
    return min(max(f, 0.0), 1.0)


# --- JSON --------------------------------------------------------------

def channel_to_json(C: Channel) -> dict:
    return {
        "in": labels_to_json(C.in_system()),
        "out": labels_to_json(C.out_system()),
        "choi": operator_to_json(C.choi),
    }


def _names(labels) -> tuple[str, ...]:
    return tuple(lab if isinstance(lab, str) else lab["name"] for lab in labels)


def channel_from_json(data: Mapping) -> Channel:
    """Accepts ``{"in", "out", "choi"}`` or ``{"in", "out", "kraus"}``.

    In the Kraus form the label entries must carry dimensions.
    """
    if "choi" in data:
        op = operator_from_json(data["choi"])
        return Channel(op, _names(data.get("in", [])), _names(data.get("out", [])))
    if "kraus" in data:
        ins = _as_labels(data.get("in", []))
        outs = _as_labels(data["out"])
        kraus = [matrix_from_json(K) for K in data["kraus"]]
        return choi_from_kraus(kraus, list(ins), list(outs))
    raise ChannelError("channel JSON needs a 'choi' or 'kraus' entry")


def kron_channels(C1: Channel, C2: Channel) -> Channel:
    return Channel(tensor_product(C1.choi, C2.choi),
                   C1.in_labels + C2.in_labels, C1.out_labels + C2.out_labels)
