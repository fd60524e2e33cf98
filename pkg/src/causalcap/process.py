"""Bipartite process matrices.

A process lives on Alice's input/output ``A_I, A_O`` and Bob's ``B_I, B_O``.
Trivial wires are kept as explicit dimension-1 labels.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Mapping

import numpy as np

from .channels import (
    Channel,
    ChannelError,
    _labels_arg,
    choi_from_kraus,
    is_cptp,
    kron_channels,
    state,
)
from .operators import (
    DEFAULT_TOL,
    LabelError,
    LabeledOperator,
    identity,
    link_product,
    min_eigenvalue,
    opnorm,
    operator_from_json,
    operator_to_json,
    partial_trace,
    permute_to,
    relabel,
    tensor_product,
    trace_replace,
)

A_I, A_O, B_I, B_O = "A_I", "A_O", "B_I", "B_O"
PROCESS_LABELS = (A_I, A_O, B_I, B_O)
MEMORY = "E"
AB, BA = "ab", "ba"
SWAP_AB = {A_I: B_I, A_O: B_O, B_I: A_I, B_O: A_O}


class ProcessError(ValueError):
    pass


class ProcessMatrix:
    """Operator on ``(A_I, A_O, B_I, B_O)``, stored in that order.

    Validity is not enforced on construction; see :func:`validate_process`.
    """

    __slots__ = ("op",)

    def __init__(self, op: LabeledOperator):
        if set(op.names) != set(PROCESS_LABELS) or len(op.names) != 4:
            raise LabelError(
                f"process needs labels exactly {list(PROCESS_LABELS)}, got {list(op.names)}"
            )
        object.__setattr__(self, "op", permute_to(op, PROCESS_LABELS))

    def __setattr__(self, key, value):
        raise AttributeError("ProcessMatrix is immutable")

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix

    @property
    def dims(self) -> dict[str, int]:
        return {lab.name: lab.dim for lab in self.op.labels}

    @property
    def d_out(self) -> int:
        return self.op.dim_of(A_O) * self.op.dim_of(B_O)

    def __repr__(self):
        return f"ProcessMatrix({self.dims})"


@dataclass(frozen=True)
class CausalDecomposition:
    """``p W_ab + (1 - p) W_ba`` with ``W_ab`` ordered A before B."""

    p: float
    w_ab: ProcessMatrix
    w_ba: ProcessMatrix

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ProcessError(f"p={self.p} outside [0, 1]")
        if self.w_ab.dims != self.w_ba.dims:
            raise ProcessError(f"dims differ: {self.w_ab.dims} vs {self.w_ba.dims}")

    def process(self) -> ProcessMatrix:
        return mix(self.p, self.w_ab, self.w_ba)


@dataclass(frozen=True)
class ValidityReport:
    positivity: float
    trace: float
    marginal_a: float
    marginal_b: float
    no_loops: float

    def residuals(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def failures(self, tol: float = DEFAULT_TOL) -> list[str]:
        return [k for k, v in self.residuals().items() if v > tol]

    def passed(self, tol: float = DEFAULT_TOL) -> bool:
        return not self.failures(tol)


def _tr(W: LabeledOperator, *names) -> LabeledOperator:
    return trace_replace(W, names)


def validate_process(W: ProcessMatrix) -> ValidityReport:
    """Residuals of the five process conditions.

    ``positivity`` is the negative part of the smallest eigenvalue,
    ``trace`` is ``|Tr W - d_O|``, the rest are spectral-norm residuals of
    the two marginal conditions and of the no-loop condition.
    """
    op = W.op
    marginal_a = opnorm(_tr(op, B_I, B_O) - _tr(op, A_O, B_I, B_O))
    marginal_b = opnorm(_tr(op, A_I, A_O) - _tr(op, B_O, A_I, A_O))
    loops = op - (_tr(op, A_O) + _tr(op, B_O) - _tr(op, A_O, B_O))
    return ValidityReport(
        positivity=max(0.0, -min_eigenvalue(op)),
        trace=abs(op.trace() - W.d_out),
        marginal_a=marginal_a,
        marginal_b=marginal_b,
        no_loops=opnorm(loops),
    )


def check_causal_order(W: ProcessMatrix, direction: str) -> float:
    """Residual of no-signalling from the later party to the earlier one."""
    if direction == AB:
        return opnorm(W.op - _tr(W.op, B_O))
    if direction == BA:
        return opnorm(W.op - _tr(W.op, A_O))
    raise ValueError(f"direction must be 'ab' or 'ba', got {direction!r}")


def from_channel(C: Channel, tol: float = DEFAULT_TOL) -> ProcessMatrix:
    """Embed a one-wire channel ``A_O -> B_I`` as a process with trivial
    ``A_I`` and ``B_O``."""
    if len(C.in_labels) != 1 or len(C.out_labels) != 1:
        raise ProcessError("from_channel expects a single-input single-output channel")
    if not is_cptp(C, tol).passed(tol):
        raise ChannelError("from_channel requires a CPTP channel")
    choi = relabel(C.choi, {C.in_labels[0]: A_O, C.out_labels[0]: B_I})
    trivial = identity([(A_I, 1), (B_O, 1)])
    return ProcessMatrix(tensor_product(choi, trivial))


def comb_process(rho: Channel, C: Channel, direction: str = AB, d_last_out: int = 1,
                 tol: float = DEFAULT_TOL) -> ProcessMatrix:
    """Causally ordered process: a channel with memory.

    For ``direction='ab'``: ``rho`` is a state on ``A_I (x) E`` and ``C`` a
    channel ``E (x) A_O -> B_I``; the process is ``(rho * C) (x) 1^{B_O}``
    with ``dim B_O = d_last_out``. For ``'ba'`` the roles of A and B swap.
    The memory label ``E`` may be absent or of dimension 1.
    """
    if direction not in (AB, BA):
        raise ValueError(f"direction must be 'ab' or 'ba', got {direction!r}")
    first_in, first_out, second_in, second_out = (
        (A_I, A_O, B_I, B_O) if direction == AB else (B_I, B_O, A_I, A_O)
    )
    if not rho.is_state or set(rho.choi.names) - {first_in, MEMORY} or first_in not in rho.choi.names:
        raise LabelError(f"comb state must live on {first_in} (x) {MEMORY}, got {rho.choi.names}")
    if set(C.in_labels) - {MEMORY, first_out} or first_out not in C.in_labels or C.out_labels != (second_in,):
        raise LabelError(
            f"comb channel must map {MEMORY} (x) {first_out} -> {second_in}, "
            f"got {C.in_labels} -> {C.out_labels}"
        )
    has_mem = (MEMORY in rho.choi.names, MEMORY in C.in_labels)
    if has_mem[0] and has_mem[1]:
        if rho.choi.dim_of(MEMORY) != C.choi.dim_of(MEMORY):
            raise ProcessError("memory dimension mismatch between state and channel")
    elif any(has_mem):
        holder = rho.choi if has_mem[0] else C.choi
        if holder.dim_of(MEMORY) != 1:
            raise ProcessError("memory wire present on only one side")
    if not is_cptp(C, tol).passed(tol):
        raise ChannelError("comb channel is not CPTP")
    op = link_product(rho.choi, C.choi)
    if MEMORY in op.names:
        # dimension-1 memory present on one side only
        op = partial_trace(op, [MEMORY])
    op = tensor_product(op, identity([(second_out, d_last_out)]))
    return ProcessMatrix(op)


def mix(p: float, W1: ProcessMatrix, W2: ProcessMatrix) -> ProcessMatrix:
    if not 0.0 <= p <= 1.0:
        raise ProcessError(f"p={p} outside [0, 1]")
    if W1.dims != W2.dims:
        raise ProcessError(f"dims differ: {W1.dims} vs {W2.dims}")
    return ProcessMatrix(LabeledOperator(W1.op.labels, p * W1.matrix + (1 - p) * W2.matrix))


def insert_parties(W: ProcessMatrix, A: Channel, B: Channel) -> Channel:
    """Contract local channels into the process, ``N = W * (A (x) B)``.

    ``A`` must read ``A_I`` and write ``A_O`` (likewise ``B``); every other
    wire of ``A`` and ``B`` is an ancilla and becomes a wire of ``N``.
    """
    for party, C, i, o in (("Alice", A, A_I, A_O), ("Bob", B, B_I, B_O)):
        if i not in C.in_labels or o not in C.out_labels:
            raise LabelError(f"{party}'s channel must read {i} and write {o}")
        other = set(PROCESS_LABELS) - {i, o}
        if other & set(C.choi.names):
            raise LabelError(f"{party}'s channel touches the other party's wires")
        for name in (i, o):
            if C.choi.dim_of(name) != W.op.dim_of(name):
                raise LabelError(f"wire {name}: channel dim {C.choi.dim_of(name)} "
                                 f"vs process dim {W.op.dim_of(name)}")
    ancilla_a = set(A.choi.names) - {A_I, A_O}
    ancilla_b = set(B.choi.names) - {B_I, B_O}
    if ancilla_a & ancilla_b:
        raise LabelError(f"ancilla label collision {sorted(ancilla_a & ancilla_b)}")
    local = kron_channels(A, B)
    choi = link_product(W.op, local.choi)
    ins = tuple(n for n in local.in_labels if n not in PROCESS_LABELS)
    outs = tuple(n for n in local.out_labels if n not in PROCESS_LABELS)
    return Channel(choi, ins, outs)


# --- random instances ---------------------------------------------------

def random_density(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Ginibre-induced random density matrix."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_isometry(d_in: int, d_out: int, rng: np.random.Generator) -> np.ndarray:
    """Gaussian matrix orthonormalized by QR, phases fixed so the columns are
    Haar distributed."""
    g = rng.standard_normal((d_out, d_in)) + 1j * rng.standard_normal((d_out, d_in))
    q, r = np.linalg.qr(g)
    phases = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phases


def random_kraus(d_in: int, d_out: int, rng: np.random.Generator, rank: int | None = None) -> list:
    rank = d_in * d_out if rank is None else rank
    rank = max(rank, -(-d_in // d_out))  # isometry needs d_out * rank >= d_in
    V = random_isometry(d_in, d_out * rank, rng).reshape(d_out, rank, d_in)
    return [V[:, k, :] for k in range(rank)]


def random_channel(in_labels, out_labels, rng: np.random.Generator, rank: int | None = None) -> Channel:
    """Random CPTP map from a Haar isometry into output (x) environment."""
    ins, outs = _labels_arg(in_labels), _labels_arg(out_labels)
    d_in = int(np.prod([l.dim for l in ins], dtype=int))
    d_out = int(np.prod([l.dim for l in outs], dtype=int))
    return choi_from_kraus(random_kraus(d_in, d_out, rng, rank), list(ins), list(outs))


def random_ordered_process(dims: Mapping[str, int], memory_dim: int = 2, seed=None,
                           direction: str = AB) -> ProcessMatrix:
    """Random causally ordered comb; deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    first_in, first_out, second_in, second_out = (
        (A_I, A_O, B_I, B_O) if direction == AB else (B_I, B_O, A_I, A_O)
    )
    d = {k: int(dims[k]) for k in PROCESS_LABELS}
    rho = state(random_density(d[first_in] * memory_dim, rng),
                [(first_in, d[first_in]), (MEMORY, memory_dim)])
    C = random_channel([(MEMORY, memory_dim), (first_out, d[first_out])],
                       [(second_in, d[second_in])], rng)
    return comb_process(rho, C, direction, d[second_out])


def swap_parties(W: ProcessMatrix) -> ProcessMatrix:
    return ProcessMatrix(relabel(W.op, SWAP_AB))


# --- JSON --------------------------------------------------------------

def process_to_json(W: ProcessMatrix) -> dict:
    return {"dims": W.dims, "op": operator_to_json(W.op)}


def process_from_json(data: Mapping) -> ProcessMatrix:
    W = ProcessMatrix(operator_from_json(data["op"]))
    if "dims" in data and {k: int(v) for k, v in data["dims"].items()} != W.dims:
        raise ProcessError(f"declared dims {data['dims']} disagree with operator {W.dims}")
    return W


def decomposition_to_json(dec: CausalDecomposition) -> dict:
    return {"p": dec.p, "w_ab": process_to_json(dec.w_ab), "w_ba": process_to_json(dec.w_ba)}


def decomposition_from_json(data: Mapping) -> CausalDecomposition:
    return CausalDecomposition(float(data["p"]), process_from_json(data["w_ab"]),
                               process_from_json(data["w_ba"]))
