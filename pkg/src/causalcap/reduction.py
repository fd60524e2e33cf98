"""Reduce a causally separable process to an erasure channel.

Contracting ``p W_ab + (1-p) W_ba`` with any channel of Alice gives, on
Bob's side, ``[p L + (1-p) 1 (x) sigma] (x) 1^{B_O}``: with probability
``p`` Bob receives ``L`` applied to Alice's ancilla, otherwise a fixed state
``sigma`` that carries no information. Bob can therefore simulate the
whole thing from the output of an erasure channel with parameter ``p``.

Normalization: ``sigma = Tr_{A_I A_O B_O} W_ba / (d_{A_O} d_{B_O})`` and
``L = Tr_{B_O}(W_ab * A) / d_{B_O}``, so that ``sigma`` has unit trace and
``L`` is trace preserving.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .channels import (
    Channel,
    ChannelError,
    choi_from_kraus,
    compose,
    erasure_channel,
    is_cptp,
    state,
    state_from_operator,
)
from .operators import (
    DEFAULT_TOL,
    LabelError,
    LabeledOperator,
    identity,
    link_product,
    opnorm,
    partial_trace,
    permute_to,
    tensor_product,
    trace_replace,
)
from .process import (
    A_I,
    A_O,
    B_I,
    B_O,
    BA,
    CausalDecomposition,
    comb_process,
    random_ordered_process,
    swap_parties,
)

ALICE_IN = "A_I'"
ALICE_OUT = "A_O'"
BOB_IN = "B_I'"
BOB_OUT = "B_O'"
ERASURE_WIRE = "X"


class ReductionError(ValueError):
    pass


@dataclass(frozen=True)
class EffectiveDecomposition:
    p: float
    L: Channel
    sigma: Channel
    reconstruction_residual: float = 0.0


@dataclass(frozen=True)
class PipelineReport:
    p: float
    bo_identity_residual: float
    reconstruction_residual: float
    erasure_residual: float

    def to_json(self) -> dict:
        return asdict(self)

    def passed(self, tol: float = DEFAULT_TOL) -> bool:
        return max(self.bo_identity_residual, self.reconstruction_residual,
                   self.erasure_residual) <= tol


def _check_alice(A: Channel, tol: float) -> Channel:
    if A_I not in A.in_labels or A_O not in A.out_labels:
        raise LabelError(f"Alice's channel must read {A_I} and write {A_O}")
    extra_out = [n for n in A.out_labels if n != A_O]
    for name in extra_out:
        if A.choi.dim_of(name) != 1:
            raise ReductionError(f"Alice's output ancilla {name!r} must be trivial")
    if not is_cptp(A, tol).passed(tol):
        raise ChannelError("Alice's channel is not CPTP")
    if extra_out:
        A = Channel(partial_trace(A.choi, extra_out), A.in_labels, (A_O,))
    return A


def contract_alice(dec: CausalDecomposition, A: Channel, tol: float = DEFAULT_TOL) -> Channel:
    """``W * A`` as a channel from Alice's ancilla and ``B_O`` to ``B_I``."""
    A = _check_alice(A, tol)
    op = link_product(dec.process().op, A.choi)
    ancilla = tuple(n for n in A.in_labels if n != A_I)
    return Channel(op, ancilla + (B_O,), (B_I,))


def bo_identity_residual(N: Channel) -> float:
    """How far ``N`` is from ignoring whatever enters ``B_O``."""
    return opnorm(N.choi - trace_replace(N.choi, [B_O]))


def discard_bob_output(N: Channel) -> Channel:
    """Feed the maximally mixed state into ``B_O``."""
    d = N.choi.dim_of(B_O)
    op = partial_trace(N.choi, [B_O]) / d
    return Channel(op, tuple(n for n in N.in_labels if n != B_O), N.out_labels)


def effective_decomposition(dec: CausalDecomposition, A: Channel,
                            tol: float = DEFAULT_TOL) -> EffectiveDecomposition:
    A = _check_alice(A, tol)
    d_ao = dec.w_ab.op.dim_of(A_O)
    d_bo = dec.w_ab.op.dim_of(B_O)
    ancilla = tuple(n for n in A.in_labels if n != A_I)

    L_op = partial_trace(link_product(dec.w_ab.op, A.choi), [B_O]) / d_bo
    L = Channel(L_op, ancilla, (B_I,))
    sigma = state_from_operator(partial_trace(dec.w_ba.op, [A_I, A_O, B_O]) / (d_ao * d_bo))

    anc_id = identity([L.choi.label(n) for n in ancilla])
    model = L.choi * dec.p + tensor_product(anc_id, sigma.choi) * (1 - dec.p)
    target = discard_bob_output(contract_alice(dec, A, tol)).choi
    residual = opnorm(model - target)
    if residual > tol:
        raise ReductionError(
            f"reconstruction residual {residual:.3g} > tol {tol:g}; inputs are not a valid "
            "causally separable process"
        )
    return EffectiveDecomposition(dec.p, L, sigma, residual)


def erasure_simulation(ed: EffectiveDecomposition, d: int) -> tuple[Channel, Channel]:
    """Bob's decoder ``S`` acting on the output of an erasure channel.

    ``S`` applies ``L`` on the ``d``-dimensional no-erasure block and
    replaces the flag by ``sigma``. Returns ``(S, S o E_p)``; compare the
    latter with the contracted process via :func:`simulation_residual`.
    """
    if len(ed.L.in_labels) != 1:
        raise ReductionError("erasure simulation needs a single sender wire")
    (wire,) = ed.L.in_labels
    if ed.L.choi.dim_of(wire) != d:
        raise ReductionError(f"sender wire has dim {ed.L.choi.dim_of(wire)}, expected {d}")
    J = permute_to(ed.L.choi, (B_I, wire))
    d_b = J.dim_of(B_I)
    S = np.zeros((d_b, d + 1, d_b, d + 1), dtype=complex)
    S[:, :d, :, :d] = J.matrix.reshape(d_b, d, d_b, d)
    sig = permute_to(ed.sigma.choi, (B_I,)).matrix
    S[:, d, :, d] = sig
    S_op = LabeledOperator([(B_I, d_b), (ERASURE_WIRE, d + 1)], S.reshape(d_b * (d + 1), -1))
    S_ch = Channel(S_op, (ERASURE_WIRE,), (B_I,))
    E = erasure_channel(ed.p, d, in_name=wire, out_name=ERASURE_WIRE)
    return S_ch, compose(S_ch, E)


def simulation_residual(simulated: Channel, N: Channel) -> float:
    return opnorm(simulated.choi - discard_bob_output(N).choi)


def run_pipeline(dec: CausalDecomposition, A: Channel | None = None,
                 tol: float = DEFAULT_TOL) -> tuple[PipelineReport, Channel, EffectiveDecomposition]:
    """Contract, decompose and simulate; returns the report, the reduced
    channel (Alice's ancilla -> ``B_I``) and the effective decomposition."""
    if A is None:
        A = alice_identity_routing(dec.w_ab.op.dim_of(A_O), dec.w_ab.op.dim_of(A_I))
    N = contract_alice(dec, A, tol)
    ed = effective_decomposition(dec, A, tol)
    (wire,) = ed.L.in_labels
    _, simulated = erasure_simulation(ed, ed.L.choi.dim_of(wire))
    report = PipelineReport(
        p=dec.p,
        bo_identity_residual=bo_identity_residual(N),
        reconstruction_residual=ed.reconstruction_residual,
        erasure_residual=simulation_residual(simulated, N),
    )
    return report, discard_bob_output(N), ed


# --- example instances --------------------------------------------------

def alice_identity_routing(d: int, d_ai: int = 1) -> Channel:
    """Alice discards ``A_I`` and sends her ancilla ``A_I'`` out through ``A_O``."""
    kraus = []
    for k in range(d_ai):
        K = np.zeros((d, d_ai * d))
        K[:, k * d:(k + 1) * d] = np.eye(d)
        kraus.append(K)
    return choi_from_kraus(kraus, [(A_I, d_ai), (ALICE_IN, d)], [(A_O, d)])


def bob_readout(d_bi: int, d_bo: int) -> Channel:
    """Bob moves ``B_I`` into his ancilla ``B_O'`` and sends ``|0>`` into ``B_O``."""
    K = np.zeros((d_bo * d_bi, d_bi))
    K[:d_bi, :] = np.eye(d_bi)  # |0>_{B_O} (x) |i>_{B_O'}
    return choi_from_kraus([K], [(B_I, d_bi)], [(B_O, d_bo), (BOB_OUT, d_bi)])


def example_process(p: float, d: int = 2) -> CausalDecomposition:
    """Process whose reduction is exactly the erasure channel.

    Wires: ``A_I`` and ``B_I`` have dimension ``d + 1``, ``A_O`` and ``B_O``
    dimension ``d``. When A acts first the process is the identity from
    ``A_O`` onto the first ``d`` levels of ``B_I``, while ``A_I`` receives
    the flag ``|d>``; the other order mirrors this. The construction is
    symmetric, so ``swap_roles(example_process(p)) == example_process(1 - p)``.
    """
    if d < 2:
        raise ValueError("example_process needs d >= 2")
    embed = np.eye(d + 1, d)
    flag = np.zeros(d + 1)
    flag[d] = 1.0

    def ordered(first_in, first_out, second_in, direction):
        rho = state(np.outer(flag, flag), [(first_in, d + 1)])
        C = choi_from_kraus([embed], [(first_out, d)], [(second_in, d + 1)])
        return comb_process(rho, C, direction, d)

    w_ab = ordered(A_I, A_O, B_I, "ab")
    w_ba = ordered(B_I, B_O, A_I, BA)
    return CausalDecomposition(p, w_ab, w_ba)


def swap_roles(dec: CausalDecomposition) -> CausalDecomposition:
    """Exchange Alice and Bob; the A-before-B weight becomes ``1 - p``."""
    return CausalDecomposition(1.0 - dec.p, swap_parties(dec.w_ba), swap_parties(dec.w_ab))


def random_decomposition(p: float, dims: dict, memory_dim: int = 2, seed=None) -> CausalDecomposition:
    ss = np.random.SeedSequence(seed)
    s_ab, s_ba = ss.spawn(2)
    return CausalDecomposition(
        p,
        random_ordered_process(dims, memory_dim, s_ab, "ab"),
        random_ordered_process(dims, memory_dim, s_ba, "ba"),
    )
