"""Entropies, coherent information, classical capacity and the
entanglement-transmission simulator. All logarithms are base 2."""

from __future__ import annotations

import itertools

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .channels import (
    Channel,
    ChannelError,
    apply,
    basis_state,
    channel_from_json,
    channel_to_json,
    choi_from_kraus,
    fidelity,
    max_entangled,
    state_from_operator,
)
from .operators import (
    DEFAULT_TOL,
    LabelError,
    LabeledOperator,
    partial_trace,
    permute_to,
    relabel,
    tensor_product,
)
from .process import (
    A_O,
    CausalDecomposition,
    decomposition_from_json,
    decomposition_to_json,
    insert_parties,
)
from .reduction import (
    ALICE_IN,
    BOB_OUT,
    alice_identity_routing,
    bob_readout,
    example_process,
    run_pipeline,
    swap_roles,
)

EIG_CUTOFF = 1e-12
DEFAULT_DIM_CAP = 2 ** 12


class DimensionCapError(RuntimeError):
    pass


def _matrix(rho) -> np.ndarray:
    if isinstance(rho, Channel):
        return rho.choi.matrix
    if isinstance(rho, LabeledOperator):
        return rho.matrix
    return np.asarray(rho, dtype=complex)


def _entropy_of_eigs(evals: np.ndarray) -> float:
    evals = evals[evals > EIG_CUTOFF]
    return float(-np.sum(evals * np.log2(evals))) if evals.size else 0.0


def von_neumann_entropy(rho) -> float:
    mat = _matrix(rho)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("entropy of a non-square matrix")
    if abs(np.trace(mat) - 1) > 1e-8 or np.linalg.norm(mat - mat.conj().T) > 1e-8:
        raise ValueError("von_neumann_entropy expects a unit-trace Hermitian state")
    evals = np.linalg.eigvalsh((mat + mat.conj().T) / 2)
    return max(0.0, _entropy_of_eigs(evals))


class _CoherentInfo:
    """Coherent information as a function of a purification matrix.

    ``psi`` is a ``d_in x d_in`` matrix; the input is ``rho = psi psi^dag``
    with reference system of dimension ``d_in``.
    """

    def __init__(self, C: Channel):
        self.d_in = C.in_dim()
        self.d_out = C.out_dim()
        J = C.canonical().matrix  # (out, in) ordering
        evals, vecs = np.linalg.eigh((J + J.conj().T) / 2)
        keep = evals > EIG_CUTOFF * max(1.0, evals[-1])
        kraus = (vecs[:, keep] * np.sqrt(evals[keep])).T
        self.kraus = kraus.reshape(-1, self.d_out, self.d_in)

    def __call__(self, psi: np.ndarray) -> float:
        # K_k psi: columns are reference indices
        y = self.kraus @ psi  # (k, out, ref)
        out = np.einsum("kar,kbr->ab", y, y.conj())
        # joint (out, ref) state has the same spectrum as the environment state
        flat = y.reshape(y.shape[0], -1)
        env = flat @ flat.conj().T
        return (_entropy_of_eigs(np.linalg.eigvalsh(out))
                - _entropy_of_eigs(np.linalg.eigvalsh(env)))


def coherent_information(C: Channel, rho: Channel) -> float:
    """``S(C(rho)) - S((C (x) id_R)(phi_rho))``, ``phi_rho`` a purification."""
    names = rho.choi.names
    if set(names) != set(C.in_labels):
        raise LabelError(f"state on {list(names)} but channel reads {list(C.in_labels)}")
    mat = permute_to(rho.choi, C.in_labels).matrix
    evals, vecs = np.linalg.eigh((mat + mat.conj().T) / 2)
    evals = np.clip(evals, 0.0, None)
    psi = vecs * np.sqrt(evals)  # psi psi^dag = rho
    return _CoherentInfo(C)(psi)


@dataclass(frozen=True)
class CapacityEstimate:
    value: float
    lower_witness: Channel
    restarts_used: int
    converged: bool
    start_values: tuple[float, ...] = field(default=(), repr=False)


def _pattern_search(f, x0: np.ndarray, tol: float, step0: float, min_step: float,
                    max_sweeps: int) -> tuple[np.ndarray, float, bool]:
    """Compass search on the unit sphere, maximizing ``f``.

    Each sweep tries +/- step along every coordinate. A sweep gaining less
    than ``tol`` halves the step; the search has converged once the step
    falls below ``min_step``.
    """
    x = x0 / np.linalg.norm(x0)
    fx = f(x)
    step = step0
    for _ in range(max_sweeps):
        start = fx
        for i in range(x.size):
            for sign in (1.0, -1.0):
                y = x.copy()
                y[i] += sign * step
                y /= np.linalg.norm(y)
                fy = f(y)
                if fy > fx:
                    x, fx = y, fy
                    break
        if fx - start < tol:
            step *= 0.5
            if step < min_step:
                return x, fx, True
    return x, fx, False


def max_coherent_information(C: Channel, restarts: int = 32, tol: float = 1e-10,
                             seed=0, step0: float = 0.25, min_step: float = 1e-7,
                             max_sweeps: int = 2000) -> CapacityEstimate:
    """Multi-start derivative-free maximization of the coherent information.

    Each start uses its own substream of ``SeedSequence(seed)``; the best
    value wins, ties going to the lowest start index, so the result does not
    depend on the order in which starts are evaluated.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    objective = _CoherentInfo(C)
    d = objective.d_in

    def f(x):
        psi = (x[: d * d] + 1j * x[d * d:]).reshape(d, d)
        return objective(psi)

    best = None
    values = []
    all_converged = True
    for idx, ss in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
        x0 = np.random.default_rng(ss).standard_normal(2 * d * d)
        x, fx, ok = _pattern_search(f, x0, tol, step0, min_step, max_sweeps)
        values.append(fx)
        all_converged &= ok
        if best is None or fx > best[1]:
            best = (x, fx)
    x, fx = best
    psi = (x[: d * d] + 1j * x[d * d:]).reshape(d, d)
    rho = psi @ psi.conj().T
    witness = state_from_operator(LabeledOperator(C.in_system(), rho))
    return CapacityEstimate(float(fx), witness, restarts, all_converged, tuple(values))


def erasure_quantum_capacity(p: float, d: int = 2) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    return max(0.0, (2 * p - 1) * np.log2(d))


def erasure_classical_capacity(p: float, d: int = 2) -> float:
    return p * np.log2(d)


# --- classical channels ------------------------------------------------

class InvalidPOVMError(ValueError):
    pass


def induced_classical_channel(C: Channel, inputs: Sequence[Channel], povm: Sequence,
                              tol: float = DEFAULT_TOL) -> np.ndarray:
    """``P[x, y] = Tr(E_y C(rho_x))``.

    POVM effects are matrices on the composite output space of ``C`` in the
    order of ``C.out_labels``.
    """
    d_out = C.out_dim()
    effects = [_matrix(E) for E in povm]
    total = np.zeros((d_out, d_out), dtype=complex)
    for E in effects:
        if E.shape != (d_out, d_out):
            raise InvalidPOVMError(f"effect of shape {E.shape}, expected {(d_out, d_out)}")
        if np.linalg.norm(E - E.conj().T) > tol or np.linalg.eigvalsh((E + E.conj().T) / 2)[0] < -tol:
            raise InvalidPOVMError("POVM effect is not positive semidefinite")
        total += E
    if np.linalg.norm(total - np.eye(d_out)) > tol:
        raise InvalidPOVMError("POVM effects do not sum to the identity")
    rows = []
    for rho in inputs:
        out = permute_to(apply(C, rho).choi, C.out_labels).matrix
        rows.append([float(np.real(np.trace(E @ out))) for E in effects])
    P = np.clip(np.array(rows), 0.0, None)
    return P / P.sum(axis=1, keepdims=True)


def _divergences(P: np.ndarray, q: np.ndarray) -> np.ndarray:
    r = q @ P
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log2(np.where(P > 0, P, 1.0) / np.where(r > 0, r, 1.0)), 0.0)
    return terms.sum(axis=1)


def blahut_arimoto(P, tol: float = 1e-9, max_iter: int = 100_000) -> float:
    """Capacity (bits) of a discrete memoryless channel with rows ``P[x, :]``.

    Iterates until the upper bound ``max_x D(P_x || qP)`` and the lower bound
    ``I(q)`` differ by less than ``tol``; returns the lower bound.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or np.any(P < -1e-12) or np.any(np.abs(P.sum(axis=1) - 1) > 1e-9):
        raise ValueError("blahut_arimoto needs a row-stochastic matrix")
    P = np.clip(P, 0.0, None)
    q = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(max_iter):
        D = _divergences(P, q)
        lower = float(q @ D)
        upper = float(D.max())
        if upper - lower < tol:
            return max(lower, 0.0)
        q = q * np.exp2(D - upper)
        q /= q.sum()
    raise RuntimeError(f"Blahut-Arimoto did not reach tol={tol} in {max_iter} iterations")


def erasure_classical_matrix(C: Channel, d: int) -> np.ndarray:
    """Computational-basis inputs and outputs (flag included) through ``C``."""
    (wire,) = C.in_labels
    inputs = [basis_state(i, C.choi.label(wire)) for i in range(d)]
    d_out = C.out_dim()
    povm = [np.diag(np.eye(d_out)[y]) for y in range(d_out)]
    return induced_classical_channel(C, inputs, povm)


# --- entanglement transmission ------------------------------------------

def copy_label(name: str, i: int) -> str:
    return f"{name}.{i}"


@dataclass(frozen=True)
class ProtocolSpec:
    """``n`` uses of a bipartite process in the entanglement-transmission task.

    ``alice_channels[i]`` and ``bob_channels[i]`` use the unsuffixed labels
    ``A_I, A_O, A_I'`` / ``B_I, B_O, B_I', B_O'``; the simulator renames the
    ancilla wires of copy ``i`` to ``A_I'.i`` etc. ``E_A`` maps ``A_E`` to the
    ``A_I'.i``, ``E_B`` is a state on the ``B_I'.i`` (or ``None``) and
    ``D_B`` maps the ``B_O'.i`` to ``B_D``. ``tau`` lives on ``C (x) A_E``.
    """

    n: int
    dec: CausalDecomposition
    alice_channels: tuple[Channel, ...]
    bob_channels: tuple[Channel, ...]
    E_A: Channel
    E_B: Channel | None
    D_B: Channel
    tau: Channel
    m: int
    epsilon: float = 0.0

    def __post_init__(self):
        if len(self.alice_channels) != self.n or len(self.bob_channels) != self.n:
            raise ValueError("need exactly n local channels per agent")
        if set(self.tau.choi.names) != {"C", "A_E"}:
            raise LabelError("tau must be a state on C and A_E")
        if self.tau.choi.dim_of("A_E") != self.m or self.tau.choi.dim_of("C") != self.m:
            raise ValueError("tau must have dim C = dim A_E = m")
        if self.E_B is not None and not self.E_B.is_state:
            raise ChannelError("E_B must be a state")
        for A in self.alice_channels:
            for name in A.out_labels:
                if name != A_O and A.choi.dim_of(name) != 1:
                    raise ChannelError("Alice's output ancilla must be trivial")


def _check_cap(op: LabeledOperator, cap: int):
    if op.size > cap:
        raise DimensionCapError(f"intermediate operator of dimension {op.size} exceeds cap {cap}")


def _embed_label(op: LabeledOperator, name: str, new_dim: int) -> LabeledOperator:
    """Zero-pad subsystem ``name`` into the first levels of a larger space."""
    d = op.dim_of(name)
    if new_dim == d:
        return op
    k = op.names.index(name)
    dims = list(op.dims)
    V = np.eye(new_dim, d)
    t = op.tensor()
    n = len(dims)
    t = np.moveaxis(np.tensordot(V, t, axes=([1], [k])), 0, k)
    t = np.moveaxis(np.tensordot(V.conj(), t, axes=([1], [n + k])), 0, n + k)
    dims[k] = new_dim
    size = int(np.prod(dims))
    labels = [(lab.name, dims[i]) for i, lab in enumerate(op.labels)]
    return LabeledOperator(labels, t.reshape(size, size))


def simulate_protocol(spec: ProtocolSpec, cap: int = DEFAULT_DIM_CAP) -> tuple[Channel, float]:
    """Run the task and return ``(rho^{C B_D}, F)``.

    ``F`` is the fidelity against ``tau`` with ``A_E`` renamed to ``B_D``;
    when ``B_D`` is larger than ``m`` the target is embedded in its first
    ``m`` levels.
    """
    W = spec.dec.process()
    _check_cap(W.op, cap)
    cur = apply(spec.E_A, spec.tau)
    _check_cap(cur.choi, cap)
    if spec.E_B is not None:
        cur = state_from_operator(tensor_product(cur.choi, spec.E_B.choi))
        _check_cap(cur.choi, cap)
    for i, (A, B) in enumerate(zip(spec.alice_channels, spec.bob_channels), start=1):
        N = insert_parties(W, A, B)
        trivial = [n for n in N.out_labels if N.choi.dim_of(n) == 1 and n.startswith("A_")]
        if trivial:
            N = Channel(partial_trace(N.choi, trivial), N.in_labels,
                        tuple(n for n in N.out_labels if n not in trivial))
        N = N.relabel({n: copy_label(n, i) for n in N.choi.names})
        _check_cap(N.choi, cap)
        missing = [n for n in N.in_labels if n not in cur.choi.names]
        if missing:
            raise LabelError(f"copy {i}: nothing feeds {missing}")
        cur = apply(N, cur)
        _check_cap(cur.choi, cap)
    cur = apply(spec.D_B, cur)
    if set(cur.choi.names) != {"C", "B_D"}:
        raise LabelError(f"protocol leaves wires {list(cur.choi.names)} open, expected C and B_D")
    target = relabel(spec.tau.choi, {"A_E": "B_D"})
    target = _embed_label(target, "B_D", cur.choi.dim_of("B_D"))
    F = fidelity(cur, state_from_operator(target))
    return cur, F


def identity_code_protocol(p: float, d: int = 2, n: int = 1) -> ProtocolSpec:
    """Uncoded use of :func:`example_process`: Alice routes her share into
    each copy, Bob reads each copy out, ``tau = Phi+`` on ``d**n`` levels."""
    dec = example_process(p, d)
    m = d ** n
    A = alice_identity_routing(d, d + 1)
    B = bob_readout(d + 1, d)
    E_A = choi_from_kraus([np.eye(m)], [("A_E", m)],
                          [(copy_label(ALICE_IN, i), d) for i in range(1, n + 1)])
    # decoder orders the no-erasure block first, in base-d order
    tuples = list(itertools.product(range(d + 1), repeat=n))
    order = [t for t in tuples if max(t) < d] + [t for t in tuples if max(t) == d]
    perm = np.zeros(((d + 1) ** n, (d + 1) ** n))
    for row, t in enumerate(order):
        perm[row, tuples.index(t)] = 1.0
    D_B = choi_from_kraus([perm],
                          [(copy_label(BOB_OUT, i), d + 1) for i in range(1, n + 1)],
                          [("B_D", (d + 1) ** n)])
    return ProtocolSpec(n, dec, (A,) * n, (B,) * n, E_A, None, D_B,
                        max_entangled(m, ("C", "A_E")), m)


def protocol_to_json(spec: ProtocolSpec) -> dict:
    return {
        "n": spec.n,
        "decomposition": decomposition_to_json(spec.dec),
        "alice": [channel_to_json(A) for A in spec.alice_channels],
        "bob": [channel_to_json(B) for B in spec.bob_channels],
        "E_A": channel_to_json(spec.E_A),
        "E_B": None if spec.E_B is None else channel_to_json(spec.E_B),
        "D_B": channel_to_json(spec.D_B),
        "tau": channel_to_json(spec.tau),
        "m": spec.m,
        "epsilon": spec.epsilon,
    }


def protocol_from_json(data: Mapping) -> ProtocolSpec:
    return ProtocolSpec(
        n=int(data["n"]),
        dec=decomposition_from_json(data["decomposition"]),
        alice_channels=tuple(channel_from_json(c) for c in data["alice"]),
        bob_channels=tuple(channel_from_json(c) for c in data["bob"]),
        E_A=channel_from_json(data["E_A"]),
        E_B=None if data.get("E_B") is None else channel_from_json(data["E_B"]),
        D_B=channel_from_json(data["D_B"]),
        tau=channel_from_json(data["tau"]),
        m=int(data["m"]),
        epsilon=float(data.get("epsilon", 0.0)),
    )


# --- theorem sweep -------------------------------------------------------

SWEEP_COLUMNS = ("p", "q_cap_analytic", "q_cap_numeric_ab", "q_cap_numeric_ba",
                 "classical_cap", "erasure_residual", "restarts", "seed")


def sweep_point(p: float, d: int, restarts: int, seed: int, direction: str = "both",
                tol: float = DEFAULT_TOL) -> dict:
    """One grid point: reduce :func:`example_process` in the requested
    direction(s) and estimate quantum and classical capacities."""
    dec = example_process(p, d)
    row = {"p": p, "q_cap_analytic": erasure_quantum_capacity(p, d),
           "q_cap_numeric_ab": None, "q_cap_numeric_ba": None,
           "restarts": restarts, "seed": seed}
    residuals = []
    report, reduced, _ = run_pipeline(dec, tol=tol)
    residuals.append(report.erasure_residual)
    row["classical_cap"] = blahut_arimoto(erasure_classical_matrix(reduced, d), tol=tol)
    if direction in ("ab", "both"):
        row["q_cap_numeric_ab"] = max_coherent_information(reduced, restarts, seed=seed).value
    if direction in ("ba", "both"):
        report_ba, reduced_ba, _ = run_pipeline(swap_roles(dec), tol=tol)
        residuals.append(report_ba.erasure_residual)
        row["q_cap_numeric_ba"] = max_coherent_information(reduced_ba, restarts, seed=seed).value
    row["erasure_residual"] = max(residuals)
    return {k: row[k] for k in SWEEP_COLUMNS}


def theorem_sweep(d: int, p_grid: Sequence[float], restarts: int = 32, seed: int = 0,
                  direction: str = "both", tol: float = DEFAULT_TOL) -> list[dict]:
    return [sweep_point(p, d, restarts, seed, direction, tol) for p in p_grid]
