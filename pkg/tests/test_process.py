import numpy as np
import pytest

from causalcap.channels import (
    ChannelError,
    choi_from_kraus,
    erasure_channel,
    identity_channel,
    is_cptp,
    state,
    trace_channel,
)
from causalcap.operators import LabeledOperator, LabelError, identity, link_product, opnorm, permute_to
from causalcap.process import (
    A_I,
    A_O,
    B_I,
    B_O,
    CausalDecomposition,
    ProcessMatrix,
    check_causal_order,
    comb_process,
    decomposition_from_json,
    decomposition_to_json,
    from_channel,
    insert_parties,
    mix,
    process_from_json,
    process_to_json,
    random_channel,
    random_ordered_process,
    validate_process,
)

QUBITS = {A_I: 2, A_O: 2, B_I: 2, B_O: 2}
Z = np.diag([1.0, -1.0])


def embed(factors):
    """Kronecker product in process label order from a dict of factors."""
    out = np.eye(1)
    for name in (A_I, A_O, B_I, B_O):
        out = np.kron(out, factors.get(name, np.eye(2)))
    return out


def test_from_channel_identity():
    W = from_channel(identity_channel(2))
    rep = validate_process(W)
    assert max(rep.residuals().values()) <= 1e-12
    assert np.isclose(np.trace(W.matrix), 2)
    assert W.dims == {A_I: 1, A_O: 2, B_I: 2, B_O: 1}


def test_from_channel_erasure_and_random(rng):
    W = from_channel(erasure_channel(0.5, 2))
    assert validate_process(W).passed()
    assert np.isclose(np.trace(W.matrix), 2)
    for _ in range(10):
        W = from_channel(random_channel(("x", 3), ("y", 2), rng))
        assert validate_process(W).passed()


def test_from_channel_rejects_non_cptp():
    C = identity_channel(2)
    bad = type(C)(C.choi * 0.5, C.in_labels, C.out_labels)
    with pytest.raises(ChannelError):
        from_channel(bad)


def test_random_mixture_passes():
    w1 = random_ordered_process(QUBITS, 2, 1, "ab")
    w2 = random_ordered_process(QUBITS, 2, 2, "ba")
    assert validate_process(mix(0.3, w1, w2)).passed(1e-12)


def test_no_loop_violation_is_linear():
    base = ProcessMatrix(LabeledOperator([(n, 2) for n in (A_I, A_O, B_I, B_O)], np.eye(16) / 4))
    P = embed({A_O: Z, B_O: Z})
    W = ProcessMatrix(LabeledOperator(base.op.labels, base.matrix + 0.01 * P))
    rep = validate_process(W)
    assert np.isclose(rep.no_loops, 0.01 * opnorm(P))
    assert rep.failures() == ["no_loops"]


def test_check_causal_order():
    assert check_causal_order(from_channel(identity_channel(2)), "ab") == 0.0
    w_ab = random_ordered_process(QUBITS, 2, 3, "ab")
    w_ba = random_ordered_process(QUBITS, 2, 4, "ba")
    assert check_causal_order(w_ab, "ab") <= 1e-12
    assert check_causal_order(w_ba, "ba") <= 1e-12
    # signalling combs: each violates the opposite order
    assert check_causal_order(w_ab, "ba") > 1e-3
    mixed = mix(0.5, w_ab, w_ba)
    assert check_causal_order(mixed, "ab") > 1e-3
    assert check_causal_order(mixed, "ba") > 1e-3
    with pytest.raises(ValueError):
        check_causal_order(w_ab, "sideways")


def test_comb_trivial_memory():
    rho = state(np.diag([1.0, 0.0]), (A_I, 2))
    C = identity_channel(2, A_O, B_I)
    W = comb_process(rho, C, "ab", 2)
    choi = permute_to(C.choi, [A_O, B_I]).matrix
    expected = np.kron(np.kron(np.diag([1.0, 0.0]), choi), np.eye(2))
    np.testing.assert_allclose(W.matrix, expected)
    assert validate_process(W).passed()


def test_comb_identity_reproduces_from_channel():
    rho = state([[1.0]], (A_I, 1))
    W = comb_process(rho, identity_channel(2, A_O, B_I), "ab", 1)
    np.testing.assert_allclose(W.matrix, from_channel(identity_channel(2)).matrix)


def test_comb_random_satisfies_order(rng):
    for direction in ("ab", "ba"):
        first_in, first_out, second_in = (A_I, A_O, B_I) if direction == "ab" else (B_I, B_O, A_I)
        for _ in range(10):
            g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            rho = state(g @ g.conj().T / np.trace(g @ g.conj().T), [(first_in, 2), ("E", 2)])
            C = random_channel([("E", 2), (first_out, 2)], (second_in, 2), rng)
            W = comb_process(rho, C, direction, 2)
            assert check_causal_order(W, direction) <= 1e-12
            assert validate_process(W).passed(1e-12)


def test_comb_memory_mismatch(rng):
    rho = state(np.eye(4) / 4, [(A_I, 2), ("E", 2)])
    C = random_channel([("E", 3), (A_O, 2)], (B_I, 2), rng)
    with pytest.raises(ValueError):
        comb_process(rho, C, "ab", 2)


def test_mix_examples():
    w1 = random_ordered_process(QUBITS, 2, 5, "ab")
    w2 = random_ordered_process(QUBITS, 2, 6, "ba")
    np.testing.assert_array_equal(mix(1, w1, w2).matrix, w1.matrix)
    np.testing.assert_allclose(mix(0.5, w1, w1).matrix, w1.matrix)
    assert np.isclose(np.trace(mix(0.37, w1, w2).matrix), 4)
    with pytest.raises(ValueError):
        mix(0.5, w1, from_channel(identity_channel(2)))


def test_insert_parties_wire_chasing():
    W = from_channel(identity_channel(2))
    A = choi_from_kraus([np.eye(2)], [(A_I, 1), ("A_I'", 2)], [(A_O, 2)])
    B = choi_from_kraus([np.eye(2)], [(B_I, 2)], [(B_O, 1), ("B_O'", 2)])
    N = insert_parties(W, A, B)
    assert N.in_labels == ("A_I'",) and N.out_labels == ("B_O'",)
    np.testing.assert_allclose(N.canonical().matrix,
                               identity_channel(2, "A_I'", "B_O'").canonical().matrix, atol=1e-14)


def test_insert_parties_constant(rng):
    W = random_ordered_process(QUBITS, 2, 7, "ab")
    sa = rng.standard_normal((2, 2))
    sa = sa @ sa.T / np.trace(sa @ sa.T)
    # Alice and Bob discard their inputs and re-prepare fixed states
    A = _discard_and_prepare(A_I, "A_I'", A_O, "A_O'", np.diag([1.0, 0.0]), sa)
    B = _discard_and_prepare(B_I, "B_I'", B_O, "B_O'", np.diag([0.0, 1.0]), np.eye(2) / 2)
    N = insert_parties(W, A, B)
    J = N.canonical()
    d_in = N.in_dim()
    expected = np.kron(np.kron(sa, np.eye(2) / 2), np.eye(d_in))
    np.testing.assert_allclose(J.matrix, expected, atol=1e-12)


def _discard_and_prepare(i, i2, o, o2, to_process, to_ancilla):
    """Trace both inputs, emit fixed states on the process output and ancilla."""
    from causalcap.operators import tensor_product

    prep = state(np.kron(to_process, to_ancilla), [(o, 2), (o2, 2)])
    discard = trace_channel(2, i)
    discard2 = trace_channel(2, i2)
    op = tensor_product(tensor_product(discard.choi, discard2.choi), prep.choi)
    return type(prep)(op, (i, i2), (o, o2))


def test_insert_parties_random_is_cptp(rng):
    for trial in range(100):
        W = mix(rng.uniform(), random_ordered_process(QUBITS, 2, rng.integers(2**31), "ab"),
                random_ordered_process(QUBITS, 2, rng.integers(2**31), "ba"))
        A = random_channel([(A_I, 2), ("A_I'", 2)], [(A_O, 2), ("A_O'", 2)], rng, rank=2)
        B = random_channel([(B_I, 2), ("B_I'", 2)], [(B_O, 2), ("B_O'", 2)], rng, rank=2)
        N = insert_parties(W, A, B)
        assert set(N.in_labels) == {"A_I'", "B_I'"}
        assert is_cptp(N).passed(1e-9)


def test_insert_parties_label_collision(rng):
    W = random_ordered_process(QUBITS, 2, 8, "ab")
    A = random_channel([(A_I, 2), ("X", 2)], [(A_O, 2)], rng)
    B = random_channel([(B_I, 2), ("X", 2)], [(B_O, 2)], rng)
    with pytest.raises(LabelError):
        insert_parties(W, A, B)


def test_random_ordered_process_deterministic():
    a = random_ordered_process(QUBITS, 2, 42, "ab")
    b = random_ordered_process(QUBITS, 2, 42, "ab")
    assert a.matrix.tobytes() == b.matrix.tobytes()


@pytest.mark.parametrize("direction", ["ab", "ba"])
def test_random_ordered_process_valid(direction):
    dims = {A_I: 2, A_O: 3, B_I: 2, B_O: 2}
    for seed in range(100):
        W = random_ordered_process(dims, 2, seed, direction)
        assert validate_process(W).passed(1e-9)
        assert check_causal_order(W, direction) <= 1e-9


def test_no_signalling_from_bob(rng):
    W = random_ordered_process(QUBITS, 2, 9, "ab")
    marginals = []
    for _ in range(5):
        B = random_channel([(B_I, 2)], [(B_O, 2)], rng)
        marginals.append(permute_to(link_product(W.op, B.choi), [A_I, A_O]).matrix)
    for m in marginals[1:]:
        np.testing.assert_allclose(m, marginals[0], atol=1e-9)


def test_convex_closure(rng):
    procs = [random_ordered_process(QUBITS, 2, s, d) for s, d in zip(range(6), "ab ba ab ba ab ba".split())]
    for _ in range(20):
        w = rng.dirichlet(np.ones(len(procs)))
        mat = sum(wi * P.matrix for wi, P in zip(w, procs))
        assert validate_process(ProcessMatrix(LabeledOperator(procs[0].op.labels, mat))).passed()


def test_process_label_check():
    with pytest.raises(LabelError):
        ProcessMatrix(identity([("A_I", 2), ("A_O", 2)]))


def test_json_roundtrip():
    dec = CausalDecomposition(0.25, random_ordered_process(QUBITS, 2, 1, "ab"),
                              random_ordered_process(QUBITS, 2, 2, "ba"))
    back = decomposition_from_json(decomposition_to_json(dec))
    assert back.p == 0.25
    np.testing.assert_array_equal(back.w_ab.matrix, dec.w_ab.matrix)
    W = process_from_json(process_to_json(dec.w_ba))
    np.testing.assert_array_equal(W.matrix, dec.w_ba.matrix)
