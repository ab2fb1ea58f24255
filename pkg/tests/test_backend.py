"""Pairing backend: curve arithmetic, hashing to the curve, serialization."""

import pytest

from bftboot import bls12381 as bk
from bftboot import modelgroup
from bftboot.rng import SplitMix64


def test_generators_on_curve_and_in_subgroup():
    g1 = bk.g1_generator()
    g2 = bk.g2_generator()
    assert bk.g1_is_on_curve(g1) and bk.g1_in_subgroup(g1)
    assert bk.g2_is_on_curve(g2) and bk.g2_in_subgroup(g2)
    # Prime order: r * G = identity.
    assert bk.g1_mul(g1, bk.ORDER) is None
    assert bk.g2_mul(g2, bk.ORDER) is None


def test_canonical_generator_encoding():
    # Standard compressed encoding of the BLS12-381 G1 generator.
    enc = bk.g1_to_bytes(bk.g1_generator())
    assert enc.hex().startswith("97f1d3a73197d7942695638c4fa9ac0f")
    assert len(enc) == 48
    assert len(bk.g2_to_bytes(bk.g2_generator())) == 96


def test_pairing_bilinearity():
    g1 = bk.g1_generator()
    g2 = bk.g2_generator()
    rng = SplitMix64(11)
    for _ in range(3):
        a = rng.random_scalar(bk.ORDER)
        b = rng.random_scalar(bk.ORDER)
        lhs = bk.pairing(bk.g1_mul(g1, a), bk.g2_mul(g2, b))
        rhs = bk.fq12_pow(bk.pairing(g1, g2), (a * b) % bk.ORDER)
        assert lhs == rhs


def test_pairing_nondegenerate():
    assert bk.pairing(bk.g1_generator(), bk.g2_generator()) != bk.FQ12_ONE


def test_pairing_of_identity_is_one():
    assert bk.pairing(None, bk.g2_generator()) == bk.FQ12_ONE
    assert bk.pairing(bk.g1_generator(), None) == bk.FQ12_ONE


def test_pairing_product_check():
    g1 = bk.g1_generator()
    g2 = bk.g2_generator()
    p = bk.g1_mul(g1, 7)
    # e(7*G1, G2) * e(-7*G1, G2) = 1.
    assert bk.pairing_product_is_one([(p, g2), (bk.g1_neg(p), g2)])
    assert not bk.pairing_product_is_one([(p, g2), (g1, g2)])


def test_g1_mul_matches_repeated_addition():
    g1 = bk.g1_generator()
    acc = None
    for k in range(5):
        assert bk.g1_mul(g1, k) == acc
        acc = bk.g1_add(acc, g1)


def test_g2_mul_matches_repeated_addition():
    g2 = bk.g2_generator()
    acc = None
    for k in range(5):
        assert bk.g2_mul(g2, k) == acc
        acc = bk.g2_add(acc, g2)


def test_hash_to_g1_deterministic_in_subgroup():
    p = bk.hash_to_g1(b"endorse me")
    q = bk.hash_to_g1(b"endorse me")
    assert p == q
    assert p is not None
    assert bk.g1_is_on_curve(p) and bk.g1_in_subgroup(p)


def test_hash_to_g1_message_and_dst_separation():
    p = bk.hash_to_g1(b"msg-a")
    q = bk.hash_to_g1(b"msg-b")
    r = bk.hash_to_g1(b"msg-a", dst=b"other-domain")
    assert p != q
    assert p != r


def test_g1_serialization_roundtrip():
    rng = SplitMix64(21)
    for _ in range(8):
        pt = bk.g1_mul(bk.g1_generator(), rng.random_scalar(bk.ORDER))
        assert bk.g1_from_bytes(bk.g1_to_bytes(pt)) == pt
    assert bk.g1_from_bytes(bk.g1_to_bytes(None)) is None


def test_g2_serialization_roundtrip():
    rng = SplitMix64(22)
    for _ in range(8):
        pt = bk.g2_mul(bk.g2_generator(), rng.random_scalar(bk.ORDER))
        assert bk.g2_from_bytes(bk.g2_to_bytes(pt)) == pt
    assert bk.g2_from_bytes(bk.g2_to_bytes(None)) is None


def test_g1_from_bytes_rejects_malformed():
    good = bytearray(bk.g1_to_bytes(bk.g1_generator()))
    with pytest.raises(bk.MalformedPoint):
        bk.g1_from_bytes(bytes(good[:-1]))
    # Compression flag cleared.
    bad = bytearray(good)
    bad[0] &= 0x7F
    with pytest.raises(bk.MalformedPoint):
        bk.g1_from_bytes(bytes(bad))
    # Infinity flag set with a nonzero x coordinate.
    bad = bytearray(good)
    bad[0] |= 0x40
    with pytest.raises(bk.MalformedPoint):
        bk.g1_from_bytes(bytes(bad))
    # x coordinate with no point on the curve.
    bad = bytearray(48)
    bad[0] = 0x80
    bad[47] = 0x05
    with pytest.raises(bk.MalformedPoint):
        bk.g1_from_bytes(bytes(bad))


def test_g1_from_bytes_rejects_out_of_subgroup():
    # y^2 = x^3 + 4 has solutions outside the r-order subgroup (cofactor > 1).
    x = 0
    while True:
        x += 1
        rhs = (x * x * x + 4) % bk.P
        y = bk.powmod(rhs, (bk.P + 1) // 4, bk.P)
        if (y * y) % bk.P == rhs:
            pt = (bk.mpz(x), bk.mpz(y))
            if not bk.g1_in_subgroup(pt):
                break
    enc = bytearray(int(x).to_bytes(48, "big"))
    enc[0] |= 0x80
    if y > bk.P_HALF:
        enc[0] |= 0x20
    with pytest.raises(bk.MalformedPoint):
        bk.g1_from_bytes(bytes(enc))
    assert bk.g1_from_bytes(bytes(enc), subgroup_check=False) == pt


def test_model_backend_same_algebra():
    # The formal backend satisfies the identities the scheme relies on.
    g2 = modelgroup.g2_generator()
    h = modelgroup.hash_to_g1(b"m")
    a, b = 5, 9
    lhs = modelgroup.pairing(modelgroup.g1_mul(h, a), modelgroup.g2_mul(g2, b))
    rhs = modelgroup.pairing(modelgroup.g1_mul(h, (a * b) % modelgroup.ORDER), g2)
    assert lhs == rhs
    assert modelgroup.pairing_product_is_one([
        (modelgroup.g1_mul(h, 3), g2),
        (modelgroup.g1_neg(modelgroup.g1_mul(h, 3)), g2),
    ])


def test_model_backend_serialization_roundtrip():
    pt = modelgroup.g1_mul(modelgroup.hash_to_g1(b"x"), 12)
    assert modelgroup.g1_from_bytes(modelgroup.g1_to_bytes(pt)) == pt
    kt = modelgroup.g2_mul(modelgroup.g2_generator(), 34)
    assert modelgroup.g2_from_bytes(modelgroup.g2_to_bytes(kt)) == kt
