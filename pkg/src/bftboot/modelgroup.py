"""Algebraic stand-in backend for large simulations.

Pairing verification over the real curve costs milliseconds per check, which
makes network-scale simulation runs (thousands of candidates, tens of
endorsements each) impractical in pure Python.  This backend replaces the
curve groups with free modules over a 61-bit prime field: a "point" is a
formal integer combination of named generators, exponentiation is scalar
multiplication, and the pairing is the formal bilinear map on symbol pairs.

Because discrete logarithms are trivially visible, this backend has no
security whatsoever.  What it preserves exactly is the algebra: every
identity that holds for honest or adversarial combinations of real curve
points (aggregation, coefficient weighting, key cancellation) holds here
with the same success or failure outcome, so the scheme and protocol layers
run unchanged on either backend and the simulator's accept/reject decisions
match the real system's.

Element encoding: None is the identity, otherwise a pair (tag, terms) where
tag is "G1" or "G2" and terms is a sorted tuple of (symbol, coefficient)
with nonzero coefficients.  Symbols are tuples of short strings.
"""

from __future__ import annotations

import hashlib

from .bls12381 import MalformedPoint
from .encoding import MalformedInput, pack_fields, unpack_fields

# 2^61 - 1, prime; large enough that random coefficient collisions are
# negligible over any simulation we run.
ORDER = 2305843009213693951

name = "model"

DST_SIGNATURE = b"model-sig-v1"

_G1_GEN_SYMBOL = ("gen1",)
_G2_GEN_SYMBOL = ("gen2",)


def _normalize(tag: str, terms: dict):
    cleaned = tuple(
        (sym, coeff % ORDER)
        for sym, coeff in sorted(terms.items())
        if coeff % ORDER
    )
    if not cleaned:
        return None
    return (tag, cleaned)


def _terms(pt) -> dict:
    if pt is None:
        return {}
    return dict(pt[1])


def _check_tag(pt, tag: str):
    if pt is not None and (not isinstance(pt, tuple) or len(pt) != 2 or pt[0] != tag):
        raise MalformedPoint(f"expected a {tag} model element")


def _add(tag: str, a, b):
    _check_tag(a, tag)
    _check_tag(b, tag)
    terms = _terms(a)
    for sym, coeff in _terms(b).items():
        terms[sym] = terms.get(sym, 0) + coeff
    return _normalize(tag, terms)


def _neg(tag: str, a):
    _check_tag(a, tag)
    return _normalize(tag, {sym: -c for sym, c in _terms(a).items()})


def _mul(tag: str, a, k: int):
    _check_tag(a, tag)
    k = int(k) % ORDER
    return _normalize(tag, {sym: c * k for sym, c in _terms(a).items()})


def g1_generator():
    return ("G1", ((_G1_GEN_SYMBOL, 1),))


def g2_generator():
    return ("G2", ((_G2_GEN_SYMBOL, 1),))


def g1_identity():
    return None


def g2_identity():
    return None


def g1_add(a, b):
    return _add("G1", a, b)


def g2_add(a, b):
    return _add("G2", a, b)


def g1_neg(a):
    return _neg("G1", a)


def g2_neg(a):
    return _neg("G2", a)


def g1_mul(a, k):
    return _mul("G1", a, k)


def g2_mul(a, k):
    return _mul("G2", a, k)


def g1_is_on_curve(pt) -> bool:
    try:
        _check_tag(pt, "G1")
    except MalformedPoint:
        return False
    return True


def g2_is_on_curve(pt) -> bool:
    try:
        _check_tag(pt, "G2")
    except MalformedPoint:
        return False
    return True


def g1_in_subgroup(pt) -> bool:
    return g1_is_on_curve(pt)


def g2_in_subgroup(pt) -> bool:
    return g2_is_on_curve(pt)


def hash_to_g1(message: bytes, dst: bytes = DST_SIGNATURE):
    digest = hashlib.sha256(dst + b"|" + message).hexdigest()
    return ("G1", ((("msg", digest), 1),))


def junk_g1(seed: str):
    """A G1 element outside the span of any honest value; always fails."""
    return ("G1", ((("junk", seed), 1),))


def pairing_product_is_one(pairs) -> bool:
    acc: dict = {}
    for a, b in pairs:
        _check_tag(a, "G1")
        _check_tag(b, "G2")
        if a is None or b is None:
            continue
        for sym1, c1 in a[1]:
            for sym2, c2 in b[1]:
                key = (sym1, sym2)
                acc[key] = (acc.get(key, 0) + c1 * c2) % ORDER
    return all(v == 0 for v in acc.values())


def pairing(a, b):
    """Formal pairing value: sorted nonzero (symbol pair, coefficient) terms."""
    _check_tag(a, "G1")
    _check_tag(b, "G2")
    if a is None or b is None:
        return ()
    acc: dict = {}
    for sym1, c1 in a[1]:
        for sym2, c2 in b[1]:
            key = (sym1, sym2)
            acc[key] = (acc.get(key, 0) + c1 * c2) % ORDER
    return tuple((k, v) for k, v in sorted(acc.items()) if v)


def _encode_symbol(sym) -> bytes:
    return "/".join(sym).encode("utf-8")


def _decode_symbol(data: bytes):
    return tuple(data.decode("utf-8").split("/"))


def _to_bytes(tag: str, pt) -> bytes:
    _check_tag(pt, tag)
    blobs = [tag.encode("ascii")]
    for sym, coeff in ([] if pt is None else pt[1]):
        blobs.append(pack_fields(_encode_symbol(sym), coeff.to_bytes(8, "big")))
    return pack_fields(*blobs)


def _from_bytes(tag: str, data: bytes):
    try:
        fields = unpack_fields(data)
    except MalformedInput as exc:
        raise MalformedPoint(str(exc)) from exc
    if not fields or fields[0] != tag.encode("ascii"):
        raise MalformedPoint(f"expected a {tag} model encoding")
    terms = {}
    for blob in fields[1:]:
        sym_bytes, coeff_bytes = unpack_fields(blob, expected=2)
        terms[_decode_symbol(sym_bytes)] = int.from_bytes(coeff_bytes, "big")
    return _normalize(tag, terms)


def g1_to_bytes(pt) -> bytes:
    return _to_bytes("G1", pt)


def g1_from_bytes(data: bytes, subgroup_check: bool = True):
    return _from_bytes("G1", data)


def g2_to_bytes(pt) -> bytes:
    return _to_bytes("G2", pt)


def g2_from_bytes(data: bytes, subgroup_check: bool = True):
    return _from_bytes("G2", data)
