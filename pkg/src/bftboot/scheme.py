"""Coefficient-weighted aggregate signatures for endorsement.

Endorsers sign the same candidate message; their signatures multiply into a
single group element that verifies against an aggregate public key built
from the endorser set.  Each key is weighted by a hash coefficient derived
from the key and a digest of the whole set, which is what defeats rogue-key
constructions: an attacker can choose a key that cancels others under plain
multiplication, but cannot control the coefficients applied afterwards.

The group arithmetic is delegated to a backend object (see ``bls12381`` for
the real curve and ``modelgroup`` for the algebraic stand-in used by large
simulations).  A backend provides g1/g2 operations, hashing to g1, and a
pairing product check; everything scheme-specific lives here, so both
backends run the identical protocol code.

``plain_aggregate_public_keys`` implements the coefficient-free aggregation
on purpose.  It exists as the insecure baseline that the rogue-key fixture
is checked against, never for production verification.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import bls12381
from .encoding import MalformedInput, bits_to_bytes, bytes_to_bits, pack_fields, unpack_fields

COEFFICIENT_DST = b"endorse-coeff-v1"


class SchemeError(ValueError):
    pass


class DuplicateKey(SchemeError):
    pass


class NotAMember(SchemeError):
    pass


class IndexKeyMismatch(SchemeError):
    pass


class VectorSignatureMismatch(SchemeError):
    pass


class DigestMismatch(SchemeError):
    pass


@dataclass(frozen=True)
class PairingParams:
    """Descriptor of the pairing groups a scheme instance operates over."""

    name: str
    order: int
    generator_1: object
    generator_2: object
    group_1: str = "G1: prime-order subgroup, signature side"
    group_2: str = "G2: prime-order subgroup, key side"
    group_t: str = "GT: pairing target group"


@dataclass(frozen=True)
class KeyPair:
    secret: int
    public: object


@dataclass(frozen=True)
class PublicKeySet:
    """Ordered, duplicate-free collection of public keys with its digest."""

    keys: tuple
    digest: bytes

    def __len__(self) -> int:
        return len(self.keys)

    def index_of(self, public_key) -> int:
        for i, key in enumerate(self.keys):
            if key == public_key:
                return i
        raise NotAMember("public key is not in the set")


@dataclass(frozen=True)
class EndorserVector:
    """Bit vector marking which keys of a set contributed signatures."""

    bits: tuple
    set_digest: bytes

    @property
    def popcount(self) -> int:
        return sum(self.bits)

    def indices(self) -> tuple:
        return tuple(i for i, bit in enumerate(self.bits) if bit)

    def with_bit(self, index: int) -> "EndorserVector":
        if self.bits[index]:
            raise DuplicateKey("bit already set")
        bits = list(self.bits)
        bits[index] = 1
        return EndorserVector(tuple(bits), self.set_digest)

    @classmethod
    def empty(cls, size: int, set_digest: bytes) -> "EndorserVector":
        return cls((0,) * size, set_digest)

    @classmethod
    def from_indices(cls, indices: Iterable[int], size: int,
                     set_digest: bytes) -> "EndorserVector":
        bits = [0] * size
        for i in indices:
            if bits[i]:
                raise DuplicateKey("duplicate index in vector")
            bits[i] = 1
        return cls(tuple(bits), set_digest)


@dataclass(frozen=True)
class Signature:
    point: object
    signer_index: int


@dataclass(frozen=True)
class AggregateEndorsement:
    point: object
    vector: EndorserVector
    message: bytes


@dataclass(frozen=True)
class AggregatePublicKey:
    point: object


class EndorsementScheme:
    """Aggregate signature operations over a pluggable group backend."""

    def __init__(self, backend=bls12381):
        self.backend = backend
        self._coefficient_cache: dict = {}
        self._weighted_key_cache: dict = {}

    # -- parameters and keys ------------------------------------------------

    def params(self) -> PairingParams:
        bk = self.backend
        return PairingParams(
            name=bk.name,
            order=bk.ORDER,
            generator_1=bk.g1_generator(),
            generator_2=bk.g2_generator(),
        )

    def key_generate(self, rng) -> KeyPair:
        secret = 1 + rng.randrange(self.backend.ORDER - 1)
        return KeyPair(secret, self.backend.g2_mul(self.backend.g2_generator(), secret))

    def make_key_set(self, keys: Sequence) -> PublicKeySet:
        keys = tuple(keys)
        encoded = [bytes(self.backend.g2_to_bytes(k)) for k in keys]
        if len(set(encoded)) != len(encoded):
            raise DuplicateKey("public keys in a set must be distinct")
        digest = hashlib.sha256(b"".join(encoded)).digest()
        return PublicKeySet(keys, digest)

    # -- coefficients -------------------------------------------------------

    def coefficients(self, key_set: PublicKeySet) -> tuple:
        """Per-key weighting coefficients, nonzero mod the group order."""
        cached = self._coefficient_cache.get(key_set.digest)
        if cached is not None:
            return cached
        order = self.backend.ORDER
        out = []
        for key in key_set.keys:
            key_bytes = self.backend.g2_to_bytes(key)
            ctr = 0
            while True:
                h = hashlib.sha256(
                    COEFFICIENT_DST + bytes([ctr]) + key_bytes + key_set.digest
                ).digest()
                c = int.from_bytes(h, "big") % order
                if c:
                    break
                ctr += 1
            out.append(c)
        out = tuple(out)
        if len(self._coefficient_cache) >= 64:
            self._coefficient_cache.pop(next(iter(self._coefficient_cache)))
        self._coefficient_cache[key_set.digest] = out
        return out

    def coefficient(self, public_key, key_set: PublicKeySet) -> int:
        idx = key_set.index_of(public_key)
        return self.coefficients(key_set)[idx]

    def _weighted_key(self, key_set: PublicKeySet, index: int):
        cache_key = (key_set.digest, index)
        pt = self._weighted_key_cache.get(cache_key)
        if pt is None:
            c = self.coefficients(key_set)[index]
            pt = self.backend.g2_mul(key_set.keys[index], c)
            if len(self._weighted_key_cache) >= 256:
                self._weighted_key_cache.pop(next(iter(self._weighted_key_cache)))
            self._weighted_key_cache[cache_key] = pt
        return pt

    # -- signing ------------------------------------------------------------

    def hash_message(self, message: bytes):
        return self.backend.hash_to_g1(message)

    def sign(self, keypair: KeyPair, message: bytes, key_set: PublicKeySet,
             signer_index: int) -> Signature:
        if not 0 <= signer_index < len(key_set):
            raise IndexKeyMismatch("signer index outside the key set")
        if key_set.keys[signer_index] != keypair.public:
            raise IndexKeyMismatch("signer index does not match the public key")
        c = self.coefficients(key_set)[signer_index]
        exponent = (c * keypair.secret) % self.backend.ORDER
        point = self.backend.g1_mul(self.hash_message(message), exponent)
        return Signature(point, signer_index)

    def verify_single(self, sig: Signature, message: bytes,
                      key_set: PublicKeySet) -> bool:
        if not 0 <= sig.signer_index < len(key_set):
            return False
        if sig.point is None or not self.backend.g1_is_on_curve(sig.point):
            return False
        weighted = self._weighted_key(key_set, sig.signer_index)
        h = self.hash_message(message)
        return self.backend.pairing_product_is_one(
            [
                (sig.point, self.backend.g2_generator()),
                (self.backend.g1_neg(h), weighted),
            ]
        )

    # -- aggregation --------------------------------------------------------

    def aggregate_signatures(self, vector: EndorserVector,
                             signatures: Sequence[Signature],
                             message: bytes) -> AggregateEndorsement:
        indices = sorted(sig.signer_index for sig in signatures)
        if len(set(indices)) != len(indices):
            raise VectorSignatureMismatch("duplicate signer index")
        if tuple(indices) != vector.indices():
            raise VectorSignatureMismatch(
                "signature indices do not match the endorser vector"
            )
        point = None
        for sig in signatures:
            point = self.backend.g1_add(point, sig.point)
        return AggregateEndorsement(point, vector, bytes(message))

    def aggregate_public_keys(self, vector: EndorserVector,
                              key_set: PublicKeySet) -> AggregatePublicKey:
        if vector.set_digest != key_set.digest:
            raise DigestMismatch("vector was built for a different key set")
        if len(vector.bits) != len(key_set):
            raise DigestMismatch("vector length does not match the key set")
        point = None
        for i in vector.indices():
            point = self.backend.g2_add(point, self._weighted_key(key_set, i))
        return AggregatePublicKey(point)

    def plain_aggregate_public_keys(self, vector: EndorserVector,
                                    key_set: PublicKeySet) -> AggregatePublicKey:
        """Coefficient-free aggregation: the rogue-key-vulnerable baseline."""
        if vector.set_digest != key_set.digest:
            raise DigestMismatch("vector was built for a different key set")
        if len(vector.bits) != len(key_set):
            raise DigestMismatch("vector length does not match the key set")
        point = None
        for i in vector.indices():
            point = self.backend.g2_add(point, key_set.keys[i])
        return AggregatePublicKey(point)

    # -- verification -------------------------------------------------------

    def verify(self, aggregate: AggregateEndorsement,
               apk: AggregatePublicKey) -> bool:
        bk = self.backend
        if aggregate.point is None or apk.point is None:
            return False
        if not bk.g1_is_on_curve(aggregate.point):
            return False
        if not bk.g2_is_on_curve(apk.point):
            return False
        h = self.hash_message(aggregate.message)
        return bk.pairing_product_is_one(
            [
                (aggregate.point, bk.g2_generator()),
                (bk.g1_neg(h), apk.point),
            ]
        )

    # -- rogue-key fixture ---------------------------------------------------

    def rogue_key_attempt(self, alpha: int, victim_set: PublicKeySet,
                          vector: EndorserVector, message: bytes):
        """Key-cancellation attack fixture.

        Returns (rogue_pk, forged_sigma) such that appending rogue_pk to the
        victim set and extending the vector by one set bit makes forged_sigma
        verify under plain aggregation without any victim's secret key.  The
        coefficient-weighted aggregation must reject the same pair.
        """
        bk = self.backend
        alpha = alpha % bk.ORDER
        point = bk.g2_mul(bk.g2_generator(), alpha)
        for i in vector.indices():
            point = bk.g2_add(point, bk.g2_neg(victim_set.keys[i]))
        forged = bk.g1_mul(self.hash_message(message), alpha)
        return point, forged

    # -- serialization --------------------------------------------------------

    def aggregate_to_bytes(self, aggregate: AggregateEndorsement) -> bytes:
        return pack_fields(
            self.backend.g1_to_bytes(aggregate.point),
            len(aggregate.vector.bits).to_bytes(4, "big"),
            bits_to_bytes(aggregate.vector.bits),
            aggregate.vector.set_digest,
            aggregate.message,
        )

    def aggregate_from_bytes(self, data: bytes) -> AggregateEndorsement:
        fields = unpack_fields(data, expected=5)
        point = self.backend.g1_from_bytes(fields[0])
        if len(fields[1]) != 4:
            raise MalformedInput("bad bit count field")
        count = int.from_bytes(fields[1], "big")
        bits = bytes_to_bits(fields[2], count)
        if len(fields[3]) != 32:
            raise MalformedInput("bad set digest length")
        return AggregateEndorsement(
            point, EndorserVector(bits, fields[3]), fields[4]
        )

    def key_set_to_bytes(self, key_set: PublicKeySet) -> bytes:
        return pack_fields(*[bytes(self.backend.g2_to_bytes(k)) for k in key_set.keys])

    def key_set_from_bytes(self, data: bytes) -> PublicKeySet:
        keys = [self.backend.g2_from_bytes(blob) for blob in unpack_fields(data)]
        return self.make_key_set(keys)
