"""Endorsement-based bootstrapping for BFT consensus.

Subpackages and modules:

- crypto backend (``bls12381``): self-contained pairing arithmetic
- ``scheme``: coefficient-weighted aggregate signatures over a pluggable backend
- ``selection``: endorsement group partitioning and failure probabilities
- ``protocol``: request, endorsement collection, global ledger, epochs
- ``sim``: discrete-event simulator and proof-of-work baseline
- ``cli``: command line entry point
"""

__version__ = "0.1.0"
