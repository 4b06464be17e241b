"""Simulated cryptography: hash-based signatures and revocation commitments.

Signatures here are deterministic stand-ins for real ECDSA.  A "public key"
is any string identifier; its secret is derived by hashing, so anyone can
recompute a signature and verification is exact byte equality.  Key
possession is therefore enforced by the protocol layer (who is willing to
sign what), not by the ledger.  The signer is swappable via set_signer().
"""

from __future__ import annotations

import hashlib


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


class HashSigner:
    """Default signer: sign(key, msg) = SHA-256(key_secret || msg)."""

    def secret(self, key: str) -> bytes:
        return sha256(b"key-secret:" + key.encode())

    def sign(self, key: str, msg: bytes) -> bytes:
        return sha256(self.secret(key) + msg)

    def verify(self, key: str, msg: bytes, sig: bytes) -> bool:
        return sig == self.sign(key, msg)


_signer = HashSigner()


def set_signer(signer) -> None:
    global _signer
    _signer = signer


def key_secret(key: str) -> bytes:
    return _signer.secret(key)


def sign(key: str, msg: bytes) -> bytes:
    return _signer.sign(key, msg)


def verify(key: str, msg: bytes, sig: bytes) -> bool:
    return _signer.verify(key, msg, sig)


def payment_hash(preimage: bytes) -> bytes:
    return sha256(preimage)


# Revocation keys differ from node keys: the on-chain script holds only a
# hash commitment to the secret, so the spend cannot be forged before the
# secret is disclosed.  The "signature" reveals the secret alongside a
# binding mac over the message.

def revocation_commitment(secret: bytes) -> str:
    return sha256(b"revocation:" + secret).hex()


def revocation_sign(secret: bytes, msg: bytes) -> bytes:
    return secret + sha256(secret + msg)


def revocation_verify(commitment_hex: str, msg: bytes, sig: bytes) -> bool:
    if len(sig) != 64:
        return False
    secret, mac = sig[:32], sig[32:]
    if revocation_commitment(secret) != commitment_hex:
        return False
    return mac == sha256(secret + msg)
