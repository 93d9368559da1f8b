"""Developer multisignatures (Ed25519, k-of-n) and relay protest keys (ECDSA P-256).

Relay protests use a randomized scheme on purpose: a relay that signs the same
protest twice produces two distinct valid signatures, which is how duplicate
submissions are told apart from replays.
"""

from __future__ import annotations

import hashlib

from cryptography.exceptions import InvalidSignature as _CryptoInvalid
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey

_RAW = dict(encoding=serialization.Encoding.Raw, format=serialization.PublicFormat.Raw)


def key_id(pub_bytes: bytes) -> str:
    return hashlib.sha256(pub_bytes).hexdigest()[:16]


class SigningKey:
    """Ed25519 key used by developers and by log operators for tree roots."""

    def __init__(self, private: Ed25519PrivateKey | None = None):
        self._priv = private or Ed25519PrivateKey.generate()
        self.public_bytes = self._priv.public_key().public_bytes(**_RAW)
        self.key_id = key_id(self.public_bytes)

    @classmethod
    def from_seed(cls, seed: bytes):
        return cls(Ed25519PrivateKey.from_private_bytes(hashlib.sha256(seed).digest()))

    @classmethod
    def from_private_bytes(cls, raw: bytes):
        return cls(Ed25519PrivateKey.from_private_bytes(raw))

    def private_bytes(self) -> bytes:
        return self._priv.private_bytes(serialization.Encoding.Raw, serialization.PrivateFormat.Raw,
                                        serialization.NoEncryption())

    def sign(self, msg: bytes) -> bytes:
        return self._priv.sign(msg)


def ed25519_verify(pub_bytes: bytes, sig: bytes, msg: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(pub_bytes).verify(sig, msg)
        return True
    except (_CryptoInvalid, ValueError):
        return False


class DeveloperKeySet:
    """Public side of the developer group: key ids to raw public keys plus threshold k."""

    def __init__(self, public_keys: dict, threshold: int = 2):
        if not 1 <= threshold <= len(public_keys):
            raise ValueError(f"threshold {threshold} out of range for {len(public_keys)} keys")
        self.public_keys = dict(public_keys)
        self.threshold = threshold

    @classmethod
    def generate(cls, n=3, k=2, seed: bytes | None = None):
        """Return (keyset, private keys). Seeded generation is for tests and demos."""
        if seed is None:
            keys = [SigningKey() for _ in range(n)]
        else:
            keys = [SigningKey.from_seed(seed + b"/dev/" + bytes([i])) for i in range(n)]
        return cls({k_.key_id: k_.public_bytes for k_ in keys}, k), keys

    def verify(self, signatures, msg: bytes) -> bool:
        good = set()
        for kid, sig in signatures:
            pub = self.public_keys.get(kid)
            if pub is not None and kid not in good and ed25519_verify(pub, sig, msg):
                good.add(kid)
        return len(good) >= self.threshold

    def to_dict(self):
        return {"threshold": self.threshold,
                "keys": {kid: pub.hex() for kid, pub in sorted(self.public_keys.items())}}

    @classmethod
    def from_dict(cls, d):
        return cls({kid: bytes.fromhex(h) for kid, h in d["keys"].items()}, d["threshold"])


def multisign(keys, msg: bytes) -> tuple:
    return tuple(sorted((k.key_id, k.sign(msg)) for k in keys))


class RelayKey:
    """ECDSA P-256 identity of a relay; signatures are randomized."""

    def __init__(self, private: ec.EllipticCurvePrivateKey | None = None):
        self._priv = private or ec.generate_private_key(ec.SECP256R1())
        self.public_bytes = self._priv.public_key().public_bytes(
            serialization.Encoding.X962, serialization.PublicFormat.CompressedPoint)
        self.relay_id = key_id(self.public_bytes)

    @classmethod
    def from_seed(cls, seed: bytes):
        scalar = int.from_bytes(hashlib.sha256(seed).digest(), "big") % (2 ** 255) + 1
        return cls(ec.derive_private_key(scalar, ec.SECP256R1()))

    @classmethod
    def from_pem(cls, pem: bytes):
        return cls(serialization.load_pem_private_key(pem, None))

    def private_pem(self) -> bytes:
        return self._priv.private_bytes(serialization.Encoding.PEM, serialization.PrivateFormat.PKCS8,
                                        serialization.NoEncryption())

    def sign(self, msg: bytes) -> bytes:
        return self._priv.sign(msg, ec.ECDSA(hashes.SHA256()))


def ecdsa_verify(pub_bytes: bytes, sig: bytes, msg: bytes) -> bool:
    try:
        pub = ec.EllipticCurvePublicKey.from_encoded_point(ec.SECP256R1(), pub_bytes)
        pub.verify(sig, msg, ec.ECDSA(hashes.SHA256()))
        return True
    except (_CryptoInvalid, ValueError):
        return False
