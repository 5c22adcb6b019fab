#!/usr/bin/env python3
"""Independent oracles for the frozen fixtures under ../fixtures.

Run from this directory: python3 gen_fixtures.py
Uses only the Python standard library; shares no code with the Rust crates.
"""
import base64
import hashlib
import json
import os
from urllib.parse import unquote

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "fixtures")


def b64url(raw: bytes) -> str:
    return base64.urlsafe_b64encode(raw).rstrip(b"=").decode("ascii")


def canonical(value) -> bytes:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def interaction_hash(client_nonce, server_nonce, interaction_ref, grant_endpoint):
    joined = "\n".join([client_nonce, server_nonce, interaction_ref, grant_endpoint])
    return b64url(hashlib.sha256(joined.encode("utf-8")).digest())


def did_web_url(did: str) -> str:
    # did:web method: split the method-specific id on ':', the first part is
    # the host (percent-decoded, so "%3A" becomes a port colon), the rest are
    # path segments.
    prefix = "did:web:"
    assert did.startswith(prefix)
    parts = did[len(prefix):].split(":")
    host = unquote(parts[0])
    path = parts[1:]
    if not path:
        return "https://" + host + "/.well-known/did.json"
    return "https://" + host + "/" + "/".join(path) + "/did.json"


def metadata_fixture():
    record = {
        "valid_from": 1767225600,
        "valid_until": 1767225720,
        "audience": "https://provider.example/gnap",
        "did": "did:web:consumer.example",
        "key_id": "did:web:consumer.example#key-1",
        "envelope": {
            "algorithm": "Ed25519",
            "key_id": "did:web:consumer.example#key-1",
            "payload_digest": b64url(hashlib.sha256(b"fixture-payload").digest()),
            "signature": b64url(bytes(range(64))),
        },
    }
    body = canonical(record)
    return {
        "record": record,
        "canonical": body.decode("utf-8"),
        "sha256_b64url": b64url(hashlib.sha256(body).digest()),
    }


HASH_TUPLES = [
    ("n1", "n2", "ref1", "https://as.example/gnap/grant"),
    ("VJLO6A4CATR0KRO", "MBDOFXG4Y5CVJCX821LH", "4IFWWIKYB2PQ6U56NL1", "https://server.example.com/tx"),
    ("a", "b", "c", "d"),
    ("client-nonce-0001", "server-nonce-0001", "ref-0001", "https://provider.example/gnap/grant"),
    ("ünïcødé", "nonce", "ref", "https://provider.example/gnap/grant"),
    ("x" * 64, "y" * 64, "z" * 64, "https://provider.example/gnap/grant"),
    ("n2", "n1", "ref1", "https://as.example/gnap/grant"),
    ("with space", "tab\there", "ref", "http://127.0.0.1:8080/gnap/grant"),
    ("AAAAAAAAAAAAAAAAAAAAAA", "BBBBBBBBBBBBBBBBBBBBBB", "CCCCCCCCCCCCCCCCCCCCCC", "https://provider.example/gnap/grant"),
    ("-_-_", "_-_-", "0", "https://provider.example:8443/gnap/grant"),
]

DIDS = [
    "did:web:example.com",
    "did:web:example.com:consumer:alpha",
    "did:web:w3c-ccg.github.io",
    "did:web:w3c-ccg.github.io:user:alice",
    "did:web:example.com%3A3000",
    "did:web:example.com%3A3000:user:alice",
    "did:web:localhost%3A8443",
    "did:web:consumer.example",
    "did:web:provider.example",
    "did:web:issuer.example",
    "did:web:a.b.c.d.example.org",
    "did:web:example.com:u",
    "did:web:example.com:a:b:c:d:e",
    "did:web:sub.example.com:orgs:acme:machines:m1",
    "did:web:127.0.0.1%3A9000",
    "did:web:example.org:dept:engineering",
    "did:web:xn--bcher-kva.example",
    "did:web:example.com:2024:keys",
    "did:web:data-space.eu:participants:consumer-01",
    "did:web:identity.foundation:.well-known-not:really",
]


def main():
    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, "canonical_metadata.json"), "w", encoding="utf-8") as f:
        json.dump(metadata_fixture(), f, indent=2, ensure_ascii=False)
        f.write("\n")
    with open(os.path.join(OUT, "interaction_hash.json"), "w", encoding="utf-8") as f:
        rows = [
            {"client_nonce": c, "server_nonce": s, "interaction_ref": r, "grant_endpoint": g,
             "hash": interaction_hash(c, s, r, g)}
            for (c, s, r, g) in HASH_TUPLES
        ]
        json.dump(rows, f, indent=2, ensure_ascii=False)
        f.write("\n")
    with open(os.path.join(OUT, "did_web_urls.json"), "w", encoding="utf-8") as f:
        json.dump([{"did": d, "url": did_web_url(d)} for d in DIDS], f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
