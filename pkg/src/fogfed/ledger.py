"""Permissioned hash-chain ledger for model updates: authorization, append, verify.

Canonical block encoding (hashed with SHA-256, all integers little-endian):
  u64    index
  u32    record count
  per record:
    u64    client_id
    u64    round
    32B    weight digest
    f64    reported accuracy
    u8     factor-present flag
    f64    factor (only when the flag is 1)
  32B    prev_hash

Chain file: magic b"FGCH", version byte 1, then for every block its canonical
encoding followed by the block's stored 32-byte hash, concatenated in order.
Storing the hash alongside the pre-image is what makes a single flipped byte
in the final block detectable.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

from .neuralnet.weights import WeightSet, serialize_weights

CHAIN_MAGIC = b"FGCH"
CHAIN_VERSION = 1
ZERO_HASH = bytes(32)


class ChainFormatError(ValueError):
    """Raised when chain bytes cannot be parsed as the documented layout."""


@dataclass(frozen=True)
class DeviceRegistry:
    """The trust list: fog client ids plus the server id."""

    trusted_ids: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "trusted_ids", frozenset(int(i) for i in self.trusted_ids))
        if any(i < 0 for i in self.trusted_ids):
            raise ValueError("device ids must be non-negative")


def authorize(registry: DeviceRegistry, client_id: int) -> bool:
    """Accept iff the id is on the trust list. Rejection is a value, not an error."""
    return int(client_id) in registry.trusted_ids


@dataclass(frozen=True)
class UpdateRecord:
    """One accepted model update: who, which round, digest of the exact bytes sent."""

    client_id: int
    round: int
    weight_digest: bytes
    reported_accuracy: float
    factor_assigned: float | None = None

    def __post_init__(self):
        if self.client_id < 0 or self.round < 0:
            raise ValueError("client_id and round must be non-negative")
        if len(self.weight_digest) != 32:
            raise ValueError(f"weight_digest must be 32 bytes, got {len(self.weight_digest)}")


@dataclass(frozen=True)
class Block:
    index: int
    records: tuple[UpdateRecord, ...]
    prev_hash: bytes
    hash: bytes


@dataclass(frozen=True)
class Chain:
    blocks: tuple[Block, ...]

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def tip(self) -> Block:
        return self.blocks[-1]


def weight_digest(weights: WeightSet) -> bytes:
    """SHA-256 over the canonical weight serialization; binds records to exact bytes."""
    return hashlib.sha256(serialize_weights(weights)).digest()


def encode_record(record: UpdateRecord) -> bytes:
    head = struct.pack("<QQ", record.client_id, record.round)
    acc = struct.pack("<d", record.reported_accuracy)
    if record.factor_assigned is None:
        tail = b"\x00"
    else:
        tail = b"\x01" + struct.pack("<d", record.factor_assigned)
    return head + record.weight_digest + acc + tail


def block_preimage(index: int, records: tuple[UpdateRecord, ...], prev_hash: bytes) -> bytes:
    body = b"".join(encode_record(r) for r in records)
    return struct.pack("<QI", index, len(records)) + body + prev_hash


def compute_block_hash(index: int, records: tuple[UpdateRecord, ...], prev_hash: bytes) -> bytes:
    return hashlib.sha256(block_preimage(index, records, prev_hash)).digest()


def _make_block(index: int, records, prev_hash: bytes) -> Block:
    records = tuple(records)
    return Block(
        index=index,
        records=records,
        prev_hash=prev_hash,
        hash=compute_block_hash(index, records, prev_hash),
    )


def new_chain() -> Chain:
    """A chain holding only the genesis block (index 0, no records, zero prev_hash)."""
    return Chain(blocks=(_make_block(0, (), ZERO_HASH),))


def append_block(chain: Chain, records) -> Chain:
    """Extend the chain with one block; the input chain object is left unchanged."""
    bad = verify_chain(chain)
    if bad is not None:
        raise ValueError(f"refusing to append to an invalid chain (first bad block: {bad})")
    tip = chain.tip
    block = _make_block(tip.index + 1, records, tip.hash)
    return Chain(blocks=chain.blocks + (block,))


def verify_chain(chain: Chain) -> int | None:
    """Recompute every hash and link; return the first violating index, None if valid."""
    if not chain.blocks:
        return 0
    for i, block in enumerate(chain.blocks):
        if block.index != i:
            return i
        if i == 0:
            if block.prev_hash != ZERO_HASH or block.records:
                return 0
        elif block.prev_hash != chain.blocks[i - 1].hash:
            return i
        if block.hash != compute_block_hash(block.index, block.records, block.prev_hash):
            return i
    return None


def replicate(chain: Chain) -> Chain:
    """Independent copy handed to a client; blocks are immutable and shared."""
    return Chain(blocks=tuple(chain.blocks))


def reconcile(local: Chain, remote: Chain) -> Chain:
    """Adopt the longer valid chain; keep the local one on equal length."""
    for name, c in (("local", local), ("remote", remote)):
        bad = verify_chain(c)
        if bad is not None:
            raise ValueError(f"{name} chain is invalid at block {bad}")
    return remote if len(remote) > len(local) else local


def chain_to_bytes(chain: Chain) -> bytes:
    parts = [CHAIN_MAGIC, bytes([CHAIN_VERSION])]
    for block in chain.blocks:
        parts.append(block_preimage(block.index, block.records, block.prev_hash))
        parts.append(block.hash)
    return b"".join(parts)


def chain_from_bytes(data: bytes) -> Chain:
    if len(data) < 5:
        raise ChainFormatError(f"chain payload too short ({len(data)} bytes)")
    if data[:4] != CHAIN_MAGIC:
        raise ChainFormatError(f"bad magic {data[:4]!r}, expected {CHAIN_MAGIC!r}")
    if data[4] != CHAIN_VERSION:
        raise ChainFormatError(f"unsupported chain version {data[4]}")
    offset = 5
    blocks: list[Block] = []
    while offset < len(data):
        if offset + 12 > len(data):
            raise ChainFormatError(f"truncated block header at byte {offset}")
        index, count = struct.unpack_from("<QI", data, offset)
        offset += 12
        records = []
        for r in range(count):
            if offset + 57 > len(data):  # minimum record size (no factor)
                raise ChainFormatError(f"truncated record {r} of block {len(blocks)}")
            client_id, rnd = struct.unpack_from("<QQ", data, offset)
            offset += 16
            digest = data[offset : offset + 32]
            offset += 32
            (acc,) = struct.unpack_from("<d", data, offset)
            offset += 8
            flag = data[offset]
            offset += 1
            if flag == 1:
                if offset + 8 > len(data):
                    raise ChainFormatError(f"truncated factor in record {r} of block {len(blocks)}")
                (factor,) = struct.unpack_from("<d", data, offset)
                offset += 8
            elif flag == 0:
                factor = None
            else:
                raise ChainFormatError(f"invalid factor flag {flag} in block {len(blocks)}")
            try:
                records.append(
                    UpdateRecord(
                        client_id=client_id,
                        round=rnd,
                        weight_digest=digest,
                        reported_accuracy=acc,
                        factor_assigned=factor,
                    )
                )
            except ValueError as exc:
                raise ChainFormatError(str(exc)) from exc
        if offset + 64 > len(data):
            raise ChainFormatError(f"truncated prev_hash/hash of block {len(blocks)}")
        prev_hash = data[offset : offset + 32]
        offset += 32
        stored = data[offset : offset + 32]
        offset += 32
        blocks.append(Block(index=index, records=tuple(records), prev_hash=prev_hash, hash=stored))
    if not blocks:
        raise ChainFormatError("chain file holds no blocks")
    return Chain(blocks=tuple(blocks))


def save_chain(chain: Chain, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(chain_to_bytes(chain))


def load_chain(path: str) -> Chain:
    with open(path, "rb") as fh:
        return chain_from_bytes(fh.read())
