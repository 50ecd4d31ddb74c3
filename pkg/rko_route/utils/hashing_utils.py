import xxhash

from rko_route.models.instance import Instance
from rko_route.utils.instances import canonical_text


def instance_fingerprint(instance: Instance) -> str:
    """
    Hash the canonical serialization of an instance.
    Two instances share a fingerprint iff their canonical rows are identical.
    """
    return xxhash.xxh3_64(canonical_text(instance).encode('utf-8')).hexdigest()


def keys_fingerprint(keys) -> str:
    """Digest of a key vector's raw bytes, used to de-duplicate warmstart pools."""
    return xxhash.xxh3_64(keys.tobytes()).hexdigest()
