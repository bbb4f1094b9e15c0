"""Small helpers for JSON encoding of complex numbers."""

import numpy as np


def enc_complex(z):
    z = complex(z)
    return [z.real, z.imag]


def dec_complex(v, path="$"):
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    raise ConfigError(f"expected a number or [re, im] pair", path)


def enc_vector(zs):
    return [enc_complex(z) for z in np.ravel(zs)]


def dec_vector(v, path="$"):
    if not isinstance(v, list):
        raise ConfigError("expected a list of [re, im] pairs", path)
    return tuple(dec_complex(x, f"{path}[{i}]") for i, x in enumerate(v))


class ConfigError(ValueError):
    """Malformed JSON input; ``path`` names the offending location."""

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


def require(obj, key, path):
    if not isinstance(obj, dict):
        raise ConfigError("expected an object", path)
    if key not in obj:
        raise ConfigError(f"missing field {key!r}", path)
    return obj[key]
