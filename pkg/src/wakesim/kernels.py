"""Kernel backend selection.

Prefers the compiled extension, falls back to the numpy implementation when
it is not built.  Set WAKESIM_PURE=1 to force the fallback (used by the
benchmark and the backend-equivalence tests).  Both backends are bit-exact
replicas of each other, so the choice never changes simulation output.
"""

from __future__ import annotations

import os

if os.environ.get("WAKESIM_PURE"):
    from wakesim import _kernels_py as _impl
else:
    try:
        from wakesim import _kernels_c as _impl  # type: ignore[attr-defined]
    except ImportError:
        from wakesim import _kernels_py as _impl

BACKEND = _impl.BACKEND
derive = _impl.derive
u01 = _impl.u01
materialize_bits = _impl.materialize_bits
screening_round = _impl.screening_round
array_round = _impl.array_round
jam_mask = _impl.jam_mask
first_isolated = _impl.first_isolated

# domain tags for deriving independent sub-streams from one run seed
DOMAIN_PROTOCOL = 0x70726F746F  # station transmission draws
DOMAIN_JAM = 0x6A616D6D  # adversarial jamming draws
DOMAIN_PATTERN = 0x706174  # per-trial activation-pattern draws


def trial_seed(base_seed: int, index: int) -> int:
    """Seed for trial `index`; injective in the index, so seeds never collide."""
    return derive(base_seed, index)
