import numpy as np
import pytest

from wakesim.schedules import ScheduleKind, SectionSchedule, TransmissionArray


def general_schedule(n, b, c=1):
    return SectionSchedule(ScheduleKind.GENERAL, n, b, c)


def array_from_rows(schedule, rows):
    """Explicit array from {station: {channel: '0101...'}} row strings.

    Missing stations/channels are all-zero; length = longest row.
    """
    length = max(len(r) for chans in rows.values() for r in chans.values())
    bits = np.zeros((schedule.n, schedule.b, length), dtype=np.uint8)
    for u, chans in rows.items():
        for beta, row in chans.items():
            for j, ch in enumerate(row):
                bits[u - 1, beta - 1, j] = int(ch)
    return TransmissionArray(schedule, length, bits=bits)


@pytest.fixture
def tiny_net():
    from wakesim.model import NetworkConfig

    return NetworkConfig(n=3, b=2)
