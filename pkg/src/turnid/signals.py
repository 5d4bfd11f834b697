"""Canonical sensor channels and the physical constants shared by all stages."""

from __future__ import annotations

import enum

SAMPLE_PERIOD_S = 0.1         # uniform grid step after densification
GPS_PERIOD_S = 1.0            # native GPS fix interval in the logs
SITE_RADIUS_M = 45.72         # 150 ft analysis radius, converted once
EARTH_RADIUS_M = 6_371_000.0  # mean Earth radius, used by the local projection


class Signal(str, enum.Enum):
    """The 12 driver-facing channels, in canonical matrix column order."""

    STEERING_ANGLE = "steering_angle"        # deg
    STEERING_VELOCITY = "steering_velocity"  # deg/s
    STEERING_ACCEL = "steering_accel"        # deg/s^2
    SPEED = "speed"                          # m/s
    HEADING = "heading"                      # deg, [0, 360)
    RPM = "rpm"
    GAS_PEDAL = "gas_pedal"                  # [0, 1]
    BRAKE_PEDAL = "brake_pedal"              # [0, 1]
    ACCEL_FORWARD = "accel_forward"          # m/s^2
    ACCEL_LATERAL = "accel_lateral"          # m/s^2
    TORQUE = "torque"                        # N*m
    THROTTLE = "throttle"                    # [0, 1]


#: GPS is logged alongside the sensors but never becomes a matrix column.
GPS = "gps"

COLUMNS: tuple[str, ...] = tuple(s.value for s in Signal)
COLUMN_INDEX: dict[str, int] = {name: i for i, name in enumerate(COLUMNS)}
N_SENSORS = len(COLUMNS)

SPEED_IDX = COLUMN_INDEX[Signal.SPEED.value]
HEADING_IDX = COLUMN_INDEX[Signal.HEADING.value]

#: Channels every trace must provide before turn analysis can run.
REQUIRED_FOR_DETECTION = (Signal.HEADING.value,)
