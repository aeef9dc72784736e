"""Integer gate codes shared by the compiled and reference kernels.

The compact circuit encoding used by both backends is four parallel arrays
(kind, target, control, angle). Rotation generators map onto the bare Pauli
codes by adding PAULI_OFFSET.
"""

RX = 0
RY = 1
RZ = 2
CNOT = 3
PAULI_X = 4
PAULI_Y = 5
PAULI_Z = 6

PAULI_OFFSET = 4  # RX -> PAULI_X, RY -> PAULI_Y, RZ -> PAULI_Z

ROTATION_CODES = (RX, RY, RZ)
PAULI_CODES = (PAULI_X, PAULI_Y, PAULI_Z)

NO_CONTROL = -1
NO_PARAM = -1
