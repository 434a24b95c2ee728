import enum
from typing import Tuple


class InputKind(str, enum.Enum):
    """Kind of image the network consumes."""
    BAYER_RAW = "bayer-raw"  # single-channel mosaic, outer Pack/UnPack 2x stage
    RGB = "rgb"              # three-channel image, no outer stage


class BayerPhase(str, enum.Enum):
    """
    Colour filter layout of the top-left 2x2 cell.

    Positions inside the cell are numbered in Pack order:
    0 = (0,0), 1 = (0,1), 2 = (1,0), 3 = (1,1).
    """
    RGGB = "RGGB"
    BGGR = "BGGR"
    GRBG = "GRBG"
    GBRG = "GBRG"

    def positions(self) -> Tuple[int, int, int, int]:
        """Cell positions holding (R, G1, G2, B); G1 shares the row of R."""
        return _PHASE_POSITIONS[self]

    def colour_at(self, row: int, col: int) -> int:
        """RGB index (0=R, 1=G, 2=B) sampled at pixel (row, col)."""
        position = (row % 2) * 2 + (col % 2)
        r, g1, g2, b = self.positions()
        if position == r:
            return 0
        if position == b:
            return 2
        return 1


_PHASE_POSITIONS = {
    BayerPhase.RGGB: (0, 1, 2, 3),
    BayerPhase.BGGR: (3, 2, 1, 0),
    BayerPhase.GRBG: (1, 0, 3, 2),
    BayerPhase.GBRG: (2, 3, 0, 1),
}


class UpsampleLayout(str, enum.Enum):
    """Depth-to-space layout used by the decoder."""
    UNPACK = "unpack"
    PIXEL_SHUFFLE = "pixel_shuffle"


class OpKind(str, enum.Enum):
    """Operation tags recorded on the tape."""
    LEAF = "leaf"
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    SCALE = "scale"
    MUL_SCALAR = "mul_scalar"
    ABS = "abs"
    SQUARE = "square"
    EXP = "exp"
    CLAMP = "clamp"
    SUM = "sum"
    MEAN = "mean"
    DIFF = "diff"
    SLICE = "slice"
    RESHAPE = "reshape"
    PACK = "pack"
    UNPACK = "unpack"
    PIXEL_SHUFFLE = "pixel_shuffle"
    PIXEL_UNSHUFFLE = "pixel_unshuffle"
    PERMUTE = "permute_channels"
    CONV2D = "conv2d"
    TRANSPOSED_CONV2D = "transposed_conv2d"
    INTERPOLATE = "interpolate_nearest"
    ZERO_INSERT = "zero_insert"
    AVG_POOL = "avg_pool2d"
    LEAKY_RELU = "leaky_relu"
    LINEAR = "linear"
    CONCAT = "concat_channels"


class BenchOp(str, enum.Enum):
    """Upsampling operators compared by the bench harness."""
    UNPACK = "unpack"
    PIXEL_SHUFFLE = "pixel_shuffle"
    TRANSPOSED_CONV = "transposed_conv"
    INTERP = "interp"


class Subcommand(str, enum.Enum):
    ENHANCE = "enhance"
    TRAIN = "train"
    BENCH = "bench"
    SYNTH = "synth"
    PROBE_RF = "probe-rf"
