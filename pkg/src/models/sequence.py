from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class SeqHeader:
    """Parsed 1024-byte header of a Norpix .seq container"""
    magic: int = 0xFEED
    version: int = 3
    description: str = ''
    width: int = 640
    height: int = 480
    bit_depth: int = 8
    bit_depth_real: int = 8
    image_size_bytes: int = 640 * 480
    image_format: int = 102
    frame_count: int = 0
    true_image_size: int = 0
    fps: float = 30.0

    def to_dict(self):
        data = asdict(self)
        data['magic'] = f'0x{self.magic:04X}'
        return data


@dataclass(frozen=True)
class FrameRecord:
    index: int
    byte_offset: int
    payload_size: int
    seconds: int
    milliseconds: int
    microseconds: int
    payload: bytes

    @property
    def timestamp(self) -> float:
        return self.seconds + self.milliseconds / 1e3 + self.microseconds / 1e6
