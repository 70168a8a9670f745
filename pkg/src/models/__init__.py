from src.models.annotation import VbbFile, VbbObject
from src.models.dataset import AnchorSet, ImageEntry, Manifest, MosaicSpec
from src.models.evaluation import ClassReport, Detection, EvalReport, F1Point, GroundTruth, MatchResult, PrPoint
from src.models.geometry import Box, LetterboxTransform, YoloLabel
from src.models.sequence import FrameRecord, SeqHeader

__all__ = [
    'VbbFile', 'VbbObject',
    'AnchorSet', 'ImageEntry', 'Manifest', 'MosaicSpec',
    'ClassReport', 'Detection', 'EvalReport', 'F1Point', 'GroundTruth', 'MatchResult', 'PrPoint',
    'Box', 'LetterboxTransform', 'YoloLabel',
    'FrameRecord', 'SeqHeader',
]
