"""pedkit: Caltech pedestrian seq/vbb to YOLO toolkit"""

__version__ = '1.0.0'
