"""graspq-convert: raw recording archives -> graspq sequence JSON."""

__version__ = "0.1.0"

from .convert import ConversionError, LeftHandSequence, RawRecording, convert_sequence

__all__ = ["ConversionError", "LeftHandSequence", "RawRecording", "convert_sequence", "__version__"]
