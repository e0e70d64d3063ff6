"""Motion-based visual communication over event streams.

Encode messages as flight-motion scripts, synthesise the event streams
those motions produce, segment continuous streams into actions, classify
actions with a spiking network, and decode symbol sequences back into
messages.
"""

from . import codec, dataset, decoder, events, generator, segmentation, snn

__version__ = "0.1.0"

__all__ = [
    "codec",
    "dataset",
    "decoder",
    "events",
    "generator",
    "segmentation",
    "snn",
    "__version__",
]
