from . import enhance, train, bench, synth, probe_rf

__all__ = ["enhance", "train", "bench", "synth", "probe_rf"]
