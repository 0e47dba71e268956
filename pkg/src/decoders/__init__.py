"""Decoders: Tanner-graph BP, the walk-based HMM decoder and the staged wrapper."""
