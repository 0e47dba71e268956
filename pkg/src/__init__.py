"""Iterative HMM and Tanner-graph decoders for short regular LDPC codes."""
