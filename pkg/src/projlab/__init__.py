"""projlab: a numerical laboratory for curved-frame projection geometry.

Modules
-------
curves      unit-speed spherical curves, moving frames, cone distance
fractals    Cantor-type cube fixtures, natural measures, box dimensions
nets        separated nets, counting certificates, dyadic covers
planks      frame-aligned frequency boxes, families, overlap counting
fields      periodic-grid fields, wave packets, frequency splits
decoupling  superposition-ratio benches and the bootstrap iteration
lab         experiment orchestration (scans and pipelines)
cli         command-line entry points
"""

__version__ = "0.1.0"
