"""Corpus preparation and evaluation toolkit for two-stage ASR adaptation.

The pipeline stages are exposed both as a library (one module per stage) and
through the ``adaptbench`` command line tool:

- :mod:`adaptbench.chat_parser` parses CHAT transcript files,
- :mod:`adaptbench.normalizer` turns utterances into clean training targets,
- :mod:`adaptbench.si_filter` selects the speaker-independent training pool,
- :mod:`adaptbench.splitting` builds speaker-disjoint partitions and splits,
- :mod:`adaptbench.manifest` defines the manifest/hypothesis wire formats,
- :mod:`adaptbench.scoring` normalizes, aligns and aggregates WER/CER,
- :mod:`adaptbench.experiments` plans the B1-B4 condition matrix and reports.
"""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
