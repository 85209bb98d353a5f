"""Backend bridge for adaptbench job plans.

Reads the job plans, manifests and hypothesis files documented in the
toolkit's ``docs/formats.md`` and talks to the toolkit itself only through
its command line (``adaptbench score``). No code is shared: the wire
formats are the whole contract.
"""

__version__ = "0.1.0"
