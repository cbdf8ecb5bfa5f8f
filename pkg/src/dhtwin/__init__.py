"""District-heating digital twin and variant-analysis toolkit.

Subpackages map to the physical loop: `network` transports heat through the
supply and return pipe trees, `building` models the heat interface units and
envelopes behind each leaf, `center` dispatches the heating-center variants,
`cosim` couples them on a fixed macro step, `loads` supplies demand,
`kpi` aggregates energy, emissions and economics, and `cli` drives scenario
runs. `kernels` holds the compiled numerical core with its pure-Python twin.
"""

__version__ = "0.1.0"

from .kernels import BACKEND as kernel_backend  # noqa: F401
