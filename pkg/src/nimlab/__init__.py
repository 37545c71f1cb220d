"""nimlab: a numerical laboratory for negative-index material devices.

Core pieces:

* ``geometry``   -- circle-conforming polar triangulations
* ``transforms`` -- Kelvin maps and coefficient pushforwards
* ``media``      -- device coefficient fields (superlens, cloaks, objects)
* ``helmholtz``  -- lossy sign-changing complex FEM
* ``diagnostics``-- reflections, singularity removal, rate fits
* ``maxwell``    -- dispersive time-domain engine with energy/cone certificates
* ``experiments``-- named experiment runners emitting CSV/VTK/JSON artifacts
* ``service``    -- FastAPI wrapper; ``cli`` -- thin client
"""

__version__ = "0.1.0"
