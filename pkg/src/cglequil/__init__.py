"""Static isotropic (MHD) and anisotropic (CGL) plasma equilibria.

Field containers and residuals (``fields``), the spherical vortex
(``bobnev``), Grad-Shafranov / JFKO tools (``gs``), symmetry transforms and
the MHD -> CGL construction (``transforms``), conservation laws
(``conservation``), file formats (``fileio``) and the ``cglequil`` CLI.
"""

__version__ = "0.1.0"
