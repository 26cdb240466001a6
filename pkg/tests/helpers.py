"""Shared builders for the test suite."""
from dicke_forge.config import CS, NV
from dicke_forge.ensemble import make_cylinder, make_linear_chain

# criterion number -> one-line verdict, printed in the terminal summary
ACCEPTANCE_LINES: dict = {}


def cs_chain(n):
    return make_linear_chain(n, CS["spacing"], CS["wavelength"], CS["lifetime"], CS["pattern"], label=f"cs-{n}")


def nv_cylinder(n, seed=0):
    return make_cylinder(
        n, NV["number_density"], NV["aspect_ratio"], seed=seed,
        wavelength=NV["wavelength"], lifetime=NV["lifetime"], pattern=NV["pattern"], label=f"nv-{n}",
    )
