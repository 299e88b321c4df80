"""Joint transmission/scatter tomography toolkit.

Simulation, artifact prediction and joint variational reconstruction
for a parallel-line scanner measuring a masked line transform of the
attenuation map together with a two-branch circle transform of the
electron density.
"""

__version__ = "0.1.0"

from . import kernels  # noqa: F401  (selects the compiled or pure backend)
from .geometry import (  # noqa: F401
    ImageGrid,
    LineSinogramGrid,
    ScannerConfig,
    ToricSinogramGrid,
    default_image_grid,
    default_line_grid,
    default_toric_grid,
    extended_image_grid,
)
from .operators import (  # noqa: F401
    Image,
    Sinogram,
    SparseLinearOperator,
    assemble_radon,
    assemble_toric,
    derivative_filter,
    spectral_norm,
)
from .phantoms import (  # noqa: F401
    PhantomPair,
    bar_phantom,
    complex_phantom,
    fit_nu,
    load_materials,
    phantom_by_name,
    simple_phantom,
)
from .solvers import (  # noqa: F401
    JointSystem,
    NoisyData,
    Reconstruction,
    add_noise,
    build_system,
    noisy_data,
    reconstruct,
    simulate_data,
)
