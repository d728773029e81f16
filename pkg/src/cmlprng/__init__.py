"""Pseudo-random bit generation from pairs of chaotic coupled map lattices."""

__version__ = "0.1.0"

from .errors import DegenerateOrbitError, DomainError, IndependenceError
from .local_maps import LocalMap, MapKind, derivative, eval_map, le_of, local_le
from .lattice import (Fixed, FixedPointValue, Float64, LatticeConfig, LatticeState, advance,
                      bits_of, grid_to_csv, new_lattice, orbit, perturbed, quantize, step)
from .lyapunov import LeSpectrum, coupling_matrix, eigenvalues, le_spectrum, wolf_le
from .extractor import (BitStream, Instance, InstancePair, combined_bias, correlated_pair,
                        extract_stream, fisher_test, generate_bytes, mod_add, pearson, xor_combine)
from .stats import (TestReport, TwoLevelReport, bifurcation_scan, block_frequency_test,
                    chi_square_uniformity, monobit_test, orbit_histogram, pass_rate_threshold,
                    run_battery, runs_test, serial_test, two_level_evaluate)

__all__ = [
    "__version__",
    "DegenerateOrbitError",
    "DomainError",
    "IndependenceError",
    "LocalMap",
    "MapKind",
    "derivative",
    "eval_map",
    "le_of",
    "local_le",
    "Fixed",
    "FixedPointValue",
    "Float64",
    "LatticeConfig",
    "LatticeState",
    "advance",
    "bits_of",
    "grid_to_csv",
    "new_lattice",
    "orbit",
    "perturbed",
    "quantize",
    "step",
    "LeSpectrum",
    "coupling_matrix",
    "eigenvalues",
    "le_spectrum",
    "wolf_le",
    "BitStream",
    "Instance",
    "InstancePair",
    "combined_bias",
    "correlated_pair",
    "extract_stream",
    "fisher_test",
    "generate_bytes",
    "mod_add",
    "pearson",
    "xor_combine",
    "TestReport",
    "TwoLevelReport",
    "bifurcation_scan",
    "block_frequency_test",
    "chi_square_uniformity",
    "monobit_test",
    "orbit_histogram",
    "pass_rate_threshold",
    "run_battery",
    "runs_test",
    "serial_test",
    "two_level_evaluate",
]
