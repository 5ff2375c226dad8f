"""Multiple-quantum coherence spectra and entanglement witnesses for collective spin models."""

from .blocks import DickeBlockMatrix, build_dicke_blocks, degeneracy, entropies, qfi_mixed
from .config import ConfigError, RunConfig, parse_config, serialize_config
from .dicke import DickeState, evolve_pure, initial_state, mqc_direct_pure, prepare_css, prepare_ghz, qfi_pure
from .exact import FullDensityMatrix, evolve_lindblad_full, mqc_direct_full, overlap, qfi_mixed_full
from .params import NO_DECOHERENCE, X_AXIS, Y_AXIS, Z_AXIS, DecoherenceRates, ModelParams, SpinAxis
from .protocol import (
    ProtocolConfig,
    echo_spectrum,
    extract_mqc,
    fisher_forms,
    optimize_axis,
    run_echo_protocol,
    simulate,
    squeezing_parameter,
)
from .spectrum import MqcSpectrum, css_spectrum, css_spectrum_closed_form, f_i
from .symmetric import SymmetricState, evolve_sym, mqc_from_sym, partial_trace_sym
from .witness import (
    WitnessReport,
    mqc_product,
    protocol_validity_check,
    qfi_threshold,
    separable_bound,
    single_particle_mqc,
    witness_report,
)

__version__ = "0.1.0"
