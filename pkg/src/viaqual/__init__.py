"""viaqual: PCB via qualification toolkit for 56 Gbaud channels.

S-parameter algebra and Touchstone I/O, analytic channel-element
synthesis, time-domain pulse/TDR/eye analysis, BRV metrics, Monte Carlo
tolerance studies, and fabrication-rule compliance reporting.
"""

from .algebra import (
    MixedModeNetwork,
    PassivityReport,
    PortMap,
    TransmissionMatrix,
    bisect_thru,
    bisection_residual,
    cascade,
    chain,
    check_passivity,
    flip,
    s_to_t,
    single_ended_to_mixed_mode,
    t_to_s,
)
from .brv import BrvResult, extract_brv, extract_brv_from_network, match_capacitor_to_brv
from .elements import (
    Layer,
    LineSpec,
    StackUp,
    ViaGeometry,
    effective_barrel_od,
    load_design,
    synth_lossy_stripline,
    synth_shunt_capacitor,
    synth_thru,
    synth_via,
)
from .errors import (
    BandwidthError,
    GeometryError,
    GridMismatchError,
    TouchstoneError,
    ViaqualError,
)
from .montecarlo import (
    McConfig,
    McResult,
    aggregate,
    load_mc_config,
    rerun_with_shift,
    run_case,
    run_study,
    sample_cases,
)
from .rules import (
    GeometryAudit,
    RuleReport,
    RuleSet,
    check_rules,
    emit_fab_notes,
    load_audit,
    load_rules,
)
from .timedomain import (
    UI_PS,
    EqualizerTaps,
    EyeDiagram,
    EyeMetrics,
    PulseSpec,
    Waveform,
    eye_closure,
    make_pulse,
    optimize_2tap_ffe,
    prbs7,
    reflected_response,
    synthesize_eye,
    tdr,
    through_response,
)
from .touchstone import (
    SParameterNetwork,
    parse_touchstone,
    read_touchstone,
    resample,
    write_touchstone,
    write_touchstone_file,
)

__version__ = "0.1.0"
