"""Front tracking for planar curve networks moving by ``v = h + u^perp``, with varifold diagnostics."""

from . import estimates, flow, forcing, generators, network, varifold
from .estimates import ScalarTestFunction, VerifyConfig, verify_trace
from .flow import FlowOptions, FlowTrace, run, step
from .forcing import ForcingField, SobolevBudget, mollify, sobolev_budget
from .network import CurveNetwork
from .reports import EstimateReport
from .varifold import DiscreteVarifold

__all__ = [
    "CurveNetwork", "DiscreteVarifold", "EstimateReport", "FlowOptions", "FlowTrace", "ForcingField",
    "ScalarTestFunction", "SobolevBudget", "VerifyConfig", "estimates", "flow", "forcing", "generators",
    "mollify", "network", "run", "sobolev_budget", "step", "varifold", "verify_trace",
]
__version__ = "0.1.0"
