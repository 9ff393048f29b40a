"""Passive wearable presence sensing and smart-environment scenario simulation."""

from .codec import MacAddress, ProbeRequestFrame, parse_pcap, parse_probe_request, serialize_probe_request
from .sim import SimConfig, run
from .scripts import builtin_script
from .taxonomy import ScenarioClassification, classify, parse_label, render_label, validate

__version__ = "0.1.0"

__all__ = [
    "MacAddress",
    "ProbeRequestFrame",
    "ScenarioClassification",
    "SimConfig",
    "builtin_script",
    "classify",
    "parse_label",
    "parse_pcap",
    "parse_probe_request",
    "render_label",
    "run",
    "serialize_probe_request",
    "validate",
]
