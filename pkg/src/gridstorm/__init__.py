"""Weather-driven distribution-grid demand simulation for extreme-temperature events.

The package couples two-node thermal house models with thermostat-controlled
HVAC, water heaters, rooftop PV, behind-the-meter batteries, and a radial
feeder power-flow solver, and wraps the whole thing in a scenario engine for
electrification / efficiency / DER studies.
"""

__version__ = "0.1.0"
