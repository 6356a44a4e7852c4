"""Maritime trade flows from AIS vessel tracking.

Batch toolkit: decode archived AIS feeds, detect port calls, convert
draught changes into dated import/export tonnages, aggregate to daily
port- and country-level series, and fit fixed-effects panel regressions
of export changes on containment-policy indicators.
"""

__version__ = "0.1.0"
