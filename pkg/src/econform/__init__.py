"""Conformal e-prediction: anytime-valid, post-hoc and Monte Carlo sets."""

from typing import Final


APP_NAME: Final = "econform"

__author__ = "Bryan M Bugyi"
__email__ = "bryanbugyi34@gmail.com"
__version__ = "0.1.0"
