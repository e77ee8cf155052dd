"""Roadside-unit based vehicle localization from received signal strength.

Subpackages and modules:

* :mod:`rsuloc.scenario` road, RSU deployment and ground-truth trajectories
* :mod:`rsuloc.channel` path-loss channel simulator and log export
* :mod:`rsuloc.dataproc` record parsing and epoch matching
* :mod:`rsuloc.coarse` ratio-residual estimator, SDP relaxation and solver
* :mod:`rsuloc.plecal` path-loss exponent correction from RSU anchors
* :mod:`rsuloc.tracking` CVLC motion model and unscented Kalman filter
* :mod:`rsuloc.baselines` ML, WCL, LLS and WLLS reference estimators
* :mod:`rsuloc.metrics` error statistics and CSV reports
* :mod:`rsuloc.runner` experiment configs, seeded runs and the CLI
"""

__version__ = "0.1.0"
