"""Green multicast Cloud-RAN: group-sparse beamforming via smoothed
lp-minimization, with an embedded first-order conic solver."""

from . import conic, experiments, lift, model, recover, select, sparseopt

__all__ = ["conic", "experiments", "lift", "model", "recover", "select",
           "sparseopt"]
