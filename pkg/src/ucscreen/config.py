"""Numerical tolerances shared across the package."""

# Power balance of an injection vector (MW).
BALANCE_TOL = 1e-6
# PTDF construction: slack column and row-entry bound checks.
PTDF_TOL = 1e-9
# |flow - f_max| below which a line direction counts as reaching its limit (MW).
FLOW_TOL = 1e-6
# Uncertainty-set membership LP residual.
MEMBERSHIP_TOL = 1e-7
# Oracle: a direction is redundant iff its unconstrained maximum <= f_max + ORACLE_TOL.
ORACLE_TOL = 1e-7
# Binary variables within this distance of {0, 1} are rounded.
BINARY_TOL = 1e-6
# Eigenvalues above -EIG_CLAMP_TOL * max(1, |Sigma|_max) are clamped to zero.
EIG_CLAMP_TOL = 1e-9
