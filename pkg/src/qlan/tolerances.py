"""Central numeric tolerance table.

Every hard-coded tolerance used by the package lives here so that the
meaning of each threshold is stated once.  Functions accept explicit
``tol`` arguments where a caller may legitimately want to loosen a check;
the defaults below are the contract.
"""

# Density-matrix validation: Hermiticity / unit trace / eigenvalue floor.
VALIDATION_TOL = 1e-10

# Slack allowed when asserting algebraic identities that hold exactly in
# real arithmetic (triangle inequalities, closed-form cross-checks, ...).
PROPERTY_SLACK = 1e-9

# Round-trip reconstructions (Bloch <-> matrix, frame rotations, ...).
ROUNDTRIP_TOL = 1e-12

# Eigenvalues of nominally PSD matrices in [-EIG_CLIP, 0] are clipped to 0;
# anything below -EIG_CLIP is treated as a genuine negativity.
EIG_CLIP = 1e-10

# Total block probability that channel constructions may silently drop.
CHANNEL_DROP_MASS = 1e-9

# Individual blocks with probability below this are skipped (mass reported).
BLOCK_SKIP_MASS = 1e-12

# Target tail mass when extending a block window for sampling / summation.
WINDOW_TAIL_MASS = 1e-12

# Allowed deviation of a classical grid density from unit mass.
GRID_MASS_TOL = 1e-6

# Trace drift allowed in the Lindblad integrator before erroring out.
LINDBLAD_TRACE_TOL = 1e-6

# Norm drift allowed per 10^3 collision steps.
COLLISION_NORM_DRIFT = 1e-9
