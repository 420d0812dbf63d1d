//! Connecting-orbit machinery: the fast-orbit catalog at lambda = 0, the
//! fast-slow sequence enumerator, mod-2 orbit counting for the rescaled
//! flow, and the convergence diagnostics tying the two together.

mod catalog;
mod convergence;
mod enumerate;
mod shooting;

pub use catalog::{
    branch_points_at_eta, build_catalog, decay_exponent, detect_cusp_orbits, detect_handle_slides,
    rests_at_eta, separatrix_run, BranchPoint, Catalog, CatalogError, CritJump, CuspDirection,
    CuspOrbit, FoldJump, HandleSlide, SepLanding, SepRun,
};
pub use convergence::{check_convergence, max_dist_to_branch, ConvergenceReport, ConvergenceRow};
pub use enumerate::{
    enumerate_fast_slow, zero_boundary_counts, CaseTag, EnumerateError, FastKind, FastSlowOrbitSeq,
    Segment,
};
pub use shooting::{
    count_boundary_from, orbit_hausdorff, point_set_hausdorff, polish_connection,
    trajectory_hausdorff, unstable_frame, ConnectingOrbit, CountOutcome, OrbitSeed, PairCount,
    ShootError, ShootParams,
};
