//! Tolerances and fixed geometric parameters.
//!
//! Every numeric threshold used by checks, flags and reports lives here so that
//! result records can name the tolerance they were judged against.

/// Orthonormality of stored frames.
pub const FRAME_TOL: f64 = 1e-12;
/// Idempotence and symmetry of projection matrices.
pub const PROJ_TOL: f64 = 1e-10;
/// Chart round trips and affine-offset orthogonality.
pub const CHART_TOL: f64 = 1e-12;
/// FFT forward/inverse round trip, relative.
pub const FFT_ROUNDTRIP_TOL: f64 = 1e-10;
/// `high + low == f`, relative to max |f|.
pub const SPLIT_SUM_TOL: f64 = 1e-12;
/// Slack for metric identities (triangle inequality, symmetry) in floating point.
pub const METRIC_TOL: f64 = 1e-9;
/// Relative slack used when re-verifying greedy-net separation.
pub const SEPARATION_RTOL: f64 = 1e-12;

/// Radius of the direction cap in the chart: a line is admissible when
/// `|Y - X| <= CAP_CHART_RADIUS`, i.e. its angle to the last axis is at most
/// `atan(CAP_CHART_RADIUS)`.
pub const CAP_CHART_RADIUS: f64 = 0.5;
/// Maximum tilt of a projected line inside the `A(1, V)` chart, in radians.
pub const V_CHART_MAX_TILT: f64 = core::f64::consts::FRAC_PI_3;
/// Base sets are scaled into a ball of this radius so that every line is local.
pub const BASE_RADIUS: f64 = 0.45;

/// Boundary/interior sample budget per dimension for the sampled Hausdorff distance.
pub const HAUSDORFF_SAMPLES_PER_DIM: usize = 1000;
/// Comparability constant `C` for slabs.
pub const SLAB_COMPARABLE_C: f64 = 4.0;
/// Upper bound for `d / rho` in the metric-equivalence audit.
pub const RHO_EQUIV_C: f64 = 10.0;

/// A projection counts as exceptional when its estimate is below `s - EXCEPTIONAL_GUARD`.
pub const EXCEPTIONAL_GUARD: f64 = 0.15;
/// Slack allowed above a theoretical ceiling before flagging a dimension estimate.
pub const ESTIMATOR_SLACK: f64 = 0.4;
/// Allowed distance between the median projected dimension and its target.
pub const MARSTRAND_MEDIAN_TOL: f64 = 0.25;
/// Allowed distance between the source estimate and the nominal construction dimension.
pub const SOURCE_DIM_TOL: f64 = 0.3;
/// Separation flag is only raised when the naive value exceeds the target by this much.
pub const SEPARATION_GAP: f64 = 0.5;
/// Slack on measured incidence slopes against the `t + s` ceiling.
pub const INCIDENCE_SLOPE_SLACK: f64 = 0.3;

/// Frostman audit: `#{T : T subset W_r} <= FROSTMAN_AUDIT_C (r/delta)^s`.
pub const FROSTMAN_AUDIT_C: f64 = 16.0;
/// Doubling `K` must scale `max |f_low|` by `2^{s-2(k-1)}` up to this factor.
pub const K_SCALING_FACTOR: f64 = 2.0;
/// Short-side widening of slab rectangles.
pub const RECT_DILATION: f64 = 2.0;
/// Maximal number of slabs of one `V` that may contain a single line.
pub const MULTIPLICITY_CAP: usize = 4;
/// Constant against which `max |f_low| / (K^{s-2(k-1)} #V)` is reported.
pub const LOW_REPORT_C: f64 = 32.0;
/// Fraction of lines at which `f - |f_low| >= m(l)/2` must hold.
pub const DOMINANCE_FRACTION: f64 = 0.9;
/// Fraction of bump transform energy required inside `8 R*`.
pub const BUMP_MASS_FRACTION: f64 = 0.99;
/// Dilation factor of the dual rectangle in the bump mass check.
pub const BUMP_DUAL_DILATION: f64 = 8.0;
/// Bound on `max |psi_hat| / |R|`.
pub const BUMP_PEAK_RATIO: f64 = 4.0;

/// Gaussian smoothing width of a bump, as a fraction of the rectangle half-length.
pub const BUMP_SMOOTH_FRAC: f64 = 0.05;
/// Plateau extension of a bump, in units of its smoothing width.
pub const BUMP_PLATEAU_SIGMAS: f64 = 2.0;
/// Support truncation of a bump beyond its plateau, in smoothing widths.
pub const BUMP_TAIL_SIGMAS: f64 = 8.0;

/// Default grid size per axis for high-low fields.
pub const DEFAULT_GRID: usize = 32;
/// Default cap on the memory of a single grid field, in bytes.
pub const DEFAULT_MAX_GRID_BYTES: u64 = 1 << 30;
