//! Delta-separated nets, covering numbers, Frostman-type ball counts and
//! box-counting dimension estimates in every supported metric space.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use crate::consts::SEPARATION_RTOL;
use crate::error::{invalid, Error, Result};
use crate::grass::{proj_distance, Subspace};
use crate::linalg;
use crate::spatial::{GridHash, MAX_HASH_DIMS};

/// Metric space tag. Points are stored as flat coordinate vectors:
///
/// * `Euclidean { dim }`: the point itself.
/// * `Grassmannian { k, n }`: row-major `n x n` projection matrix.
/// * `AffineLines { n }`: chart `(X, Y)` of a line in `R^n`, length `2(n-1)`.
/// * `LinesInV { k }`: chart of a line inside a `k`-plane, length `2(k-1)`.
/// * `AffinePlanes { k, n }`: projection matrix of the direction followed by the offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Space {
    Euclidean { dim: usize },
    Grassmannian { k: usize, n: usize },
    AffineLines { n: usize },
    LinesInV { k: usize },
    AffinePlanes { k: usize, n: usize },
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Space::Euclidean { dim } => write!(f, "euclidean({dim})"),
            Space::Grassmannian { k, n } => write!(f, "grassmannian({k},{n})"),
            Space::AffineLines { n } => write!(f, "affine-lines({n})"),
            Space::LinesInV { k } => write!(f, "lines-in-V({k})"),
            Space::AffinePlanes { k, n } => write!(f, "affine-planes({k},{n})"),
        }
    }
}

impl FromStr for Space {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s
            .find('(')
            .ok_or_else(|| invalid(format!("bad space tag {s:?}")))?;
        if !s.ends_with(')') {
            return Err(invalid(format!("bad space tag {s:?}")));
        }
        let name = &s[..open];
        let args: Vec<usize> = s[open + 1..s.len() - 1]
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<usize>()
                    .map_err(|_| invalid(format!("bad space tag {s:?}")))
            })
            .collect::<Result<_>>()?;
        let space = match (name, args.as_slice()) {
            ("euclidean", [d]) => Space::Euclidean { dim: *d },
            ("grassmannian", [k, n]) => Space::Grassmannian { k: *k, n: *n },
            ("affine-lines", [n]) => Space::AffineLines { n: *n },
            ("lines-in-V", [k]) => Space::LinesInV { k: *k },
            ("affine-planes", [k, n]) => Space::AffinePlanes { k: *k, n: *n },
            _ => return Err(invalid(format!("bad space tag {s:?}"))),
        };
        space.check()?;
        Ok(space)
    }
}

impl From<Space> for String {
    fn from(s: Space) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Space {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl Space {
    fn check(&self) -> Result<()> {
        let ok = match *self {
            Space::Euclidean { dim } => dim >= 1,
            Space::Grassmannian { k, n } | Space::AffinePlanes { k, n } => k <= n && n >= 1,
            Space::AffineLines { n } => n >= 2,
            Space::LinesInV { k } => k >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("degenerate space {self}")))
        }
    }

    /// Number of stored coordinates per point.
    pub fn coord_len(&self) -> usize {
        match *self {
            Space::Euclidean { dim } => dim,
            Space::Grassmannian { n, .. } => n * n,
            Space::AffineLines { n } => 2 * (n - 1),
            Space::LinesInV { k } => 2 * (k - 1),
            Space::AffinePlanes { n, .. } => n * n + n,
        }
    }

    /// Intrinsic dimension of the space, used to sanity-check slopes.
    pub fn manifold_dim(&self) -> usize {
        match *self {
            Space::Euclidean { dim } => dim,
            Space::Grassmannian { k, n } => k * (n - k),
            Space::AffineLines { n } => 2 * (n - 1),
            Space::LinesInV { k } => 2 * (k - 1),
            Space::AffinePlanes { k, n } => (k + 1) * (n - k),
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Space::Euclidean { .. } => linalg::dist(a, b),
            Space::Grassmannian { n, .. } => proj_distance(a, b, n),
            Space::AffineLines { n } => chart_distance(a, b, n - 1),
            Space::LinesInV { k } => chart_distance(a, b, k - 1),
            Space::AffinePlanes { n, .. } => {
                let m = n * n;
                proj_distance(&a[..m], &b[..m], n) + linalg::dist(&a[m..], &b[m..])
            }
        }
    }

    /// `pred(d(a, b))` for a predicate monotone in `d` that holds at `r` (or
    /// just below it), deciding from Frobenius bounds when they suffice:
    /// `|P1 - P2|_F / sqrt(rank) <= d <= |P1 - P2|_F`.
    fn within_by(&self, a: &[f64], b: &[f64], r: f64, strict: bool) -> bool {
        let keep = |d: f64| if strict { d <= r } else { d < r };
        if let Space::Grassmannian { k, n } = *self {
            let f = libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>());
            if keep(f) {
                return true;
            }
            if f / libm::sqrt((2 * k).min(n) as f64) > r {
                return false;
            }
        }
        keep(self.distance(a, b))
    }

    /// Writes up to [`MAX_HASH_DIMS`] 1-Lipschitz coordinates of `p` into
    /// `out` and returns how many were written. Projection-matrix entries are
    /// bounded by the operator norm of the difference, chart and Euclidean
    /// coordinates by the respective norms.
    pub fn hash_coords(&self, p: &[f64], out: &mut [f64; MAX_HASH_DIMS]) -> usize {
        let mut m = 0;
        let mut push = |v: f64, m: &mut usize| {
            if *m < MAX_HASH_DIMS {
                out[*m] = v;
                *m += 1;
            }
        };
        match *self {
            Space::Euclidean { .. } | Space::AffineLines { .. } | Space::LinesInV { .. } => {
                for &v in p {
                    push(v, &mut m);
                }
            }
            Space::Grassmannian { n, .. } => {
                for i in 0..n {
                    for j in i..n {
                        push(p[i * n + j], &mut m);
                    }
                }
            }
            Space::AffinePlanes { n, .. } => {
                for &v in &p[n * n..] {
                    push(v, &mut m);
                }
                for i in 0..n {
                    for j in i..n {
                        push(p[i * n + j], &mut m);
                    }
                }
            }
        }
        m
    }

    fn hash_dims(&self) -> usize {
        let mut buf = [0.0; MAX_HASH_DIMS];
        let probe = vec![0.0; self.coord_len()];
        self.hash_coords(&probe, &mut buf)
    }

    /// Validates a single point of this space.
    pub fn validate_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.coord_len() {
            return Err(Error::DimensionMismatch {
                expected: self.coord_len(),
                found: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCloud("non-finite coordinate".into()));
        }
        match *self {
            Space::Grassmannian { k, n } => check_projection(&p[..n * n], k, n),
            Space::AffinePlanes { k, n } => {
                check_projection(&p[..n * n], k, n)?;
                let off = &p[n * n..];
                let px = linalg::matvec(&p[..n * n], n, n, off);
                if linalg::norm(&px) > 1e-10 * linalg::norm(off).max(1.0) {
                    return Err(Error::InvalidCloud(
                        "offset not orthogonal to direction".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn check_projection(p: &[f64], k: usize, n: usize) -> Result<()> {
    let v = Subspace::from_projection(n, p).map_err(|e| Error::InvalidCloud(e.to_string()))?;
    if v.dim() != k {
        return Err(Error::InvalidCloud(format!(
            "projection has rank {} not {k}",
            v.dim()
        )));
    }
    Ok(())
}

#[inline]
fn chart_distance(a: &[f64], b: &[f64], m: usize) -> f64 {
    linalg::dist(&a[..m], &b[..m]) + linalg::dist(&a[m..], &b[m..])
}

/// Incremental set of points with radius queries.
pub struct PointIndex<'a> {
    space: Space,
    points: &'a [Vec<f64>],
    grid: GridHash,
    members: Vec<usize>,
}

impl<'a> PointIndex<'a> {
    pub fn new(space: Space, points: &'a [Vec<f64>], cell: f64) -> Self {
        Self {
            space,
            points,
            grid: GridHash::new(cell, space.hash_dims()),
            members: Vec::new(),
        }
    }

    pub fn insert(&mut self, i: usize) {
        let mut h = [0.0; MAX_HASH_DIMS];
        self.space.hash_coords(&self.points[i], &mut h);
        self.grid.insert(&h, self.members.len() as u32);
        self.members.push(i);
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Whether some member lies within `radius` of `p`: closed ball when
    /// `closed`, open ball otherwise.
    pub fn any_within(&self, p: &[f64], radius: f64, closed: bool) -> bool {
        let mut h = [0.0; MAX_HASH_DIMS];
        self.space.hash_coords(p, &mut h);
        let mut hit = false;
        self.grid.scan(&h, radius, |id| {
            let q = &self.points[self.members[id as usize]];
            if self.space.within_by(p, q, radius, closed) {
                hit = true;
                return false;
            }
            true
        });
        hit
    }

    /// Members within closed distance `radius` of `p`.
    pub fn within(&self, p: &[f64], radius: f64) -> Vec<usize> {
        let mut h = [0.0; MAX_HASH_DIMS];
        self.space.hash_coords(p, &mut h);
        let mut out = Vec::new();
        self.grid.scan(&h, radius, |id| {
            let j = self.members[id as usize];
            if self.space.distance(p, &self.points[j]) <= radius {
                out.push(j);
            }
            true
        });
        out
    }
}

/// Greedy scan in input order: a point is kept when `keep(d)` holds against
/// every already kept point within `radius`.
fn greedy_select(points: &[Vec<f64>], space: Space, radius: f64, strict: bool) -> Vec<usize> {
    let mut idx = PointIndex::new(space, points, radius);
    for (i, p) in points.iter().enumerate() {
        let blocked = idx.any_within(p, radius, strict);
        if !blocked {
            idx.insert(i);
        }
    }
    idx.members
}

/// A finite delta-separated subset of one of the supported spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetCloud")]
pub struct NetCloud {
    space: Space,
    delta: f64,
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    claimed_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frostman_c: Option<f64>,
}

#[derive(Deserialize)]
struct RawNetCloud {
    space: Space,
    delta: f64,
    points: Vec<Vec<f64>>,
    #[serde(default)]
    claimed_s: Option<f64>,
    #[serde(default)]
    frostman_c: Option<f64>,
}

impl TryFrom<RawNetCloud> for NetCloud {
    type Error = Error;
    fn try_from(r: RawNetCloud) -> Result<Self> {
        let mut c = NetCloud::new(r.space, r.delta, r.points)?;
        if let (Some(s), Some(cc)) = (r.claimed_s, r.frostman_c) {
            c = c.with_frostman(s, cc)?;
        } else {
            c.claimed_s = r.claimed_s;
        }
        Ok(c)
    }
}

/// Maximum number of centres used when re-verifying a stored Frostman constant.
const FROSTMAN_VERIFY_CENTERS: usize = 256;

impl NetCloud {
    /// Validates every point and the pairwise separation `>= delta`.
    pub fn new(space: Space, delta: f64, points: Vec<Vec<f64>>) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(invalid("delta must be positive"));
        }
        space.check()?;
        for p in &points {
            space.validate_point(p)?;
        }
        let floor = delta * (1.0 - SEPARATION_RTOL);
        let mut idx = PointIndex::new(space, &points, delta);
        for (i, p) in points.iter().enumerate() {
            if idx.any_within(p, floor, false) {
                return Err(Error::InvalidCloud(format!(
                    "point {i} is closer than delta to another point"
                )));
            }
            idx.insert(i);
        }
        drop(idx);
        Ok(Self {
            space,
            delta,
            points,
            claimed_s: None,
            frostman_c: None,
        })
    }

    /// Attaches a Frostman exponent and constant after checking them on a
    /// deterministic sample of centres.
    pub fn with_frostman(mut self, s: f64, c: f64) -> Result<Self> {
        let step = self.points.len().div_ceil(FROSTMAN_VERIFY_CENTERS).max(1);
        let centers: Vec<Vec<f64>> = self.points.iter().step_by(step).cloned().collect();
        let got = frostman_constant(&self, s, &centers);
        if got > c * (1.0 + 1e-12) {
            return Err(Error::InvalidCloud(format!(
                "Frostman constant {got} exceeds claimed {c}"
            )));
        }
        self.claimed_s = Some(s);
        self.frostman_c = Some(c);
        Ok(self)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec<f64>> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn claimed_s(&self) -> Option<f64> {
        self.claimed_s
    }

    pub fn frostman_c(&self) -> Option<f64> {
        self.frostman_c
    }
}

/// Maximal delta-separated subset, scanning in input order. Every input point
/// is within `delta` of a kept point.
pub fn greedy_net(points: &[Vec<f64>], delta: f64, space: Space) -> Result<NetCloud> {
    if !(delta > 0.0) {
        return Err(invalid("delta must be positive"));
    }
    for p in points {
        space.validate_point(p)?;
    }
    let keep = greedy_select(points, space, delta, false);
    let pts = keep.into_iter().map(|i| points[i].clone()).collect();
    Ok(NetCloud {
        space,
        delta,
        points: pts,
        claimed_s: None,
        frostman_c: None,
    })
}

/// Size of a greedy delta-cover: centres are pairwise more than `delta` apart
/// and every point is within `delta` of a centre. Satisfies
/// `net(2 delta) <= cover(delta) <= net(delta / 2)`.
pub fn covering_count(points: &[Vec<f64>], delta: f64, space: Space) -> usize {
    greedy_select(points, space, delta, true).len()
}

/// Dyadic radii `1, 1/2, ...` down to `delta`, with `delta` itself appended.
pub fn dyadic_radii(delta: f64) -> Vec<f64> {
    let mut r = 1.0;
    let mut out = Vec::new();
    while r >= delta {
        out.push(r);
        r *= 0.5;
    }
    if out.last().is_none_or(|&l| l > delta) {
        out.push(delta);
    }
    out
}

/// Largest `count(B(x, r)) / (r / delta)^s` over the given centres and dyadic
/// `r` in `[delta, 1]`.
pub fn frostman_constant(cloud: &NetCloud, s: f64, centers: &[Vec<f64>]) -> f64 {
    let radii = dyadic_radii(cloud.delta);
    let mut best = 0.0f64;
    let mut ds = Vec::with_capacity(cloud.len());
    for x in centers {
        ds.clear();
        ds.extend(cloud.points.iter().map(|p| cloud.space.distance(x, p)));
        ds.sort_by(f64::total_cmp);
        for &r in &radii {
            let count = ds.partition_point(|&d| d <= r);
            let ratio = count as f64 / libm::pow(r / cloud.delta, s);
            best = best.max(ratio);
        }
    }
    best
}

/// Result of [`extract_frostman_subset`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrostmanSubset {
    pub cloud: NetCloud,
    /// `kappa * delta^{-a}`, the size a Frostman subset is expected to reach.
    pub target: f64,
}

/// Greedy thinning to a `(delta, a)`-set. Points are scanned in order and kept
/// only if, at every dyadic radius `r`, no kept point (including the new one)
/// would see more than `ceil((r/delta)^a)` kept points in its closed `r`-ball.
/// The result therefore has Frostman constant at most 2 against kept centres.
pub fn extract_frostman_subset(cloud: &NetCloud, a: f64, kappa: f64) -> FrostmanSubset {
    let delta = cloud.delta;
    let radii = dyadic_radii(delta);
    let caps: Vec<usize> = radii
        .iter()
        .map(|&r| libm::ceil(libm::pow(r / delta, a) - 1e-9) as usize)
        .collect();
    let mut kept: Vec<usize> = Vec::new();
    let mut counts: Vec<Vec<usize>> = Vec::new();
    let mut ds: Vec<f64> = Vec::new();
    for (i, p) in cloud.points.iter().enumerate() {
        ds.clear();
        ds.extend(
            kept.iter()
                .map(|&j| cloud.space.distance(p, &cloud.points[j])),
        );
        let ok = radii.iter().enumerate().all(|(ri, &r)| {
            let own = 1 + ds.iter().filter(|&&d| d <= r).count();
            own <= caps[ri]
                && ds
                    .iter()
                    .zip(&counts)
                    .all(|(&d, c)| d > r || c[ri] < caps[ri])
        });
        if ok {
            for (ri, &r) in radii.iter().enumerate() {
                for (c, &d) in counts.iter_mut().zip(&ds) {
                    if d <= r {
                        c[ri] += 1;
                    }
                }
            }
            let own: Vec<usize> = radii
                .iter()
                .map(|&r| 1 + ds.iter().filter(|&&d| d <= r).count())
                .collect();
            counts.push(own);
            kept.push(i);
        }
    }
    let points = kept.into_iter().map(|i| cloud.points[i].clone()).collect();
    FrostmanSubset {
        cloud: NetCloud {
            space: cloud.space,
            delta,
            points,
            claimed_s: Some(a),
            frostman_c: None,
        },
        target: kappa * libm::pow(delta, -a),
    }
}

/// Geometric ladder of scales `base^{-i}` for `i` in `i_min..=i_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleLadder {
    pub base: f64,
    pub i_min: u32,
    pub i_max: u32,
}

impl ScaleLadder {
    pub fn dyadic(i_min: u32, i_max: u32) -> Self {
        Self {
            base: 2.0,
            i_min,
            i_max,
        }
    }

    pub fn scales(&self) -> Vec<f64> {
        (self.i_min..=self.i_max)
            .map(|i| libm::pow(self.base, -(i as f64)))
            .collect()
    }

    pub fn len(&self) -> usize {
        (self.i_max.saturating_sub(self.i_min) + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.i_max < self.i_min
    }

    pub fn finest(&self) -> f64 {
        libm::pow(self.base, -(self.i_max as f64))
    }
}

/// How `N(delta)` is counted by [`box_dimension`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountMethod {
    /// Occupied cells of the mesh `delta Z^d` in the stored coordinates.
    Mesh,
    /// Greedy metric cover, see [`covering_count`].
    GreedyCover,
}

/// Box-counting estimate: least-squares slope of `log2 N(delta_i)` against
/// `log2(1/delta_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimEstimate {
    pub method: CountMethod,
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    pub slope: f64,
    pub stderr: f64,
}

impl Space {
    /// Spaces whose stored coordinates are bi-Lipschitz to the metric get
    /// mesh counts; the curved ones get greedy covers.
    pub fn count_method(&self) -> CountMethod {
        match self {
            Space::Euclidean { .. } | Space::AffineLines { .. } | Space::LinesInV { .. } => {
                CountMethod::Mesh
            }
            Space::Grassmannian { .. } | Space::AffinePlanes { .. } => CountMethod::GreedyCover,
        }
    }
}

/// Number of cells of the mesh `delta Z^d` that contain a point.
pub fn mesh_count(points: &[Vec<f64>], delta: f64) -> usize {
    let mut cells: hashbrown::HashSet<Vec<i64>> = hashbrown::HashSet::with_capacity(points.len());
    for p in points {
        cells.insert(p.iter().map(|x| libm::floor(x / delta) as i64).collect());
    }
    cells.len()
}

/// `N(delta)` with the space's [`CountMethod`].
pub fn count_at_scale(points: &[Vec<f64>], delta: f64, space: Space) -> usize {
    match space.count_method() {
        CountMethod::Mesh => mesh_count(points, delta),
        CountMethod::GreedyCover => covering_count(points, delta, space),
    }
}

/// Least-squares line through `(x_i, y_i)`; returns `(slope, stderr)`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let m = x.len();
    if m < 3 {
        return Err(Error::TooFewScales(m));
    }
    let mx = x.iter().sum::<f64>() / m as f64;
    let my = y.iter().sum::<f64>() / m as f64;
    let sxx: f64 = x.iter().map(|xi| (xi - mx) * (xi - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("scales must be distinct"));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let r = yi - icpt - slope * xi;
            r * r
        })
        .sum();
    let stderr = libm::sqrt(ssr / (m as f64 - 2.0) / sxx);
    Ok((slope, stderr))
}

pub fn box_dimension(
    points: &[Vec<f64>],
    space: Space,
    ladder: ScaleLadder,
) -> Result<DimEstimate> {
    if ladder.len() < 3 || ladder.is_empty() {
        return Err(Error::TooFewScales(if ladder.is_empty() {
            0
        } else {
            ladder.len()
        }));
    }
    let scales = ladder.scales();
    let method = space.count_method();
    let counts: Vec<usize> = scales
        .iter()
        .map(|&d| count_at_scale(points, d, space))
        .collect();
    if points.is_empty() {
        return Ok(DimEstimate {
            method,
            scales,
            counts,
            slope: 0.0,
            stderr: 0.0,
        });
    }
    let x: Vec<f64> = scales.iter().map(|d| -libm::log2(*d)).collect();
    let y: Vec<f64> = counts.iter().map(|&c| libm::log2(c as f64)).collect();
    let (slope, stderr) = fit_slope(&x, &y)?;
    Ok(DimEstimate {
        method,
        scales,
        counts,
        slope,
        stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    const E1: Space = Space::Euclidean { dim: 1 };
    const E2: Space = Space::Euclidean { dim: 2 };

    fn segment(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = stream(seed, 0);
        (0..n).map(|_| vec![rng.random::<f64>()]).collect()
    }

    /// Left endpoints of the level-`m` middle-thirds intervals.
    fn cantor(m: u32) -> Vec<Vec<f64>> {
        let mut pts = vec![0.0];
        let mut len = 1.0;
        for _ in 0..m {
            len /= 3.0;
            pts = pts.iter().flat_map(|&x| [x, x + 2.0 * len]).collect();
        }
        pts.into_iter().map(|x| vec![x]).collect()
    }

    /// Midpoints of the level-`m` intervals, away from every coarser mesh line.
    fn cantor_mid(m: u32) -> Vec<Vec<f64>> {
        let half = 0.5 * libm::pow(3.0, -(m as f64));
        cantor(m).into_iter().map(|p| vec![p[0] + half]).collect()
    }

    #[test]
    fn space_tags_round_trip() {
        for s in [
            Space::Euclidean { dim: 3 },
            Space::Grassmannian { k: 2, n: 4 },
            Space::AffineLines { n: 3 },
            Space::LinesInV { k: 2 },
            Space::AffinePlanes { k: 2, n: 4 },
        ] {
            assert_eq!(s.to_string().parse::<Space>().unwrap(), s);
        }
        assert!("grassmannian(2)".parse::<Space>().is_err());
        assert!("lines-in-V(1)".parse::<Space>().is_err());
    }

    #[test]
    fn net_examples() {
        let copies = vec![vec![0.3, 0.3]; 100];
        assert_eq!(greedy_net(&copies, 0.1, E2).unwrap().len(), 1);
        let grid: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![(i % 10) as f64 * 0.2, (i / 10) as f64 * 0.2])
            .collect();
        assert_eq!(greedy_net(&grid, 0.1, E2).unwrap().len(), 100);
        let net = greedy_net(&segment(10_000, 1), 1.0 / 64.0, E1).unwrap();
        assert!((32..=128).contains(&net.len()), "{}", net.len());
        assert!(greedy_net(&[], 0.1, E2).unwrap().is_empty());
    }

    #[test]
    fn net_is_maximal() {
        let pts = segment(2_000, 2);
        let net = greedy_net(&pts, 0.01, E1).unwrap();
        for p in &pts {
            assert!(net.points().iter().any(|q| (p[0] - q[0]).abs() <= 0.01));
        }
    }

    #[test]
    fn cover_examples() {
        assert_eq!(covering_count(&[vec![0.0, 0.0]], 0.1, E2), 1);
        // Exact dyadic box count for the square grid at 2^-4 is 2^8.
        let g: Vec<Vec<f64>> = (0..256 * 256)
            .map(|i| vec![(i % 256) as f64 / 256.0, (i / 256) as f64 / 256.0])
            .collect();
        let c = covering_count(&g, 1.0 / 16.0, E2);
        assert!((128..=1024).contains(&c), "{c}");
    }

    #[test]
    fn cover_net_sandwich() {
        let mut rng = stream(4, 0);
        let pts: Vec<Vec<f64>> = (0..3000)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        for d in [0.02, 0.05, 0.1] {
            let cover = covering_count(&pts, d, E2);
            assert!(greedy_net(&pts, 2.0 * d, E2).unwrap().len() <= cover);
            assert!(cover <= greedy_net(&pts, d / 2.0, E2).unwrap().len());
        }
    }

    #[test]
    fn new_rejects_close_points() {
        assert!(NetCloud::new(E1, 0.1, vec![vec![0.0], vec![0.05]]).is_err());
        assert!(NetCloud::new(E1, 0.1, vec![vec![0.0], vec![0.1]]).is_ok());
        assert!(NetCloud::new(E1, 0.1, vec![vec![0.0, 1.0]]).is_err());
        assert!(NetCloud::new(E1, 0.0, vec![]).is_err());
    }

    #[test]
    fn frostman_examples() {
        let delta = 1.0 / 64.0;
        let seg: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64 * delta]).collect();
        let cloud = NetCloud::new(E1, delta, seg).unwrap();
        let c = frostman_constant(&cloud, 1.0, cloud.points());
        assert!((1.0..=8.0).contains(&c), "{c}");
        let c0 = frostman_constant(&cloud, 0.0, cloud.points());
        assert_eq!(c0, 64.0);

        let delta = libm::pow(3.0, -6.0);
        let cloud = NetCloud::new(E1, delta, cantor(6)).unwrap();
        let s = libm::log(2.0) / libm::log(3.0);
        let c = frostman_constant(&cloud, s, cloud.points());
        assert!(c <= 6.0, "{c}");
    }

    #[test]
    fn frostman_claim_is_verified() {
        let delta = 1.0 / 64.0;
        let seg: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64 * delta]).collect();
        let cloud = NetCloud::new(E1, delta, seg).unwrap();
        assert!(cloud.clone().with_frostman(1.0, 8.0).is_ok());
        assert!(cloud.with_frostman(1.0, 1.0).is_err());
    }

    #[test]
    fn extract_keeps_sparse_input() {
        let delta = 1.0 / 256.0;
        let pts: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64 * 4.0 * delta]).collect();
        let cloud = NetCloud::new(E1, delta, pts).unwrap();
        let out = extract_frostman_subset(&cloud, 1.0, 1.0);
        assert_eq!(out.cloud.points(), cloud.points());
    }

    #[test]
    fn extract_thins_a_grid_to_one_dimension() {
        let delta = 1.0 / 32.0;
        let pts: Vec<Vec<f64>> = (0..32 * 32)
            .map(|i| vec![(i % 32) as f64 * delta, (i / 32) as f64 * delta])
            .collect();
        let cloud = NetCloud::new(E2, delta, pts).unwrap();
        let out = extract_frostman_subset(&cloud, 1.0, 1.0);
        let n = out.cloud.len();
        assert!((16..=64).contains(&n), "{n}");
        let c = frostman_constant(&out.cloud, 1.0, out.cloud.points());
        assert!(c <= 8.0, "{c}");
    }

    #[test]
    fn extract_collapses_a_cluster() {
        let delta = 1.0 / 64.0;
        let pts: Vec<Vec<f64>> = (0..64)
            .map(|i| vec![0.5 + (i as f64) * delta / 128.0])
            .collect();
        let cloud = NetCloud {
            space: E1,
            delta,
            points: pts,
            claimed_s: None,
            frostman_c: None,
        };
        assert_eq!(extract_frostman_subset(&cloud, 1.0, 1.0).cloud.len(), 1);
    }

    #[test]
    fn box_dimension_calibration() {
        let seg = segment(10_000, 7);
        let d = box_dimension(&seg, E1, ScaleLadder::dyadic(3, 7)).unwrap();
        assert!((d.slope - 1.0).abs() <= 0.1, "{d:?}");
        for w in d.counts.windows(2) {
            assert!(w[0] <= w[1]);
        }

        let mut rng = stream(8, 0);
        let sq: Vec<Vec<f64>> = (0..10_000)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let d = box_dimension(&sq, E2, ScaleLadder::dyadic(2, 5)).unwrap();
        assert!((d.slope - 2.0).abs() <= 0.15, "{d:?}");
        assert_eq!(d.counts, vec![16, 64, 256, 1024]);

        let c = cantor_mid(10);
        let d = box_dimension(
            &c,
            E1,
            ScaleLadder {
                base: 3.0,
                i_min: 2,
                i_max: 7,
            },
        )
        .unwrap();
        assert_eq!(d.counts, vec![4, 8, 16, 32, 64, 128]);
        assert!((d.slope - libm::log(2.0) / libm::log(3.0)).abs() < 1e-12);

        let finite: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.2]).collect();
        let d = box_dimension(&finite, E1, ScaleLadder::dyadic(4, 8)).unwrap();
        assert_eq!(d.slope, 0.0);
    }

    #[test]
    fn greedy_cover_counts_cantor_intervals_exactly() {
        // At 3^-m each level-m interval is swallowed by the ball around its
        // first point and the next interval is more than 3^-m away.
        let c = cantor(10);
        for m in 2..=7 {
            assert_eq!(covering_count(&c, libm::pow(3.0, -(m as f64)), E1), 1 << m);
        }
    }

    #[test]
    fn mesh_counts_are_monotone() {
        let mut rng = stream(9, 0);
        let pts: Vec<Vec<f64>> = (0..2000)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let c: Vec<usize> = (1..8)
            .map(|i| mesh_count(&pts, libm::pow(2.0, -(i as f64))))
            .collect();
        for w in c.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn box_dimension_needs_three_scales() {
        assert_eq!(
            box_dimension(&segment(10, 1), E1, ScaleLadder::dyadic(3, 4)),
            Err(Error::TooFewScales(2))
        );
    }

    #[test]
    fn grassmannian_net_matches_brute_force() {
        let mut rng = stream(12, 0);
        let space = Space::Grassmannian { k: 2, n: 4 };
        let pts: Vec<Vec<f64>> = (0..400)
            .map(|_| Subspace::random(4, 2, &mut rng).proj().to_vec())
            .collect();
        let delta = 0.3;
        let net = greedy_net(&pts, delta, space).unwrap();
        let mut brute: Vec<&Vec<f64>> = Vec::new();
        for p in &pts {
            if brute.iter().all(|q| space.distance(p, q) >= delta) {
                brute.push(p);
            }
        }
        assert_eq!(net.len(), brute.len());
        for (a, b) in net.points().iter().zip(&brute) {
            assert_eq!(a, *b);
        }
    }
}
