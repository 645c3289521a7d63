//! Extremal line families (direction bushes, product examples, bush families)
//! and the closed-form projection exponents they realise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::consts::{BASE_RADIUS, CAP_CHART_RADIUS};
use crate::error::{invalid, Error, Result};
use crate::grass::{AffinePlane, LocalLine, Subspace};
use crate::linalg;
use crate::nets::{greedy_net, NetCloud, Space};
use crate::rng::halton;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Sorts points lexicographically by coordinates.
pub fn sort_points(points: &mut [Vec<f64>]) {
    points.sort_by(|a, b| lex(a, b));
}

/// Ratio of the two-piece Cantor construction of dimension `f` in `(0, 1)`:
/// `2 r^f = 1`, i.e. `r = 2^{-1/f}`. `f = log 2 / log 3` gives the middle
/// thirds set.
pub fn cantor_ratio(f: f64) -> f64 {
    libm::pow(2.0, -1.0 / f)
}

/// Centres of the level-`L` intervals of the Cantor set of ratio `r` on
/// `[-h, h]`, with `L` the deepest level whose sibling centres stay at least
/// `delta` apart.
fn cantor_axis(r: f64, h: f64, delta: f64) -> Vec<f64> {
    let mut centers = vec![0.0];
    let mut len = 2.0 * h;
    // Children of an interval of length `len` have centres `(1 - r) len` apart.
    while (1.0 - r) * len >= delta {
        let child = r * len;
        let off = 0.5 * (len - child);
        centers = centers.iter().flat_map(|&c| [c - off, c + off]).collect();
        len = child;
    }
    centers
}

fn grid_axis(h: f64, delta: f64) -> Vec<f64> {
    let m = libm::floor(h / delta) as i64;
    (-m..=m).map(|i| i as f64 * delta).collect()
}

/// Product set of dimension `dim` in `[-h, h]^axes`: `floor(dim)` full axes
/// sampled on a `delta` grid, one Cantor axis carrying the fractional part, the
/// remaining axes fixed at 0. `dim = 0` gives the origin.
pub fn fractal_set(dim: f64, axes: usize, h: f64, delta: f64) -> Result<Vec<Vec<f64>>> {
    if !(0.0..=axes as f64).contains(&dim) {
        return Err(invalid(format!("dimension {dim} outside [0, {axes}]")));
    }
    let full = libm::floor(dim + 1e-12) as usize;
    let frac = dim - full as f64;
    let mut factors: Vec<Vec<f64>> = (0..full).map(|_| grid_axis(h, delta)).collect();
    if frac > 1e-12 {
        factors.push(cantor_axis(cantor_ratio(frac), h, delta));
    }
    while factors.len() < axes {
        factors.push(vec![0.0]);
    }
    let mut pts: Vec<Vec<f64>> = vec![Vec::new()];
    for f in &factors {
        pts = pts
            .iter()
            .flat_map(|p| {
                f.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    Ok(pts)
}

/// Number of axes that [`fractal_set`] actually spreads over.
fn axes_used(dim: f64) -> usize {
    libm::ceil(dim - 1e-12).max(1.0) as usize
}

/// Delta-net of the disk `|w| <= CAP_CHART_RADIUS` in `R^{n-1}`: the slope
/// vectors `w = Y - X` of the near-vertical direction cap. For `n = 3` the
/// candidates come from a Fibonacci lattice on the sphere restricted to the cap
/// and mapped by `u -> u' / u_n`; for `n > 3` from a Halton sequence.
pub fn cap_directions(n: usize, delta: f64) -> Vec<Vec<f64>> {
    let m = n - 1;
    let r = CAP_CHART_RADIUS;
    let mut cand: Vec<Vec<f64>> = Vec::new();
    match m {
        1 => cand = grid_axis(r, delta).into_iter().map(|x| vec![x]).collect(),
        2 => {
            // Spacing about delta/2 on the sphere; the gnomonic map only expands.
            let total = libm::ceil(16.0 * core::f64::consts::PI / (delta * delta)) as usize;
            let zmin = 1.0 / libm::sqrt(1.0 + r * r);
            for i in 0..total {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / total as f64;
                if z < zmin {
                    break;
                }
                let rho = libm::sqrt(1.0 - z * z);
                let t = GOLDEN_ANGLE * i as f64;
                cand.push(vec![rho * libm::cos(t) / z, rho * libm::sin(t) / z]);
            }
        }
        _ => cand = halton_ball(m, r, delta),
    }
    let net = greedy_net(&cand, delta, Space::Euclidean { dim: m }).expect("valid candidates");
    net.into_points()
}

/// Halton candidates in the ball of radius `r` in `R^m`, about `2^m` per
/// `delta`-cell.
fn halton_ball(m: usize, r: f64, delta: f64) -> Vec<Vec<f64>> {
    let cells = libm::pow(2.0 * r / delta, m as f64);
    let total = (libm::pow(2.0, m as f64) * cells) as u64 + 1;
    (1..=total)
        .map(|i| {
            halton(i, m)
                .into_iter()
                .map(|x| r * (2.0 * x - 1.0))
                .collect::<Vec<f64>>()
        })
        .filter(|w| linalg::norm(w) <= r)
        .collect()
}

/// Delta-net of the ball of radius `r` in `R^m` (sunflower lattice for `m = 2`).
pub fn ball_net(m: usize, r: f64, delta: f64) -> Vec<Vec<f64>> {
    let cand: Vec<Vec<f64>> = match m {
        0 => vec![Vec::new()],
        1 => grid_axis(r, delta).into_iter().map(|x| vec![x]).collect(),
        2 => {
            let total =
                libm::ceil(4.0 * core::f64::consts::PI * r * r / (delta * delta) * 4.0) as usize;
            (0..total)
                .map(|i| {
                    let rho = r * libm::sqrt((i as f64 + 0.5) / total as f64);
                    let t = GOLDEN_ANGLE * i as f64;
                    vec![rho * libm::cos(t), rho * libm::sin(t)]
                })
                .collect()
        }
        _ => halton_ball(m, r, delta),
    };
    if m == 0 {
        return cand;
    }
    greedy_net(&cand, delta, Space::Euclidean { dim: m })
        .expect("valid candidates")
        .into_points()
}

fn lines_cloud(n: usize, delta: f64, lines: Vec<LocalLine>) -> Result<NetCloud> {
    let mut pts: Vec<Vec<f64>> = lines.iter().map(LocalLine::chart).collect();
    sort_points(&mut pts);
    NetCloud::new(Space::AffineLines { n }, delta, pts)
}

/// Lines through the origin whose directions form a delta-net of a
/// `dim_a`-dimensional subset of the direction cap.
pub fn gen_direction_bush(n: usize, delta: f64, dim_a: f64) -> Result<NetCloud> {
    if n < 2 || !(0.0..=(n - 1) as f64).contains(&dim_a) {
        return Err(invalid(format!(
            "direction bush needs 0 <= dim_a <= {}",
            n.saturating_sub(1)
        )));
    }
    let dirs = if dim_a >= (n - 1) as f64 {
        cap_directions(n, delta)
    } else {
        let h = CAP_CHART_RADIUS / libm::sqrt(axes_used(dim_a) as f64);
        let raw = fractal_set(dim_a, n - 1, h, delta)?;
        greedy_net(&raw, delta, Space::Euclidean { dim: n - 1 })?.into_points()
    };
    let zero = vec![0.0; n - 1];
    let lines = dirs
        .into_iter()
        .map(|w| LocalLine {
            x: zero.clone(),
            y: w,
        })
        .collect();
    lines_cloud(n, delta, lines)
}

/// A `beta`-dimensional base set in `{x_n = 0}`, each base point carrying the
/// full bush of near-vertical lines through it.
pub fn gen_product_example(n: usize, beta: f64, delta: f64) -> Result<NetCloud> {
    if n < 2 || !(0.0..=(n - 1) as f64).contains(&beta) {
        return Err(invalid(format!(
            "product example needs 0 <= beta <= {}",
            n.saturating_sub(1)
        )));
    }
    let h = BASE_RADIUS / libm::sqrt(axes_used(beta) as f64);
    let base = greedy_net(
        &fractal_set(beta, n - 1, h, delta)?,
        delta,
        Space::Euclidean { dim: n - 1 },
    )?;
    let dirs = cap_directions(n, delta);
    let mut lines = Vec::with_capacity(base.len() * dirs.len());
    for x in base.points() {
        for w in &dirs {
            lines.push(LocalLine {
                x: x.clone(),
                y: linalg::add(x, w),
            });
        }
    }
    lines_cloud(n, delta, lines)
}

/// Nominal dimension of a construction: `dim_a` for a bush, `beta + n - 1` for
/// a product example.
pub fn product_dimension(n: usize, beta: f64) -> f64 {
    beta + (n - 1) as f64
}

/// `Bush(l, stem)`: the `l`-planes containing the `j`-plane `stem`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bush {
    pub stem: AffinePlane,
    pub leaf_dim: usize,
    /// Keep only leaves meeting `V_l⊥` trivially.
    pub transversality_filter: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub bush: usize,
    pub plane: AffinePlane,
}

/// Union of bushes over stems `V_j + v`, `v` in a `b`-dimensional set
/// `B ⊂ V_l⊥`. Coordinates: `V_j` and `V_l` are spanned by the last `j` and
/// last `l` standard basis vectors, so `V_l⊥` is the first `n - l` axes.
#[derive(Debug, Clone, PartialEq)]
pub struct BushFamily {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub j: usize,
    pub bushes: Vec<Bush>,
    pub leaves: Vec<Leaf>,
}

/// Parameters of [`gen_bush_family`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BushFamilyParams {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub j: usize,
    pub b: f64,
    pub delta: f64,
    pub full_b: bool,
    pub transversality_filter: bool,
}

/// Whether `dir ∩ V_l⊥ = {0}`, i.e. the map `dir -> V_l` is injective.
pub fn is_transversal(dir: &Subspace, n: usize, l: usize) -> bool {
    let vl = Subspace::coordinate(n, &(n - l..n).collect::<Vec<_>>());
    let m = dir.dim();
    if m > l {
        return false;
    }
    // Gram matrix of the frame projected to V_l; injective iff positive definite.
    let proj: Vec<Vec<f64>> = dir.frame().iter().map(|f| vl.project(f)).collect();
    let mut g = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            g[a * m + b] = linalg::dot(&proj[a], &proj[b]);
        }
    }
    m == 0 || linalg::sym_eigen(&g, m).0[0] > 1e-10
}

pub fn gen_bush_family(p: BushFamilyParams) -> Result<BushFamily> {
    let BushFamilyParams {
        n,
        k,
        l,
        j,
        b,
        delta,
        full_b,
        transversality_filter,
    } = p;
    if !(j <= l && l < k && k < n) {
        return Err(invalid("bush family needs 0 <= j <= l < k < n"));
    }
    let b = if full_b { (n - l) as f64 } else { b };
    if !(0.0..=(n - l) as f64).contains(&b) || !(delta > 0.0) {
        return Err(invalid(format!(
            "bush family needs 0 <= b <= {} and delta > 0",
            n - l
        )));
    }
    let h = BASE_RADIUS / libm::sqrt(axes_used(b) as f64);
    let base2 = fractal_set(b, n - l, h, delta)?;
    let base = greedy_net(&base2, delta, Space::Euclidean { dim: n - l })?;
    let vj: Vec<usize> = (n - j..n).collect();
    let free: Vec<usize> = (n - l..n - j).collect();
    let stem_dir = Subspace::coordinate(n, &vj);

    // Leaf directions: V_j plus e_p + A_p for each free V_l axis p, with A in V_l⊥.
    let m = free.len() * (n - l);
    let params = if l == 1 && j == 0 {
        cap_directions(n, delta)
    } else {
        ball_net(m, CAP_CHART_RADIUS, delta)
    };
    let mut dirs: Vec<Subspace> = Vec::with_capacity(params.len());
    for a in &params {
        let mut span: Vec<Vec<f64>> = vj.iter().map(|&q| linalg::unit(n, q)).collect();
        for (i, &pax) in free.iter().enumerate() {
            let mut v = linalg::unit(n, pax);
            v[..n - l].copy_from_slice(&a[i * (n - l)..(i + 1) * (n - l)]);
            span.push(v);
        }
        dirs.push(Subspace::from_spanning(n, &span)?);
    }
    // Leaves that contain a V_l⊥ axis lie in Bush but not in Bush'.
    if !free.is_empty() {
        for c in 0..n - l {
            let mut span: Vec<Vec<f64>> = vj.iter().map(|&q| linalg::unit(n, q)).collect();
            span.push(linalg::unit(n, c));
            span.extend(free[1..].iter().map(|&q| linalg::unit(n, q)));
            dirs.push(Subspace::from_spanning(n, &span)?);
        }
    }
    if transversality_filter {
        dirs.retain(|d| is_transversal(d, n, l));
    }

    let mut bushes = Vec::with_capacity(base.len());
    let mut leaves = Vec::with_capacity(base.len() * dirs.len());
    for v in base.points() {
        let mut point = vec![0.0; n];
        point[..n - l].copy_from_slice(v);
        let stem = AffinePlane::new(stem_dir.clone(), point.clone())?;
        let idx = bushes.len();
        bushes.push(Bush {
            stem,
            leaf_dim: l,
            transversality_filter,
        });
        for d in &dirs {
            leaves.push(Leaf {
                bush: idx,
                plane: AffinePlane::through(d.clone(), &point),
            });
        }
    }
    Ok(BushFamily {
        n,
        k,
        l,
        j,
        bushes,
        leaves,
    })
}

/// Flattened `AffinePlanes` coordinates: projection matrix then offset.
pub fn plane_point(p: &AffinePlane) -> Vec<f64> {
    let mut v = p.dir().proj().to_vec();
    v.extend_from_slice(p.offset());
    v
}

impl BushFamily {
    /// Leaves of one bush as points of `AffinePlanes { l, n }`.
    pub fn leaf_points(&self, bush: usize) -> Vec<Vec<f64>> {
        self.leaves
            .iter()
            .filter(|x| x.bush == bush)
            .map(|x| plane_point(&x.plane))
            .collect()
    }

    /// Whether leaf `leaf` also belongs to `Bush'(l, stem of bush)`.
    pub fn leaf_in_bush(&self, leaf: &Leaf, bush: usize, tol: f64) -> bool {
        let stem = &self.bushes[bush].stem;
        let contains = leaf.plane.dist_to(stem.offset()) <= tol
            && stem
                .dir()
                .frame()
                .iter()
                .all(|f| leaf.plane.dir().dist_to(f) <= tol);
        contains
            && (!self.bushes[bush].transversality_filter
                || is_transversal(leaf.plane.dir(), self.n, self.l))
    }

    /// Number of (leaf, other bush) memberships over the given bush pairs.
    pub fn shared_leaves(&self, pairs: &[(usize, usize)], tol: f64) -> usize {
        let mut shared = 0;
        for &(a, b) in pairs {
            for leaf in self.leaves.iter().filter(|x| x.bush == a) {
                if self.leaf_in_bush(leaf, b, tol) {
                    shared += 1;
                }
            }
        }
        shared
    }
}

/// Exact projection exponent for lines onto `k`-planes:
/// `a` on `[0, k-1]`, `k-1` on `[k-1, n-1]`, `a-(n-k)` on `[n-1, n+k-2]`,
/// `2(k-1)` on `[n+k-2, 2(n-1)]`.
pub fn eval_s(a: f64, k: usize, n: usize) -> Result<f64> {
    if !(1 < k && k < n) {
        return Err(invalid("eval_s needs 1 < k < n"));
    }
    let (kf, nf) = (k as f64, n as f64);
    if !(0.0..=2.0 * (nf - 1.0)).contains(&a) {
        return Err(invalid(format!("a = {a} outside [0, {}]", 2 * (n - 1))));
    }
    Ok(if a <= kf - 1.0 {
        a
    } else if a <= nf - 1.0 {
        kf - 1.0
    } else if a <= nf + kf - 2.0 {
        a - (nf - kf)
    } else {
        2.0 * (kf - 1.0)
    })
}

/// Upper envelope for projections of `l`-planes onto `k`-planes.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralS {
    pub value: f64,
    /// The `j` whose ranges contain `a`.
    pub regimes: Vec<usize>,
    /// `a` lies in a `j = 0` or `j = l` range, where a matching lower bound is
    /// stated.
    pub lower_bound_known: bool,
}

/// Bound from the `j`-th pair of pieces, if `a` lies in its range.
pub fn s_upper_bound_for_j(a: f64, k: usize, n: usize, l: usize, j: usize) -> Option<f64> {
    let (kf, nf, lf) = (k as f64, n as f64, l as f64);
    let lj = (l - j) as f64;
    let start = lj * (nf - lf);
    let mid = start + kf - lf;
    let end = (lj + 1.0) * (nf - lf);
    if (start..=mid).contains(&a) {
        Some(a - lj * (nf - kf))
    } else if (mid..=end).contains(&a) {
        Some((lj + 1.0) * (kf - lf))
    } else {
        None
    }
}

pub fn eval_s_general(a: f64, k: usize, n: usize, l: usize) -> Result<GeneralS> {
    if !(l < k && k < n) {
        return Err(invalid("eval_s_general needs 0 <= l < k < n"));
    }
    let top = ((l + 1) * (n - l)) as f64;
    if !(0.0..=top).contains(&a) {
        return Err(Error::InvalidParameter(format!(
            "a = {a} outside [0, {top}]"
        )));
    }
    let mut value = f64::INFINITY;
    let mut regimes = Vec::new();
    for j in 0..=l {
        if let Some(v) = s_upper_bound_for_j(a, k, n, l, j) {
            value = value.min(v);
            regimes.push(j);
        }
    }
    let lower_bound_known = regimes.iter().any(|&j| j == 0 || j == l);
    Ok(GeneralS {
        value,
        regimes,
        lower_bound_known,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{box_dimension, ScaleLadder};

    #[test]
    fn cantor_ratio_of_middle_thirds() {
        let f = libm::log(2.0) / libm::log(3.0);
        assert!((cantor_ratio(f) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cantor_axis_is_separated() {
        let c = cantor_axis(1.0 / 3.0, 0.45, 1.0 / 64.0);
        assert_eq!(c.len(), 16);
        for w in c.windows(2) {
            assert!(w[1] - w[0] >= 1.0 / 64.0);
        }
    }

    #[test]
    fn bush_examples() {
        let delta = 1.0 / 32.0;
        let cloud = gen_direction_bush(3, delta, 2.0).unwrap();
        assert!((400..=1400).contains(&cloud.len()), "{}", cloud.len());
        for p in cloud.points() {
            let l = LocalLine::from_chart(p).unwrap();
            assert!(l.slope() <= CAP_CHART_RADIUS + 1e-12);
            assert!(l.to_affine().is_local());
        }
        // Counting stops one octave above the net scale, where the net saturates.
        let d = box_dimension(cloud.points(), cloud.space(), ScaleLadder::dyadic(2, 4)).unwrap();
        assert!((d.slope - 2.0).abs() <= 0.2, "{d:?}");
        assert_eq!(gen_direction_bush(3, delta, 0.0).unwrap().len(), 1);
        assert!(gen_direction_bush(3, delta, 2.5).is_err());
    }

    #[test]
    fn product_lines_are_separated_across_base_points() {
        let delta = 1.0 / 16.0;
        let cloud = gen_product_example(3, libm::log(2.0) / libm::log(3.0), delta).unwrap();
        let lines: Vec<LocalLine> = cloud
            .points()
            .iter()
            .map(|p| LocalLine::from_chart(p).unwrap())
            .collect();
        for a in &lines {
            for b in &lines {
                if linalg::dist(&a.x, &b.x) > 0.0 {
                    assert!(crate::grass::line_distance_chart(a, b) >= delta / 4.0);
                }
            }
            assert!(a.to_affine().is_local());
        }
    }

    #[test]
    fn bush_family_reduces_to_direction_bush() {
        let delta = 1.0 / 16.0;
        let fam = gen_bush_family(BushFamilyParams {
            n: 3,
            k: 2,
            l: 1,
            j: 0,
            b: 0.0,
            delta,
            full_b: false,
            transversality_filter: true,
        })
        .unwrap();
        let mut from_family: Vec<Vec<f64>> = fam
            .leaves
            .iter()
            .map(|x| LocalLine::from_affine(&x.plane).unwrap().chart())
            .collect();
        sort_points(&mut from_family);
        let bush = gen_direction_bush(3, delta, 2.0).unwrap();
        assert_eq!(from_family.len(), bush.len());
        for (a, b) in from_family.iter().zip(bush.points()) {
            assert!(linalg::dist(a, b) < 1e-12);
        }
    }

    #[test]
    fn bush_family_disjointness_needs_the_filter() {
        let mk = |filter| {
            gen_bush_family(BushFamilyParams {
                n: 4,
                k: 3,
                l: 2,
                j: 1,
                b: 1.0,
                delta: 0.25,
                full_b: false,
                transversality_filter: filter,
            })
            .unwrap()
        };
        let fam = mk(true);
        let m = fam.bushes.len();
        assert!(m >= 3);
        let pairs: Vec<(usize, usize)> = (0..m)
            .flat_map(|a| (0..m).filter(move |&b| b != a).map(move |b| (a, b)))
            .collect();
        for leaf in &fam.leaves {
            assert!(fam.leaf_in_bush(leaf, leaf.bush, 1e-10));
        }
        assert_eq!(fam.shared_leaves(&pairs, 1e-9), 0);
        let unfiltered = mk(false);
        assert!(unfiltered.shared_leaves(&pairs, 1e-9) > 0);
    }

    #[test]
    fn eval_s_examples() {
        assert_eq!(eval_s(2.0, 2, 3).unwrap(), 1.0);
        assert_eq!(eval_s(0.0, 2, 3).unwrap(), 0.0);
        for (k, n) in [(2, 3), (2, 4), (3, 4), (3, 5)] {
            assert_eq!(
                eval_s(2.0 * (n as f64 - 1.0), k, n).unwrap(),
                2.0 * (k as f64 - 1.0)
            );
        }
        assert!(eval_s(4.5, 2, 3).is_err());
        assert!(eval_s(1.0, 1, 3).is_err());
    }

    #[test]
    fn general_s_reduces_to_classical_marstrand_for_points() {
        for i in 0..=30 {
            let a = i as f64 * 0.1;
            let g = eval_s_general(a, 2, 3, 0).unwrap();
            assert_eq!(g.value, a.min(2.0));
        }
    }

    #[test]
    fn general_s_adjacent_pieces_agree_at_endpoints() {
        for (k, n, l) in [(3, 5, 1), (3, 6, 2), (4, 7, 2), (2, 4, 1)] {
            for j in 1..=l {
                // Range of j ends where the range of j - 1 starts.
                let a = ((l - j + 1) * (n - l)) as f64;
                let left = s_upper_bound_for_j(a, k, n, l, j).unwrap();
                let right = s_upper_bound_for_j(a, k, n, l, j - 1).unwrap();
                assert!((left - right).abs() < 1e-12, "k={k} n={n} l={l} j={j}");
            }
        }
    }
}
