//! Slabs orthogonal to a `k`-plane, per-plane slab families built from a line
//! set, tube-slab incidence counting, and the pencil set `M` of planes that
//! collapse a 2-plane.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::consts::{SLAB_COMPARABLE_C, V_CHART_MAX_TILT};
use crate::error::{invalid, Error, Result};
use crate::grass::{
    angle_to_complement, ball_samples, project_line, sample_grassmannian, AffinePlane, LineImage,
    LocalLine, Subspace, VChart,
};
use crate::linalg::{self, dot, norm};
use crate::nets::{greedy_net, DimEstimate, ScaleLadder, Space};
use crate::par;
use crate::rng::{gaussian_vec, stream};
use crate::spatial::GridHash;

/// Line in `V` through `point` with unit `direction`, ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Tube {
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
}

/// Slack on `|x| <= 1`, so that computed unit-ball endpoints count as inside.
const BALL_TOL: f64 = 1e-12;

/// `N_r(core) ∩ B(0,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Slab {
    pub core: AffinePlane,
    pub thickness: f64,
    pub anchor_v: Option<Subspace>,
    pub anchor_tube: Option<Tube>,
}

impl Slab {
    pub fn new(core: AffinePlane, thickness: f64) -> Self {
        Self {
            core,
            thickness,
            anchor_v: None,
            anchor_tube: None,
        }
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        norm(x) <= 1.0 + BALL_TOL && self.core.dist_to(x) <= self.thickness
    }

    /// Exact: distance to an affine plane is convex, so a segment lies in the
    /// slab iff both endpoints do (the unit ball is convex as well).
    pub fn contains_segment(&self, a: &[f64], b: &[f64]) -> bool {
        self.contains_point(a) && self.contains_point(b)
    }

    /// Whether `L ∩ B(0,1)` lies in the slab.
    pub fn contains_line(&self, l: &LocalLine) -> bool {
        match l.unit_ball_segment() {
            Some((a, b)) => self.contains_segment(&a, &b),
            None => true,
        }
    }
}

/// The slab `N_r(P_V(L) + V⊥) ∩ B(0,1)`.
pub fn make_orthogonal_slab(v: &Subspace, l: &LocalLine, r: f64, mu: f64) -> Result<Slab> {
    let (p0, p1) = match project_line(v, l, mu) {
        LineImage::Line { p0, p1 } => (p0, p1),
        LineImage::Point(_) => return Err(Error::NotTransversal { angle: 0.0, mu }),
        LineImage::Degenerate { angle } => return Err(Error::NotTransversal { angle, mu }),
    };
    let a = v.lift(&p0);
    let d = linalg::sub(&v.lift(&p1), &a);
    let d = linalg::scale(&d, 1.0 / norm(&d));
    let mut span = vec![d.clone()];
    span.extend(v.complement().frame().iter().cloned());
    let dir = Subspace::from_spanning(v.ambient(), &span)?;
    let core = AffinePlane::through(dir, &a);
    Ok(Slab {
        core,
        thickness: r,
        anchor_v: Some(v.clone()),
        anchor_tube: Some(Tube {
            point: a,
            direction: d,
        }),
    })
}

/// Sample points of `core ∩ B(0,1)`.
fn core_samples(s: &Slab) -> Vec<Vec<f64>> {
    let off = s.core.offset();
    let c2 = dot(off, off);
    if c2 >= 1.0 {
        return Vec::new();
    }
    let rad = libm::sqrt(1.0 - c2);
    let m = s.core.dim();
    ball_samples(m, 64 * m.max(1))
        .into_iter()
        .map(|z| {
            let mut x = off.to_vec();
            for (f, zi) in s.core.dir().frame().iter().zip(&z) {
                linalg::axpy(&mut x, rad * zi, f);
            }
            x
        })
        .collect()
}

/// Whether each slab's core, sampled inside the unit ball, lies in the
/// `c`-dilation of the other.
pub fn slabs_comparable_with(a: &Slab, b: &Slab, c: f64) -> bool {
    let inside = |x: &Slab, y: &Slab| {
        core_samples(x)
            .iter()
            .all(|p| y.core.dist_to(p) <= c * y.thickness)
    };
    inside(a, b) && inside(b, a)
}

pub fn slabs_comparable(a: &Slab, b: &Slab) -> bool {
    slabs_comparable_with(a, b, SLAB_COMPARABLE_C)
}

/// Line preprocessed for incidence queries: endpoints of `L ∩ B(0,1)` and direction.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedLine {
    pub line: LocalLine,
    pub ends: (Vec<f64>, Vec<f64>),
    pub direction: Vec<f64>,
}

pub fn prepare_lines(lines: &[LocalLine]) -> Vec<PreparedLine> {
    lines
        .iter()
        .filter_map(|l| {
            l.unit_ball_segment().map(|ends| PreparedLine {
                line: l.clone(),
                ends,
                direction: l.direction(),
            })
        })
        .collect()
}

/// A line seen from one chart: chart coordinates of its unit-ball endpoints
/// and, if admissible, the chart `(X', Y')` of its projection.
#[derive(Debug, Clone)]
struct LineView {
    c0: Vec<f64>,
    c1: Vec<f64>,
    chart: Option<Vec<f64>>,
}

fn view(ch: &VChart, l: &PreparedLine, mu: f64) -> LineView {
    let c0 = ch.coords(&l.ends.0);
    let c1 = ch.coords(&l.ends.1);
    let chart = if angle_to_complement(ch.subspace(), &l.direction) > mu {
        ch.chart_of_segment(&c0, &c1, V_CHART_MAX_TILT)
    } else {
        None
    };
    LineView { c0, c1, chart }
}

/// Distance in `R^k` from `c` to the chart line through `(X, 0)` with
/// direction `(Y - X, 1)`.
fn dist_to_chart_line(c: &[f64], chart: &[f64]) -> f64 {
    let k = c.len();
    let m = k - 1;
    let mut d2 = 1.0;
    let mut dd = c[k - 1];
    let mut cc = c[k - 1] * c[k - 1];
    for i in 0..m {
        let s = chart[m + i] - chart[i];
        let r = c[i] - chart[i];
        d2 += s * s;
        dd += r * s;
        cc += r * r;
    }
    libm::sqrt((cc - dd * dd / d2).max(0.0))
}

/// Slabs orthogonal to one plane `V`, stored as tube charts `(X', Y')` in
/// the `A(1, V)` chart. The slab of a tube is `N_delta(tube + V⊥) ∩ B(0,1)`.
#[derive(Debug, Clone)]
pub struct TubeFamily {
    chart: VChart,
    delta: f64,
    tubes: Vec<Vec<f64>>,
    max_slope: f64,
    grid: GridHash,
}

impl TubeFamily {
    pub fn new(chart: VChart, delta: f64) -> Self {
        let m = chart.dim() - 1;
        Self {
            chart,
            delta,
            tubes: Vec::new(),
            max_slope: 0.0,
            grid: GridHash::new(delta, m),
        }
    }

    pub fn chart(&self) -> &VChart {
        &self.chart
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn tubes(&self) -> &[Vec<f64>] {
        &self.tubes
    }

    pub fn len(&self) -> usize {
        self.tubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tubes.is_empty()
    }

    pub fn push(&mut self, tube_chart: Vec<f64>) {
        let m = self.chart.dim() - 1;
        let slope = linalg::dist(&tube_chart[m..], &tube_chart[..m]);
        self.max_slope = self.max_slope.max(slope);
        self.grid.insert(&tube_chart[..m], self.tubes.len() as u32);
        self.tubes.push(tube_chart);
    }

    fn contains_view(&self, t: usize, v: &LineView) -> bool {
        let tc = &self.tubes[t];
        dist_to_chart_line(&v.c0, tc) <= self.delta && dist_to_chart_line(&v.c1, tc) <= self.delta
    }

    /// Exact test `L ∩ B(0,1) ⊂ slab(t)`.
    pub fn contains(&self, t: usize, l: &PreparedLine) -> bool {
        self.contains_view(t, &view(&self.chart, l, 0.0))
    }

    /// Calls `f` on every tube containing the line, using the hash when the
    /// line's projection has a chart. Tubes are visited in hash order.
    fn for_each_containing<F: FnMut(usize)>(&self, v: &LineView, mut f: F) {
        let k = self.chart.dim();
        let (h0, h1) = (v.c0[k - 1], v.c1[k - 1]);
        let Some(ch) = &v.chart else {
            for t in 0..self.tubes.len() {
                if self.contains_view(t, v) {
                    f(t);
                }
            }
            return;
        };
        // Containment forces the horizontal offset at both endpoint heights to be
        // at most delta * sqrt(1 + slope^2); interpolating to height 0 bounds
        // |X'_line - X'_tube|.
        let w = self.delta * libm::sqrt(1.0 + self.max_slope * self.max_slope);
        let reach = w * (libm::fabs(h0) + libm::fabs(h1)) / libm::fabs(h1 - h0);
        let reach = reach * (1.0 + 1e-9) + 1e-12;
        let m = k - 1;
        self.grid.scan(&ch[..m], reach, |id| {
            let t = id as usize;
            if self.contains_view(t, v) {
                f(t);
            }
            true
        });
    }

    /// Tubes containing the line, in increasing index order.
    pub fn containing(&self, l: &PreparedLine, mu: f64) -> Vec<usize> {
        let v = view(&self.chart, l, mu);
        let mut out = Vec::new();
        self.for_each_containing(&v, |t| out.push(t));
        out.sort_unstable();
        out
    }

    /// Brute-force counterpart of [`TubeFamily::containing`].
    pub fn containing_brute(&self, l: &PreparedLine) -> Vec<usize> {
        let v = view(&self.chart, l, 0.0);
        (0..self.tubes.len())
            .filter(|&t| self.contains_view(t, &v))
            .collect()
    }

    /// Materialises the slab of tube `t`.
    pub fn slab(&self, t: usize) -> Slab {
        let tc = &self.tubes[t];
        let k = self.chart.dim();
        let m = k - 1;
        let mut c0 = tc[..m].to_vec();
        c0.push(0.0);
        let mut c1 = tc[m..].to_vec();
        c1.push(1.0);
        let a = self.chart.lift(&c0);
        let d = linalg::sub(&self.chart.lift(&c1), &a);
        let d = linalg::scale(&d, 1.0 / norm(&d));
        let v = self.chart.subspace();
        let mut span = vec![d.clone()];
        span.extend(v.complement().frame().iter().cloned());
        let dir = Subspace::from_spanning(v.ambient(), &span).expect("tube and V⊥ are independent");
        Slab {
            core: AffinePlane::through(dir, &a),
            thickness: self.delta,
            anchor_v: Some(v.clone()),
            anchor_tube: Some(Tube {
                point: a,
                direction: d,
            }),
        }
    }
}

/// Whether every line is admissible for `V`: transversal beyond `mu` and with
/// a projected tilt below the chart limit.
pub fn admissible(ch: &VChart, lines: &[PreparedLine], mu: f64) -> bool {
    lines.iter().all(|l| view(ch, l, mu).chart.is_some())
}

/// Greedy slab cover of the lines for one `V`: a line adds the slab around
/// its own projection unless an existing slab already contains it. Every
/// admissible line ends up in at least one slab.
pub fn build_tube_family(ch: VChart, lines: &[PreparedLine], delta: f64, mu: f64) -> TubeFamily {
    let mut fam = TubeFamily::new(ch, delta);
    for l in lines {
        let v = view(&fam.chart, l, mu);
        let Some(tc) = v.chart.clone() else { continue };
        let mut covered = false;
        fam.for_each_containing(&v, |_| covered = true);
        if !covered {
            fam.push(tc);
        }
    }
    fam
}

/// `I = {(T, V) : T in T_V}` and the per-line sets `I_l = {(T, V) : l ⊂ T}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidencePairs {
    /// `(slab index, V index)`, sorted by `V` then slab.
    pub pairs: Vec<(u32, u32)>,
    pub per_v_counts: Vec<usize>,
    /// `#I_l` for every line.
    pub per_line_counts: Vec<usize>,
    /// Number of lines contained in each slab, per `V`.
    pub slab_line_counts: Vec<Vec<u32>>,
    /// Largest number of slabs of a single `V` containing one line.
    pub max_multiplicity: usize,
}

impl IncidencePairs {
    pub fn total(&self) -> usize {
        self.pairs.len()
    }

    /// `sum_l #I_l`.
    pub fn sum_line_incidences(&self) -> usize {
        self.per_line_counts.iter().sum()
    }

    /// `sum_{l != l1} #(I_l ∩ I_l1) = sum_{(T,V)} c (c - 1)` with `c` the number
    /// of lines in `T`.
    pub fn pair_overlap(&self) -> u64 {
        self.slab_line_counts
            .iter()
            .flatten()
            .map(|&c| c as u64 * (c as u64).saturating_sub(1))
            .sum()
    }
}

/// How slab membership is enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    Accelerated,
    BruteForce,
}

/// Enumerates `I` and `I_l` for the given slab families and lines.
pub fn count_incidences(
    families: &[TubeFamily],
    lines: &[PreparedLine],
    mode: CountMode,
) -> IncidencePairs {
    let per_v: Vec<(Vec<u32>, Vec<u32>, usize)> = par::map_indexed(families, |_, fam| {
        let mut per_line = vec![0u32; lines.len()];
        let mut per_slab = vec![0u32; fam.len()];
        let mut max_mult = 0;
        for (i, l) in lines.iter().enumerate() {
            let hits = match mode {
                CountMode::Accelerated => fam.containing(l, 0.0),
                CountMode::BruteForce => fam.containing_brute(l),
            };
            per_line[i] = hits.len() as u32;
            max_mult = max_mult.max(hits.len());
            for t in hits {
                per_slab[t] += 1;
            }
        }
        (per_line, per_slab, max_mult)
    });
    let mut pairs = Vec::new();
    let mut per_line_counts = vec![0usize; lines.len()];
    let mut slab_line_counts = Vec::with_capacity(families.len());
    let mut max_multiplicity = 0;
    for (vi, (fam, (pl, ps, mm))) in families.iter().zip(per_v).enumerate() {
        pairs.extend((0..fam.len() as u32).map(|t| (t, vi as u32)));
        for (acc, c) in per_line_counts.iter_mut().zip(&pl) {
            *acc += *c as usize;
        }
        slab_line_counts.push(ps);
        max_multiplicity = max_multiplicity.max(mm);
    }
    IncidencePairs {
        pairs,
        per_v_counts: families.iter().map(TubeFamily::len).collect(),
        per_line_counts,
        slab_line_counts,
        max_multiplicity,
    }
}

/// `max #{T in T_V : T ⊂ W_r} / (r/delta)^s` over random `r`-slabs `W_r`
/// orthogonal to `V`, each centred near the projection of a random line.
pub fn frostman_audit<R: Rng + ?Sized>(
    fam: &TubeFamily,
    lines: &[PreparedLine],
    s: f64,
    samples: usize,
    rng: &mut R,
) -> f64 {
    if fam.is_empty() || lines.is_empty() {
        return 0.0;
    }
    let k = fam.chart.dim();
    let m = k - 1;
    let delta = fam.delta;
    let levels = libm::floor(libm::log2(1.0 / delta)) as i32;
    // Tube segments inside the unit ball of V, in chart coordinates.
    let segs: Vec<(Vec<f64>, Vec<f64>)> = fam
        .tubes
        .iter()
        .filter_map(|tc| chart_segment(tc, m))
        .collect();
    let mut best = 0.0f64;
    for _ in 0..samples {
        let r = delta * libm::pow(2.0, rng.random_range(0..=levels.max(0)) as f64);
        let l = &lines[rng.random_range(0..lines.len())];
        let Some(base) = view(&fam.chart, l, 0.0).chart else {
            continue;
        };
        let w: Vec<f64> = base
            .iter()
            .map(|x| x + rng.random_range(-0.5..0.5) * r)
            .collect();
        let count = segs
            .iter()
            .filter(|(a, b)| {
                dist_to_chart_line(a, &w) + delta <= r && dist_to_chart_line(b, &w) + delta <= r
            })
            .count();
        best = best.max(count as f64 / libm::pow(r / delta, s));
    }
    best
}

/// Endpoints of a chart line's intersection with the unit ball of `V`.
fn chart_segment(tc: &[f64], m: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut p: Vec<f64> = tc[..m].to_vec();
    p.push(0.0);
    let mut d: Vec<f64> = (0..m).map(|i| tc[m + i] - tc[i]).collect();
    d.push(1.0);
    let d = linalg::scale(&d, 1.0 / norm(&d));
    let b = dot(&p, &d);
    let disc = b * b - (dot(&p, &p) - 1.0);
    if disc <= 0.0 {
        return None;
    }
    let r = libm::sqrt(disc);
    let mut a = p.clone();
    linalg::axpy(&mut a, -b - r, &d);
    let mut e = p;
    linalg::axpy(&mut e, -b + r, &d);
    Some((a, e))
}

/// Greedy delta-net of `V` candidates restricted to `G_mu`: planes for which
/// every line is admissible. Candidate `i` is drawn from stream `(seed, i)`.
pub fn gmu_net(
    n: usize,
    k: usize,
    delta: f64,
    lines: &[PreparedLine],
    mu: f64,
    candidates: usize,
    seed: u64,
) -> Result<Vec<VChart>> {
    let accepted: Vec<Option<Subspace>> = par::map_range(candidates, |i| {
        let v = sample_grassmannian(n, k, &mut stream(seed, i as u64)).ok()?;
        let ch = VChart::new(v.clone()).ok()?;
        admissible(&ch, lines, mu).then_some(v)
    });
    let pts: Vec<Vec<f64>> = accepted
        .iter()
        .flatten()
        .map(|v| v.proj().to_vec())
        .collect();
    if pts.is_empty() {
        return Err(Error::AllDegenerate);
    }
    let net = greedy_net(&pts, delta, Space::Grassmannian { k, n })?;
    net.points()
        .iter()
        .map(|p| VChart::new(Subspace::from_projection(n, p)?))
        .collect()
}

/// Two-dimensional plank spanned by `L ∩ B(0,1)` and the width segment from
/// `P_0(L)` to `P_0(L_1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plank2D {
    pub base_line: LocalLine,
    /// `P_0(L_1) - P_0(L)` in `R^{n-1}`.
    pub width_vector: Vec<f64>,
    pub d: f64,
}

impl Plank2D {
    pub fn new(base_line: LocalLine, other: &LocalLine) -> Result<Self> {
        let width_vector = linalg::sub(&other.x, &base_line.x);
        let d = norm(&width_vector);
        if !(d > 0.0 && d <= 1.0) {
            return Err(invalid("plank width must lie in (0, 1]"));
        }
        Ok(Self {
            base_line,
            width_vector,
            d,
        })
    }

    fn width_ambient(&self) -> Vec<f64> {
        let mut w = self.width_vector.clone();
        w.push(0.0);
        w
    }

    /// Orthonormal basis of the linear 2-plane parallel to the plank.
    pub fn plane(&self) -> Result<[Vec<f64>; 2]> {
        let f = linalg::orthonormalize(&[self.base_line.direction(), self.width_ambient()], 1e-12);
        if f.len() != 2 {
            return Err(Error::RankDeficient);
        }
        Ok([f[0].clone(), f[1].clone()])
    }

    /// Corners of the plank.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let (a, b) = self
            .base_line
            .unit_ball_segment()
            .unwrap_or_else(|| (self.base_line.p0(), self.base_line.p1()));
        let w = self.width_ambient();
        vec![
            a.clone(),
            b.clone(),
            linalg::add(&a, &w),
            linalg::add(&b, &w),
        ]
    }
}

/// Singular values `(sigma_1, sigma_2)` of `P_V` restricted to the plane with
/// orthonormal basis `plane`.
pub fn plane_singular_values(plane: &[Vec<f64>; 2], v: &Subspace) -> (f64, f64) {
    let a = v.coords(&plane[0]);
    let b = v.coords(&plane[1]);
    let (g11, g12, g22) = (dot(&a, &a), dot(&a, &b), dot(&b, &b));
    let tr = g11 + g22;
    let det = g11 * g22 - g12 * g12;
    let disc = libm::sqrt(((tr * tr) * 0.25 - det).max(0.0));
    let l1 = tr * 0.5 + disc;
    let l2 = (tr * 0.5 - disc).max(0.0);
    (libm::sqrt(l1), libm::sqrt(l2))
}

/// `V` belongs to the `eps`-thickened pencil set: `sigma_2(P_V|plane) <= eps`.
pub fn pencil_membership(plane: &[Vec<f64>; 2], v: &Subspace, eps: f64) -> bool {
    plane_singular_values(plane, v).1 <= eps
}

/// Distance from `V` to `M = {W : dim P_W(plane) <= 1}` and a nearest member.
///
/// With `x` the unit vector of the plane least shortened by `P_V`, `y` and `z`
/// the normalised components of `x` in `V` and `V⊥`, rotating `y` towards `-z`
/// by `asin sigma_2` gives `W ∈ M` with `d(V, W) = sigma_2`; conversely every
/// `W ∈ M` has a unit `x' ∈ plane ∩ W⊥`, so `d(V, W) >= |P_V x'| >= sigma_2`.
pub fn distance_to_m(plane: &[Vec<f64>; 2], v: &Subspace) -> (f64, Subspace) {
    let a = v.coords(&plane[0]);
    let b = v.coords(&plane[1]);
    let g = [dot(&a, &a), dot(&a, &b), dot(&a, &b), dot(&b, &b)];
    let (vals, vecs) = linalg::sym_eigen(&g, 2);
    let sigma2 = libm::sqrt(vals[0].max(0.0));
    let mut x = linalg::scale(&plane[0], vecs[0][0]);
    linalg::axpy(&mut x, vecs[0][1], &plane[1]);
    let px = v.project(&x);
    let npx = norm(&px);
    if npx < 1e-15 {
        return (0.0, v.clone());
    }
    let y = linalg::scale(&px, 1.0 / npx);
    let perp = linalg::sub(&x, &px);
    let z = linalg::scale(&perp, 1.0 / norm(&perp).max(1e-300));
    let cphi = libm::sqrt((1.0 - sigma2 * sigma2).max(0.0));
    let mut y_new = linalg::scale(&y, cphi);
    linalg::axpy(&mut y_new, -sigma2, &z);
    // V ∩ y⊥ stays; y is replaced by y_new.
    let cy = v.coords(&y);
    let mut rest: Vec<Vec<f64>> = linalg::complement(&[cy], v.dim())
        .iter()
        .map(|c| v.lift(c))
        .collect();
    rest.insert(0, y_new);
    let w = Subspace::from_spanning(v.ambient(), &rest).unwrap_or_else(|_| v.clone());
    (sigma2, w)
}

/// Outcome of [`tube_projection_neighborhood_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodCheck {
    /// Whether `P_V(plank)` fits in a `delta`-tube.
    pub fits_in_tube: bool,
    /// `dist(V, M)`.
    pub distance: f64,
    /// `dist(V, M) * d / delta`, the constant the inclusion needs.
    pub constant: f64,
}

/// Tests whether the projected plank fits in a `delta`-tube (largest distance
/// of the projected corners from their principal line) and reports the
/// distance of `V` to the pencil set.
pub fn tube_projection_neighborhood_check(
    plank: &Plank2D,
    v: &Subspace,
    delta: f64,
) -> Result<NeighborhoodCheck> {
    let pts: Vec<Vec<f64>> = plank.corners().iter().map(|c| v.coords(c)).collect();
    let k = v.dim();
    let mean: Vec<f64> = (0..k)
        .map(|i| pts.iter().map(|p| p[i]).sum::<f64>() / pts.len() as f64)
        .collect();
    let centred: Vec<Vec<f64>> = pts.iter().map(|p| linalg::sub(p, &mean)).collect();
    let mut cov = vec![0.0; k * k];
    for p in &centred {
        for i in 0..k {
            for j in 0..k {
                cov[i * k + j] += p[i] * p[j];
            }
        }
    }
    let (_, vecs) = linalg::sym_eigen(&cov, k);
    let axis = &vecs[k - 1];
    let spread = centred
        .iter()
        .map(|p| {
            let t = dot(p, axis);
            libm::sqrt((dot(p, p) - t * t).max(0.0))
        })
        .fold(0.0f64, f64::max);
    let (distance, _) = distance_to_m(&plank.plane()?, v);
    Ok(NeighborhoodCheck {
        fits_in_tube: spread <= delta,
        distance,
        constant: distance * plank.d / delta,
    })
}

/// How members of the pencil set are sampled at scale `delta`. `M` itself
/// and its `delta`-neighbourhood have comparable `delta`-covering numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PencilThickening {
    /// `{V : sigma_2 <= delta}` at each scale.
    Matched,
    /// `{V : sigma_2 <= eps}` for a fixed `eps`; `eps = 0` is `M` itself and
    /// `eps >= 1` the whole Grassmannian.
    Fixed(f64),
}

/// Random point of `M`: a unit `x` in the plane and a Haar `k`-plane in `x⊥`.
pub fn sample_pencil_member<R: Rng + ?Sized>(
    plane: &[Vec<f64>; 2],
    n: usize,
    k: usize,
    rng: &mut R,
) -> Subspace {
    let t = rng.random_range(0.0..core::f64::consts::TAU);
    let mut x = linalg::scale(&plane[0], libm::cos(t));
    linalg::axpy(&mut x, libm::sin(t), &plane[1]);
    let xperp = Subspace::from_spanning(n, &[x])
        .expect("unit vector")
        .complement();
    loop {
        let coeffs: Vec<Vec<f64>> = (0..k).map(|_| gaussian_vec(rng, n - 1)).collect();
        let rows: Vec<Vec<f64>> = coeffs.iter().map(|c| xperp.lift(c)).collect();
        if let Ok(v) = Subspace::from_spanning(n, &rows) {
            return v;
        }
    }
}

/// Samples `{V : sigma_2 <= eps}`: a member of `M` moved by a random rotation
/// of size about `eps`, kept if it stays within the thickening.
fn sample_thickened<R: Rng + ?Sized>(
    plane: &[Vec<f64>; 2],
    n: usize,
    k: usize,
    eps: f64,
    rng: &mut R,
) -> Subspace {
    if eps >= 1.0 {
        return sample_grassmannian(n, k, rng).expect("valid k");
    }
    if eps <= 0.0 {
        return sample_pencil_member(plane, n, k, rng);
    }
    loop {
        let v = sample_pencil_member(plane, n, k, rng);
        let g = gaussian_vec(rng, n * n);
        let scale = rng.random::<f64>() * eps / libm::sqrt((n * n) as f64);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 1.0 } else { 0.0 } + scale * g[i * n + j])
                    .collect()
            })
            .collect();
        let q = linalg::orthonormalize(&rows, 1e-12);
        if q.len() != n {
            continue;
        }
        let w = v.transform(&q.concat());
        if pencil_membership(plane, &w, eps) {
            return w;
        }
    }
}

/// How [`estimate_dim_m`] draws its samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PencilSampling {
    pub thickening: PencilThickening,
    pub samples_per_scale: usize,
    pub seed: u64,
}

/// Box-counting estimate of `dim M` by greedy covers of the sampled
/// (thickened) pencil set at each scale.
pub fn estimate_dim_m(
    n: usize,
    k: usize,
    plane: &[Vec<f64>; 2],
    ladder: ScaleLadder,
    sampling: PencilSampling,
) -> Result<DimEstimate> {
    if !(1 <= k && k < n) {
        return Err(invalid("estimate_dim_m needs 1 <= k < n"));
    }
    let space = Space::Grassmannian { k, n };
    let scales = ladder.scales();
    let mut counts = Vec::with_capacity(scales.len());
    for (si, &delta) in scales.iter().enumerate() {
        let eps = match sampling.thickening {
            PencilThickening::Matched => delta,
            PencilThickening::Fixed(e) => e,
        };
        let pts: Vec<Vec<f64>> = par::map_range(sampling.samples_per_scale, |i| {
            let mut rng = stream(sampling.seed, ((si as u64) << 32) | i as u64);
            sample_thickened(plane, n, k, eps, &mut rng).proj().to_vec()
        });
        let count = crate::nets::covering_count(&pts, delta, space);
        counts.push(count);
    }
    let x: Vec<f64> = scales.iter().map(|d| -libm::log2(*d)).collect();
    let y: Vec<f64> = counts
        .iter()
        .map(|&c| libm::log2(c.max(1) as f64))
        .collect();
    let (slope, stderr) = crate::nets::fit_slope(&x, &y)?;
    Ok(DimEstimate {
        method: crate::nets::CountMethod::GreedyCover,
        scales,
        counts,
        slope,
        stderr,
    })
}

/// Line sets used by the incidence and high-low experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LineFamily {
    /// Lines through the origin with a `dim_a`-dimensional direction set.
    Bush { dim_a: f64 },
    /// A `beta`-dimensional base set, each point carrying a full bush.
    Product { beta: f64 },
}

impl LineFamily {
    /// Chart points of the lines, as an `AffineLines` net at `delta`.
    pub fn cloud(&self, n: usize, delta: f64) -> Result<crate::nets::NetCloud> {
        match *self {
            LineFamily::Bush { dim_a } => crate::constructions::gen_direction_bush(n, delta, dim_a),
            LineFamily::Product { beta } => {
                crate::constructions::gen_product_example(n, beta, delta)
            }
        }
    }

    pub fn generate(&self, n: usize, delta: f64) -> Result<Vec<LocalLine>> {
        self.cloud(n, delta)?
            .points()
            .iter()
            .map(|p| LocalLine::from_chart(p))
            .collect()
    }

    /// Nominal dimension `u` of the generated set.
    pub fn dimension(&self, n: usize) -> f64 {
        match *self {
            LineFamily::Bush { dim_a } => dim_a,
            LineFamily::Product { beta } => crate::constructions::product_dimension(n, beta),
        }
    }
}

/// Lines at one scale together with the slab families of a `G_mu` net.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub lines: Vec<PreparedLine>,
    pub families: Vec<TubeFamily>,
}

/// Generates the lines at scale `delta`, a `delta`-net of `G_mu` from
/// `factor * delta^{-k(n-k)}` candidates and the greedy slab family of every net plane.
pub fn build_configuration(
    n: usize,
    k: usize,
    mu: f64,
    family: LineFamily,
    delta: f64,
    factor: f64,
    seed: u64,
) -> Result<Configuration> {
    let lines = prepare_lines(&family.generate(n, delta)?);
    let t = (k * (n - k)) as f64;
    let cand = libm::ceil(factor * libm::pow(delta, -t)) as usize;
    let charts = gmu_net(n, k, delta, &lines, mu, cand, seed)?;
    let families = par::map_indexed(&charts, |_, ch| {
        build_tube_family(ch.clone(), &lines, delta, mu)
    });
    Ok(Configuration { lines, families })
}

/// Parameters of [`kaufman_slope_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaufmanParams {
    pub n: usize,
    pub k: usize,
    pub mu: f64,
    pub lines: LineFamily,
    /// Frostman exponent the slab families are audited against.
    pub s: f64,
    pub scales: ScaleLadder,
    /// `V` candidates per scale are `factor * delta^{-t}`.
    pub v_candidate_factor: f64,
    /// `H'` is `delta * (log2 1/delta)^e`-separated.
    pub hprime_log_exponent: f64,
    pub frostman_samples: usize,
    /// Recount with the brute-force oracle at the coarsest scale.
    pub brute_force_check: bool,
    pub seed: u64,
}

impl KaufmanParams {
    pub fn t(&self) -> f64 {
        (self.k * (self.n - self.k)) as f64
    }
}

/// One scale of [`kaufman_slope_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaufmanRow {
    pub delta: f64,
    pub lines: usize,
    pub planes: usize,
    pub total_pairs: usize,
    pub sum_line_incidences: usize,
    pub per_line_mean: f64,
    /// Smallest `#I_l / #V` over lines.
    pub min_line_coverage: f64,
    pub max_multiplicity: usize,
    pub frostman_max: f64,
    pub hprime_lines: usize,
    /// `sum_{l in H'} #I_l - sum_{l != l1 in H'} #(I_l ∩ I_l1)`.
    pub hprime_excess: i64,
    pub half_dominance: bool,
    /// Brute-force recount agrees exactly, when performed.
    pub brute_force_agrees: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaufmanReport {
    pub rows: Vec<KaufmanRow>,
    pub slope: f64,
    pub stderr: f64,
    /// `t + s`.
    pub upper_exponent: f64,
    /// Slope of `sum_l #I_l`, to compare with `u + t`.
    pub line_sum_slope: f64,
    pub u: f64,
}

/// Incidences restricted to a subset of the lines.
fn restricted_overlap(families: &[TubeFamily], lines: &[PreparedLine]) -> (usize, u64) {
    let inc = count_incidences(families, lines, CountMode::Accelerated);
    (inc.sum_line_incidences(), inc.pair_overlap())
}

/// Builds `V`, the slab families and the incidences at every scale, then
/// regresses `log2 #I` against `log2 1/delta`.
pub fn kaufman_slope_experiment(p: &KaufmanParams) -> Result<KaufmanReport> {
    if !(3..=4).contains(&p.n) || !(1 <= p.k && p.k < p.n) {
        return Err(invalid(
            "kaufman experiment needs n in 3..=4 and 1 <= k < n",
        ));
    }
    let t = p.t();
    let scales = p.scales.scales();
    let mut rows = Vec::with_capacity(scales.len());
    for (si, &delta) in scales.iter().enumerate() {
        let Configuration { lines, families } = build_configuration(
            p.n,
            p.k,
            p.mu,
            p.lines,
            delta,
            p.v_candidate_factor,
            p.seed ^ ((si as u64 + 1) << 40),
        )?;
        let inc = count_incidences(&families, &lines, CountMode::Accelerated);
        let brute_force_agrees = (p.brute_force_check && si == 0)
            .then(|| count_incidences(&families, &lines, CountMode::BruteForce) == inc);
        let mut rng = stream(p.seed, 0xF0_0000 + si as u64);
        let frostman_max = families
            .iter()
            .map(|f| frostman_audit(f, &lines, p.s, p.frostman_samples, &mut rng))
            .fold(0.0, f64::max);
        let sep = delta * libm::pow(libm::log2(1.0 / delta), p.hprime_log_exponent);
        let charts_h: Vec<Vec<f64>> = lines.iter().map(|l| l.line.chart()).collect();
        let hnet = greedy_net(&charts_h, sep, Space::AffineLines { n: p.n })?;
        let hprime: Vec<PreparedLine> = prepare_lines(
            &hnet
                .points()
                .iter()
                .map(|c| LocalLine::from_chart(c))
                .collect::<Result<Vec<_>>>()?,
        );
        let (hsum, hover) = restricted_overlap(&families, &hprime);
        let excess = hsum as i64 - hover as i64;
        let nv = families.len().max(1) as f64;
        rows.push(KaufmanRow {
            delta,
            lines: lines.len(),
            planes: families.len(),
            total_pairs: inc.total(),
            sum_line_incidences: inc.sum_line_incidences(),
            per_line_mean: inc.sum_line_incidences() as f64 / lines.len().max(1) as f64,
            min_line_coverage: inc
                .per_line_counts
                .iter()
                .map(|&c| c as f64 / nv)
                .fold(f64::INFINITY, f64::min),
            max_multiplicity: inc.max_multiplicity,
            frostman_max,
            hprime_lines: hprime.len(),
            hprime_excess: excess,
            half_dominance: 2 * excess >= hsum as i64,
            brute_force_agrees,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| -libm::log2(r.delta)).collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| libm::log2(r.total_pairs.max(1) as f64))
        .collect();
    let (slope, stderr) = crate::nets::fit_slope(&x, &y)?;
    let ys: Vec<f64> = rows
        .iter()
        .map(|r| libm::log2(r.sum_line_incidences.max(1) as f64))
        .collect();
    let (line_sum_slope, _) = crate::nets::fit_slope(&x, &ys)?;
    Ok(KaufmanReport {
        rows,
        slope,
        stderr,
        upper_exponent: t + p.s,
        line_sum_slope,
        u: p.lines.dimension(p.n),
    })
}
