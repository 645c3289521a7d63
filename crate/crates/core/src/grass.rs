//! Subspaces, affine planes and local lines, with their metrics and projections.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::consts::{CHART_TOL, FRAME_TOL, HAUSDORFF_SAMPLES_PER_DIM, PROJ_TOL};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, dot, norm};
use crate::rng::{gaussian_vec, halton};

/// A linear subspace `V` in `G(k, n)`. The projection matrix is the canonical
/// representative; the frame is an arbitrary orthonormal basis of `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    n: usize,
    frame: Vec<Vec<f64>>,
    proj: Vec<f64>,
}

impl Subspace {
    /// Orthonormalises `vectors` (modified Gram-Schmidt). Fails if they are
    /// linearly dependent or have the wrong length.
    pub fn from_spanning(n: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        if vectors.len() > n {
            return Err(Error::RankDeficient);
        }
        for v in vectors {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        let frame = linalg::orthonormalize(vectors, 1e-10);
        if frame.len() != vectors.len() {
            return Err(Error::RankDeficient);
        }
        Ok(Self::from_frame(n, frame))
    }

    /// Builds from rows that are already orthonormal to within `FRAME_TOL`.
    pub fn from_orthonormal(n: usize, frame: Vec<Vec<f64>>) -> Result<Self> {
        for (i, a) in frame.iter().enumerate() {
            if a.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: a.len(),
                });
            }
            for (j, b) in frame.iter().enumerate().skip(i) {
                let want = if i == j { 1.0 } else { 0.0 };
                if libm::fabs(dot(a, b) - want) > FRAME_TOL {
                    return Err(invalid("frame is not orthonormal"));
                }
            }
        }
        Ok(Self::from_frame(n, frame))
    }

    /// Recovers a subspace from a projection matrix (row-major `n x n`),
    /// validating symmetry and idempotence.
    pub fn from_projection(n: usize, proj: &[f64]) -> Result<Self> {
        if proj.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: proj.len(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                if libm::fabs(proj[i * n + j] - proj[j * n + i]) > PROJ_TOL {
                    return Err(invalid("projection matrix is not symmetric"));
                }
                let sq: f64 = (0..n).map(|l| proj[i * n + l] * proj[l * n + j]).sum();
                if libm::fabs(sq - proj[i * n + j]) > PROJ_TOL {
                    return Err(invalid("projection matrix is not idempotent"));
                }
            }
        }
        let (vals, vecs) = linalg::sym_eigen(proj, n);
        let frame: Vec<Vec<f64>> = vals
            .iter()
            .zip(vecs)
            .filter(|(l, _)| **l > 0.5)
            .map(|(_, v)| v)
            .collect();
        let frame = linalg::orthonormalize(&frame, 1e-10);
        Ok(Self::from_frame(n, frame))
    }

    fn from_frame(n: usize, frame: Vec<Vec<f64>>) -> Self {
        let mut proj = vec![0.0; n * n];
        for f in &frame {
            for i in 0..n {
                for j in 0..n {
                    proj[i * n + j] += f[i] * f[j];
                }
            }
        }
        Self { n, frame, proj }
    }

    /// `span(e_i : i in idx)`.
    pub fn coordinate(n: usize, idx: &[usize]) -> Self {
        Self::from_frame(n, idx.iter().map(|&i| linalg::unit(n, i)).collect())
    }

    pub fn zero(n: usize) -> Self {
        Self::from_frame(n, Vec::new())
    }

    /// Haar-distributed draw from `G(k, n)`: Gaussian rows, orthonormalised.
    pub fn random<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Self {
        loop {
            let rows: Vec<Vec<f64>> = (0..k).map(|_| gaussian_vec(rng, n)).collect();
            if let Ok(v) = Self::from_spanning(n, &rows) {
                return v;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    pub fn ambient(&self) -> usize {
        self.n
    }

    pub fn frame(&self) -> &[Vec<f64>] {
        &self.frame
    }

    /// Row-major `n x n` projection matrix.
    pub fn proj(&self) -> &[f64] {
        &self.proj
    }

    /// Orthogonal projection onto `V`, in ambient coordinates.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for f in &self.frame {
            linalg::axpy(&mut out, dot(f, x), f);
        }
        out
    }

    /// Coordinates of the projection of `x` in the frame of `V`.
    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        self.frame.iter().map(|f| dot(f, x)).collect()
    }

    /// Ambient point with the given frame coordinates.
    pub fn lift(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (f, &ci) in self.frame.iter().zip(c) {
            linalg::axpy(&mut out, ci, f);
        }
        out
    }

    /// Norm of the projection of `x` onto `V`.
    pub fn proj_norm(&self, x: &[f64]) -> f64 {
        libm::sqrt(
            self.frame
                .iter()
                .map(|f| {
                    let d = dot(f, x);
                    d * d
                })
                .sum(),
        )
    }

    /// Distance from `x` to `V`.
    pub fn dist_to(&self, x: &[f64]) -> f64 {
        norm(&linalg::sub(x, &self.project(x)))
    }

    pub fn complement(&self) -> Subspace {
        Self::from_frame(self.n, linalg::complement(&self.frame, self.n))
    }

    /// Image under the orthogonal map `q` (row-major `n x n`).
    pub fn transform(&self, q: &[f64]) -> Subspace {
        let frame = self
            .frame
            .iter()
            .map(|f| linalg::matvec(q, self.n, self.n, f))
            .collect();
        Self::from_frame(self.n, frame)
    }
}

/// `d(V1, V2) = ||P_1 - P_2||_op`.
pub fn grassmann_distance(a: &Subspace, b: &Subspace) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            found: b.n,
        });
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(proj_distance(&a.proj, &b.proj, a.n))
}

/// Operator norm of the difference of two row-major projection matrices.
pub fn proj_distance(p: &[f64], q: &[f64], n: usize) -> f64 {
    let diff: Vec<f64> = p.iter().zip(q).map(|(x, y)| x - y).collect();
    linalg::sym_spectral_norm(&diff, n)
}

/// A `k`-dimensional affine plane `dir + offset` with `offset` orthogonal to `dir`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePlane {
    dir: Subspace,
    offset: Vec<f64>,
}

impl AffinePlane {
    pub fn new(dir: Subspace, offset: Vec<f64>) -> Result<Self> {
        if offset.len() != dir.n {
            return Err(Error::DimensionMismatch {
                expected: dir.n,
                found: offset.len(),
            });
        }
        let scale = norm(&offset).max(1.0);
        for f in dir.frame() {
            if libm::fabs(dot(f, &offset)) > CHART_TOL * scale {
                return Err(invalid("offset is not orthogonal to the direction"));
            }
        }
        Ok(Self { dir, offset })
    }

    /// The plane `dir + point`.
    pub fn through(dir: Subspace, point: &[f64]) -> Self {
        let offset = linalg::sub(point, &dir.project(point));
        Self { dir, offset }
    }

    pub fn dim(&self) -> usize {
        self.dir.dim()
    }

    pub fn ambient(&self) -> usize {
        self.dir.n
    }

    pub fn dir(&self) -> &Subspace {
        &self.dir
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// Whether the plane lies in `A_loc`, i.e. `|x_V| < 1/2`.
    pub fn is_local(&self) -> bool {
        norm(&self.offset) < 0.5
    }

    pub fn dist_to(&self, x: &[f64]) -> f64 {
        let y = linalg::sub(x, &self.offset);
        self.dir.dist_to(&y)
    }
}

/// `d(dir V, dir V') + |x_V - x_V'|`.
pub fn affine_distance(a: &AffinePlane, b: &AffinePlane) -> Result<f64> {
    Ok(grassmann_distance(&a.dir, &b.dir)? + linalg::dist(&a.offset, &b.offset))
}

/// A non-horizontal line in `R^n` in the two-slice chart: it meets `{x_n = 0}`
/// at `(X, 0)` and `{x_n = 1}` at `(Y, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalLine {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl LocalLine {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        if x.is_empty() {
            return Err(invalid("lines need ambient dimension at least 2"));
        }
        Ok(Self { x, y })
    }

    /// Inverse of [`LocalLine::chart`].
    pub fn from_chart(c: &[f64]) -> Result<Self> {
        if !c.len().is_multiple_of(2) || c.is_empty() {
            return Err(invalid("chart coordinates must have even, positive length"));
        }
        let m = c.len() / 2;
        Self::new(c[..m].to_vec(), c[m..].to_vec())
    }

    pub fn ambient(&self) -> usize {
        self.x.len() + 1
    }

    /// `(X, Y)` concatenated.
    pub fn chart(&self) -> Vec<f64> {
        let mut c = self.x.clone();
        c.extend_from_slice(&self.y);
        c
    }

    /// Ambient point at height `t`, i.e. `(X + t (Y - X), t)`.
    pub fn point_at(&self, t: f64) -> Vec<f64> {
        let mut p: Vec<f64> = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(a, b)| a + t * (b - a))
            .collect();
        p.push(t);
        p
    }

    pub fn p0(&self) -> Vec<f64> {
        self.point_at(0.0)
    }

    pub fn p1(&self) -> Vec<f64> {
        self.point_at(1.0)
    }

    /// Unit direction `(Y - X, 1) / |(Y - X, 1)|`.
    pub fn direction(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.y.iter().zip(&self.x).map(|(a, b)| a - b).collect();
        d.push(1.0);
        let s = 1.0 / norm(&d);
        linalg::scale(&d, s)
    }

    /// `|Y - X|`, the horizontal slope.
    pub fn slope(&self) -> f64 {
        linalg::dist(&self.y, &self.x)
    }

    /// Angle between the line and the last coordinate axis.
    pub fn axis_angle(&self) -> f64 {
        libm::atan(self.slope())
    }

    pub fn to_affine(&self) -> AffinePlane {
        let n = self.ambient();
        let dir = Subspace::from_frame(n, vec![self.direction()]);
        AffinePlane::through(dir, &self.p0())
    }

    pub fn from_affine(p: &AffinePlane) -> Result<Self> {
        if p.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: p.dim(),
            });
        }
        let n = p.ambient();
        let u = &p.dir.frame[0];
        if libm::fabs(u[n - 1]) < 1e-12 {
            return Err(Error::HorizontalLine);
        }
        let at = |t: f64| -> Vec<f64> {
            let s = (t - p.offset[n - 1]) / u[n - 1];
            (0..n - 1).map(|i| p.offset[i] + s * u[i]).collect()
        };
        Self::new(at(0.0), at(1.0))
    }

    /// Endpoints of `line ∩ B(0,1)`, or `None` if the line misses the open ball.
    pub fn unit_ball_segment(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let p = self.p0();
        let u = self.direction();
        let b = dot(&p, &u);
        let c = dot(&p, &p) - 1.0;
        let disc = b * b - c;
        if disc <= 0.0 {
            return None;
        }
        let r = libm::sqrt(disc);
        let (t0, t1) = (-b - r, -b + r);
        let mut a = p.clone();
        linalg::axpy(&mut a, t0, &u);
        let mut e = p;
        linalg::axpy(&mut e, t1, &u);
        Some((a, e))
    }
}

/// `|X1 - X2| + |Y1 - Y2|`.
pub fn line_distance_chart(a: &LocalLine, b: &LocalLine) -> f64 {
    linalg::dist(&a.x, &b.x) + linalg::dist(&a.y, &b.y)
}

/// Deterministic quasi-uniform sample of the closed unit ball of `R^k`:
/// half of the points on the boundary sphere, half in the interior.
pub fn ball_samples(k: usize, count: usize) -> Vec<Vec<f64>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let half = (count / 2).max(2);
    let mut out = Vec::with_capacity(2 * half);
    match k {
        1 => {
            out.push(vec![1.0]);
            out.push(vec![-1.0]);
            for i in 0..half {
                out.push(vec![-1.0 + 2.0 * (i as f64 + 0.5) / half as f64]);
            }
            return out;
        }
        2 => {
            for i in 0..half {
                let t = 2.0 * core::f64::consts::PI * i as f64 / half as f64;
                out.push(vec![libm::cos(t), libm::sin(t)]);
            }
        }
        _ => {
            let mut i = 1u64;
            while out.len() < half {
                let h = halton(i, k);
                i += 1;
                let v: Vec<f64> = h.iter().map(|x| 2.0 * x - 1.0).collect();
                let r = norm(&v);
                if r > 0.05 && r <= 1.0 {
                    out.push(linalg::scale(&v, 1.0 / r));
                }
            }
        }
    }
    // Interior points at radius u^{1/k} along the boundary directions, with u
    // running through a van der Corput sequence.
    for i in 0..half {
        let u = halton(i as u64 + 1, 1)[0];
        let r = libm::pow(u, 1.0 / k as f64);
        let d = &out[(i * 7919) % half];
        out.push(linalg::scale(d, r));
    }
    out
}

/// Sampled `sup_{x in V1 ∩ B(0,1)} dist(x, V2)`, using
/// `HAUSDORFF_SAMPLES_PER_DIM * k` points.
fn one_sided_rho(a: &AffinePlane, b: &AffinePlane) -> Result<f64> {
    let c2 = dot(&a.offset, &a.offset);
    if c2 >= 1.0 {
        return Err(invalid("plane does not meet the unit ball"));
    }
    let radius = libm::sqrt(1.0 - c2);
    let k = a.dim();
    let mut best = 0.0f64;
    for z in ball_samples(k, HAUSDORFF_SAMPLES_PER_DIM * k.max(1)) {
        let mut x = a.offset.clone();
        for (f, zi) in a.dir.frame.iter().zip(&z) {
            linalg::axpy(&mut x, radius * zi, f);
        }
        best = best.max(b.dist_to(&x));
    }
    Ok(best)
}

/// Symmetrised sampled Hausdorff-type distance between two affine planes
/// restricted to the unit ball. Underestimates the supremum; for `k = 1` the
/// extremal points are sampled exactly, for `k = 2` the relative error is
/// below `1 - cos(pi / 1000) < 5e-6`.
pub fn hausdorff_rho(a: &AffinePlane, b: &AffinePlane) -> Result<f64> {
    if a.dim() != b.dim() || a.ambient() != b.ambient() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(one_sided_rho(a, b)?.max(one_sided_rho(b, a)?))
}

/// [`hausdorff_rho`] for linear subspaces.
pub fn hausdorff_rho_linear(a: &Subspace, b: &Subspace) -> Result<f64> {
    let z = vec![0.0; a.n];
    hausdorff_rho(
        &AffinePlane::through(a.clone(), &z),
        &AffinePlane::through(b.clone(), &z),
    )
}

pub fn project_point(v: &Subspace, x: &[f64]) -> Vec<f64> {
    v.project(x)
}

/// Angle between a unit direction `u` and `V⊥`, computed as `asin |P_V u|`.
pub fn angle_to_complement(v: &Subspace, u: &[f64]) -> f64 {
    libm::asin(v.proj_norm(u).min(1.0))
}

/// Image of a line under the projection onto `V`.
#[derive(Debug, Clone, PartialEq)]
pub enum LineImage {
    /// Two distinct points of the projected line, in frame coordinates of `V`:
    /// the images of `P_0(L)` and `P_1(L)`.
    Line { p0: Vec<f64>, p1: Vec<f64> },
    /// The line is parallel to `V⊥`.
    Point(Vec<f64>),
    /// Transversality angle in `(0, mu]`.
    Degenerate { angle: f64 },
}

/// Threshold below which a direction is treated as lying in `V⊥`.
pub const PARALLEL_TOL: f64 = 1e-12;

pub fn project_line(v: &Subspace, l: &LocalLine, mu: f64) -> LineImage {
    let angle = angle_to_complement(v, &l.direction());
    let p0 = v.coords(&l.p0());
    if angle <= PARALLEL_TOL {
        LineImage::Point(p0)
    } else if angle <= mu {
        LineImage::Degenerate { angle }
    } else {
        LineImage::Line {
            p0,
            p1: v.coords(&l.p1()),
        }
    }
}

pub fn sample_grassmannian<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Subspace> {
    if k == 0 || k >= n {
        return Err(invalid("sample_grassmannian needs 1 <= k < n"));
    }
    Ok(Subspace::random(n, k, rng))
}

/// Haar-random orthogonal matrix, row-major.
pub fn random_rotation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let v = Subspace::random(n, n, rng);
    v.frame.concat()
}

/// The `A(1, V)` chart of a `k`-plane `V` that is not orthogonal to `e_n`:
/// `f_k = P_V e_n / |P_V e_n|` plays the role of the vertical axis and
/// `f_1, ..., f_{k-1}` complete it to an orthonormal basis of `V`. A line in
/// `V` that is not horizontal for `f_k` has chart `(X', Y')`, its horizontal
/// coordinates at `f_k`-heights 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct VChart {
    v: Subspace,
    basis: Vec<Vec<f64>>,
}

impl VChart {
    pub fn new(v: Subspace) -> Result<Self> {
        let n = v.n;
        let k = v.dim();
        if k < 2 {
            return Err(invalid("A(1, V) charts need dim V >= 2"));
        }
        let up = v.project(&linalg::unit(n, n - 1));
        let h = norm(&up);
        if h < 1e-9 {
            return Err(invalid("V is orthogonal to the last axis"));
        }
        let up = linalg::scale(&up, 1.0 / h);
        let mut span = vec![up.clone()];
        span.extend(v.frame.iter().cloned());
        let mut ortho = linalg::orthonormalize(&span, 1e-10);
        ortho.remove(0);
        ortho.truncate(k - 1);
        ortho.push(up);
        Ok(Self { v, basis: ortho })
    }

    pub fn subspace(&self) -> &Subspace {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Chart basis `f_1, ..., f_k` (ambient coordinates).
    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Coordinates of `P_V x` in the chart basis; the last one is the height.
    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|f| dot(f, x)).collect()
    }

    /// Ambient point with the given chart coordinates.
    pub fn lift(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.v.n];
        for (f, &ci) in self.basis.iter().zip(c) {
            linalg::axpy(&mut out, ci, f);
        }
        out
    }

    /// Chart of the line through the chart points `c0 != c1`, or `None` when
    /// its tilt from `f_k` exceeds `max_tilt`.
    pub fn chart_of_segment(&self, c0: &[f64], c1: &[f64], max_tilt: f64) -> Option<Vec<f64>> {
        let k = self.dim();
        let dh = c1[k - 1] - c0[k - 1];
        let horiz: f64 = libm::sqrt((0..k - 1).map(|i| (c1[i] - c0[i]) * (c1[i] - c0[i])).sum());
        if dh == 0.0 || horiz > libm::tan(max_tilt) * libm::fabs(dh) {
            return None;
        }
        let at = |height: f64| -> Vec<f64> {
            let t = (height - c0[k - 1]) / dh;
            (0..k - 1)
                .map(|i| c0[i] + t * (c1[i] - c0[i]))
                .collect::<Vec<f64>>()
        };
        let mut out = at(0.0);
        out.extend(at(1.0));
        Some(out)
    }

    /// Chart of `P_V(L)` when `L` is transversal to `V⊥` beyond `mu` and the
    /// image tilt is below `max_tilt`.
    pub fn project_line(&self, l: &LocalLine, mu: f64, max_tilt: f64) -> Option<Vec<f64>> {
        if angle_to_complement(&self.v, &l.direction()) <= mu {
            return None;
        }
        self.chart_of_segment(&self.coords(&l.p0()), &self.coords(&l.p1()), max_tilt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;

    fn line_span(n: usize, v: &[f64]) -> Subspace {
        Subspace::from_spanning(n, &[v.to_vec()]).unwrap()
    }

    // Closed form for two lines in the plane at angle t: P1 - P2 has eigenvalues
    // +-sin t.
    fn two_line_oracle(t: f64) -> f64 {
        libm::fabs(libm::sin(t))
    }

    #[test]
    fn distance_examples() {
        let e1 = Subspace::coordinate(2, &[0]);
        let e2 = Subspace::coordinate(2, &[1]);
        assert_abs_diff_eq!(grassmann_distance(&e1, &e1).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(grassmann_distance(&e1, &e2).unwrap(), 1.0, epsilon = 1e-14);
        let t = core::f64::consts::PI / 6.0;
        let v = line_span(2, &[libm::cos(t), libm::sin(t)]);
        assert_abs_diff_eq!(
            grassmann_distance(&e1, &v).unwrap(),
            two_line_oracle(t),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(grassmann_distance(&e1, &v).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn distance_rejects_mismatch() {
        let a = Subspace::coordinate(3, &[0]);
        let b = Subspace::coordinate(3, &[0, 1]);
        assert!(grassmann_distance(&a, &b).is_err());
        let c = Subspace::coordinate(4, &[0]);
        assert!(grassmann_distance(&a, &c).is_err());
    }

    #[test]
    fn affine_examples() {
        let z = vec![0.0; 3];
        let a = AffinePlane::through(Subspace::coordinate(3, &[2]), &z);
        assert_eq!(affine_distance(&a, &a).unwrap(), 0.0);
        let b = AffinePlane::new(Subspace::coordinate(3, &[2]), vec![0.1, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(affine_distance(&a, &b).unwrap(), 0.1, epsilon = 1e-15);
        let c = AffinePlane::through(line_span(3, &[libm::sin(0.2), 0.0, libm::cos(0.2)]), &z);
        assert_abs_diff_eq!(
            affine_distance(&a, &c).unwrap(),
            two_line_oracle(0.2),
            epsilon = 1e-12
        );
        assert!(AffinePlane::new(Subspace::coordinate(3, &[2]), vec![0.0, 0.0, 0.1]).is_err());
    }

    #[test]
    fn chart_distance_examples() {
        let a = LocalLine::new(vec![0.0, 0.0], vec![0.1, 0.2]).unwrap();
        assert_eq!(line_distance_chart(&a, &a), 0.0);
        let b = LocalLine::new(vec![0.3, 0.0], vec![0.1, 0.2]).unwrap();
        assert_abs_diff_eq!(line_distance_chart(&a, &b), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn chart_and_affine_metrics_are_comparable() {
        let mut rng = stream(11, 0);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        let draw = |rng: &mut crate::rng::TaskRng| loop {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-0.3..0.3)).collect();
            let w: Vec<f64> = (0..2).map(|_| rng.random_range(-0.1..0.1)).collect();
            if norm(&w) > 0.1 {
                continue;
            }
            let l = LocalLine::new(x.clone(), linalg::add(&x, &w)).unwrap();
            if l.to_affine().is_local() {
                return l;
            }
        };
        for _ in 0..10_000 {
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            let r = line_distance_chart(&a, &b)
                / affine_distance(&a.to_affine(), &b.to_affine()).unwrap();
            lo = lo.min(r);
            hi = hi.max(r);
        }
        assert!(lo > 0.5 && hi < 4.0, "ratio range [{lo}, {hi}]");
    }

    #[test]
    fn rho_examples() {
        let e1 = Subspace::coordinate(2, &[0]);
        assert_eq!(hausdorff_rho_linear(&e1, &e1).unwrap(), 0.0);
        let v = line_span(2, &[libm::cos(0.3), libm::sin(0.3)]);
        let r = hausdorff_rho_linear(&e1, &v).unwrap();
        assert!((r - libm::sin(0.3)).abs() <= 0.02 * libm::sin(0.3));
    }

    #[test]
    fn rho_of_planes_in_r3_matches_sine() {
        // Two planes whose normals differ by angle t: rho = sin t.
        let t = 0.4;
        let a = Subspace::coordinate(3, &[0, 1]);
        let b = Subspace::from_spanning(
            3,
            &[vec![1.0, 0.0, 0.0], vec![0.0, libm::cos(t), libm::sin(t)]],
        )
        .unwrap();
        let r = hausdorff_rho_linear(&a, &b).unwrap();
        assert!((r - libm::sin(t)).abs() < 1e-5);
    }

    #[test]
    fn projection_examples() {
        let v = Subspace::coordinate(3, &[0, 1]);
        assert_eq!(project_point(&v, &[1.0, 2.0, 3.0]), vec![1.0, 2.0, 0.0]);
        assert_eq!(project_point(&v, &[1.0, 2.0, 0.0]), vec![1.0, 2.0, 0.0]);
    }

    #[test]
    fn project_line_branches() {
        let v = Subspace::coordinate(3, &[0, 1]);
        let l = LocalLine::new(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        match project_line(&v, &l, 0.1) {
            LineImage::Line { p0, p1 } => {
                assert_abs_diff_eq!(p0[0], 0.0);
                assert_abs_diff_eq!(p1[0], 1.0, epsilon = 1e-15);
                assert_abs_diff_eq!(p1[1], 0.0);
            }
            other => panic!("{other:?}"),
        }
        let z = LocalLine::new(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(project_line(&v, &z, 0.1), LineImage::Point(vec![0.0, 0.0]));
        let tilted = LocalLine::new(vec![0.0, 0.0], vec![0.05, 0.0]).unwrap();
        assert!(matches!(
            project_line(&v, &tilted, 0.1),
            LineImage::Degenerate { .. }
        ));
    }

    #[test]
    fn haar_mean_projection() {
        // E[P_V] = (k/n) I for the invariant measure; entries have variance
        // bounded by 1/4, so 3 sigma over N samples is 1.5/sqrt(N).
        let (n, k, samples) = (3, 2, 100_000);
        let mut rng = stream(3, 0);
        let mut mean = vec![0.0; n * n];
        for _ in 0..samples {
            let v = sample_grassmannian(n, k, &mut rng).unwrap();
            for (m, p) in mean.iter_mut().zip(v.proj()) {
                *m += p / samples as f64;
            }
        }
        let bound = 1.5 / libm::sqrt(samples as f64);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { k as f64 / n as f64 } else { 0.0 };
                assert!((mean[i * n + j] - want).abs() < bound);
            }
        }
    }

    #[test]
    fn sampled_lines_reach_distance_one() {
        let mut rng = stream(5, 0);
        let vs: Vec<Subspace> = (0..200)
            .map(|_| sample_grassmannian(3, 1, &mut rng).unwrap())
            .collect();
        let mut best = 0.0f64;
        for a in &vs {
            for b in &vs {
                best = best.max(grassmann_distance(a, b).unwrap());
            }
        }
        assert!(best > 0.99);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_grassmannian(4, 2, &mut stream(9, 2)).unwrap();
        let b = sample_grassmannian(4, 2, &mut stream(9, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn projection_matrix_round_trip() {
        let v = sample_grassmannian(4, 2, &mut stream(1, 1)).unwrap();
        let w = Subspace::from_projection(4, v.proj()).unwrap();
        assert!(grassmann_distance(&v, &w).unwrap() < 1e-12);
        let mut bad = v.proj().to_vec();
        bad[0] += 0.1;
        assert!(Subspace::from_projection(4, &bad).is_err());
    }

    #[test]
    fn vchart_basis_is_orthonormal_and_spans_v() {
        let v = sample_grassmannian(4, 3, &mut stream(21, 0)).unwrap();
        let c = VChart::new(v.clone()).unwrap();
        for (i, a) in c.basis().iter().enumerate() {
            assert!(v.dist_to(a) < 1e-12);
            for (j, b) in c.basis().iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(a, b) - want).abs() < 1e-12);
            }
        }
        // e_n projects into span(f_k) only.
        let en = linalg::unit(4, 3);
        let ce = c.coords(&en);
        assert!(ce[0].abs() < 1e-12 && ce[1].abs() < 1e-12 && ce[2] > 0.0);
    }

    #[test]
    fn vchart_of_vertical_plane_is_identity_chart() {
        let v = Subspace::coordinate(3, &[0, 2]);
        let c = VChart::new(v).unwrap();
        let l = LocalLine::new(vec![0.1, 0.3], vec![0.2, -0.4]).unwrap();
        let ch = c.project_line(&l, 0.0, 1.0).unwrap();
        assert!((ch[0].abs() - 0.1).abs() < 1e-12 && (ch[1].abs() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn unit_ball_segment_of_vertical_line() {
        let l = LocalLine::new(vec![0.6, 0.0], vec![0.6, 0.0]).unwrap();
        let (a, b) = l.unit_ball_segment().unwrap();
        assert_abs_diff_eq!(a[2], -0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(b[2], 0.8, epsilon = 1e-12);
        let far = LocalLine::new(vec![1.5, 0.0], vec![1.5, 0.0]).unwrap();
        assert!(far.unit_ball_segment().is_none());
    }
}
