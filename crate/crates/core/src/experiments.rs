//! End-to-end projection experiments: projected dimensions of a line family
//! over sampled planes, exceptional sets, and the exceptional-set bounds.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::constructions::eval_s;
use crate::consts::{
    ESTIMATOR_SLACK, EXCEPTIONAL_GUARD, MARSTRAND_MEDIAN_TOL, SEPARATION_GAP, SOURCE_DIM_TOL,
    V_CHART_MAX_TILT,
};
use crate::error::{invalid, Error, Result};
use crate::grass::{sample_grassmannian, LocalLine, VChart};
use crate::incidence::LineFamily;
use crate::nets::{box_dimension, DimEstimate, ScaleLadder, Space};
use crate::par;
use crate::rng::stream;

/// Candidate planes drawn per accepted plane before giving up.
const MAX_ATTEMPTS_PER_V: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentKind {
    Marstrand,
    Exceptional { s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub n: usize,
    pub k: usize,
    /// Projected lines must make an angle above `mu` with `V⊥`.
    #[serde(default = "default_mu")]
    pub mu: f64,
    pub construction: LineFamily,
    pub num_v: usize,
    /// The line net is built at `delta = 2^-delta_exponent`.
    pub delta_exponent: u32,
    /// Defaults to `2^-1 .. 2^-(delta_exponent - 1)`.
    #[serde(default)]
    pub source_scales: Option<ScaleLadder>,
    /// Defaults to `2^-2 .. 2^-(delta_exponent - 1)`.
    #[serde(default)]
    pub projected_scales: Option<ScaleLadder>,
    /// Ladder for the box dimension of the exceptional planes.
    #[serde(default)]
    pub exceptional_scales: Option<ScaleLadder>,
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default)]
    pub output_path: Option<String>,
}

fn default_mu() -> f64 {
    0.05
}

fn check_ladder(l: &ScaleLadder, what: &str) -> Result<()> {
    if !(l.base > 1.0) || l.len() < 3 || l.is_empty() {
        return Err(invalid(format!(
            "{what}: need base > 1 and at least 3 strictly decreasing scales"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn delta(&self) -> f64 {
        libm::pow(2.0, -(self.delta_exponent as f64))
    }

    pub fn source_ladder(&self) -> ScaleLadder {
        self.source_scales.unwrap_or(ScaleLadder::dyadic(
            1,
            self.delta_exponent.saturating_sub(1),
        ))
    }

    pub fn projected_ladder(&self) -> ScaleLadder {
        self.projected_scales.unwrap_or(ScaleLadder::dyadic(
            2,
            self.delta_exponent.saturating_sub(1),
        ))
    }

    pub fn exceptional_ladder(&self) -> ScaleLadder {
        self.exceptional_scales.unwrap_or(ScaleLadder::dyadic(1, 3))
    }

    pub fn validate(&self) -> Result<()> {
        if !(2 <= self.k && self.k < self.n) {
            return Err(invalid("need 2 <= k < n"));
        }
        if self.num_v == 0 {
            return Err(invalid("num_v must be at least 1"));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(invalid("mu must lie in (0, 1)"));
        }
        if self.delta_exponent < 4 {
            return Err(invalid("delta_exponent must be at least 4"));
        }
        check_ladder(&self.source_ladder(), "source_scales")?;
        check_ladder(&self.projected_ladder(), "projected_scales")?;
        check_ladder(&self.exceptional_ladder(), "exceptional_scales")?;
        if let ExperimentKind::Exceptional { s } = self.experiment {
            let a = self.construction.dimension(self.n);
            check_s(s, Some(a), self.k)?;
        }
        Ok(())
    }
}

/// `0 < s < min(a, 2(k-1))`.
fn check_s(s: f64, a: Option<f64>, k: usize) -> Result<()> {
    let cap = 2.0 * (k as f64 - 1.0);
    let cap = a.map_or(cap, |a| cap.min(a));
    if !(s > 0.0 && s < cap) {
        return Err(invalid(format!("s = {s} must satisfy 0 < s < {cap}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Kaufman,
    Falconer,
}

/// Upper bounds for the dimension of the exceptional set `E_s`:
/// Kaufman `k(n-k) + s - (k-1)`, Falconer `max(0, k(n-k) + s - a + (n-k))`.
/// `a` is required for the Falconer bound.
pub fn bound_formula(kind: BoundKind, n: usize, k: usize, s: f64, a: Option<f64>) -> Result<f64> {
    if !(2 <= k && k < n) {
        return Err(invalid("need 2 <= k < n"));
    }
    if a.is_some_and(|a| !(a >= 0.0)) {
        return Err(invalid("a must be nonnegative"));
    }
    check_s(s, a, k)?;
    let (kf, nf) = (k as f64, n as f64);
    let t = kf * (nf - kf);
    Ok(match kind {
        BoundKind::Kaufman => t + s - (kf - 1.0),
        BoundKind::Falconer => {
            let a = a.ok_or_else(|| invalid("the Falconer bound needs a"))?;
            (t + s - a + (nf - kf)).max(0.0)
        }
    })
}

/// A pass/fail judgement against a named tolerance from [`crate::consts`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub name: String,
    pub tolerance: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Flag {
    fn at_most(name: &str, tolerance: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.to_string(),
            tolerance: tolerance.to_string(),
            value,
            limit,
            pass: value <= limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

/// Linearly interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            min: v[0],
            q05: quantile(&v, 0.05),
            q25: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q75: quantile(&v, 0.75),
            q95: quantile(&v, 0.95),
            max: v[v.len() - 1],
        })
    }
}

/// One sampled plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneEstimate {
    /// RNG task index the plane was drawn with.
    pub task: u64,
    /// Row-major projection matrix.
    pub proj: Vec<f64>,
    pub estimate: DimEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalSummary {
    pub s: f64,
    pub threshold: f64,
    pub count: usize,
    pub fraction: f64,
    /// Box dimension of the exceptional planes in `G(k, n)`; 0 when empty.
    pub dimension: f64,
    pub kaufman_bound: f64,
    pub falconer_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub name: String,
    pub experiment: ExperimentKind,
    pub n: usize,
    pub k: usize,
    pub mu: f64,
    pub seed: u64,
    pub construction: LineFamily,
    pub delta: f64,
    pub lines: usize,
    pub nominal_dimension: f64,
    pub source: DimEstimate,
    /// `S(a)` at the nominal dimension.
    pub eval_s: f64,
    /// `min(a, 2(k-1))`, the value a point-projection heuristic would predict.
    pub naive: f64,
    pub v_attempted: usize,
    pub planes: Vec<PlaneEstimate>,
    pub quantiles: Quantiles,
    pub exceptional: Option<ExceptionalSummary>,
    pub flags: Vec<Flag>,
}

impl ResultRecord {
    pub fn passed(&self) -> bool {
        self.flags.iter().all(|f| f.pass)
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.planes.iter().map(|p| p.estimate.slope).collect()
    }
}

/// Projected chart points of every line, or `None` if some line is not
/// `mu`-transversal to `V` (then `V` is rejected).
fn project_all(ch: &VChart, lines: &[LocalLine], mu: f64) -> Option<Vec<Vec<f64>>> {
    lines
        .iter()
        .map(|l| ch.project_line(l, mu, V_CHART_MAX_TILT))
        .collect()
}

/// Draws planes from streams `(seed, 0), (seed, 1), ...`, keeps the first
/// `num_v` for which every line projects to a line, and estimates the box
/// dimension of each image in the `A(1, V)` chart.
fn scan_planes(cfg: &ExperimentConfig, lines: &[LocalLine]) -> Result<(Vec<PlaneEstimate>, usize)> {
    let ladder = cfg.projected_ladder();
    let mut planes = Vec::with_capacity(cfg.num_v);
    let max_attempts = cfg.num_v * MAX_ATTEMPTS_PER_V;
    let mut next = 0usize;
    while planes.len() < cfg.num_v && next < max_attempts {
        let batch = (cfg.num_v - planes.len()).max(1).min(max_attempts - next);
        let tasks: Vec<u64> = (next..next + batch).map(|t| t as u64).collect();
        next += batch;
        let got = par::map_indexed(&tasks, |_, &task| -> Result<Option<PlaneEstimate>> {
            let v = sample_grassmannian(cfg.n, cfg.k, &mut stream(cfg.seed, task))?;
            let Ok(ch) = VChart::new(v.clone()) else {
                return Ok(None);
            };
            let Some(pts) = project_all(&ch, lines, cfg.mu) else {
                return Ok(None);
            };
            let estimate = box_dimension(&pts, Space::LinesInV { k: cfg.k }, ladder)?;
            Ok(Some(PlaneEstimate {
                task,
                proj: v.proj().to_vec(),
                estimate,
            }))
        });
        for g in got {
            if let Some(p) = g? {
                if planes.len() < cfg.num_v {
                    planes.push(p);
                }
            }
        }
    }
    if planes.is_empty() {
        return Err(Error::AllDegenerate);
    }
    Ok((planes, next))
}

fn run(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    cfg.validate()?;
    let delta = cfg.delta();
    let cloud = cfg.construction.cloud(cfg.n, delta)?;
    let source = box_dimension(cloud.points(), cloud.space(), cfg.source_ladder())?;
    let lines: Vec<LocalLine> = cloud
        .points()
        .iter()
        .map(|p| LocalLine::from_chart(p))
        .collect::<Result<_>>()?;
    let a = cfg.construction.dimension(cfg.n);
    let target = eval_s(a, cfg.k, cfg.n)?;
    let naive = a.min(2.0 * (cfg.k as f64 - 1.0));
    let (planes, attempted) = scan_planes(cfg, &lines)?;
    let ests: Vec<f64> = planes.iter().map(|p| p.estimate.slope).collect();
    let quantiles = Quantiles::of(&ests).ok_or(Error::AllDegenerate)?;
    let mut flags = Vec::new();
    flags.push(Flag::at_most(
        "source_near_nominal",
        "SOURCE_DIM_TOL",
        libm::fabs(source.slope - a),
        SOURCE_DIM_TOL,
    ));
    flags.push(Flag::at_most(
        "median_near_target",
        "MARSTRAND_MEDIAN_TOL",
        libm::fabs(quantiles.median - target),
        MARSTRAND_MEDIAN_TOL,
    ));
    if naive - target >= SEPARATION_GAP {
        flags.push(Flag::at_most(
            "q95_below_naive",
            "ESTIMATOR_SLACK",
            quantiles.q95,
            naive - ESTIMATOR_SLACK,
        ));
    }
    Ok(ResultRecord {
        name: cfg.name.clone(),
        experiment: cfg.experiment,
        n: cfg.n,
        k: cfg.k,
        mu: cfg.mu,
        seed: cfg.seed,
        construction: cfg.construction,
        delta,
        lines: lines.len(),
        nominal_dimension: a,
        source,
        eval_s: target,
        naive,
        v_attempted: attempted,
        planes,
        quantiles,
        exceptional: None,
        flags,
    })
}

/// Projected dimensions of the construction over sampled planes, compared with `S(a)`.
pub fn marstrand_scan(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    if cfg.experiment != ExperimentKind::Marstrand {
        return Err(invalid("marstrand_scan needs a marstrand experiment"));
    }
    run(cfg)
}

/// Classifies planes with estimate below `s - EXCEPTIONAL_GUARD` as
/// exceptional and compares the box dimension of that set with the bounds.
pub fn exceptional_scan(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let ExperimentKind::Exceptional { s } = cfg.experiment else {
        return Err(invalid("exceptional_scan needs an exceptional experiment"));
    };
    let mut rec = run(cfg)?;
    let a = rec.nominal_dimension;
    let threshold = s - EXCEPTIONAL_GUARD;
    let exc: Vec<Vec<f64>> = rec
        .planes
        .iter()
        .filter(|p| p.estimate.slope < threshold)
        .map(|p| p.proj.clone())
        .collect();
    let dimension = if exc.is_empty() {
        0.0
    } else {
        box_dimension(
            &exc,
            Space::Grassmannian { k: cfg.k, n: cfg.n },
            cfg.exceptional_ladder(),
        )?
        .slope
        .max(0.0)
    };
    let kaufman_bound = bound_formula(BoundKind::Kaufman, cfg.n, cfg.k, s, None)?;
    let falconer_bound = bound_formula(BoundKind::Falconer, cfg.n, cfg.k, s, Some(a))?;
    let t = (cfg.k * (cfg.n - cfg.k)) as f64;
    rec.flags.push(Flag::at_most(
        "exceptional_below_bounds",
        "ESTIMATOR_SLACK",
        dimension,
        kaufman_bound.min(falconer_bound) + ESTIMATOR_SLACK,
    ));
    rec.flags.push(Flag::at_most(
        "exceptional_within_grassmannian",
        "ESTIMATOR_SLACK",
        dimension,
        t + ESTIMATOR_SLACK,
    ));
    rec.exceptional = Some(ExceptionalSummary {
        s,
        threshold,
        count: exc.len(),
        fraction: exc.len() as f64 / rec.planes.len() as f64,
        dimension,
        kaufman_bound,
        falconer_bound,
    });
    Ok(rec)
}

/// Dispatches on the configured experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    match cfg.experiment {
        ExperimentKind::Marstrand => marstrand_scan(cfg),
        ExperimentKind::Exceptional { .. } => exceptional_scan(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(
        construction: LineFamily,
        delta_exponent: u32,
        num_v: usize,
        experiment: ExperimentKind,
    ) -> ExperimentConfig {
        ExperimentConfig {
            name: "t".into(),
            n: 3,
            k: 2,
            mu: 0.05,
            construction,
            num_v,
            delta_exponent,
            source_scales: None,
            projected_scales: None,
            exceptional_scales: None,
            experiment,
            seed: 1,
            output_path: None,
        }
    }

    #[test]
    fn bound_formula_examples() {
        assert_eq!(
            bound_formula(BoundKind::Kaufman, 3, 2, 1.0, None).unwrap(),
            2.0
        );
        let f = bound_formula(BoundKind::Falconer, 3, 2, 1.0, Some(2.63)).unwrap();
        assert!((f - 1.37).abs() < 1e-12);
        assert_eq!(
            bound_formula(BoundKind::Falconer, 3, 2, 1.0, Some(100.0)).unwrap(),
            0.0
        );
        assert!(bound_formula(BoundKind::Falconer, 3, 2, 1.0, None).is_err());
        assert!(bound_formula(BoundKind::Kaufman, 3, 2, 2.0, None).is_err());
        assert!(bound_formula(BoundKind::Kaufman, 3, 1, 0.5, None).is_err());
        assert!(bound_formula(BoundKind::Falconer, 4, 2, 1.5, Some(1.0)).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let q = Quantiles::of(&[3.0, 1.0, 2.0, 4.0, 5.0]).unwrap();
        assert_eq!((q.min, q.median, q.max), (1.0, 3.0, 5.0));
        assert!((q.q25 - 2.0).abs() < 1e-15 && (q.q95 - 4.8).abs() < 1e-12);
        assert!(Quantiles::of(&[]).is_none());
    }

    #[test]
    fn validation() {
        let mut c = cfg(
            LineFamily::Bush { dim_a: 2.0 },
            5,
            4,
            ExperimentKind::Marstrand,
        );
        assert!(c.validate().is_ok());
        c.num_v = 0;
        assert!(c.validate().is_err());
        c.num_v = 4;
        c.experiment = ExperimentKind::Exceptional { s: 2.5 };
        assert!(c.validate().is_err());
        c.experiment = ExperimentKind::Exceptional { s: 1.5 };
        assert!(c.validate().is_ok());
        c.source_scales = Some(ScaleLadder::dyadic(3, 2));
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_line_projects_to_a_point_in_the_chart() {
        let r = marstrand_scan(&cfg(
            LineFamily::Bush { dim_a: 0.0 },
            5,
            5,
            ExperimentKind::Marstrand,
        ))
        .unwrap();
        assert_eq!(r.lines, 1);
        assert_eq!(r.quantiles.median, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn bush_scan_is_deterministic_and_low() {
        let c = cfg(
            LineFamily::Bush { dim_a: 2.0 },
            5,
            6,
            ExperimentKind::Marstrand,
        );
        let a = marstrand_scan(&c).unwrap();
        let b = marstrand_scan(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.planes.len(), 6);
        assert!(a.quantiles.median < 1.4, "{:?}", a.quantiles);
        assert!(a.planes.windows(2).all(|w| w[0].task < w[1].task));
    }

    #[test]
    fn exceptional_scan_extremes() {
        let below = exceptional_scan(&cfg(
            LineFamily::Bush { dim_a: 2.0 },
            5,
            8,
            ExperimentKind::Exceptional { s: 0.3 },
        ))
        .unwrap();
        let e = below.exceptional.unwrap();
        assert_eq!((e.count, e.dimension), (0, 0.0));
        assert!(below
            .flags
            .iter()
            .filter(|f| f.name.starts_with("exceptional"))
            .all(|f| f.pass));
    }
}
