//! The subcommands. Each returns the run outcome or a classified error; the
//! binary maps both to exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use grassproj_core::constructions::{fractal_set, gen_direction_bush, gen_product_example};
use grassproj_core::consts::{
    DOMINANCE_FRACTION, FROSTMAN_AUDIT_C, INCIDENCE_SLOPE_SLACK, K_SCALING_FACTOR, LOW_REPORT_C,
    MULTIPLICITY_CAP,
};
use grassproj_core::experiments::{run_experiment, ExperimentConfig, Flag, ResultRecord};
use grassproj_core::highlow::{
    assemble_field, falconer_slope_experiment, grid_bytes, low_part_report, FalconerReport,
    LowPartReport,
};
use grassproj_core::incidence::{build_configuration, kaufman_slope_experiment, KaufmanReport};
use grassproj_core::nets::{box_dimension, greedy_net, NetCloud, ScaleLadder, Space};
use serde::{Deserialize, Serialize};

use crate::config::{self, HighLowConfig, IncidenceConfig, IncidenceMode};
use crate::error::{CliError, Outcome};
use crate::formats::{ladder_csv, ladder_dat, read_netcloud, write_field_dump, write_json};
use crate::manifest::{unix_now, RunManifest};

/// Parses `i_min:i_max` (dyadic) or `base:i_min:i_max`.
pub fn parse_ladder(s: &str) -> Result<ScaleLadder, CliError> {
    let bad = || {
        CliError::usage(format!(
            "bad scale ladder {s:?}; expected i_min:i_max or base:i_min:i_max"
        ))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let (base, lo, hi) = match parts.as_slice() {
        [lo, hi] => ("2", *lo, *hi),
        [b, lo, hi] => (*b, *lo, *hi),
        _ => return Err(bad()),
    };
    let l = ScaleLadder {
        base: base.trim().parse().map_err(|_| bad())?,
        i_min: lo.trim().parse().map_err(|_| bad())?,
        i_max: hi.trim().parse().map_err(|_| bad())?,
    };
    if !(l.base > 1.0) || l.is_empty() || l.len() < 3 {
        return Err(CliError::usage(format!(
            "scale ladder {s:?} needs base > 1 and at least 3 scales"
        )));
    }
    Ok(l)
}

/// Default ladder for a cloud: dyadic from `1/2` down to one octave above its scale.
fn default_ladder(cloud: &NetCloud) -> Result<ScaleLadder, CliError> {
    let m = (-cloud.delta().log2()).floor() as u32;
    if m < 4 {
        return Err(CliError::usage(
            "cloud scale too coarse for a default ladder; pass --scales",
        ));
    }
    Ok(ScaleLadder::dyadic(1, m - 1))
}

pub struct DimArgs {
    pub input: PathBuf,
    pub metric: Option<String>,
    pub scales: Option<String>,
    pub csv: Option<PathBuf>,
    pub dat: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimSummary {
    pub space: Space,
    pub points: usize,
    pub slope: f64,
    pub stderr: f64,
}

pub fn cmd_dim(a: &DimArgs) -> Result<(DimSummary, Outcome), CliError> {
    let cloud = read_netcloud(&a.input)?;
    let space = match &a.metric {
        Some(m) => m.parse::<Space>()?,
        None => cloud.space(),
    };
    let ladder = match &a.scales {
        Some(s) => parse_ladder(s)?,
        None => default_ladder(&cloud)?,
    };
    let d = box_dimension(cloud.points(), space, ladder)?;
    let csv = a
        .csv
        .clone()
        .unwrap_or_else(|| a.input.with_extension("ladder.csv"));
    fs::write(&csv, ladder_csv(&d))?;
    if let Some(dat) = &a.dat {
        fs::write(dat, ladder_dat(&d))?;
    }
    println!("{:.4} ± {:.4}", d.slope, d.stderr);
    Ok((
        DimSummary {
            space,
            points: cloud.len(),
            slope: d.slope,
            stderr: d.stderr,
        },
        Outcome::Pass,
    ))
}

pub const GENERATORS: [&str; 3] = ["bush", "product", "fractal"];

pub struct ConstructArgs {
    pub name: String,
    pub args: Vec<String>,
    pub delta: f64,
    pub seed: u64,
    pub output: PathBuf,
}

fn kv(args: &[String]) -> Result<Vec<(String, f64)>, CliError> {
    args.iter()
        .map(|a| {
            let (k, v) = a
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("argument {a:?} is not key=value")))?;
            let v = v
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("argument {a:?}: value is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn arg(kv: &[(String, f64)], key: &str, default: Option<f64>) -> Result<f64, CliError> {
    kv.iter()
        .rev()
        .find(|(k, _)| k == key)
        .map(|(_, v)| *v)
        .or(default)
        .ok_or_else(|| CliError::usage(format!("missing argument {key}=...")))
}

fn check_keys(kv: &[(String, f64)], allowed: &[&str]) -> Result<(), CliError> {
    match kv.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        Some((k, _)) => Err(CliError::usage(format!(
            "unknown argument {k:?}; expected one of {allowed:?}"
        ))),
        None => Ok(()),
    }
}

fn as_count(x: f64, what: &str) -> Result<usize, CliError> {
    if x >= 1.0 && x.fract() == 0.0 {
        Ok(x as usize)
    } else {
        Err(CliError::usage(format!(
            "{what} must be a positive integer"
        )))
    }
}

/// Builds one of the [`GENERATORS`] at scale `delta`. All generators are
/// deterministic; the seed is recorded in the manifest.
pub fn construct(name: &str, args: &[String], delta: f64) -> Result<NetCloud, CliError> {
    let kv = kv(args)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CliError::usage("delta must lie in (0, 1)"));
    }
    Ok(match name {
        "bush" => {
            check_keys(&kv, &["n", "a"])?;
            let n = as_count(arg(&kv, "n", Some(3.0))?, "n")?;
            gen_direction_bush(n, delta, arg(&kv, "a", Some(n.saturating_sub(1) as f64))?)?
        }
        "product" => {
            check_keys(&kv, &["n", "beta"])?;
            let n = as_count(arg(&kv, "n", Some(3.0))?, "n")?;
            gen_product_example(n, arg(&kv, "beta", None)?, delta)?
        }
        "fractal" => {
            check_keys(&kv, &["dim", "axes", "side"])?;
            let axes = as_count(arg(&kv, "axes", Some(1.0))?, "axes")?;
            let raw = fractal_set(
                arg(&kv, "dim", None)?,
                axes,
                arg(&kv, "side", Some(1.0))?,
                delta,
            )?;
            greedy_net(&raw, delta, Space::Euclidean { dim: axes })?
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown generator {other:?}; valid generators: {}",
                GENERATORS.join(", ")
            )))
        }
    })
}

pub fn cmd_construct(a: &ConstructArgs) -> Result<Outcome, CliError> {
    let started = unix_now();
    let cloud = construct(&a.name, &a.args, a.delta)?;
    if let Some(dir) = a.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_json(&a.output, &cloud)?;
    let described = serde_json::json!({ "generator": a.name, "args": a.args, "delta": a.delta, "seed": a.seed });
    let hash = config::hex(&<sha2::Sha256 as sha2::Digest>::digest(
        described.to_string().as_bytes(),
    ));
    let mut m = RunManifest::new("construct", hash, a.seed, started);
    m.record(&a.output)?;
    let mpath = PathBuf::from(format!("{}.manifest.json", a.output.display()));
    m.finish(&mpath)?;
    println!("{} points written to {}", cloud.len(), a.output.display());
    Ok(Outcome::Pass)
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("{}: {e}", dir.display())))
}

fn print_flags(flags: &[Flag]) {
    for f in flags {
        println!(
            "{} {}: {:.4} vs {:.4} ({})",
            if f.pass { "PASS" } else { "FAIL" },
            f.name,
            f.value,
            f.limit,
            f.tolerance
        );
    }
}

/// Runs a scan config; writes `result.json`, `summary.csv`, `source.dat` and `manifest.json`.
pub fn cmd_scan(path: &Path, out: Option<&Path>) -> Result<(ResultRecord, Outcome), CliError> {
    let started = unix_now();
    let loaded = config::load::<ExperimentConfig>(path)?;
    let cfg = loaded.config;
    cfg.validate()?;
    let dir = config::output_dir(out, cfg.output_path.as_deref(), &cfg.name);
    prepare_dir(&dir)?;
    let rec = run_experiment(&cfg)?;
    let result = dir.join("result.json");
    write_json(&result, &rec)?;
    let mut csv = String::from("task,slope,stderr\n");
    for p in &rec.planes {
        csv.push_str(&format!(
            "{},{},{}\n",
            p.task, p.estimate.slope, p.estimate.stderr
        ));
    }
    let summary = dir.join("summary.csv");
    fs::write(&summary, csv)?;
    let dat = dir.join("source.dat");
    fs::write(&dat, ladder_dat(&rec.source))?;
    let mut m = RunManifest::new("scan", loaded.hash, loaded.seed, started);
    for p in [&result, &summary, &dat] {
        m.record(p)?;
    }
    m.finish(&dir.join("manifest.json"))?;
    let q = &rec.quantiles;
    println!(
        "{}: {} planes, median {:.3} (q05 {:.3}, q95 {:.3}), target {:.3}, source {:.3}",
        rec.name,
        rec.planes.len(),
        q.median,
        q.q05,
        q.q95,
        rec.eval_s,
        rec.source.slope
    );
    if let Some(e) = &rec.exceptional {
        println!(
            "exceptional: {} of {}, dimension {:.3}",
            e.count,
            rec.planes.len(),
            e.dimension
        );
    }
    print_flags(&rec.flags);
    let outcome = Outcome::from_pass(rec.passed());
    Ok((rec, outcome))
}

/// Result of `grassproj highlow`: the report at `K/2` and at `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighLowRecord {
    pub name: String,
    pub seed: u64,
    pub half_k: LowPartReport,
    pub full_k: LowPartReport,
    /// `max |f_low|(K) / max |f_low|(K/2)`.
    pub k_scaling: f64,
    /// `2^{s - 2(k-1)}`.
    pub k_scaling_expected: f64,
    pub flags: Vec<Flag>,
}

fn flag(name: &str, tolerance: &str, value: f64, limit: f64, pass: bool) -> Flag {
    Flag {
        name: name.into(),
        tolerance: tolerance.into(),
        value,
        limit,
        pass,
    }
}

pub fn cmd_highlow(
    path: &Path,
    out: Option<&Path>,
    max_grid_bytes: u64,
) -> Result<(HighLowRecord, Outcome), CliError> {
    let started = unix_now();
    let loaded = config::load::<HighLowConfig>(path)?;
    let cfg = loaded.config;
    cfg.validate()?;
    let need = grid_bytes(cfg.grid, 2 * (cfg.n - 1));
    if need > max_grid_bytes {
        return Err(grassproj_core::Error::ResourceLimit {
            requested: need,
            limit: max_grid_bytes,
        }
        .into());
    }
    let dir = config::output_dir(out, cfg.output_path.as_deref(), &cfg.name);
    prepare_dir(&dir)?;
    let conf = build_configuration(
        cfg.n,
        cfg.k,
        cfg.mu,
        cfg.lines,
        cfg.delta(),
        cfg.v_candidate_factor,
        cfg.seed,
    )?;
    if conf.families.is_empty() {
        return Err(CliError::Failed("no admissible planes".into()));
    }
    let field = assemble_field(
        &conf.lines,
        &conf.families,
        cfg.grid,
        max_grid_bytes,
        cfg.dilation,
    )?;
    let k = cfg.k_factor();
    let half_k = low_part_report(&field, &conf.lines, &conf.families, k / 2.0, cfg.s)?;
    let full_k = low_part_report(&field, &conf.lines, &conf.families, k, cfg.s)?;
    let expected = 2f64.powf(cfg.s - 2.0 * (cfg.k as f64 - 1.0));
    let k_scaling = full_k.max_low / half_k.max_low;
    let dev = (k_scaling / expected).max(expected / k_scaling);
    let flags = vec![
        flag(
            "low_part_ratio",
            "LOW_REPORT_C",
            full_k.ratio,
            LOW_REPORT_C,
            full_k.ratio_within,
        ),
        flag(
            "dominance",
            "DOMINANCE_FRACTION",
            full_k.dominance_fraction,
            DOMINANCE_FRACTION,
            full_k.dominance_holds,
        ),
        flag(
            "k_scaling",
            "K_SCALING_FACTOR",
            dev,
            K_SCALING_FACTOR,
            dev <= K_SCALING_FACTOR,
        ),
    ];
    let rec = HighLowRecord {
        name: cfg.name.clone(),
        seed: cfg.seed,
        half_k,
        full_k,
        k_scaling,
        k_scaling_expected: expected,
        flags,
    };
    let result = dir.join("result.json");
    write_json(&result, &rec)?;
    let mut m = RunManifest::new("highlow", loaded.hash, loaded.seed, started);
    m.record(&result)?;
    if cfg.dump_field {
        for p in write_field_dump(&dir, "field", &field.field)? {
            m.record(&p)?;
        }
    }
    m.finish(&dir.join("manifest.json"))?;
    println!(
        "{}: {} planes, {} slabs, {} lines; K = {k}: max|f_low| = {:.3}, ratio {:.3}, dominance {:.3}; scaling {:.3} (expected {:.3})",
        rec.name, rec.full_k.planes, rec.full_k.slabs, rec.full_k.lines, rec.full_k.max_low, rec.full_k.ratio,
        rec.full_k.dominance_fraction, rec.k_scaling, expected
    );
    print_flags(&rec.flags);
    let outcome = Outcome::from_pass(rec.flags.iter().all(|f| f.pass));
    Ok((rec, outcome))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum IncidenceReport {
    Kaufman(KaufmanReport),
    Falconer(FalconerReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidenceRecord {
    pub name: String,
    pub report: IncidenceReport,
    pub flags: Vec<Flag>,
}

fn kaufman_flags(r: &KaufmanReport) -> Vec<Flag> {
    let mut f = vec![flag(
        "slope_below_t_plus_s",
        "INCIDENCE_SLOPE_SLACK",
        r.slope,
        r.upper_exponent + INCIDENCE_SLOPE_SLACK,
        r.slope <= r.upper_exponent + INCIDENCE_SLOPE_SLACK,
    )];
    let mult = r.rows.iter().map(|x| x.max_multiplicity).max().unwrap_or(0);
    f.push(flag(
        "max_multiplicity",
        "MULTIPLICITY_CAP",
        mult as f64,
        MULTIPLICITY_CAP as f64,
        mult <= MULTIPLICITY_CAP,
    ));
    let fr = r.rows.iter().map(|x| x.frostman_max).fold(0.0, f64::max);
    f.push(flag(
        "frostman_audit",
        "FROSTMAN_AUDIT_C",
        fr,
        FROSTMAN_AUDIT_C,
        fr <= FROSTMAN_AUDIT_C,
    ));
    if let Some(ok) = r.rows.first().and_then(|x| x.brute_force_agrees) {
        f.push(flag(
            "brute_force_agrees",
            "exact",
            ok as u8 as f64,
            1.0,
            ok,
        ));
    }
    f
}

fn falconer_flags(r: &FalconerReport) -> Vec<Flag> {
    let mut f = vec![
        flag(
            "slope_above_floor",
            "ESTIMATOR_SLACK",
            r.slope,
            r.slope_floor,
            r.slope_ok,
        ),
        flag(
            "t_consistent",
            "ESTIMATOR_SLACK",
            r.t,
            r.t_ceiling,
            r.t_consistent,
        ),
        flag(
            "multiplicity_lower_bound",
            "exact",
            r.lower_bounds_hold as u8 as f64,
            1.0,
            r.lower_bounds_hold,
        ),
    ];
    if let Some(ok) = r.rows.first().and_then(|x| x.brute_force_agrees) {
        f.push(flag(
            "brute_force_agrees",
            "exact",
            ok as u8 as f64,
            1.0,
            ok,
        ));
    }
    f
}

/// Runs an incidence config; writes `result.json`, `scales.csv` (one row per scale) and `manifest.json`.
pub fn cmd_incidence(
    path: &Path,
    out: Option<&Path>,
) -> Result<(IncidenceRecord, Outcome), CliError> {
    let started = unix_now();
    let loaded = config::load::<IncidenceConfig>(path)?;
    let cfg = loaded.config;
    cfg.validate()?;
    let dir = config::output_dir(out, cfg.output_path.as_deref(), &cfg.name);
    prepare_dir(&dir)?;
    let (report, flags, csv) = match &cfg.mode {
        IncidenceMode::Kaufman(p) => {
            let r = kaufman_slope_experiment(p)?;
            let mut csv = String::from("delta,lines,planes,total_pairs,sum_line_incidences,max_multiplicity,frostman_max,half_dominance\n");
            for x in &r.rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    x.delta,
                    x.lines,
                    x.planes,
                    x.total_pairs,
                    x.sum_line_incidences,
                    x.max_multiplicity,
                    x.frostman_max,
                    x.half_dominance
                ));
            }
            let f = kaufman_flags(&r);
            (IncidenceReport::Kaufman(r), f, csv)
        }
        IncidenceMode::Falconer(p) => {
            let r = falconer_slope_experiment(p)?;
            let mut csv =
                String::from("delta,lines,planes,integral,lower_bound,min_multiplicity\n");
            for x in &r.rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    x.delta, x.lines, x.planes, x.integral, x.lower_bound, x.min_multiplicity
                ));
            }
            let f = falconer_flags(&r);
            (IncidenceReport::Falconer(r), f, csv)
        }
    };
    let rec = IncidenceRecord {
        name: cfg.name.clone(),
        report,
        flags,
    };
    let result = dir.join("result.json");
    write_json(&result, &rec)?;
    let scales = dir.join("scales.csv");
    fs::write(&scales, csv)?;
    let mut m = RunManifest::new("incidence", loaded.hash, loaded.seed, started);
    m.record(&result)?;
    m.record(&scales)?;
    m.finish(&dir.join("manifest.json"))?;
    match &rec.report {
        IncidenceReport::Kaufman(r) => println!(
            "{}: slope {:.3} ± {:.3}, t + s = {:.3}",
            rec.name, r.slope, r.stderr, r.upper_exponent
        ),
        IncidenceReport::Falconer(r) => println!(
            "{}: slope {:.3} ± {:.3}, floor {:.3}",
            rec.name, r.slope, r.stderr, r.slope_floor
        ),
    }
    print_flags(&rec.flags);
    let outcome = Outcome::from_pass(rec.flags.iter().all(|f| f.pass));
    Ok((rec, outcome))
}
