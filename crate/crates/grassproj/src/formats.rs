//! Artifact formats: JSON records, ladder CSV, gnuplot `.dat` and raw field dumps.

use std::fs;
use std::io::Write;
use std::path::Path;

use grassproj_core::highlow::{Domain, GridField};
use grassproj_core::nets::{DimEstimate, NetCloud};
use serde::Serialize;

use crate::error::CliError;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::usage)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_netcloud(path: &Path) -> Result<NetCloud, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: malformed point cloud: {e}", path.display())))
}

/// `scale,count` rows, finest scale last.
pub fn ladder_csv(d: &DimEstimate) -> String {
    let mut s = String::from("scale,count\n");
    for (scale, count) in d.scales.iter().zip(&d.counts) {
        s.push_str(&format!("{scale},{count}\n"));
    }
    s
}

/// Gnuplot-ready `log2(1/delta) log2(N)` columns.
pub fn ladder_dat(d: &DimEstimate) -> String {
    let mut s = String::from("# log2(1/delta) log2(N)\n");
    for (scale, count) in d.scales.iter().zip(&d.counts) {
        s.push_str(&format!(
            "{} {}\n",
            -scale.log2(),
            (*count.max(&1) as f64).log2()
        ));
    }
    s
}

/// Header written next to a raw field dump.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct FieldHeader {
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub domain_tag: Domain,
    pub origin: Vec<f64>,
    pub side: f64,
    /// Row-major over `2(n-1)` axes, X axes first; each value is `re, im` as little-endian f64.
    pub layout: String,
}

/// Writes `<stem>.bin` (raw little-endian `re, im` pairs) and `<stem>.json`.
pub fn write_field_dump(
    dir: &Path,
    stem: &str,
    g: &GridField,
) -> Result<Vec<std::path::PathBuf>, CliError> {
    let bin = dir.join(format!("{stem}.bin"));
    let json = dir.join(format!("{stem}.json"));
    let mut out = std::io::BufWriter::new(fs::File::create(&bin)?);
    for v in g.values() {
        out.write_all(&v.re.to_le_bytes())?;
        out.write_all(&v.im.to_le_bytes())?;
    }
    out.flush()?;
    let header = FieldHeader {
        n: g.n_ambient(),
        m: g.m(),
        domain_tag: g.domain(),
        origin: g.origin().to_vec(),
        side: g.side(),
        layout: "row-major, X axes first, complex as (re, im) little-endian f64".into(),
    };
    write_json(&json, &header)?;
    Ok(vec![bin, json])
}

/// Reads a dump written by [`write_field_dump`].
pub fn read_field_dump(dir: &Path, stem: &str) -> Result<GridField, CliError> {
    let header: FieldHeader =
        serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)
            .map_err(CliError::usage)?;
    let raw = fs::read(dir.join(format!("{stem}.bin")))?;
    let values = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            grassproj_core::highlow::Complex64::new(re, im)
        })
        .collect();
    Ok(GridField::from_values(
        header.n,
        header.m,
        header.origin,
        header.side,
        header.domain_tag,
        values,
    )?)
}
