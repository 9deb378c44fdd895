pub mod benchmark;
pub mod demo;
pub mod evaluate;
pub mod fit;
pub mod predict;
pub mod prob;
pub mod rerun;

use jointcast_core::{Dataset64, JointModel64, Matrix64, PredictiveSample64};

use crate::{CliError, CliResult};

/// Parse `name=value,name=value` covariate strings.
pub fn parse_z_pairs(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("covariate `{part}` is not name=value")))?;
        pairs.push((name.trim().to_string(), value.trim().to_string()));
    }
    if pairs.is_empty() {
        return Err(CliError::usage("no covariate values given"));
    }
    Ok(pairs)
}

/// Parse `<layers>x<width>` architecture notation.
pub fn parse_arch(text: &str) -> CliResult<(usize, usize)> {
    let (layers, width) = text
        .split_once('x')
        .ok_or_else(|| CliError::usage(format!("architecture `{text}` is not <layers>x<width>")))?;
    let layers: usize = layers
        .parse()
        .map_err(|_| CliError::usage(format!("bad layer count in `{text}`")))?;
    let width: usize = width
        .parse()
        .map_err(|_| CliError::usage(format!("bad width in `{text}`")))?;
    if layers == 0 || width == 0 {
        return Err(CliError::usage(format!("architecture `{text}` must be positive")));
    }
    Ok((layers, width))
}

pub fn load_model(path: &str) -> CliResult<JointModel64> {
    JointModel64::load(path)
        .map_err(|e| CliError::Runtime(anyhow::anyhow!("loading model `{path}`: {e}")))
}

/// Load a test/covariate CSV against a model's stored schema.
pub fn load_dataset_for_model(model: &JointModel64, path: &str) -> CliResult<Dataset64> {
    let responses: Vec<&str> = model.schema.response_names.iter().map(String::as_str).collect();
    let covariates: Vec<&str> = model.schema.covariate_names.iter().map(String::as_str).collect();
    Ok(jointcast_core::data::load_csv(path, &responses, &covariates)?)
}

fn format_float(v: f64) -> String {
    // shortest round-trip representation keeps output files deterministic
    format!("{v}")
}

pub fn write_csv(path: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    if let Some(parent) = std::path::Path::new(path).parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Predictive draws as CSV with `dim_1..dim_d` columns and an optional
/// leading block column.
pub fn write_draws_csv(
    path: &str,
    samples: &[PredictiveSample64],
    with_block: bool,
) -> CliResult<()> {
    let d = samples
        .first()
        .map(|s| s.draws.ncols())
        .ok_or_else(|| CliError::usage("no samples to write"))?;
    let mut header: Vec<String> = Vec::new();
    if with_block {
        header.push("block".to_string());
    }
    header.extend((1..=d).map(|j| format!("dim_{j}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    for (b, sample) in samples.iter().enumerate() {
        for i in 0..sample.draws.nrows() {
            let mut row = Vec::with_capacity(d + 1);
            if with_block {
                row.push(format!("{}", b + 1));
            }
            for j in 0..d {
                row.push(format_float(sample.draws[(i, j)]));
            }
            rows.push(row);
        }
    }
    write_csv(path, &header_refs, &rows)
}

/// Response matrix as CSV (used for plot-ready scatter exports).
pub fn write_matrix_csv(path: &str, header: &[&str], m: &Matrix64) -> CliResult<()> {
    let rows: Vec<Vec<String>> = (0..m.nrows())
        .map(|i| m.row(i).iter().map(|&v| format_float(v)).collect())
        .collect();
    write_csv(path, header, &rows)
}

pub fn log(verbose: u8, msg: impl AsRef<str>) {
    if verbose > 0 {
        eprintln!("{}", msg.as_ref());
    }
}
