//! Bit-stable artifact writers. Floats in CSV use 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::control::ControlSolution;
use crate::dynamics::TrajectoryRecord;
use crate::error::Result;
use crate::spectral::SpectralField;

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_error(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e.into(),
        other => std::io::Error::other(format!("{other:?}")).into(),
    }
}

/// Writes a header and rows of floats.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| fmt_float(x))).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes rows whose cells are already formatted.
pub fn write_records(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// `t, l2norm, fluctuation, mean, energyResidual`.
pub fn write_trajectory(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let rows: Vec<Vec<f64>> = (0..record.len())
        .map(|i| {
            vec![
                record.times[i],
                record.l2norms[i],
                record.fluctuation_norms[i],
                record.means[i],
                record.energy_residuals[i],
            ]
        })
        .collect();
    write_table(
        path,
        &["t", "l2norm", "fluctuation", "mean", "energyResidual"],
        &rows,
    )
}

/// `t` followed by `re/im` of `ĥ(k)` for `k = -N..=N`.
pub fn write_control(path: &Path, solution: &ControlSolution) -> Result<()> {
    let Some(first) = solution.h.first() else {
        return write_table(path, &["t"], &[]);
    };
    let n = first.cutoff() as i64;
    let mut header = vec!["t".to_string()];
    for k in -n..=n {
        header.push(format!("re_h{k}"));
        header.push(format!("im_h{k}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = solution
        .times
        .iter()
        .zip(&solution.h)
        .map(|(&t, h)| {
            let mut row = vec![t];
            for k in -n..=n {
                row.push(h.coeff(k).re);
                row.push(h.coeff(k).im);
            }
            row
        })
        .collect();
    write_table(path, &header_refs, &rows)
}

#[derive(Serialize)]
struct StateDump<'a> {
    t: f64,
    cutoff: usize,
    /// `[re, im]` for `k = -N..=N`.
    coeffs: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<&'a str>,
}

pub fn write_state(path: &Path, t: f64, v: &SpectralField, label: Option<&str>) -> Result<()> {
    let dump = StateDump {
        t,
        cutoff: v.cutoff(),
        coeffs: v.coeffs().iter().map(|c| [c.re, c.im]).collect(),
        label,
    };
    write_json_atomic(path, &dump)
}

/// Serializes to a temporary sibling and renames it into place.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    let tmp = path.with_extension("json.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.write_all(b"\n")?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
