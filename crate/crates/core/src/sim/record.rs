//! Per-step trajectory rows and their CSV form.
//!
//! Values are written with 17 significant digits so that parsing a written
//! file reproduces every finite value bit for bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::RecordError;
use crate::so3::{to_rotation_vector, EulerZYX, RotationMatrix};

use super::runner::Outcome;

pub const CSV_SCHEMA: &str = "trajectory-v1";

pub const CSV_HEADER: [&str; 27] = [
    "t",
    "r11",
    "r12",
    "r13",
    "r21",
    "r22",
    "r23",
    "r31",
    "r32",
    "r33",
    "yaw",
    "pitch",
    "roll",
    "rotvec_x",
    "rotvec_y",
    "rotvec_z",
    "fh1_x",
    "fh1_y",
    "fh1_z",
    "fh2_x",
    "fh2_y",
    "fh2_z",
    "sigma_x",
    "sigma_y",
    "sigma_z",
    "trace_error",
    "unstable_distance",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    /// Estimate, row-major.
    pub r_hat: [f64; 9],
    pub euler: [f64; 3],
    /// Axis·angle point in the π-ball.
    pub rotvec: [f64; 3],
    pub f_h1: [f64; 3],
    pub f_h2: [f64; 3],
    pub sigma: [f64; 3],
    /// `trace(I − R_trueᵀ R̂)`
    pub trace_error: f64,
    /// `tr(R̃) + 1` against the vision rotation, or against the reference
    /// rotation when vision is off.
    pub unstable_distance: f64,
}

impl TrajectoryRow {
    fn to_values(self) -> [f64; 27] {
        let mut out = [0.0; 27];
        out[0] = self.t;
        out[1..10].copy_from_slice(&self.r_hat);
        out[10..13].copy_from_slice(&self.euler);
        out[13..16].copy_from_slice(&self.rotvec);
        out[16..19].copy_from_slice(&self.f_h1);
        out[19..22].copy_from_slice(&self.f_h2);
        out[22..25].copy_from_slice(&self.sigma);
        out[25] = self.trace_error;
        out[26] = self.unstable_distance;
        out
    }

    fn from_values(v: &[f64; 27]) -> Self {
        let take3 = |i: usize| [v[i], v[i + 1], v[i + 2]];
        let mut r_hat = [0.0; 9];
        r_hat.copy_from_slice(&v[1..10]);
        Self {
            t: v[0],
            r_hat,
            euler: take3(10),
            rotvec: take3(13),
            f_h1: take3(16),
            f_h2: take3(19),
            sigma: take3(22),
            trace_error: v[25],
            unstable_distance: v[26],
        }
    }

    pub fn rotation(&self) -> Result<RotationMatrix, crate::error::So3Error> {
        RotationMatrix::from_row_major(self.r_hat)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub steps: u64,
    pub final_r_hat: RotationMatrix,
    pub final_euler: EulerZYX,
    pub final_rotvec: [f64; 3],
    pub final_trace_error: f64,
    pub peak_trace_error: f64,
    pub min_unstable_distance: f64,
    /// Rotation over the last 100 steps stayed below the settle threshold.
    pub settled: bool,
    /// Time after which the trace error stayed below the convergence tolerance.
    pub settle_time: Option<f64>,
    pub outcome: Outcome,
    /// Wall-clock duration of the run. Not serialized so that summaries are
    /// reproducible.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub rows: Vec<TrajectoryRow>,
    pub summary: RunSummary,
}

fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_rows_csv<W: Write>(writer: W, rows: &[TrajectoryRow]) -> Result<(), RecordError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.to_values().iter().map(|v| format_value(*v)))?;
    }
    w.flush()?;
    Ok(())
}

impl TrajectoryRecord {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), RecordError> {
        write_rows_csv(writer, &self.rows)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is ascii")
    }
}

/// Parses a trajectory CSV, checking the header and every row's arity.
pub fn read_rows_csv<R: Read>(reader: R) -> Result<Vec<TrajectoryRow>, RecordError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(RecordError::Corrupt {
            row: 0,
            message: "unexpected header".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != CSV_HEADER.len() {
            return Err(RecordError::Corrupt {
                row: i + 1,
                message: format!("expected {} fields, got {}", CSV_HEADER.len(), rec.len()),
            });
        }
        let mut values = [0.0; 27];
        for (slot, field) in values.iter_mut().zip(rec.iter()) {
            *slot = field.trim().parse().map_err(|e| RecordError::Corrupt {
                row: i + 1,
                message: format!("`{field}`: {e}"),
            })?;
        }
        rows.push(TrajectoryRow::from_values(&values));
    }
    Ok(rows)
}

/// One π-ball point per row, recomputed from the logged estimate.
pub fn piball_points(rows: &[TrajectoryRow]) -> Result<Vec<(f64, [f64; 3])>, RecordError> {
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let r = row.rotation().map_err(|e| RecordError::Corrupt {
                row: i + 1,
                message: e.to_string(),
            })?;
            let v = to_rotation_vector(&r);
            Ok((row.t, [v.x, v.y, v.z]))
        })
        .collect()
}

pub fn write_piball_csv<W: Write>(
    writer: W,
    points: &[(f64, [f64; 3])],
) -> Result<(), RecordError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["t", "x", "y", "z"])?;
    for (t, p) in points {
        w.write_record([*t, p[0], p[1], p[2]].iter().map(|v| format_value(*v)))?;
    }
    w.flush()?;
    Ok(())
}
