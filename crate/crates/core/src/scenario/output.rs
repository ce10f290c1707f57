//! Trajectory CSV and JSON writers. Formatting is fixed-width and free of
//! timestamps so identical runs give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::assembly::{Chain, LinkState};
use crate::error::{Error, Result};
use crate::integrator::{Record, Trajectory};

/// `+1.234567890123e+00`; negative zero prints as positive.
pub fn fmt_num(x: f64) -> String {
    let s = format!("{:+.12e}", x + 0.0);
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let e: i32 = exp.parse().unwrap_or(0);
            format!("{mantissa}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
        }
        None => s,
    }
}

pub fn csv_header(chain: &Chain) -> String {
    let mut cols = vec!["t".to_string()];
    for (i, m) in chain.links.iter().enumerate() {
        let p = format!("link{}", i + 1);
        for c in [
            "x", "y", "z", "qw", "qx", "qy", "qz", "vx", "vy", "vz", "wx", "wy", "wz",
        ] {
            cols.push(format!("{p}_{c}"));
        }
        for k in 0..m.dof() {
            cols.push(format!("{p}_eta{k}"));
        }
        for k in 0..m.dof() {
            cols.push(format!("{p}_eta_dot{k}"));
        }
    }
    for j in 0..chain.len() {
        for c in ["fx", "fy", "fz", "mx", "my", "mz"] {
            cols.push(format!("joint{}_{c}", j + 1));
        }
    }
    for j in 0..chain.len() {
        cols.push(format!("joint{}_residual", j + 1));
    }
    cols.extend(["kinetic", "elastic", "gravitational", "total"].map(String::from));
    cols.join(",")
}

pub fn csv_row(record: &Record) -> String {
    let mut out = String::new();
    let mut push = |x: f64| {
        if !out.is_empty() {
            out.push(',');
        }
        out.push_str(&fmt_num(x));
    };
    push(record.t);
    for s in &record.links {
        s.origin().iter().for_each(|&x| push(x));
        s.rot.quaternion().into_iter().for_each(&mut push);
        s.v.iter()
            .chain(s.omega.iter())
            .chain(s.eta.iter())
            .chain(s.eta_dot.iter())
            .for_each(|&x| push(x));
    }
    record
        .wrenches
        .iter()
        .flat_map(|w| w.iter())
        .for_each(|&x| push(x));
    record.residuals.iter().for_each(|&x| push(x));
    let e = &record.energy;
    [e.kinetic, e.elastic, e.gravitational, e.total]
        .into_iter()
        .for_each(push);
    out
}

pub fn trajectory_csv(chain: &Chain, trajectory: &Trajectory) -> String {
    let mut out = csv_header(chain);
    out.push('\n');
    for r in &trajectory.records {
        let _ = writeln!(out, "{}", csv_row(r));
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinkSnapshot {
    pub position: [f64; 3],
    pub quaternion: [f64; 4],
    pub v: [f64; 3],
    pub omega: [f64; 3],
    pub eta: Vec<f64>,
    pub eta_dot: Vec<f64>,
}

impl From<&LinkState> for LinkSnapshot {
    fn from(s: &LinkState) -> Self {
        Self {
            position: s.origin().into(),
            quaternion: s.rot.quaternion(),
            v: s.v.into(),
            omega: s.omega.into(),
            eta: s.eta.iter().copied().collect(),
            eta_dot: s.eta_dot.iter().copied().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateSnapshot {
    pub t: f64,
    pub links: Vec<LinkSnapshot>,
}

impl StateSnapshot {
    pub fn new(t: f64, links: &[LinkState]) -> Self {
        Self {
            t,
            links: links.iter().map(LinkSnapshot::from).collect(),
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}
