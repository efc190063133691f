//! CSV and JSON writers. Floats use the shortest round-trip representation;
//! `-` marks an undefined value.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sivs_core::diagnostics::{CenterlineSample, ContractionTrace, GHIA_U_CSV, GHIA_V_CSV};
use sivs_core::fe::TaylorHoodSpace;
use sivs_core::mesh::Point2;

use crate::report::{MemberReport, RateRow};

pub const ITERATIONS_HEADER: &str = "label,method,n,re,nu,gamma,k,rel_p_increment,div_norm,cg_iterations,wall_time_s";
pub const RATES_HEADER: &str =
    "n,h,l2_u,rate_l2_u,h1_u,rate_h1_u,div_u,rate_div_u,l2_p,rate_l2_p,iterations,converged";
pub const FIELD_HEADER: &str = "x,y,u1,u2,speed,p";
pub const FIELD_POINTS: usize = 101;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_iterations(dir: &Path, members: &[MemberReport]) -> Result<()> {
    let mut w = create(dir, "iterations.csv")?;
    writeln!(w, "{ITERATIONS_HEADER}")?;
    for m in members {
        for r in &m.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                m.label,
                m.method,
                m.n,
                opt(m.re),
                m.nu,
                m.gamma,
                r.k,
                r.rel_p_increment,
                r.div_norm,
                r.krylov.map_or_else(|| "-".to_string(), |k| k.iterations.to_string()),
                r.wall_time_s
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_rates(dir: &Path, rows: &[RateRow]) -> Result<()> {
    let mut w = create(dir, "rates.csv")?;
    writeln!(w, "{RATES_HEADER}")?;
    for r in rows {
        let e = r.errors.as_array();
        write!(w, "{},{}", r.n, r.h)?;
        for c in 0..4 {
            write!(w, ",{},{}", e[c], opt(r.rates[c]))?;
        }
        writeln!(w, ",{},{}", r.iterations, r.converged)?;
    }
    w.flush()?;
    Ok(())
}

/// One coordinate column followed by one column per sample.
pub fn write_centerlines(dir: &Path, name: &str, coord: &str, samples: &[(String, CenterlineSample)]) -> Result<()> {
    let mut w = create(dir, name)?;
    write!(w, "{coord}")?;
    for (label, _) in samples {
        write!(w, ",{label}")?;
    }
    writeln!(w)?;
    if let Some((_, first)) = samples.first() {
        for (i, c) in first.coordinates.iter().enumerate() {
            write!(w, "{c}")?;
            for (_, s) in samples {
                write!(w, ",{}", s.values[i])?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Velocity and pressure on a uniform `FIELD_POINTS x FIELD_POINTS` grid,
/// `x` varying fastest.
pub fn write_field_sample(dir: &Path, space: &TaylorHoodSpace, velocity: &[f64], pressure: &[f64]) -> Result<()> {
    let mut w = create(dir, "field_sample.csv")?;
    writeln!(w, "{FIELD_HEADER}")?;
    let last = (FIELD_POINTS - 1) as f64;
    for j in 0..FIELD_POINTS {
        for i in 0..FIELD_POINTS {
            let p = Point2::new(i as f64 / last, j as f64 / last);
            let u = space.evaluate_velocity(velocity, p)?.value;
            let pr = space.evaluate_pressure(pressure, p)?;
            writeln!(w, "{},{},{},{},{},{}", p.x, p.y, u[0], u[1], u[0].hypot(u[1]), pr)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_contraction(dir: &Path, label: &str, trace: &ContractionTrace) -> Result<()> {
    let mut w = create(dir, &format!("contraction_{label}.csv"))?;
    trace.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_ghia(dir: &Path) -> Result<()> {
    std::fs::write(dir.join("ghia_u.csv"), GHIA_U_CSV)?;
    std::fs::write(dir.join("ghia_v.csv"), GHIA_V_CSV)?;
    Ok(())
}
