//! CSV writers with fixed column orders.
//!
//! | table        | columns                                                        |
//! |--------------|----------------------------------------------------------------|
//! | trajectory   | `t,R,P,nx,ny,nz,f_H`                                           |
//! | moment field | `R,P,F_C,mu1,mu2,mu3` then `mu00,mu01,…,mu33` when second moment is present |
//! | ensemble     | `w,R,P,nx,ny,nz`                                               |
//! | fig1         | `R,theta,dmu1,dmu3`                                            |
//! | closure      | `index,mu0..mu3,method,converged,iterations,entropy,t11..t33,…` |

use std::io::Write;

use crate::ehrenfest::Trajectory;
use crate::ensemble::{Ensemble, MomentField};
use crate::error::Result;
use crate::evolution::ComparisonReport;
use crate::hierarchy::Fig1Row;
use crate::maxent::ClosureResult;
use crate::pauli::{PauliVector, SymmetricTwoBody};

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["t", "R", "P", "nx", "ny", "nz", "f_H"])?;
    for s in &traj.samples {
        w.write_record([s.t, s.xi.r, s.xi.p, s.n[0], s.n[1], s.n[2], s.energy].map(fmt))?;
    }
    w.flush()?;
    Ok(())
}

const SECOND_COLUMNS: [(usize, usize); 10] =
    [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)];

pub fn write_moment_field<W: Write>(out: W, field: &MomentField) -> Result<()> {
    let mut w = writer(out);
    let first = field.first.as_deref();
    let second = field.second.as_deref();
    let mut header: Vec<String> = ["R", "P", "F_C"].map(String::from).to_vec();
    if first.is_some() {
        header.extend(["mu1", "mu2", "mu3"].map(String::from));
    }
    if second.is_some() {
        header.extend(SECOND_COLUMNS.iter().map(|(a, b)| format!("mu{a}{b}")));
    }
    w.write_record(&header)?;
    for (node, xi) in field.grid.points().iter().enumerate() {
        let mut row = vec![xi.r, xi.p, field.f_c[node]];
        if let Some(f) = first {
            row.extend_from_slice(&f[node].mu[1..]);
        }
        if let Some(s) = second {
            row.extend(SECOND_COLUMNS.iter().map(|&(a, b)| s[node].coeff(a, b)));
        }
        w.write_record(row.into_iter().map(fmt))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ensemble<W: Write>(out: W, e: &Ensemble) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["w", "R", "P", "nx", "ny", "nz"])?;
    for m in &e.members {
        let n = m.state.psi.n();
        w.write_record([m.w, m.state.xi.r, m.state.xi.p, n[0], n[1], n[2]].map(fmt))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_fig1<W: Write>(out: W, rows: &[Fig1Row]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["R", "theta", "dmu1", "dmu3"])?;
    for r in rows {
        w.write_record([r.r, r.theta, r.dmu1, r.dmu3].map(fmt))?;
    }
    w.flush()?;
    Ok(())
}

/// One closure per row; failed closures keep the input columns and the error.
pub fn write_closure_report<W: Write>(out: W, rows: &[(PauliVector, std::result::Result<ClosureResult, String>)]) -> Result<()> {
    let mut w = writer(out);
    let mut header: Vec<String> = ["index", "mu0", "mu1", "mu2", "mu3", "method", "converged", "iterations", "entropy"]
        .map(String::from)
        .to_vec();
    header.extend(SECOND_COLUMNS[4..].iter().map(|(a, b)| format!("t{a}{b}")));
    header.extend(
        ["variance_min", "cauchy_schwarz_min", "diagonal_sum", "diagonal_sum_alt", "min_eigenvalue", "worst_violation", "error"]
            .map(String::from),
    );
    w.write_record(&header)?;
    for (i, (mu, res)) in rows.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(mu.mu.map(fmt));
        match res {
            Ok(r) => {
                row.push(r.method.clone());
                row.push(r.converged.to_string());
                row.push(r.iterations.to_string());
                row.push(fmt(r.entropy_value));
                row.extend(second_spatial(&r.second).map(fmt));
                let c = &r.constraint_residuals;
                row.push(fmt(c.variance.iter().copied().fold(f64::INFINITY, f64::min)));
                row.push(fmt(c.cauchy_schwarz.iter().copied().fold(f64::INFINITY, f64::min)));
                row.push(fmt(c.diagonal_sum));
                row.push(fmt(c.diagonal_sum_alt));
                row.push(fmt(c.min_eigenvalue));
                row.push(fmt(c.worst_violation()));
                row.push(String::new());
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 4 + 6 + 6));
                row.push(e.clone());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn second_spatial(t: &SymmetricTwoBody) -> [f64; 6] {
    std::array::from_fn(|k| {
        let (a, b) = SECOND_COLUMNS[4 + k];
        t.coeff(a, b)
    })
}

/// Long-format comparison table:
/// `t,kind,name,l2,linf,mc_mean,mc_se,effective,grid_error,error,combined_z`.
pub fn write_comparison<W: Write>(out: W, report: &ComparisonReport) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "t", "kind", "name", "l2", "linf", "mc_mean", "mc_se", "effective", "grid_error", "error", "combined_z",
    ])?;
    let blank = String::new;
    for ct in &report.times {
        for f in &ct.fields {
            w.write_record([
                fmt(ct.t),
                "field".into(),
                f.name.clone(),
                fmt(f.l2),
                fmt(f.linf),
                blank(),
                blank(),
                blank(),
                blank(),
                blank(),
                blank(),
            ])?;
        }
        for o in &ct.observables {
            w.write_record([
                fmt(ct.t),
                "observable".into(),
                o.name.clone(),
                blank(),
                blank(),
                fmt(o.mc_mean),
                fmt(o.mc_standard_error),
                fmt(o.effective),
                o.grid_error.map_or_else(blank, fmt),
                fmt(o.error),
                fmt(o.combined_z),
            ])?;
        }
        let c = &ct.closure_control;
        w.write_record([
            fmt(ct.t),
            "closure_control".into(),
            "rhs".into(),
            fmt(c.l2_difference),
            blank(),
            blank(),
            blank(),
            fmt(c.l2_reference),
            blank(),
            fmt(c.relative),
            blank(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes to `path`, creating parent directories.
pub fn to_file(path: &std::path::Path, f: impl FnOnce(std::io::BufWriter<std::fs::File>) -> Result<()>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    f(std::io::BufWriter::new(std::fs::File::create(path)?))
}
