//! Grid evolution of the closed first-moment equation and the harness that
//! compares it against a Monte Carlo ensemble.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{
    estimate_moment_field, propagate, sample_initial, silverman_bandwidth, Ensemble, MomentField, UNDEFINED_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::grid::{PhaseGrid, StencilOrder};
use crate::hierarchy::{first_moment_rhs_nodes, NodalHamiltonian};
use crate::maxent::{effective_first_moment_rhs_nodes, ClosureMethod};
use crate::pauli::{purity, PauliVector};
use crate::scenario::{OperatorField, Scenario};

/// Report times as fractions of `t_end`.
pub const DEFAULT_SAMPLE_FRACTIONS: [f64; 7] = [0.0, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0];

/// Probability drift above which [`EvolutionDiagnostics::probability_warning`] is set.
pub const PROBABILITY_WARNING: f64 = 1e-3;

const PURITY_MARGIN: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub t_end: f64,
    pub dt: f64,
    pub closure: ClosureMethod,
    pub stencil: StencilOrder,
    pub sample_fractions: Vec<f64>,
    /// Rescale conditional Bloch vectors that leave the unit ball after each step.
    pub purity_projection: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt: 1e-3,
            closure: ClosureMethod::ClosedForm,
            stencil: StencilOrder::Second,
            sample_fractions: DEFAULT_SAMPLE_FRACTIONS.to_vec(),
            purity_projection: false,
        }
    }
}

impl EvolutionConfig {
    /// Sorted, deduplicated report times.
    pub fn sample_times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.sample_fractions.iter().map(|f| f * self.t_end).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if let Some(f) = self.sample_fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::InvalidArgument(format!("sample fraction {f} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Field state at one report time.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub field: MomentField,
    pub total_probability: f64,
    /// Share of defined nodes whose conditional purity exceeds `1/2 + 1e-8`.
    pub unphysical_fraction: f64,
    /// Share of nodes with `F_C < 0`.
    pub negative_fraction: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EvolutionDiagnostics {
    pub steps: usize,
    /// `min(ΔR, ΔP) / (4 max speed)`.
    pub cfl_limit: f64,
    pub cfl_warning: bool,
    pub max_probability_drift: f64,
    pub probability_warning: bool,
    pub max_unphysical_fraction: f64,
    pub max_negative_fraction: f64,
    pub projected_nodes: usize,
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: EvolutionDiagnostics,
}

impl Evolution {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("evolution has at least one snapshot")
    }

    /// Snapshot closest to `t`.
    pub fn at(&self, t: f64) -> &Snapshot {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("evolution has at least one snapshot")
    }
}

/// Largest transport speed `Σ_a |∇H_a|` over the nodes.
pub fn max_field_speed(hn: &NodalHamiltonian) -> f64 {
    hn.h_r
        .iter()
        .zip(&hn.h_p)
        .map(|(r, p)| (0..4).map(|a| r.mu[a].hypot(p.mu[a])).sum::<f64>())
        .fold(0.0, f64::max)
}

fn node_stats(first: &[PauliVector]) -> (f64, f64) {
    let mut defined = 0usize;
    let mut unphysical = 0usize;
    let mut negative = 0usize;
    for rho in first {
        let f = rho.trace();
        if f < 0.0 {
            negative += 1;
        }
        if f >= UNDEFINED_THRESHOLD {
            defined += 1;
            if purity(&(*rho * (1.0 / f))) > 0.5 + PURITY_MARGIN {
                unphysical += 1;
            }
        }
    }
    let unphysical_fraction = if defined == 0 { 0.0 } else { unphysical as f64 / defined as f64 };
    (unphysical_fraction, negative as f64 / first.len() as f64)
}

fn project_purity(first: &mut [PauliVector]) -> usize {
    let mut count = 0;
    for rho in first.iter_mut() {
        let f = rho.trace();
        if f < UNDEFINED_THRESHOLD {
            continue;
        }
        let s = rho.spatial();
        let len2 = s.iter().map(|x| x * x).sum::<f64>();
        let bound = 0.5 * f;
        if len2 > bound * bound {
            let c = bound / len2.sqrt();
            for k in 1..4 {
                rho.mu[k] *= c;
            }
            count += 1;
        }
    }
    count
}

struct Rhs<'a> {
    grid: PhaseGrid,
    hn: NodalHamiltonian,
    cfg: &'a EvolutionConfig,
    boundary: Vec<bool>,
}

impl Rhs<'_> {
    fn eval(&self, first: &[PauliVector]) -> Vec<PauliVector> {
        let mut d = effective_first_moment_rhs_nodes(&self.grid, first, &self.hn, &self.cfg.closure, self.cfg.stencil)
            .rhs
            .d_first;
        for (v, &b) in d.iter_mut().zip(&self.boundary) {
            if b {
                *v = PauliVector::ZERO;
            }
        }
        d
    }

    fn rk4(&self, y: &[PauliVector], dt: f64) -> Vec<PauliVector> {
        let axpy = |k: &[PauliVector], c: f64| -> Vec<PauliVector> {
            y.par_iter().zip(k).map(|(a, b)| *a + *b * c).collect()
        };
        let k1 = self.eval(y);
        let k2 = self.eval(&axpy(&k1, 0.5 * dt));
        let k3 = self.eval(&axpy(&k2, 0.5 * dt));
        let k4 = self.eval(&axpy(&k3, dt));
        (0..y.len())
            .into_par_iter()
            .map(|i| y[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0))
            .collect()
    }
}

/// Integrates the effective equation with RK4 from a first-moment field.
///
/// Boundary nodes are held at their initial values (zero for a compactly
/// supported density). Snapshots are taken at [`EvolutionConfig::sample_times`];
/// between report times the step is shortened so that every report time is
/// hit exactly.
pub fn evolve_effective(initial: &MomentField, h: &OperatorField, cfg: &EvolutionConfig) -> Result<Evolution> {
    cfg.validate()?;
    let grid = initial.grid;
    let mut y: Vec<PauliVector> = initial.first()?.to_vec();
    let rhs = Rhs {
        grid,
        hn: NodalHamiltonian::sample(&grid, h),
        cfg,
        boundary: (0..grid.len()).map(|i| grid.is_boundary(i)).collect(),
    };
    let speed = max_field_speed(&rhs.hn);
    let cfl_limit = if speed > 0.0 { grid.dr().min(grid.dp()) / (4.0 * speed) } else { f64::INFINITY };
    let mut diag = EvolutionDiagnostics {
        cfl_limit,
        cfl_warning: cfg.dt > cfl_limit,
        ..Default::default()
    };

    let make_snapshot = |t: f64, y: &[PauliVector]| -> Result<Snapshot> {
        let field = MomentField::from_first(grid, y.to_vec());
        let (unphysical_fraction, negative_fraction) = node_stats(y);
        let energy = crate::ensemble::average_observable(h, crate::ensemble::Source::Field(&field))?;
        Ok(Snapshot {
            t,
            total_probability: field.total_probability(),
            field,
            unphysical_fraction,
            negative_fraction,
            energy,
        })
    };

    let p0 = grid.integrate(&y.iter().map(|m| m.trace()).collect::<Vec<_>>());
    let mut snapshots = Vec::new();
    let mut t = 0.0;
    for target in cfg.sample_times() {
        let span = target - t;
        if span > 0.0 {
            let n = (span / cfg.dt).ceil().max(1.0) as usize;
            let h_step = span / n as f64;
            for k in 0..n {
                let next = rhs.rk4(&y, h_step);
                let t_next = if k + 1 == n { target } else { t + h_step };
                if next.iter().any(|m| !m.is_finite()) {
                    return Err(Error::EvolutionAborted {
                        t: t_next,
                        last_good: Box::new(MomentField::from_first(grid, y)),
                    });
                }
                y = next;
                if cfg.purity_projection {
                    diag.projected_nodes += project_purity(&mut y);
                }
                t = t_next;
                diag.steps += 1;
                let p = grid.integrate(&y.iter().map(|m| m.trace()).collect::<Vec<_>>());
                diag.max_probability_drift = diag.max_probability_drift.max((p - p0).abs());
                let (u, neg) = node_stats(&y);
                diag.max_unphysical_fraction = diag.max_unphysical_fraction.max(u);
                diag.max_negative_fraction = diag.max_negative_fraction.max(neg);
            }
        }
        snapshots.push(make_snapshot(target, &y)?);
    }
    diag.probability_warning = diag.max_probability_drift > PROBABILITY_WARNING;
    let (u, neg) = node_stats(initial.first()?);
    diag.max_unphysical_fraction = diag.max_unphysical_fraction.max(u);
    diag.max_negative_fraction = diag.max_negative_fraction.max(neg);
    Ok(Evolution { snapshots, diagnostics: diag })
}

/// Observables tracked by [`compare_to_ensemble`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    #[serde(rename = "sigma1")]
    Sigma1,
    #[serde(rename = "sigma2")]
    Sigma2,
    #[serde(rename = "sigma3")]
    Sigma3,
    R,
    P,
    #[serde(rename = "H")]
    Energy,
}

impl Observable {
    pub const DEFAULT: [Observable; 4] = [Observable::Sigma1, Observable::Sigma3, Observable::R, Observable::P];

    pub fn name(&self) -> &'static str {
        match self {
            Observable::Sigma1 => "sigma1",
            Observable::Sigma2 => "sigma2",
            Observable::Sigma3 => "sigma3",
            Observable::R => "R",
            Observable::P => "P",
            Observable::Energy => "H",
        }
    }

    pub fn field(&self, h: &OperatorField) -> OperatorField {
        match self {
            Observable::Sigma1 => OperatorField::pauli(1),
            Observable::Sigma2 => OperatorField::pauli(2),
            Observable::Sigma3 => OperatorField::pauli(3),
            Observable::R => OperatorField::position(),
            Observable::P => OperatorField::momentum(),
            Observable::Energy => h.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComparisonConfig {
    pub n_members: usize,
    pub seed: u64,
    /// Kernel bandwidth; Silverman's rule on the initial ensemble if absent.
    pub bandwidth: Option<f64>,
    /// Step of the microstate integrator.
    pub mc_dt: f64,
    pub evolution: EvolutionConfig,
    pub observables: Vec<Observable>,
    /// Also evolve on a grid with half the nodes per axis and report the
    /// difference as the grid error bar.
    pub grid_error: bool,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            n_members: 100_000,
            seed: 1,
            bandwidth: None,
            mc_dt: 1e-3,
            evolution: EvolutionConfig::default(),
            observables: Observable::DEFAULT.to_vec(),
            grid_error: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldError {
    pub name: String,
    pub l2: f64,
    pub linf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableError {
    pub name: String,
    pub mc_mean: f64,
    pub mc_standard_error: f64,
    pub effective: f64,
    pub grid_error: Option<f64>,
    pub error: f64,
    /// `error / sqrt(se² + grid²)`.
    pub combined_z: f64,
}

/// Effective right-hand side with the closure replaced by the estimated
/// second moment, against the closed one, both on the estimated first moment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosureControl {
    pub l2_difference: f64,
    pub l2_reference: f64,
    pub relative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonTime {
    pub t: f64,
    pub fields: Vec<FieldError>,
    pub observables: Vec<ObservableError>,
    pub closure_control: ClosureControl,
    pub unphysical_fraction: f64,
    pub total_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub grid: PhaseGrid,
    pub coarse_grid: Option<PhaseGrid>,
    pub n_members: usize,
    pub seed: u64,
    pub bandwidth: f64,
    pub mc_dt: f64,
    pub dt: f64,
    pub closure: String,
    pub times: Vec<ComparisonTime>,
    pub diagnostics: EvolutionDiagnostics,
}

fn field_errors(mc: &MomentField, eff: &MomentField) -> Result<Vec<FieldError>> {
    mc.grid.check_same(&eff.grid)?;
    let grid = mc.grid;
    let (a, b) = (mc.first()?, eff.first()?);
    let mut out = Vec::with_capacity(4);
    let diff_fc: Vec<f64> = mc.f_c.iter().zip(&eff.f_c).map(|(x, y)| x - y).collect();
    out.push(FieldError {
        name: "F_C".into(),
        l2: grid.l2_norm(&diff_fc),
        linf: diff_fc.iter().fold(0.0, |m, v| m.max(v.abs())),
    });
    for j in 1..4 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.mu[j] - y.mu[j]).collect();
        out.push(FieldError {
            name: format!("mu{j}"),
            l2: grid.l2_norm(&d),
            linf: d.iter().fold(0.0, |m, v| m.max(v.abs())),
        });
    }
    Ok(out)
}

/// Mean and standard error of `Tr(ρψ_i Â(ξ_i))` over an equally weighted ensemble.
pub fn observable_statistics(a: &OperatorField, e: &Ensemble) -> Result<(f64, f64)> {
    if e.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let vals: Vec<f64> = e.members.iter().map(|m| a.expectation(m.state.xi, m.state.psi.n())).collect();
    let w: Vec<f64> = e.members.iter().map(|m| m.w).collect();
    let wsum: f64 = w.iter().sum();
    let mean = vals.iter().zip(&w).map(|(v, w)| v * w).sum::<f64>() / wsum;
    let n = vals.len() as f64;
    let var = if vals.len() > 1 {
        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok((mean * wsum, (var / n).sqrt() * wsum))
}

fn closure_control(mc: &MomentField, hn: &NodalHamiltonian, cfg: &EvolutionConfig) -> Result<ClosureControl> {
    let first = mc.first()?;
    let exact = first_moment_rhs_nodes(&mc.grid, first, mc.second()?, hn, cfg.stencil);
    let closed = effective_first_moment_rhs_nodes(&mc.grid, first, hn, &cfg.closure, cfg.stencil).rhs;
    let mut diff2 = 0.0;
    let mut ref2 = 0.0;
    for j in 0..4 {
        let d: Vec<f64> = exact.d_first.iter().zip(&closed.d_first).map(|(x, y)| x.mu[j] - y.mu[j]).collect();
        let r: Vec<f64> = exact.d_first.iter().map(|x| x.mu[j]).collect();
        diff2 += mc.grid.l2_norm(&d).powi(2);
        ref2 += mc.grid.l2_norm(&r).powi(2);
    }
    let (l2_difference, l2_reference) = (diff2.sqrt(), ref2.sqrt());
    Ok(ClosureControl {
        l2_difference,
        l2_reference,
        relative: if l2_reference > 0.0 { l2_difference / l2_reference } else { 0.0 },
    })
}

/// Runs the Monte Carlo ensemble and the effective evolution from the same
/// initial density and reports field and observable errors at every report
/// time, together with the exact-closure control.
pub fn compare_to_ensemble(scenario: &Scenario, grid: &PhaseGrid, cfg: &ComparisonConfig) -> Result<ComparisonReport> {
    let h = &scenario.hamiltonian;
    let evo_cfg = &cfg.evolution;
    let initial = MomentField::from_density(&scenario.initial, *grid, 1);
    let evolution = evolve_effective(&initial, h, evo_cfg)?;

    let coarse_grid = (cfg.grid_error && grid.n_r >= 16 && grid.n_p >= 16)
        .then(|| PhaseGrid::new(grid.r_min, grid.r_max, grid.p_min, grid.p_max, grid.n_r / 2, grid.n_p / 2))
        .transpose()?;
    let coarse = coarse_grid
        .map(|g| evolve_effective(&MomentField::from_density(&scenario.initial, g, 1), h, evo_cfg))
        .transpose()?;

    let mut ensemble = sample_initial(&scenario.initial, cfg.n_members, cfg.seed)?;
    let bandwidth = match cfg.bandwidth {
        Some(b) => b,
        None => silverman_bandwidth(&ensemble)?,
    };
    let hn = NodalHamiltonian::sample(grid, h);
    let observables: Vec<(Observable, OperatorField)> = cfg.observables.iter().map(|o| (*o, o.field(h))).collect();

    let mut t_mc = 0.0;
    let mut times = Vec::new();
    for (idx, snap) in evolution.snapshots.iter().enumerate() {
        ensemble = propagate(&ensemble, h, snap.t - t_mc, cfg.mc_dt)?;
        t_mc = snap.t;
        let mc_field = estimate_moment_field(&ensemble, grid, 2, bandwidth)?;
        let mut obs = Vec::with_capacity(observables.len());
        for (o, a) in &observables {
            let (mc_mean, se) = observable_statistics(a, &ensemble)?;
            let effective = crate::ensemble::average_observable(a, crate::ensemble::Source::Field(&snap.field))?;
            let grid_error = coarse
                .as_ref()
                .map(|c| {
                    crate::ensemble::average_observable(a, crate::ensemble::Source::Field(&c.snapshots[idx].field))
                        .map(|v| (v - effective).abs())
                })
                .transpose()?;
            let error = (effective - mc_mean).abs();
            let bar = (se * se + grid_error.unwrap_or(0.0).powi(2)).sqrt();
            obs.push(ObservableError {
                name: o.name().into(),
                mc_mean,
                mc_standard_error: se,
                effective,
                grid_error,
                error,
                combined_z: if bar > 0.0 { error / bar } else { f64::INFINITY },
            });
        }
        times.push(ComparisonTime {
            t: snap.t,
            fields: field_errors(&mc_field, &snap.field)?,
            observables: obs,
            closure_control: closure_control(&mc_field, &hn, evo_cfg)?,
            unphysical_fraction: snap.unphysical_fraction,
            total_probability: snap.total_probability,
        });
    }
    Ok(ComparisonReport {
        scenario: scenario.name.clone(),
        grid: *grid,
        coarse_grid,
        n_members: cfg.n_members,
        seed: cfg.seed,
        bandwidth,
        mc_dt: cfg.mc_dt,
        dt: evo_cfg.dt,
        closure: evo_cfg.closure.label(),
        times,
        diagnostics: evolution.diagnostics,
    })
}
