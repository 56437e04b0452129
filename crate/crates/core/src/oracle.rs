//! Monte Carlo finite-difference oracles for the moment equations.
//!
//! Every member is stepped by `±δ` along its Ehrenfest trajectory. The
//! kernel-weighted central difference of its moment contribution is one
//! sample of `d/dt (K ∗ ρ̂)`; means and standard errors follow from the
//! per-member samples. Deterministic references are convolved with the same
//! kernel so that smoothing bias cancels.

use rayon::prelude::*;
use serde::Serialize;

use crate::ehrenfest::{rk4_step, RawState};
use crate::ensemble::{kernel, Bins, Ensemble, KERNEL_CUTOFF};
use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::pauli::PauliVector;
use crate::scenario::{ClassicalPoint, OperatorField};

/// Members stepped forward and backward by `delta`.
#[derive(Clone, Debug)]
pub struct SteppedEnsemble {
    pub delta: f64,
    pub w: Vec<f64>,
    pub plus: Vec<(ClassicalPoint, PauliVector)>,
    pub minus: Vec<(ClassicalPoint, PauliVector)>,
}

fn projector_coords(s: &RawState) -> (ClassicalPoint, PauliVector) {
    let norm = s.bloch_norm();
    let n = s.n.map(|x| x / norm);
    (s.xi(), PauliVector::new(0.5, 0.5 * n[0], 0.5 * n[1], 0.5 * n[2]))
}

/// One RK4 step of `+delta` and one of `-delta` for every member.
pub fn step_both_ways(e: &Ensemble, h: &OperatorField, delta: f64) -> Result<SteppedEnsemble> {
    if e.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let pairs: Vec<_> = e
        .members
        .par_iter()
        .map(|m| {
            let s = RawState::from_microstate(&m.state);
            (
                projector_coords(&rk4_step(&s, h, delta)),
                projector_coords(&rk4_step(&s, h, -delta)),
            )
        })
        .collect();
    Ok(SteppedEnsemble {
        delta,
        w: e.members.iter().map(|m| m.w).collect(),
        plus: pairs.iter().map(|p| p.0).collect(),
        minus: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Node-wise mean and standard error of the rate of `K ∗ ρ̂`. Component 0
/// carries `Ḟ_C / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct McRate {
    pub grid: PhaseGrid,
    pub bandwidth: f64,
    pub mean: Vec<PauliVector>,
    pub standard_error: Vec<PauliVector>,
}

/// Kernel-weighted central difference `Σ_i w_i [K(ξ-ξ_i⁺) μ_i⁺ - K(ξ-ξ_i⁻) μ_i⁻] / 2δ`.
pub fn mc_field_rate(s: &SteppedEnsemble, grid: &PhaseGrid, bandwidth: f64) -> Result<McRate> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let n = s.w.len() as f64;
    let radius = KERNEL_CUTOFF * bandwidth;
    let r2max = radius * radius;
    let drift = s
        .plus
        .iter()
        .zip(&s.minus)
        .map(|(a, b)| (a.0.r - b.0.r).hypot(a.0.p - b.0.p))
        .fold(0.0, f64::max);
    let centres: Vec<(f64, f64)> = s.plus.iter().map(|(x, _)| (x.r, x.p)).collect();
    let bins = Bins::new(&centres, radius + drift);
    let scale = 1.0 / (2.0 * s.delta);
    let per_node: Vec<(PauliVector, PauliVector)> = grid
        .points()
        .par_iter()
        .map(|x| {
            let mut sum = [0.0; 4];
            let mut sum2 = [0.0; 4];
            let weight = |y: ClassicalPoint| {
                let (dr, dp) = (x.r - y.r, x.p - y.p);
                if dr * dr + dp * dp > r2max { 0.0 } else { kernel(dr, dp, bandwidth) }
            };
            bins.for_each_near(x.r, x.p, radius + drift, |idx| {
                let (xp, mp) = s.plus[idx];
                let (xm, mm) = s.minus[idx];
                let (kp, km) = (weight(xp), weight(xm));
                if kp == 0.0 && km == 0.0 {
                    return;
                }
                for a in 0..4 {
                    let y = s.w[idx] * n * (kp * mp.mu[a] - km * mm.mu[a]) * scale;
                    sum[a] += y;
                    sum2[a] += y * y;
                }
            });
            let mean: [f64; 4] = sum.map(|v| v / n);
            let se: [f64; 4] = std::array::from_fn(|a| {
                let var = (sum2[a] / n - mean[a] * mean[a]).max(0.0) * n / (n - 1.0).max(1.0);
                (var / n).sqrt()
            });
            (PauliVector { mu: mean }, PauliVector { mu: se })
        })
        .collect();
    Ok(McRate {
        grid: *grid,
        bandwidth,
        mean: per_node.iter().map(|v| v.0).collect(),
        standard_error: per_node.iter().map(|v| v.1).collect(),
    })
}

/// Mean and standard error of the central difference of `Σ_i w_i μ(ψ_i)`,
/// the Monte Carlo estimate of `d/dt ∫ ρ̂`.
pub fn mc_integrated_rate(s: &SteppedEnsemble) -> (PauliVector, PauliVector) {
    let n = s.w.len() as f64;
    let scale = 1.0 / (2.0 * s.delta);
    let ys: Vec<[f64; 4]> = s
        .plus
        .iter()
        .zip(&s.minus)
        .zip(&s.w)
        .map(|((p, m), w)| std::array::from_fn(|a| w * n * (p.1.mu[a] - m.1.mu[a]) * scale))
        .collect();
    let mean: [f64; 4] = std::array::from_fn(|a| ys.iter().map(|y| y[a]).sum::<f64>() / n);
    let se: [f64; 4] = std::array::from_fn(|a| {
        let var = ys.iter().map(|y| (y[a] - mean[a]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (var / n).sqrt()
    });
    (PauliVector { mu: mean }, PauliVector { mu: se })
}

/// `(K ∗ g)(ξ)` at the nodes of `target` by midpoint quadrature over `source`.
pub fn convolve(source: &PhaseGrid, values: &[PauliVector], target: &PhaseGrid, bandwidth: f64) -> Vec<PauliVector> {
    let radius = KERNEL_CUTOFF * bandwidth;
    let area = source.cell_area();
    let span = |x: f64, x0: f64, d: f64, n: usize| -> std::ops::Range<usize> {
        let lo = ((x - radius - x0) / d - 0.5).floor().max(0.0);
        let hi = ((x + radius - x0) / d - 0.5).ceil() + 1.0;
        let hi = hi.clamp(0.0, n as f64);
        (lo.min(hi) as usize)..(hi as usize)
    };
    target
        .points()
        .par_iter()
        .map(|x| {
            let mut acc = PauliVector::ZERO;
            for i in span(x.r, source.r_min, source.dr(), source.n_r) {
                let dr = x.r - source.r(i);
                for j in span(x.p, source.p_min, source.dp(), source.n_p) {
                    let dp = x.p - source.p(j);
                    if dr * dr + dp * dp > radius * radius {
                        continue;
                    }
                    acc += values[source.index(i, j)] * kernel(dr, dp, bandwidth);
                }
            }
            acc * area
        })
        .collect()
}

/// A kernel-smoothed deterministic reference with a node-wise
/// discretization estimate `|ref_h - ref_2h|`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedReference {
    pub values: Vec<PauliVector>,
    pub discretization: Vec<PauliVector>,
}

/// Evaluates `rate` on a grid of spacing `spacing` and on one of spacing
/// `2·spacing` covering `domain = [R_min, R_max, P_min, P_max]`, convolves
/// both onto `target`, and keeps the fine result.
pub fn smoothed_reference(
    rate: impl Fn(&PhaseGrid) -> Result<Vec<PauliVector>>,
    domain: [f64; 4],
    spacing: f64,
    target: &PhaseGrid,
    bandwidth: f64,
) -> Result<SmoothedReference> {
    let [r0, r1, p0, p1] = domain;
    let nodes = |len: f64, h: f64| ((len / h).round() as usize).max(crate::grid::MIN_NODES);
    let fine = PhaseGrid::new(r0, r1, p0, p1, nodes(r1 - r0, spacing), nodes(p1 - p0, spacing))?;
    let coarse = PhaseGrid::new(r0, r1, p0, p1, nodes(r1 - r0, 2.0 * spacing), nodes(p1 - p0, 2.0 * spacing))?;
    let values = convolve(&fine, &rate(&fine)?, target, bandwidth);
    let other = convolve(&coarse, &rate(&coarse)?, target, bandwidth);
    let discretization = values
        .iter()
        .zip(&other)
        .map(|(a, b)| PauliVector { mu: std::array::from_fn(|k| (a.mu[k] - b.mu[k]).abs()) })
        .collect();
    Ok(SmoothedReference { values, discretization })
}

/// L2 distance between a Monte Carlo rate and a reference for one
/// component, with the combined error bar `sqrt(∫ se² + ∫ disc²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct L2Check {
    pub component: usize,
    pub error: f64,
    pub standard_error: f64,
    pub discretization: f64,
    pub combined: f64,
    /// `error / combined`.
    pub ratio: f64,
}

pub fn l2_check(mc: &McRate, reference: &SmoothedReference, component: usize) -> L2Check {
    let g = &mc.grid;
    let diff: Vec<f64> = mc
        .mean
        .iter()
        .zip(&reference.values)
        .map(|(a, b)| a.mu[component] - b.mu[component])
        .collect();
    let se: Vec<f64> = mc.standard_error.iter().map(|v| v.mu[component]).collect();
    let disc: Vec<f64> = reference.discretization.iter().map(|v| v.mu[component]).collect();
    let error = g.l2_norm(&diff);
    let (standard_error, discretization) = (g.l2_norm(&se), g.l2_norm(&disc));
    let combined = standard_error.hypot(discretization);
    L2Check {
        component,
        error,
        standard_error,
        discretization,
        combined,
        ratio: if combined > 0.0 { error / combined } else { f64::INFINITY },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::sample_initial;
    use crate::pauli::PureBlochState;
    use crate::scenario::gaussian_pure_density;

    #[test]
    fn convolution_preserves_mass() {
        let src = PhaseGrid::square(6.0, 120).unwrap();
        let tgt = PhaseGrid::square(2.0, 16).unwrap();
        let vals = vec![PauliVector::scalar(1.0); src.len()];
        for v in convolve(&src, &vals, &tgt, 0.3) {
            assert!((v.mu[0] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn static_ensemble_has_zero_rate() {
        let d = gaussian_pure_density(ClassicalPoint::new(0.0, 0.0), 1.0, PureBlochState::new(0.0, 0.0, 1.0).unwrap());
        let e = sample_initial(&d, 2000, 3).unwrap();
        let h = OperatorField::pauli(3);
        let s = step_both_ways(&e, &h, 1e-3).unwrap();
        let g = PhaseGrid::square(3.0, 12).unwrap();
        let r = mc_field_rate(&s, &g, 0.4).unwrap();
        for (m, se) in r.mean.iter().zip(&r.standard_error) {
            assert!(m.max_abs_diff(&PauliVector::ZERO) < 1e-9);
            assert!(se.max_abs_diff(&PauliVector::ZERO) < 1e-9);
        }
        let (m, _) = mc_integrated_rate(&s);
        assert!(m.max_abs_diff(&PauliVector::ZERO) < 1e-12);
    }

    #[test]
    fn integrated_rate_of_precession() {
        let d = gaussian_pure_density(ClassicalPoint::new(0.0, 0.0), 1.0, PureBlochState::new(1.0, 0.0, 0.0).unwrap());
        let e = sample_initial(&d, 100, 3).unwrap();
        let s = step_both_ways(&e, &OperatorField::pauli(3), 1e-3).unwrap();
        let (m, se) = mc_integrated_rate(&s);
        assert!((m.mu[2] - 1.0).abs() < 1e-6);
        assert!(se.mu[2] < 1e-9);
    }
}
