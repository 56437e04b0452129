//! The quantum moment hierarchy: right-hand sides of the moment equations,
//! marginal equations, rates of averages, and the θ-family of densities that
//! share a first moment.

use rayon::prelude::*;

use crate::ensemble::MomentField;
use crate::error::{Error, Result};
use crate::grid::{derivative_p, derivative_r, point_stencil, PhaseGrid, StencilOrder};
use crate::pauli::{commutator_coords, partial_trace_first, PauliVector, PureBlochState, SymmetricTwoBody};
use crate::scenario::{ClassicalPoint, ConditionalMixtureField, OperatorField};

/// Dense symmetric third-moment coefficients `t_abc`.
pub type ThirdMoment = [[[f64; 4]; 4]; 4];

/// Time derivatives of the moments at every node.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyRHS {
    pub grid: PhaseGrid,
    pub d_f_c: Vec<f64>,
    pub d_first: Vec<PauliVector>,
    pub d_second: Option<Vec<SymmetricTwoBody>>,
}

/// `Ĥ(ξ)` and its partials sampled at the nodes of a grid.
#[derive(Clone, Debug)]
pub struct NodalHamiltonian {
    pub h: Vec<PauliVector>,
    pub h_r: Vec<PauliVector>,
    pub h_p: Vec<PauliVector>,
}

impl NodalHamiltonian {
    pub fn sample(grid: &PhaseGrid, h: &OperatorField) -> Self {
        let pts = grid.points();
        Self {
            h: pts.par_iter().map(|&x| h.eval(x)).collect(),
            h_r: pts.par_iter().map(|&x| h.d_r(x)).collect(),
            h_p: pts.par_iter().map(|&x| h.d_p(x)).collect(),
        }
    }

    fn component(v: &[PauliVector], a: usize) -> Vec<f64> {
        v.iter().map(|m| m.mu[a]).collect()
    }
}

/// `Σ_a {H_a, g_a}` in conservative form, for coefficient fields `g_a`.
fn bracket_sum(
    grid: &PhaseGrid,
    hn: &NodalHamiltonian,
    coeff: impl Fn(usize, usize) -> f64 + Sync,
    stencil: StencilOrder,
) -> Vec<f64> {
    let n = grid.len();
    let mut flux_p = vec![0.0; n];
    let mut flux_r = vec![0.0; n];
    for node in 0..n {
        for a in 0..4 {
            let g = coeff(node, a);
            flux_p[node] += g * hn.h_r[node].mu[a];
            flux_r[node] += g * hn.h_p[node].mu[a];
        }
    }
    let a = derivative_p(grid, &flux_p, stencil);
    let b = derivative_r(grid, &flux_r, stencil);
    a.into_iter().zip(b).map(|(a, b)| a - b).collect()
}

/// First-moment right-hand side on raw nodal arrays:
/// `ρ̇̂ = [Ĥ, ρ̂] + Tr_1({Ĥ ⊗ I, ρ̂^{⊗2}}_C)`, whose classical term has
/// components `2 Σ_a {H_a, t_ab}`.
pub fn first_moment_rhs_nodes(
    grid: &PhaseGrid,
    first: &[PauliVector],
    second: &[SymmetricTwoBody],
    hn: &NodalHamiltonian,
    stencil: StencilOrder,
) -> HierarchyRHS {
    let mut d_first: Vec<PauliVector> = first
        .iter()
        .zip(&hn.h)
        .map(|(rho, h)| commutator_coords(h, rho))
        .collect();
    for b in 0..4 {
        let term = bracket_sum(grid, hn, |node, a| second[node].coeff(a, b), stencil);
        for (d, t) in d_first.iter_mut().zip(term) {
            d.mu[b] += 2.0 * t;
        }
    }
    let d_f_c = d_first.iter().map(|d| d.trace()).collect();
    HierarchyRHS { grid: *grid, d_f_c, d_first, d_second: None }
}

/// Exact first-moment equation fed with a given second moment.
pub fn first_moment_rhs(
    first: &MomentField,
    second: &MomentField,
    h: &OperatorField,
    stencil: StencilOrder,
) -> Result<HierarchyRHS> {
    first.grid.check_same(&second.grid)?;
    let hn = NodalHamiltonian::sample(&first.grid, h);
    Ok(first_moment_rhs_nodes(&first.grid, first.first()?, second.second()?, &hn, stencil))
}

/// The moment supplied to close level `k`.
#[derive(Clone, Copy, Debug)]
pub enum UpperMoment<'a> {
    Second(&'a MomentField),
    Third(&'a [ThirdMoment]),
}

/// Right-hand side of level `k ∈ {1, 2}`: the commutator with the sum of
/// one-body embeddings `Ĥ^k` plus `Tr_1` of the classical bracket of
/// `Ĥ ⊗ I^{⊗k}` with the next moment. For `k = 2`, `d_first` and `d_f_c`
/// hold the traces of `d_second`.
pub fn kth_moment_rhs(
    k: usize,
    lower: &MomentField,
    upper: UpperMoment<'_>,
    h: &OperatorField,
    stencil: StencilOrder,
) -> Result<HierarchyRHS> {
    match (k, upper) {
        (1, UpperMoment::Second(second)) => first_moment_rhs(lower, second, h, stencil),
        (2, UpperMoment::Third(third)) => {
            let grid = lower.grid;
            if third.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "third moment has {} nodes, grid has {}",
                    third.len(),
                    grid.len()
                )));
            }
            let second = lower.second()?;
            let hn = NodalHamiltonian::sample(&grid, h);
            let mut d = vec![[[0.0; 4]; 4]; grid.len()];
            for (node, dt) in d.iter_mut().enumerate() {
                let m = spatial_generator(&hn.h[node]);
                let t = second[node].coeffs();
                for b in 0..4 {
                    for c in 0..4 {
                        let mut s = 0.0;
                        for e in 0..4 {
                            s += m[b][e] * t[e][c] + t[b][e] * m[c][e];
                        }
                        dt[b][c] = s;
                    }
                }
            }
            for b in 0..4 {
                for c in b..4 {
                    let term = bracket_sum(&grid, &hn, |node, a| third[node][a][b][c], stencil);
                    for (dt, x) in d.iter_mut().zip(term) {
                        dt[b][c] += 2.0 * x;
                        if b != c {
                            dt[c][b] += 2.0 * x;
                        }
                    }
                }
            }
            let d_second: Vec<SymmetricTwoBody> =
                d.iter().map(SymmetricTwoBody::from_coeffs_unchecked).collect();
            let d_first: Vec<PauliVector> = d_second.iter().map(partial_trace_first).collect();
            let d_f_c = d_first.iter().map(|x| x.trace()).collect();
            Ok(HierarchyRHS { grid, d_f_c, d_first, d_second: Some(d_second) })
        }
        _ => Err(Error::InvalidArgument(format!(
            "level {k} needs the moment of order {}",
            k + 1
        ))),
    }
}

/// Matrix `M` with `M μ = coordinates of [Ĥ, ρ]` for `μ = (μ0, μ1, μ2, μ3)`.
fn spatial_generator(h: &PauliVector) -> [[f64; 4]; 4] {
    let [h1, h2, h3] = h.spatial();
    [
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, -2.0 * h3, 2.0 * h2],
        [0.0, 2.0 * h3, 0.0, -2.0 * h1],
        [0.0, -2.0 * h2, 2.0 * h1, 0.0],
    ]
}

/// Marginal equations: `Ḟ_C = Tr({Ĥ, ρ̂}_C)` node-wise and the global
/// quantum state rate `∫ [Ĥ, ρ̂(ξ)] dξ`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalRhs {
    pub d_f_c: Vec<f64>,
    pub d_rho: PauliVector,
}

pub fn marginal_rhs(first: &MomentField, h: &OperatorField, stencil: StencilOrder) -> Result<MarginalRhs> {
    let grid = first.grid;
    let rho = first.first()?;
    let hn = NodalHamiltonian::sample(&grid, h);
    let d_f_c = bracket_sum(&grid, &hn, |node, a| rho[node].mu[a], stencil)
        .into_iter()
        .map(|x| 2.0 * x)
        .collect();
    let comm: Vec<PauliVector> = rho.iter().zip(&hn.h).map(|(r, h)| commutator_coords(h, r)).collect();
    let mut d_rho = PauliVector::ZERO;
    for j in 0..4 {
        d_rho.mu[j] = grid.integrate(&NodalHamiltonian::component(&comm, j));
    }
    Ok(MarginalRhs { d_f_c, d_rho })
}

/// `d⟨Â⟩/dt = ∫ Tr(ρ̂ [Â, Ĥ]) + 4 ∫ [(∂_R A)ᵀ T (∂_P H) - (∂_R H)ᵀ T (∂_P A)]`
/// with `T` the two-body coefficients of `ρ̂^{⊗2}`.
pub fn average_rate(
    a: &OperatorField,
    first: &MomentField,
    second: &MomentField,
    h: &OperatorField,
) -> Result<f64> {
    first.grid.check_same(&second.grid)?;
    let rho = first.first()?;
    let t2 = second.second()?;
    let vals: Vec<f64> = first
        .grid
        .points()
        .par_iter()
        .enumerate()
        .map(|(node, &x)| {
            let (av, ar, ap) = (a.eval(x), a.d_r(x), a.d_p(x));
            let (hv, hr, hp) = (h.eval(x), h.d_r(x), h.d_p(x));
            let quantum = rho[node].trace_product(&commutator_coords(&av, &hv));
            let t = &t2[node];
            let classical = 4.0 * (bilinear(t, &ar, &hp) - bilinear(t, &hr, &ap));
            quantum + classical
        })
        .collect();
    Ok(first.grid.integrate(&vals))
}

fn bilinear(t: &SymmetricTwoBody, x: &PauliVector, y: &PauliVector) -> f64 {
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            s += x.mu[a] * t.coeff(a, b) * y.mu[b];
        }
    }
    s
}

/// `∫ Tr(ρ̇̂(ξ) Â(ξ))` for a precomputed right-hand side.
pub fn average_rate_from_rhs(a: &OperatorField, rhs: &HierarchyRHS) -> f64 {
    let vals: Vec<f64> = rhs
        .grid
        .points()
        .iter()
        .zip(&rhs.d_first)
        .map(|(&x, d)| d.trace_product(&a.eval(x)))
        .collect();
    rhs.grid.integrate(&vals)
}

/// `ρ = w1 π̂(n1) + w2 π̂(n2)` with `n1 = (sin θ, 0, cos θ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaDecomposition {
    pub w1: f64,
    pub n1: PureBlochState,
    pub w2: f64,
    pub n2: PureBlochState,
}

impl ThetaDecomposition {
    pub fn reconstruct(&self) -> PauliVector {
        self.n1.projector() * self.w1 + self.n2.projector() * self.w2
    }

    /// `w1 π̂1 ⊗ π̂1 + w2 π̂2 ⊗ π̂2`.
    pub fn second(&self) -> SymmetricTwoBody {
        SymmetricTwoBody::square(&self.n1.projector()).scaled(self.w1)
            + SymmetricTwoBody::square(&self.n2.projector()).scaled(self.w2)
    }
}

const PURE_TOL: f64 = 1e-12;

/// Splits a mixed conditional state into two pure states, one of them fixed
/// at angle `θ` in the x-z plane. The second lies where the ray from `n1`
/// through the Bloch vector `r` meets the sphere again.
pub fn theta_decomposition(rho_cond: &PauliVector, theta: f64) -> Result<ThetaDecomposition> {
    let r = rho_cond.spatial().map(|x| 2.0 * x);
    let rn = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if rn >= 1.0 - PURE_TOL {
        return Err(Error::PureState);
    }
    let n1 = PureBlochState::in_xz_plane(theta);
    let m = n1.n();
    let d = [r[0] - m[0], r[1] - m[1], r[2] - m[2]];
    let d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    if d2 < PURE_TOL * PURE_TOL {
        return Err(Error::DegenerateRay);
    }
    let t = -2.0 * (m[0] * d[0] + m[1] * d[1] + m[2] * d[2]) / d2;
    let n2 = PureBlochState::normalized([m[0] + t * d[0], m[1] + t * d[1], m[2] + t * d[2]])?;
    let w2 = 1.0 / t;
    Ok(ThetaDecomposition { w1: 1.0 - w2, n1, w2, n2 })
}

/// Second moment `F_C Σ_k w_k π̂_k ⊗ π̂_k` of the θ-family member at `ξ`,
/// with the trace-back coordinates taken from the first moment. Pure
/// conditional states have a unique decomposition, used as is.
pub fn theta_family_second(density: &ConditionalMixtureField, xi: ClassicalPoint, theta: f64) -> SymmetricTwoBody {
    let cond = density.conditional_first(xi);
    let mut t = match theta_decomposition(&cond, theta) {
        Ok(dec) => dec.second(),
        Err(_) => density.conditional_second(xi),
    };
    t.mu00 = 0.25;
    for k in 0..3 {
        t.mu0k[k] = 0.5 * cond.mu[k + 1];
    }
    let f = density.f_c(xi);
    let mut out = t.scaled(f);
    let first = cond * f;
    out.mu00 = 0.5 * first.mu[0];
    for k in 0..3 {
        out.mu0k[k] = 0.5 * first.mu[k + 1];
    }
    out
}

/// First-moment right-hand side at a single point, for moment functions
/// that can be evaluated anywhere. Classical derivatives use point stencils
/// of spacing `step` on the fluxes `t_ab ∂H_a`.
pub fn first_moment_rhs_at(
    xi: ClassicalPoint,
    h: &OperatorField,
    first: PauliVector,
    second: impl Fn(ClassicalPoint) -> SymmetricTwoBody,
    step: f64,
    stencil: StencilOrder,
) -> PauliVector {
    let mut out = commutator_coords(&h.eval(xi), &first);
    let (offsets, weights) = point_stencil(stencil);
    for (&o, &w) in offsets.iter().zip(weights) {
        let xp = xi.shifted(0.0, o * step);
        let (tp, hrp) = (second(xp), h.d_r(xp));
        let xr = xi.shifted(o * step, 0.0);
        let (tr, hpr) = (second(xr), h.d_p(xr));
        for b in 0..4 {
            let mut fp = 0.0;
            let mut fr = 0.0;
            for a in 0..4 {
                fp += tp.coeff(a, b) * hrp.mu[a];
                fr += tr.coeff(a, b) * hpr.mu[a];
            }
            out.mu[b] += 2.0 * w * (fp - fr) / step;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Fig1Config {
    pub r_min: f64,
    pub r_max: f64,
    pub n_r: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    pub n_theta: usize,
    pub p_fixed: f64,
    /// Point-stencil spacing for classical derivatives.
    pub step: f64,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Self {
            r_min: -3.0,
            r_max: 3.0,
            n_r: 121,
            theta_min: 0.0,
            theta_max: std::f64::consts::PI,
            n_theta: 121,
            p_fixed: 0.0,
            step: 1e-2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Fig1Row {
    #[serde(rename = "R")]
    pub r: f64,
    pub theta: f64,
    pub dmu1: f64,
    pub dmu3: f64,
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// For each `(R, θ)` builds the θ-family density sharing the first moment of
/// `density` and returns the σ1 and σ3 coordinates of `ρ̇̂(ξ)` at
/// `ξ = (R, P_fixed)`. Rows are ordered by `R`, then `θ`.
pub fn fig1_scan(h: &OperatorField, density: &ConditionalMixtureField, cfg: &Fig1Config) -> Result<Vec<Fig1Row>> {
    if cfg.n_r == 0 || cfg.n_theta == 0 {
        return Err(Error::InvalidArgument("fig1 ranges must be nonempty".into()));
    }
    if !(cfg.step > 0.0) {
        return Err(Error::InvalidArgument(format!("fig1 step must be positive, got {}", cfg.step)));
    }
    let rs = linspace(cfg.r_min, cfg.r_max, cfg.n_r);
    let thetas = linspace(cfg.theta_min, cfg.theta_max, cfg.n_theta);
    let jobs: Vec<(f64, f64)> = rs.iter().flat_map(|&r| thetas.iter().map(move |&t| (r, t))).collect();
    Ok(jobs
        .par_iter()
        .map(|&(r, theta)| {
            let xi = ClassicalPoint::new(r, cfg.p_fixed);
            let d = first_moment_rhs_at(
                xi,
                h,
                density.first_moment(xi),
                |x| theta_family_second(density, x, theta),
                cfg.step,
                StencilOrder::Fourth,
            );
            Fig1Row { r, theta, dmu1: d.mu[1], dmu3: d.mu[3] }
        })
        .collect())
}
