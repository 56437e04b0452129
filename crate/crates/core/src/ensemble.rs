//! Sampled hybrid densities and their quantum moment fields.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ehrenfest::{advance, Microstate};
use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::pauli::{entropy_term, HermitianSpectrum, PauliVector, SymmetricTwoBody};
use crate::scenario::{ConditionalMixtureField, OperatorField};

/// Nodes whose marginal falls below this value have no conditional state.
pub const UNDEFINED_THRESHOLD: f64 = 1e-12;

/// Kernel support radius in bandwidths.
pub const KERNEL_CUTOFF: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedMicrostate {
    pub w: f64,
    pub state: Microstate,
}

/// Weighted microstates approximating `F_QC`.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub members: Vec<WeightedMicrostate>,
    pub rng_seed: u64,
    pub origin: String,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.members.iter().map(|m| m.w).sum()
    }

    /// Current time of the members (all members share it).
    pub fn time(&self) -> f64 {
        self.members.first().map_or(0.0, |m| m.state.t)
    }
}

/// RNG for member `index` of a run seeded with `seed`.
pub fn member_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws `n` equally weighted members. Member `i` uses its own RNG stream,
/// so the result does not depend on scheduling.
pub fn sample_initial(density: &ConditionalMixtureField, n: usize, seed: u64) -> Result<Ensemble> {
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let w = 1.0 / n as f64;
    let members = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = member_rng(seed, i as u64);
            let (xi, psi) = density.sample(&mut rng);
            WeightedMicrostate { w, state: Microstate::new(xi, psi) }
        })
        .collect();
    Ok(Ensemble { members, rng_seed: seed, origin: "sampled".into() })
}

/// Advances every member by `t` along its Ehrenfest trajectory.
pub fn propagate(e: &Ensemble, h: &OperatorField, t: f64, dt: f64) -> Result<Ensemble> {
    if t == 0.0 {
        return Ok(e.clone());
    }
    let members = e
        .members
        .par_iter()
        .map(|m| advance(&m.state, h, t, dt).map(|(s, _)| WeightedMicrostate { w: m.w, state: s }))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { members, rng_seed: e.rng_seed, origin: e.origin.clone() })
}

/// `F_C`, `ρ̂(ξ)` and optionally `ρ̂^{⊗2}(ξ)` on the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentField {
    pub grid: PhaseGrid,
    pub f_c: Vec<f64>,
    pub first: Option<Vec<PauliVector>>,
    pub second: Option<Vec<SymmetricTwoBody>>,
}

impl MomentField {
    /// Highest moment carried.
    pub fn order(&self) -> usize {
        if self.second.is_some() {
            2
        } else if self.first.is_some() {
            1
        } else {
            0
        }
    }

    pub fn first(&self) -> Result<&[PauliVector]> {
        self.first
            .as_deref()
            .ok_or(Error::MissingMoment { have: self.order(), need: 1 })
    }

    pub fn second(&self) -> Result<&[SymmetricTwoBody]> {
        self.second
            .as_deref()
            .ok_or(Error::MissingMoment { have: self.order(), need: 2 })
    }

    /// Builds a first-order field; `F_C` is taken as the trace.
    pub fn from_first(grid: PhaseGrid, first: Vec<PauliVector>) -> Self {
        let f_c = first.iter().map(|m| m.trace()).collect();
        Self { grid, f_c, first: Some(first), second: None }
    }

    /// Exact moments of a delta-mixture density sampled at the nodes.
    pub fn from_density(density: &ConditionalMixtureField, grid: PhaseGrid, k: usize) -> Self {
        let pts = grid.points();
        let f_c: Vec<f64> = pts.par_iter().map(|&x| density.f_c(x)).collect();
        let first = (k >= 1).then(|| {
            pts.par_iter()
                .map(|&x| {
                    let mut m = density.first_moment(x);
                    m.mu[0] = 0.5 * density.f_c(x);
                    m
                })
                .collect()
        });
        let second = (k >= 2).then(|| pts.par_iter().map(|&x| density.second_moment(x)).collect());
        Self { grid, f_c, first, second }
    }

    /// `∫ F_C` over the grid.
    pub fn total_probability(&self) -> f64 {
        self.grid.integrate(&self.f_c)
    }

    /// Drops moments above order `k`.
    pub fn truncated(&self, k: usize) -> Self {
        Self {
            grid: self.grid,
            f_c: self.f_c.clone(),
            first: if k >= 1 { self.first.clone() } else { None },
            second: if k >= 2 { self.second.clone() } else { None },
        }
    }

    pub fn is_finite(&self) -> bool {
        self.f_c.iter().all(|x| x.is_finite())
            && self.first.as_ref().is_none_or(|v| v.iter().all(|m| m.is_finite()))
            && self.second.as_ref().is_none_or(|v| v.iter().all(|m| m.is_finite()))
    }
}

/// Silverman-type bandwidth `σ N^{-1/6}` with `σ` the pooled standard
/// deviation of `R` and `P`.
pub fn silverman_bandwidth(e: &Ensemble) -> Result<f64> {
    if e.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let w: f64 = e.total_weight();
    let (mut mr, mut mp) = (0.0, 0.0);
    for m in &e.members {
        mr += m.w * m.state.xi.r;
        mp += m.w * m.state.xi.p;
    }
    mr /= w;
    mp /= w;
    let mut var = 0.0;
    for m in &e.members {
        var += m.w * ((m.state.xi.r - mr).powi(2) + (m.state.xi.p - mp).powi(2));
    }
    let sigma = (0.5 * var / w).sqrt();
    let sigma = if sigma > 0.0 { sigma } else { 1.0 };
    Ok(sigma * (e.len() as f64).powf(-1.0 / 6.0))
}

/// Member indices binned on square cells of side `cell`, for kernel sums.
pub(crate) struct Bins {
    r0: f64,
    p0: f64,
    cell: f64,
    nr: usize,
    np: usize,
    start: Vec<usize>,
    items: Vec<usize>,
}

impl Bins {
    pub(crate) fn new(points: &[(f64, f64)], cell: f64) -> Self {
        let (mut r0, mut r1, mut p0, mut p1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(r, p) in points {
            r0 = r0.min(r);
            r1 = r1.max(r);
            p0 = p0.min(p);
            p1 = p1.max(p);
        }
        if points.is_empty() {
            (r0, r1, p0, p1) = (0.0, 0.0, 0.0, 0.0);
        }
        let nr = (((r1 - r0) / cell).floor() as usize + 1).min(1 << 12);
        let np = (((p1 - p0) / cell).floor() as usize + 1).min(1 << 12);
        let cell_of = |r: f64, p: f64| {
            let i = (((r - r0) / cell) as usize).min(nr - 1);
            let j = (((p - p0) / cell) as usize).min(np - 1);
            i * np + j
        };
        let mut counts = vec![0usize; nr * np + 1];
        for &(r, p) in points {
            counts[cell_of(r, p) + 1] += 1;
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0; points.len()];
        for (idx, &(r, p)) in points.iter().enumerate() {
            let c = cell_of(r, p);
            items[fill[c]] = idx;
            fill[c] += 1;
        }
        Self { r0, p0, cell, nr, np, start: counts, items }
    }

    /// Indices within the cells overlapping the square of half-side `radius`
    /// around `(r, p)`, in a fixed order.
    pub(crate) fn for_each_near(&self, r: f64, p: f64, radius: f64, mut f: impl FnMut(usize)) {
        let lo = |x: f64, x0: f64, n: usize| -> Option<usize> {
            let v = ((x - radius - x0) / self.cell).floor();
            if v >= n as f64 { None } else { Some(v.max(0.0) as usize) }
        };
        let hi = |x: f64, x0: f64, n: usize| -> Option<usize> {
            let v = ((x + radius - x0) / self.cell).floor();
            if v < 0.0 { None } else { Some((v as usize).min(n - 1)) }
        };
        let (Some(i0), Some(i1), Some(j0), Some(j1)) = (
            lo(r, self.r0, self.nr),
            hi(r, self.r0, self.nr),
            lo(p, self.p0, self.np),
            hi(p, self.p0, self.np),
        ) else {
            return;
        };
        for i in i0..=i1 {
            for j in j0..=j1 {
                let c = i * self.np + j;
                for &idx in &self.items[self.start[c]..self.start[c + 1]] {
                    f(idx);
                }
            }
        }
    }
}

/// Normalized isotropic Gaussian kernel `exp(-d²/2b²) / (2π b²)`.
pub fn kernel(dr: f64, dp: f64, bandwidth: f64) -> f64 {
    let b2 = bandwidth * bandwidth;
    (-(dr * dr + dp * dp) / (2.0 * b2)).exp() / (2.0 * std::f64::consts::PI * b2)
}

/// Gaussian-kernel estimate of the `k`-th moment field (and all lower ones):
/// node value `Σ_i w_i K(ξ - ξ_i) (ρψ_i)^{⊗k}`.
///
/// Every node accumulates the same kernel weight `c_i = w_i K` into `F_C`,
/// `c_i μ_a` and `c_i μ_a μ_b` with `μ0 = 1/2`, so `Tr ρ̂ = F_C` and the
/// partial-trace chain hold exactly.
pub fn estimate_moment_field(e: &Ensemble, grid: &PhaseGrid, k: usize, bandwidth: f64) -> Result<MomentField> {
    if e.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if k > 2 {
        return Err(Error::InvalidArgument(format!("moment order {k} not supported")));
    }
    let points: Vec<(f64, f64)> = e.members.iter().map(|m| (m.state.xi.r, m.state.xi.p)).collect();
    let radius = KERNEL_CUTOFF * bandwidth;
    let bins = Bins::new(&points, radius);
    let r2max = radius * radius;
    let per_node: Vec<(f64, PauliVector, SymmetricTwoBody)> = grid
        .points()
        .par_iter()
        .map(|x| {
            let mut f = 0.0;
            let mut first = PauliVector::ZERO;
            let mut second = SymmetricTwoBody::ZERO;
            bins.for_each_near(x.r, x.p, radius, |idx| {
                let m = &e.members[idx];
                let (dr, dp) = (x.r - m.state.xi.r, x.p - m.state.xi.p);
                if dr * dr + dp * dp > r2max {
                    return;
                }
                let c = m.w * kernel(dr, dp, bandwidth);
                f += c;
                if k >= 1 {
                    let mu = m.state.psi.projector().mu;
                    first += PauliVector { mu: mu.map(|v| c * v) };
                    if k >= 2 {
                        let cm: [f64; 4] = mu.map(|v| c * v);
                        second.mu00 += cm[0] * mu[0];
                        for a in 1..4 {
                            second.mu0k[a - 1] += cm[a] * mu[0];
                            for b in a..4 {
                                second.mujk[crate::pauli::jk_index(a, b)] += cm[a] * mu[b];
                            }
                        }
                    }
                }
            });
            (f, first, second)
        })
        .collect();
    let f_c = per_node.iter().map(|v| v.0).collect();
    let first = (k >= 1).then(|| per_node.iter().map(|v| v.1).collect());
    let second = (k >= 2).then(|| per_node.iter().map(|v| v.2).collect());
    Ok(MomentField { grid: *grid, f_c, first, second })
}

/// Where averages are computed from.
#[derive(Clone, Copy, Debug)]
pub enum Source<'a> {
    Ensemble(&'a Ensemble),
    Field(&'a MomentField),
}

/// `⟨Â⟩ = ∫ F_QC f_Â`: `Σ_i w_i Tr(ρψ_i Â(ξ_i))` for an ensemble, or the
/// quadrature of `Tr(ρ̂(ξ) Â(ξ))` for a field.
pub fn average_observable(a: &OperatorField, source: Source<'_>) -> Result<f64> {
    match source {
        Source::Ensemble(e) => {
            if e.is_empty() {
                return Err(Error::EmptyEnsemble);
            }
            Ok(e.members.iter().map(|m| m.w * a.expectation(m.state.xi, m.state.psi.n())).sum())
        }
        Source::Field(f) => {
            let first = f.first()?;
            let vals: Vec<f64> = f
                .grid
                .points()
                .iter()
                .zip(first)
                .map(|(&x, rho)| rho.trace_product(&a.eval(x)))
                .collect();
            Ok(f.grid.integrate(&vals))
        }
    }
}

/// `⟨f_Â f_B̂⟩ = ∫ Tr(ρ̂^{⊗2}(ξ) (Â ⊗ B̂))`.
pub fn average_product(a: &OperatorField, b: &OperatorField, source: Source<'_>) -> Result<f64> {
    match source {
        Source::Ensemble(e) => {
            if e.is_empty() {
                return Err(Error::EmptyEnsemble);
            }
            Ok(e.members
                .iter()
                .map(|m| {
                    let n = m.state.psi.n();
                    m.w * a.expectation(m.state.xi, n) * b.expectation(m.state.xi, n)
                })
                .sum())
        }
        Source::Field(f) => {
            let second = f.second()?;
            let vals: Vec<f64> = f
                .grid
                .points()
                .iter()
                .zip(second)
                .map(|(&x, t)| t.expectation(&a.eval(x), &b.eval(x)))
                .collect();
            Ok(f.grid.integrate(&vals))
        }
    }
}

/// `F_C` and the conditional state `ρ̂_ξ = ρ̂(ξ)/F_C(ξ)`, `None` where
/// `F_C < 1e-12`.
#[derive(Clone, Debug)]
pub struct Factorized {
    pub f_c: Vec<f64>,
    pub conditional: Vec<Option<PauliVector>>,
}

impl Factorized {
    pub fn undefined_count(&self) -> usize {
        self.conditional.iter().filter(|c| c.is_none()).count()
    }
}

pub fn factorize(f: &MomentField) -> Result<Factorized> {
    let first = f.first()?;
    let conditional = f
        .f_c
        .iter()
        .zip(first)
        .map(|(&fc, rho)| (fc >= UNDEFINED_THRESHOLD).then(|| *rho * (1.0 / fc)))
        .collect();
    Ok(Factorized { f_c: f.f_c.clone(), conditional })
}

/// `S = -∫ Tr(ρ̂^{⊗k} log ρ̂^{⊗k})` for the highest moment `k` carried, in
/// nats. Nodes with `F_C < 1e-12` are skipped.
pub fn hybrid_entropy(f: &MomentField) -> Result<f64> {
    let pts = f.grid.points();
    let mut vals = vec![0.0; f.grid.len()];
    for (node, v) in vals.iter_mut().enumerate() {
        let fc = f.f_c[node];
        if fc < UNDEFINED_THRESHOLD {
            continue;
        }
        let ev: Vec<f64> = match f.order() {
            0 => vec![fc],
            1 => f.first()?[node].to_matrix().spectrum(),
            _ => f.second()?[node].to_matrix().spectrum(),
        };
        let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-10 * fc.max(1.0) {
            return Err(Error::IndefiniteNode {
                node,
                r: pts[node].r,
                p: pts[node].p,
                min_eigenvalue: min,
            });
        }
        *v = ev.into_iter().map(entropy_term).sum();
    }
    Ok(f.grid.integrate(&vals))
}

/// Classical Shannon part `-∫ F_C log F_C` and `F_C`-weighted von Neumann
/// part of [`hybrid_entropy`].
pub fn hybrid_entropy_split(f: &MomentField) -> Result<(f64, f64)> {
    let classical: Vec<f64> = f.f_c.iter().map(|&x| if x >= UNDEFINED_THRESHOLD { entropy_term(x) } else { 0.0 }).collect();
    let total = hybrid_entropy(f)?;
    let c = f.grid.integrate(&classical);
    Ok((c, total - c))
}
