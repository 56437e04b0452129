//! Classically parametrized Hamiltonians and initial hybrid densities.

use std::f64::consts::{FRAC_2_PI, PI};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::expr;
use crate::pauli::{PauliVector, PureBlochState, SymmetricTwoBody};

/// A point `ξ = (R, P)` of the classical phase space.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClassicalPoint {
    pub r: f64,
    pub p: f64,
}

impl ClassicalPoint {
    pub const fn new(r: f64, p: f64) -> Self {
        Self { r, p }
    }

    pub fn shifted(self, dr: f64, dp: f64) -> Self {
        Self::new(self.r + dr, self.p + dp)
    }
}

pub type PointFn = Arc<dyn Fn(ClassicalPoint) -> PauliVector + Send + Sync>;

/// An operator-valued function of `ξ` without derivative information.
#[derive(Clone)]
pub struct PointwiseField {
    eval: PointFn,
}

impl PointwiseField {
    pub fn new(f: impl Fn(ClassicalPoint) -> PauliVector + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(f) }
    }

    pub fn eval(&self, xi: ClassicalPoint) -> PauliVector {
        (self.eval)(xi)
    }

    /// Builds a field from four coordinate expressions `H0..H3` in `R` and `P`.
    pub fn from_expressions(sources: [&str; 4]) -> Result<Self> {
        let parsed = sources
            .iter()
            .map(|s| expr::parse(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(move |xi| {
            PauliVector::new(
                parsed[0].eval(xi.r, xi.p),
                parsed[1].eval(xi.r, xi.p),
                parsed[2].eval(xi.r, xi.p),
                parsed[3].eval(xi.r, xi.p),
            )
        }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Provenance {
    Analytic,
    FiniteDifference { h: f64 },
}

/// `Ĥ(ξ)` in Pauli coordinates together with its classical partials.
///
/// The identity coordinate carries the classical part `H_C(ξ)`.
#[derive(Clone)]
pub struct OperatorField {
    eval: PointFn,
    d_r: PointFn,
    d_p: PointFn,
    provenance: Provenance,
}

impl fmt::Debug for OperatorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorField")
            .field("provenance", &self.provenance)
            .finish_non_exhaustive()
    }
}

impl OperatorField {
    pub fn analytic(
        eval: impl Fn(ClassicalPoint) -> PauliVector + Send + Sync + 'static,
        d_r: impl Fn(ClassicalPoint) -> PauliVector + Send + Sync + 'static,
        d_p: impl Fn(ClassicalPoint) -> PauliVector + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            d_r: Arc::new(d_r),
            d_p: Arc::new(d_p),
            provenance: Provenance::Analytic,
        }
    }

    pub fn constant(v: PauliVector) -> Self {
        Self::analytic(move |_| v, |_| PauliVector::ZERO, |_| PauliVector::ZERO)
    }

    pub fn identity() -> Self {
        Self::constant(PauliVector::scalar(1.0))
    }

    /// `σ_k` as a ξ-independent observable.
    pub fn pauli(k: usize) -> Self {
        let mut v = PauliVector::ZERO;
        v.mu[k] = 1.0;
        Self::constant(v)
    }

    /// The classical observable `R·I`.
    pub fn position() -> Self {
        Self::analytic(
            |xi| PauliVector::scalar(xi.r),
            |_| PauliVector::scalar(1.0),
            |_| PauliVector::ZERO,
        )
    }

    /// The classical observable `P·I`.
    pub fn momentum() -> Self {
        Self::analytic(
            |xi| PauliVector::scalar(xi.p),
            |_| PauliVector::ZERO,
            |_| PauliVector::scalar(1.0),
        )
    }

    pub fn eval(&self, xi: ClassicalPoint) -> PauliVector {
        (self.eval)(xi)
    }

    pub fn d_r(&self, xi: ClassicalPoint) -> PauliVector {
        (self.d_r)(xi)
    }

    pub fn d_p(&self, xi: ClassicalPoint) -> PauliVector {
        (self.d_p)(xi)
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn strip_partials(&self) -> PointwiseField {
        PointwiseField {
            eval: self.eval.clone(),
        }
    }

    /// `f_A(ξ, n) = Tr(ρψ Â(ξ))` for a pure state with Bloch vector `n`.
    pub fn expectation(&self, xi: ClassicalPoint, n: [f64; 3]) -> f64 {
        let a = self.eval(xi);
        a.mu[0] + a.mu[1] * n[0] + a.mu[2] * n[1] + a.mu[3] * n[2]
    }

    /// Sum of two fields.
    pub fn plus(&self, other: &OperatorField) -> OperatorField {
        let (a, b) = (self.clone(), other.clone());
        let (ar, br) = (self.clone(), other.clone());
        let (ap, bp) = (self.clone(), other.clone());
        let provenance = match (self.provenance, other.provenance) {
            (Provenance::Analytic, p) | (p, Provenance::Analytic) => p,
            (p, _) => p,
        };
        OperatorField {
            eval: Arc::new(move |xi| a.eval(xi) + b.eval(xi)),
            d_r: Arc::new(move |xi| ar.d_r(xi) + br.d_r(xi)),
            d_p: Arc::new(move |xi| ap.d_p(xi) + bp.d_p(xi)),
            provenance,
        }
    }

    /// `c · Â`.
    pub fn scaled(&self, c: f64) -> OperatorField {
        let (a, ar, ap) = (self.clone(), self.clone(), self.clone());
        OperatorField {
            eval: Arc::new(move |xi| a.eval(xi) * c),
            d_r: Arc::new(move |xi| ar.d_r(xi) * c),
            d_p: Arc::new(move |xi| ap.d_p(xi) * c),
            provenance: self.provenance,
        }
    }
}

pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Attaches centred-difference partials with step `h` to a pointwise field.
pub fn finite_difference_partials(field: &PointwiseField, h: f64) -> Result<OperatorField> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let fr = field.clone();
    let fp = field.clone();
    Ok(OperatorField {
        eval: field.eval.clone(),
        d_r: Arc::new(move |xi| {
            (fr.eval(xi.shifted(h, 0.0)) - fr.eval(xi.shifted(-h, 0.0))) * (0.5 / h)
        }),
        d_p: Arc::new(move |xi| {
            (fp.eval(xi.shifted(0.0, h)) - fp.eval(xi.shifted(0.0, -h))) * (0.5 / h)
        }),
        provenance: Provenance::FiniteDifference { h },
    })
}

/// `E1 = 1/(1+R²)` of the two-level example.
pub fn example_e1(r: f64) -> f64 {
    1.0 / (1.0 + r * r)
}

/// `E2 = E1 + 1 + 0.1 R²`.
pub fn example_e2(r: f64) -> f64 {
    example_e1(r) + 1.0 + 0.1 * r * r
}

/// `H = ½(R²+P²) I + E1 π̂1 + E2 π̂2` with `π̂1` at Bloch vector
/// `(sin R, 0, cos R)` and `π̂2 = I - π̂1`.
pub fn example_hamiltonian() -> OperatorField {
    fn h0(r: f64, p: f64) -> f64 {
        0.5 * (r * r + p * p) + 0.5 * (example_e1(r) + example_e2(r))
    }
    OperatorField::analytic(
        |xi| {
            let (r, p) = (xi.r, xi.p);
            let amp = -0.5 * (1.0 + 0.1 * r * r);
            PauliVector::new(h0(r, p), amp * r.sin(), 0.0, amp * r.cos())
        },
        |xi| {
            let r = xi.r;
            let q = 1.0 + r * r;
            let dh0 = r - 2.0 * r / (q * q) + 0.1 * r;
            let amp = -0.5 * (1.0 + 0.1 * r * r);
            let damp = -0.1 * r;
            PauliVector::new(
                dh0,
                damp * r.sin() + amp * r.cos(),
                0.0,
                damp * r.cos() - amp * r.sin(),
            )
        },
        |xi| PauliVector::new(xi.p, 0.0, 0.0, 0.0),
    )
}

/// The example Hamiltonian with its quantum part frozen at `R = 0`:
/// `H = (½(R²+P²) + 3/2) I - ½ σ3`.
pub fn uncoupled_hamiltonian() -> OperatorField {
    OperatorField::analytic(
        |xi| PauliVector::new(0.5 * (xi.r * xi.r + xi.p * xi.p) + 1.5, 0.0, 0.0, -0.5),
        |xi| PauliVector::scalar(xi.r),
        |xi| PauliVector::scalar(xi.p),
    )
}

/// Harmonic classical Hamiltonian `½(R²+P²) I` with no quantum part.
pub fn harmonic_hamiltonian() -> OperatorField {
    OperatorField::analytic(
        |xi| PauliVector::scalar(0.5 * (xi.r * xi.r + xi.p * xi.p)),
        |xi| PauliVector::scalar(xi.r),
        |xi| PauliVector::scalar(xi.p),
    )
}

pub type DensityFn = Arc<dyn Fn(ClassicalPoint) -> f64 + Send + Sync>;

/// The classical marginal `F_C`.
#[derive(Clone)]
pub enum ClassicalDensity {
    /// Isotropic Gaussian with the given centre and standard deviation.
    Gaussian { center: ClassicalPoint, sigma: f64 },
    /// Arbitrary nonnegative function on a box; normalized by quadrature.
    Custom {
        f: DensityFn,
        bounds: [f64; 4],
        norm: f64,
        peak: f64,
    },
}

impl fmt::Debug for ClassicalDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassicalDensity::Gaussian { center, sigma } => f
                .debug_struct("Gaussian")
                .field("center", center)
                .field("sigma", sigma)
                .finish(),
            ClassicalDensity::Custom { bounds, norm, .. } => f
                .debug_struct("Custom")
                .field("bounds", bounds)
                .field("norm", norm)
                .finish_non_exhaustive(),
        }
    }
}

const CUSTOM_SCAN: usize = 400;

impl ClassicalDensity {
    /// Wraps an unnormalized function on `[r_min, r_max] × [p_min, p_max]`.
    pub fn custom(
        f: impl Fn(ClassicalPoint) -> f64 + Send + Sync + 'static,
        bounds: [f64; 4],
    ) -> Result<Self> {
        let [r0, r1, p0, p1] = bounds;
        if !(r1 > r0 && p1 > p0) {
            return Err(Error::InvalidArgument(format!("empty density box {bounds:?}")));
        }
        let (dr, dp) = ((r1 - r0) / CUSTOM_SCAN as f64, (p1 - p0) / CUSTOM_SCAN as f64);
        let mut integral = 0.0;
        let mut peak: f64 = 0.0;
        for i in 0..CUSTOM_SCAN {
            for j in 0..CUSTOM_SCAN {
                let v = f(ClassicalPoint::new(
                    r0 + (i as f64 + 0.5) * dr,
                    p0 + (j as f64 + 0.5) * dp,
                ));
                if v < 0.0 || !v.is_finite() {
                    return Err(Error::Unnormalizable { integral: v });
                }
                integral += v * dr * dp;
                peak = peak.max(v);
            }
        }
        if !(integral > 0.0 && integral.is_finite()) {
            return Err(Error::Unnormalizable { integral });
        }
        Ok(ClassicalDensity::Custom {
            f: Arc::new(f),
            bounds,
            norm: integral,
            peak: 1.25 * peak,
        })
    }

    pub fn value(&self, xi: ClassicalPoint) -> f64 {
        match self {
            ClassicalDensity::Gaussian { center, sigma } => {
                let s2 = sigma * sigma;
                let d2 = (xi.r - center.r).powi(2) + (xi.p - center.p).powi(2);
                (-0.5 * d2 / s2).exp() / (2.0 * PI * s2)
            }
            ClassicalDensity::Custom { f, bounds, norm, .. } => {
                let [r0, r1, p0, p1] = *bounds;
                if xi.r < r0 || xi.r > r1 || xi.p < p0 || xi.p > p1 {
                    0.0
                } else {
                    f(xi) / norm
                }
            }
        }
    }

    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> ClassicalPoint {
        match self {
            ClassicalDensity::Gaussian { center, sigma } => {
                let zr: f64 = StandardNormal.sample(rng);
                let zp: f64 = StandardNormal.sample(rng);
                ClassicalPoint::new(center.r + sigma * zr, center.p + sigma * zp)
            }
            ClassicalDensity::Custom { f, bounds, peak, .. } => {
                let [r0, r1, p0, p1] = *bounds;
                loop {
                    let xi = ClassicalPoint::new(
                        r0 + (r1 - r0) * rng.random::<f64>(),
                        p0 + (p1 - p0) * rng.random::<f64>(),
                    );
                    if rng.random::<f64>() * peak <= f(xi) {
                        return xi;
                    }
                }
            }
        }
    }
}

pub type MixtureFn = Arc<dyn Fn(ClassicalPoint) -> Vec<(f64, PureBlochState)> + Send + Sync>;

/// `F_QC(ξ, ρψ) = F_C(ξ) Σ_k λ_k(ξ) δ(ρψ - π̂_k(ξ))`.
#[derive(Clone)]
pub struct ConditionalMixtureField {
    pub density: ClassicalDensity,
    components: MixtureFn,
}

impl fmt::Debug for ConditionalMixtureField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConditionalMixtureField")
            .field("density", &self.density)
            .finish_non_exhaustive()
    }
}

impl ConditionalMixtureField {
    pub fn new(
        density: ClassicalDensity,
        components: impl Fn(ClassicalPoint) -> Vec<(f64, PureBlochState)> + Send + Sync + 'static,
    ) -> Self {
        Self {
            density,
            components: Arc::new(components),
        }
    }

    pub fn f_c(&self, xi: ClassicalPoint) -> f64 {
        self.density.value(xi)
    }

    /// Weights and pure states of the conditional mixture at `ξ`.
    pub fn components(&self, xi: ClassicalPoint) -> Vec<(f64, PureBlochState)> {
        (self.components)(xi)
    }

    /// `ρ̂_ξ = Σ_k λ_k π̂_k`.
    pub fn conditional_first(&self, xi: ClassicalPoint) -> PauliVector {
        let mut r = self
            .components(xi)
            .into_iter()
            .fold(PauliVector::ZERO, |acc, (w, s)| acc + s.projector() * w);
        r.mu[0] = 0.5;
        r
    }

    /// `Σ_k λ_k π̂_k ⊗ π̂_k`, with the trace-back coordinates taken from the
    /// first moment so that the partial trace holds exactly.
    pub fn conditional_second(&self, xi: ClassicalPoint) -> SymmetricTwoBody {
        let mut t = self
            .components(xi)
            .iter()
            .fold(SymmetricTwoBody::ZERO, |acc, (w, s)| {
                acc + SymmetricTwoBody::square(&s.projector()).scaled(*w)
            });
        let first = self.conditional_first(xi);
        t.mu00 = 0.5 * first.mu[0];
        for k in 0..3 {
            t.mu0k[k] = 0.5 * first.mu[k + 1];
        }
        t
    }

    /// `ρ̂(ξ) = F_C(ξ) ρ̂_ξ`.
    pub fn first_moment(&self, xi: ClassicalPoint) -> PauliVector {
        self.conditional_first(xi) * self.f_c(xi)
    }

    /// `ρ̂^{⊗2}(ξ) = F_C(ξ) Σ_k λ_k π̂_k ⊗ π̂_k`.
    pub fn second_moment(&self, xi: ClassicalPoint) -> SymmetricTwoBody {
        let f = self.f_c(xi);
        let mut t = self.conditional_second(xi).scaled(f);
        let first = self.first_moment(xi);
        t.mu00 = 0.5 * first.mu[0];
        for k in 0..3 {
            t.mu0k[k] = 0.5 * first.mu[k + 1];
        }
        t
    }

    /// Dense third-moment coefficients `F_C Σ_k λ_k μ_a μ_b μ_c`.
    pub fn third_moment(&self, xi: ClassicalPoint) -> [[[f64; 4]; 4]; 4] {
        let f = self.f_c(xi);
        let mut out = [[[0.0; 4]; 4]; 4];
        for (w, s) in self.components(xi) {
            let mu = s.projector().mu;
            for a in 0..4 {
                for b in 0..4 {
                    for c in 0..4 {
                        out[a][b][c] += f * w * mu[a] * mu[b] * mu[c];
                    }
                }
            }
        }
        out
    }

    /// Draws a classical point from `F_C` and a pure state from the
    /// conditional mixture at that point.
    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> (ClassicalPoint, PureBlochState) {
        let xi = self.density.sample(rng);
        let comps = self.components(xi);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, s) in &comps {
            acc += w;
            if u < acc {
                return (xi, *s);
            }
        }
        let last = comps
            .iter()
            .rev()
            .find(|(w, _)| *w > 0.0)
            .or(comps.last())
            .expect("conditional mixture has no components");
        (xi, last.1)
    }
}

/// Weight `λ = (2/π) atan(R² + P²)` of the example density.
pub fn example_lambda(xi: ClassicalPoint) -> f64 {
    FRAC_2_PI * (xi.r * xi.r + xi.p * xi.p).atan()
}

/// The example density: standard Gaussian `F_C`, and the conditional state
/// `λ π̂1(a) + (1-λ) π̂2(a)` with `a = atan(R²+P²)`, `π̂1(a)` at Bloch vector
/// `(sin a, 0, cos a)` and `π̂2 = I - π̂1`.
pub fn example_initial_density() -> ConditionalMixtureField {
    ConditionalMixtureField::new(
        ClassicalDensity::Gaussian {
            center: ClassicalPoint::new(0.0, 0.0),
            sigma: 1.0,
        },
        |xi| {
            let a = (xi.r * xi.r + xi.p * xi.p).atan();
            let lam = FRAC_2_PI * a;
            let n1 = PureBlochState::in_xz_plane(a);
            vec![(lam, n1), (1.0 - lam, n1.antipode())]
        },
    )
}

/// Gaussian `F_C` with a ξ-independent pure conditional state.
pub fn gaussian_pure_density(
    center: ClassicalPoint,
    sigma: f64,
    state: PureBlochState,
) -> ConditionalMixtureField {
    ConditionalMixtureField::new(ClassicalDensity::Gaussian { center, sigma }, move |_| {
        vec![(1.0, state)]
    })
}

/// A Hamiltonian paired with an initial density.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub hamiltonian: OperatorField,
    pub initial: ConditionalMixtureField,
}

impl Scenario {
    pub fn example() -> Self {
        Self {
            name: "example".into(),
            hamiltonian: example_hamiltonian(),
            initial: example_initial_density(),
        }
    }

    /// The example density evolving under [`uncoupled_hamiltonian`].
    pub fn uncoupled() -> Self {
        Self {
            name: "uncoupled".into(),
            hamiltonian: uncoupled_hamiltonian(),
            initial: example_initial_density(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::HermitianSpectrum;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn example_hamiltonian_at_origin() {
        let h = example_hamiltonian();
        let v = h.eval(ClassicalPoint::new(0.0, 0.0));
        let ev = v.to_matrix().spectrum();
        assert!((ev[0] - 1.0).abs() < 1e-15 && (ev[1] - 2.0).abs() < 1e-15);
        // quantum part alone: H - classical ½(R²+P²) = 0 at origin
        let north = PureBlochState::new(0.0, 0.0, 1.0).unwrap();
        assert!((h.expectation(ClassicalPoint::new(0.0, 0.0), north.n()) - 1.0).abs() < 1e-15);
        assert_eq!(h.d_p(ClassicalPoint::new(0.0, 0.0)), PauliVector::ZERO);
    }

    #[test]
    fn example_hamiltonian_gap() {
        let h = example_hamiltonian();
        for r in [-2.0, -0.3, 1.0, 2.5] {
            let ev = h.eval(ClassicalPoint::new(r, 0.4)).to_matrix().spectrum();
            let classical = 0.5 * (r * r + 0.16);
            assert!((ev[0] - classical - example_e1(r)).abs() < 1e-14);
            assert!((ev[1] - classical - example_e2(r)).abs() < 1e-14);
        }
        let ev = h.eval(ClassicalPoint::new(1.0, 0.0)).to_matrix().spectrum();
        assert!((ev[1] - ev[0] - 1.1).abs() < 1e-14);
    }

    #[test]
    fn analytic_partials_match_differences() {
        let h = example_hamiltonian();
        let fd = finite_difference_partials(&h.strip_partials(), 1e-5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let xi = ClassicalPoint::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            assert!(h.d_r(xi).max_abs_diff(&fd.d_r(xi)) < 1e-8);
            assert!(h.d_p(xi).max_abs_diff(&fd.d_p(xi)) < 1e-8);
        }
    }

    #[test]
    fn finite_difference_rules() {
        let f = PointwiseField::new(|xi| PauliVector::new(xi.r * xi.p, 0.0, 0.0, 0.0));
        let d = finite_difference_partials(&f, 0.25).unwrap();
        let xi = ClassicalPoint::new(0.3, -1.7);
        assert!((d.d_r(xi).mu[0] - xi.p).abs() < 1e-14);
        assert!((d.d_p(xi).mu[0] - xi.r).abs() < 1e-14);
        let c = finite_difference_partials(&PointwiseField::new(|_| PauliVector::new(1.0, 2.0, 3.0, 4.0)), 1e-3)
            .unwrap();
        assert_eq!(c.d_r(xi), PauliVector::ZERO);
        assert!(matches!(finite_difference_partials(&f, 0.0), Err(Error::InvalidArgument(_))));
        assert_eq!(d.provenance(), Provenance::FiniteDifference { h: 0.25 });
    }

    #[test]
    fn expression_field_matches_example() {
        let f = PointwiseField::from_expressions([
            "0.5*(R^2+P^2) + 1/(1+R^2) + 0.5 + 0.05*R^2",
            "-0.5*(1+0.1*R^2)*sin(R)",
            "0",
            "-0.5*(1+0.1*R^2)*cos(R)",
        ])
        .unwrap();
        let h = example_hamiltonian();
        for (r, p) in [(0.0, 0.0), (1.3, -0.4), (-2.2, 3.0)] {
            let xi = ClassicalPoint::new(r, p);
            assert!(f.eval(xi).max_abs_diff(&h.eval(xi)) < 1e-14);
        }
    }

    #[test]
    fn initial_density_at_origin() {
        let d = example_initial_density();
        let o = ClassicalPoint::new(0.0, 0.0);
        assert_eq!(d.f_c(o), 1.0 / (2.0 * PI));
        assert_eq!(d.conditional_first(o), PauliVector::new(0.5, 0.0, 0.0, -0.5));
        assert_eq!(example_lambda(o), 0.0);
    }

    #[test]
    fn initial_density_first_moment_formula() {
        let d = example_initial_density();
        let xi = ClassicalPoint::new(0.8, -0.6);
        let s: f64 = 1.0;
        let a = s.atan();
        let lam = FRAC_2_PI * a;
        let r = PureBlochState::in_xz_plane(a).projector() * lam
            + PureBlochState::in_xz_plane(a).antipode().projector() * (1.0 - lam);
        assert!(d.first_moment(xi).max_abs_diff(&(r * d.f_c(xi))) < 1e-16);
        let t = d.second_moment(xi);
        assert!(crate::pauli::partial_trace_first(&t).max_abs_diff(&d.first_moment(xi)) == 0.0);
    }

    #[test]
    fn custom_density_rejects_bad_input() {
        assert!(matches!(
            ClassicalDensity::custom(|_| 0.0, [-1.0, 1.0, -1.0, 1.0]),
            Err(Error::Unnormalizable { .. })
        ));
        assert!(matches!(
            ClassicalDensity::custom(|_| -1.0, [-1.0, 1.0, -1.0, 1.0]),
            Err(Error::Unnormalizable { .. })
        ));
        let box_density = ClassicalDensity::custom(|_| 3.0, [0.0, 2.0, 0.0, 1.0]).unwrap();
        assert!((box_density.value(ClassicalPoint::new(1.0, 0.5)) - 0.5).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let xi = box_density.sample(&mut rng);
            assert!((0.0..=2.0).contains(&xi.r) && (0.0..=1.0).contains(&xi.p));
        }
    }
}
