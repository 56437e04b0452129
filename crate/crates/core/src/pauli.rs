//! Operator algebra of the two-level subsystem in the Pauli basis.
//!
//! A Hermitian 2×2 operator is stored as its real coordinates `μ_j` in the
//! basis `{σ0 = I, σ1, σ2, σ3}`, with `μ_j = Tr(M σ_j) / 2`. Density matrices
//! therefore have `μ0 = 1/2`, and pure states satisfy `Σ_j μ_j² = 1/2`.
//!
//! Symmetric two-body operators are stored through the symmetric coefficient
//! matrix `t_ab` of `Σ_ab t_ab σa ⊗ σb`. For a second moment these are the
//! conditional averages `E[μ_a μ_b]`. Dense 2×2 and 4×4 complex matrices are
//! only produced for verification and for spectra.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use nalgebra::{Complex, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;

const HERMITIAN_TOL: f64 = 1e-12;
const BLOCH_TOL: f64 = 1e-10;
const SPECTRUM_TOL: f64 = 1e-10;

/// Pauli matrix `σ_j`, with `σ0` the identity.
pub fn sigma(j: usize) -> Mat2 {
    let o = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match j {
        0 => Mat2::new(one, o, o, one),
        1 => Mat2::new(o, one, one, o),
        2 => Mat2::new(o, -i, i, o),
        3 => Mat2::new(one, o, o, -one),
        _ => panic!("Pauli index {j} out of range"),
    }
}

/// Coordinates `(μ0, μ1, μ2, μ3)` of a Hermitian operator `Σ_j μ_j σ_j`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PauliVector {
    pub mu: [f64; 4],
}

impl PauliVector {
    pub const ZERO: PauliVector = PauliVector { mu: [0.0; 4] };

    pub const fn new(mu0: f64, mu1: f64, mu2: f64, mu3: f64) -> Self {
        Self {
            mu: [mu0, mu1, mu2, mu3],
        }
    }

    /// The identity scaled by `c`.
    pub const fn scalar(c: f64) -> Self {
        Self::new(c, 0.0, 0.0, 0.0)
    }

    /// `(μ1, μ2, μ3)`.
    pub fn spatial(&self) -> [f64; 3] {
        [self.mu[1], self.mu[2], self.mu[3]]
    }

    pub fn trace(&self) -> f64 {
        2.0 * self.mu[0]
    }

    /// `Tr(A B)` for two Hermitian operators.
    pub fn trace_product(&self, other: &PauliVector) -> f64 {
        2.0 * self
            .mu
            .iter()
            .zip(other.mu.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
    }

    pub fn to_matrix(&self) -> Mat2 {
        from_pauli(self)
    }

    pub fn is_finite(&self) -> bool {
        self.mu.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &PauliVector) -> f64 {
        self.mu
            .iter()
            .zip(other.mu.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for PauliVector {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.mu[j]
    }
}

impl Add for PauliVector {
    type Output = PauliVector;

    fn add(self, rhs: PauliVector) -> PauliVector {
        let mut mu = self.mu;
        for (a, b) in mu.iter_mut().zip(rhs.mu) {
            *a += b;
        }
        PauliVector { mu }
    }
}

impl AddAssign for PauliVector {
    fn add_assign(&mut self, rhs: PauliVector) {
        for (a, b) in self.mu.iter_mut().zip(rhs.mu) {
            *a += b;
        }
    }
}

impl Sub for PauliVector {
    type Output = PauliVector;

    fn sub(self, rhs: PauliVector) -> PauliVector {
        self + (-rhs)
    }
}

impl Neg for PauliVector {
    type Output = PauliVector;

    fn neg(self) -> PauliVector {
        PauliVector {
            mu: self.mu.map(|x| -x),
        }
    }
}

impl Mul<f64> for PauliVector {
    type Output = PauliVector;

    fn mul(self, c: f64) -> PauliVector {
        PauliVector {
            mu: self.mu.map(|x| c * x),
        }
    }
}

impl Mul<PauliVector> for f64 {
    type Output = PauliVector;

    fn mul(self, v: PauliVector) -> PauliVector {
        v * self
    }
}

/// A pure two-level state given by its unit Bloch vector `(x, y, z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PureBlochState {
    n: [f64; 3],
}

impl PureBlochState {
    /// Checked constructor; `|n|` must be 1 within `1e-10`.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > BLOCH_TOL {
            return Err(Error::NotUnitBloch { norm });
        }
        Ok(Self { n: [x, y, z] })
    }

    /// Normalizes an arbitrary nonzero vector onto the sphere.
    pub fn normalized(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotUnitBloch { norm });
        }
        Ok(Self {
            n: [v[0] / norm, v[1] / norm, v[2] / norm],
        })
    }

    /// Bloch vector at polar angle `angle` in the x-z plane: `(sin a, 0, cos a)`.
    pub fn in_xz_plane(angle: f64) -> Self {
        Self {
            n: [angle.sin(), 0.0, angle.cos()],
        }
    }

    pub(crate) fn from_raw(n: [f64; 3]) -> Self {
        Self { n }
    }

    pub fn n(&self) -> [f64; 3] {
        self.n
    }

    pub fn antipode(&self) -> Self {
        Self {
            n: self.n.map(|x| -x),
        }
    }

    pub fn projector(&self) -> PauliVector {
        PauliVector::new(0.5, 0.5 * self.n[0], 0.5 * self.n[1], 0.5 * self.n[2])
    }
}

/// `μ_j = Tr(M σ_j) / 2`. Rejects matrices that are not Hermitian within `1e-12`.
pub fn to_pauli(m: &Mat2) -> Result<PauliVector> {
    let max_asymmetry = hermitian_asymmetry2(m);
    if max_asymmetry > HERMITIAN_TOL {
        return Err(Error::NotHermitian { max_asymmetry });
    }
    let mut mu = [0.0; 4];
    for (j, c) in mu.iter_mut().enumerate() {
        *c = 0.5 * (m * sigma(j)).trace().re;
    }
    Ok(PauliVector { mu })
}

pub fn from_pauli(v: &PauliVector) -> Mat2 {
    (0..4).fold(Mat2::zeros(), |acc, j| acc + sigma(j) * C64::from(v.mu[j]))
}

fn hermitian_asymmetry2(m: &Mat2) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn hermitian_asymmetry4(m: &Mat4) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Rank-one projector onto the pure state with Bloch vector `n`.
pub fn projector_from_bloch(n: &PureBlochState) -> PauliVector {
    n.projector()
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Coordinates of `[A, B] = -i (AB - BA)`.
///
/// With `[σk, σl] = 2 ε_klm σm` this is `2 (a × b)` on the spatial part and the
/// identity component always vanishes.
pub fn commutator_coords(a: &PauliVector, b: &PauliVector) -> PauliVector {
    let c = cross(a.spatial(), b.spatial());
    PauliVector::new(0.0, 2.0 * c[0], 2.0 * c[1], 2.0 * c[2])
}

/// Structure constants `c^j_kl` of the commutator `-i(AB - BA)` in the σ basis:
/// `[σk, σl] = Σ_j c^j_kl σj`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureConstants {
    c: [[[f64; 4]; 4]; 4],
}

impl StructureConstants {
    pub fn su2() -> Self {
        let mut c = [[[0.0; 4]; 4]; 4];
        for (k, l, j) in [(1, 2, 3), (2, 3, 1), (3, 1, 2)] {
            c[j][k][l] = 2.0;
            c[j][l][k] = -2.0;
        }
        Self { c }
    }

    /// `c^j_kl`.
    pub fn get(&self, j: usize, k: usize, l: usize) -> f64 {
        self.c[j][k][l]
    }

    /// `Σ_kl c^j_kl a_k b_l`, the coordinates of `[A, B]`.
    pub fn contract(&self, a: &PauliVector, b: &PauliVector) -> PauliVector {
        let mut out = [0.0; 4];
        for (j, o) in out.iter_mut().enumerate() {
            for k in 0..4 {
                for l in 0..4 {
                    *o += self.c[j][k][l] * a.mu[k] * b.mu[l];
                }
            }
        }
        PauliVector { mu: out }
    }
}

/// `Σ_{j=0..3} μ_j²`, equal to `Tr(ρ²) / 2`.
pub fn purity(r: &PauliVector) -> f64 {
    r.mu.iter().map(|x| x * x).sum()
}

/// Flat index of the spatial pair `(j, k)`, `1 ≤ j ≤ k ≤ 3`, in
/// [`SymmetricTwoBody::mujk`]: order `11, 12, 13, 22, 23, 33`.
pub fn jk_index(j: usize, k: usize) -> usize {
    let (j, k) = if j <= k { (j, k) } else { (k, j) };
    debug_assert!((1..=3).contains(&j) && (1..=3).contains(&k));
    match (j, k) {
        (1, 1) => 0,
        (1, 2) => 1,
        (1, 3) => 2,
        (2, 2) => 3,
        (2, 3) => 4,
        (3, 3) => 5,
        _ => unreachable!(),
    }
}

/// Symmetric two-body operator `Σ_ab t_ab σa ⊗ σb` with `t_ab = t_ba`.
///
/// `mu00 = t_00`, `mu0k[k-1] = t_0k`, `mujk` holds `t_jk` for `j ≤ k`
/// (see [`jk_index`]). For the second moment of a distribution over pure
/// states these are `E[μ_a μ_b]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymmetricTwoBody {
    pub mu00: f64,
    pub mu0k: [f64; 3],
    pub mujk: [f64; 6],
}

impl SymmetricTwoBody {
    pub const ZERO: SymmetricTwoBody = SymmetricTwoBody {
        mu00: 0.0,
        mu0k: [0.0; 3],
        mujk: [0.0; 6],
    };

    /// Coefficient `t_ab` for `a, b ∈ 0..4`.
    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        match (a, b) {
            (0, 0) => self.mu00,
            (0, k) | (k, 0) => self.mu0k[k - 1],
            (j, k) => self.mujk[jk_index(j, k)],
        }
    }

    pub fn coeffs(&self) -> [[f64; 4]; 4] {
        let mut t = [[0.0; 4]; 4];
        for (a, row) in t.iter_mut().enumerate() {
            for (b, x) in row.iter_mut().enumerate() {
                *x = self.coeff(a, b);
            }
        }
        t
    }

    /// Builds from a full coefficient matrix, which must be symmetric.
    pub fn from_coeffs(t: &[[f64; 4]; 4]) -> Result<Self> {
        let mut max_asymmetry: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                max_asymmetry = max_asymmetry.max((t[a][b] - t[b][a]).abs());
            }
        }
        if max_asymmetry > HERMITIAN_TOL {
            return Err(Error::NotExchangeSymmetric { max_asymmetry });
        }
        Ok(Self::from_coeffs_unchecked(t))
    }

    /// Reads the upper triangle only.
    pub fn from_coeffs_unchecked(t: &[[f64; 4]; 4]) -> Self {
        let mut out = SymmetricTwoBody {
            mu00: t[0][0],
            ..Self::ZERO
        };
        for k in 1..4 {
            out.mu0k[k - 1] = t[0][k];
            for j in 1..=k {
                out.mujk[jk_index(j, k)] = t[j][k];
            }
        }
        out
    }

    /// Symmetrized product `(a ⊗ b + b ⊗ a) / 2`.
    pub fn symmetric_product(a: &PauliVector, b: &PauliVector) -> Self {
        let mut t = [[0.0; 4]; 4];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = 0.5 * (a.mu[i] * b.mu[j] + b.mu[i] * a.mu[j]);
            }
        }
        Self::from_coeffs_unchecked(&t)
    }

    /// `a ⊗ a`.
    pub fn square(a: &PauliVector) -> Self {
        let mut t = [[0.0; 4]; 4];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = a.mu[i] * a.mu[j];
            }
        }
        Self::from_coeffs_unchecked(&t)
    }

    pub fn to_matrix(&self) -> Mat4 {
        let mut m = Mat4::zeros();
        for a in 0..4 {
            for b in 0..4 {
                let t = self.coeff(a, b);
                if t != 0.0 {
                    m += sigma(a).kronecker(&sigma(b)) * C64::from(t);
                }
            }
        }
        m
    }

    /// Pauli coefficients of a Hermitian, exchange-symmetric 4×4 matrix.
    pub fn from_matrix(m: &Mat4) -> Result<Self> {
        let max_asymmetry = hermitian_asymmetry4(m);
        if max_asymmetry > HERMITIAN_TOL {
            return Err(Error::NotHermitian { max_asymmetry });
        }
        let mut t = [[0.0; 4]; 4];
        for (a, row) in t.iter_mut().enumerate() {
            for (b, x) in row.iter_mut().enumerate() {
                *x = 0.25 * (m * sigma(a).kronecker(&sigma(b))).trace().re;
            }
        }
        Self::from_coeffs(&t)
    }

    pub fn trace(&self) -> f64 {
        4.0 * self.mu00
    }

    /// `Tr(X²) = 4 Σ_ab t_ab²`.
    pub fn purity(&self) -> f64 {
        let t = self.coeffs();
        4.0 * t.iter().flatten().map(|x| x * x).sum::<f64>()
    }

    /// `Tr(X (A ⊗ B)) = 4 Σ_ab t_ab a_a b_b`.
    pub fn expectation(&self, a: &PauliVector, b: &PauliVector) -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += self.coeff(i, j) * a.mu[i] * b.mu[j];
            }
        }
        4.0 * s
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymmetricTwoBody {
            mu00: c * self.mu00,
            mu0k: self.mu0k.map(|x| c * x),
            mujk: self.mujk.map(|x| c * x),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.mu00.is_finite()
            && self.mu0k.iter().all(|x| x.is_finite())
            && self.mujk.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &SymmetricTwoBody) -> f64 {
        let a = self.coeffs();
        let b = other.coeffs();
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

impl Add for SymmetricTwoBody {
    type Output = SymmetricTwoBody;

    fn add(mut self, rhs: SymmetricTwoBody) -> SymmetricTwoBody {
        self += rhs;
        self
    }
}

impl AddAssign for SymmetricTwoBody {
    fn add_assign(&mut self, rhs: SymmetricTwoBody) {
        self.mu00 += rhs.mu00;
        for (a, b) in self.mu0k.iter_mut().zip(rhs.mu0k) {
            *a += b;
        }
        for (a, b) in self.mujk.iter_mut().zip(rhs.mujk) {
            *a += b;
        }
    }
}

impl Sub for SymmetricTwoBody {
    type Output = SymmetricTwoBody;

    fn sub(self, rhs: SymmetricTwoBody) -> SymmetricTwoBody {
        self + rhs.scaled(-1.0)
    }
}

/// `Tr_1 X`: trace over the first factor, `Tr_1(A ⊗ B) = Tr(A) B`.
pub fn partial_trace_first(t: &SymmetricTwoBody) -> PauliVector {
    PauliVector::new(
        2.0 * t.mu00,
        2.0 * t.mu0k[0],
        2.0 * t.mu0k[1],
        2.0 * t.mu0k[2],
    )
}

/// Explicit `Tr_1` of a 4×4 matrix in the `|a⟩ ⊗ |b⟩` ordering.
pub fn partial_trace_first_matrix(m: &Mat4) -> Mat2 {
    let mut out = Mat2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            out[(i, j)] = m[(i, j)] + m[(2 + i, 2 + j)];
        }
    }
    out
}

/// Hermitian matrices whose real spectrum can be computed.
pub trait HermitianSpectrum {
    fn dimension(&self) -> usize;
    fn max_asymmetry(&self) -> f64;
    fn real_trace(&self) -> f64;
    fn spectrum(&self) -> Vec<f64>;
    /// `Tr(M · f(M))` with `f` a matrix polynomial evaluated by repeated products.
    fn trace_mercator(&self, order: usize) -> f64;
}

impl HermitianSpectrum for Mat2 {
    fn dimension(&self) -> usize {
        2
    }

    fn max_asymmetry(&self) -> f64 {
        hermitian_asymmetry2(self)
    }

    fn real_trace(&self) -> f64 {
        self.trace().re
    }

    fn spectrum(&self) -> Vec<f64> {
        let a = self[(0, 0)].re;
        let d = self[(1, 1)].re;
        let b = self[(0, 1)].norm();
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        vec![mean - radius, mean + radius]
    }

    fn trace_mercator(&self, order: usize) -> f64 {
        mercator_by_powers(self, order)
    }
}

impl HermitianSpectrum for Mat4 {
    fn dimension(&self) -> usize {
        4
    }

    fn max_asymmetry(&self) -> f64 {
        hermitian_asymmetry4(self)
    }

    fn real_trace(&self) -> f64 {
        self.trace().re
    }

    fn spectrum(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    fn trace_mercator(&self, order: usize) -> f64 {
        mercator_by_powers(self, order)
    }
}

fn mercator_by_powers<D>(rho: &nalgebra::OMatrix<C64, D, D>, order: usize) -> f64
where
    D: nalgebra::DimName,
    nalgebra::DefaultAllocator: nalgebra::allocator::Allocator<D, D>,
{
    let id = nalgebra::OMatrix::<C64, D, D>::identity();
    let x = &id - rho;
    let mut power = x.clone();
    let mut acc = 0.0;
    for m in 1..=order {
        acc += (rho * &power).trace().re / m as f64;
        if m < order {
            power = &power * &x;
        }
    }
    acc
}

fn checked_density_spectrum<M: HermitianSpectrum>(m: &M) -> Result<Vec<f64>> {
    let dim = m.dimension();
    if dim != 2 && dim != 4 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let max_asymmetry = m.max_asymmetry();
    if max_asymmetry > SPECTRUM_TOL {
        return Err(Error::NotHermitian { max_asymmetry });
    }
    let trace = m.real_trace();
    if (trace - 1.0).abs() > SPECTRUM_TOL {
        return Err(Error::NotNormalized { trace });
    }
    let ev = m.spectrum();
    let min_eigenvalue = ev.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eigenvalue < -SPECTRUM_TOL {
        return Err(Error::NotPositive { min_eigenvalue });
    }
    Ok(ev)
}

/// `-x ln x` with `0 ln 0 = 0`; tiny negative round-off is treated as zero.
pub fn entropy_term(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.ln()
    } else {
        0.0
    }
}

/// `-Tr(M ln M)` in nats, for density matrices of dimension 2 or 4.
pub fn von_neumann_entropy<M: HermitianSpectrum>(m: &M) -> Result<f64> {
    let ev = checked_density_spectrum(m)?;
    Ok(ev.into_iter().map(entropy_term).sum())
}

/// Truncated Mercator series `Tr(M Σ_{m=1}^{order} (I - M)^m / m)`.
///
/// Order 1 is the linear entropy `1 - Tr(M²)`. Every term is nonnegative for
/// spectra in `[0, 1]`, so the series increases monotonically toward the von
/// Neumann entropy.
pub fn mercator_entropy<M: HermitianSpectrum>(m: &M, order: usize) -> Result<f64> {
    if order < 1 {
        return Err(Error::InvalidArgument(
            "Mercator order must be at least 1".into(),
        ));
    }
    checked_density_spectrum(m)?;
    Ok(m.trace_mercator(order))
}
