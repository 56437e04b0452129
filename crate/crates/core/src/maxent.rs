//! Maximum-entropy closure of the first-moment equation.
//!
//! Given a conditional first moment `ρ̂_ξ`, the closure supplies the two-body
//! coefficients `t_jk` of `ρ̂^{⊗2}_ξ`. The trace-back coordinates are fixed:
//! `t_00 = 1/4`, `t_0k = μ_k/2`. Pure-state mixtures also satisfy
//! `Σ_j t_jj = 1/4`, so every admissible `ρ̂^{⊗2}_ξ` annihilates the singlet
//! and its entropy lives on the symmetric (triplet) subspace.

use nalgebra::{Complex, Matrix3, Matrix5, Vector5};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{MomentField, UNDEFINED_THRESHOLD};
use crate::error::{Error, Result};
use crate::grid::StencilOrder;
use crate::hierarchy::{first_moment_rhs_nodes, HierarchyRHS, NodalHamiltonian};
use crate::pauli::{
    entropy_term, jk_index, purity, sigma, HermitianSpectrum, Mat4, PauliVector, SymmetricTwoBody, C64,
};
use crate::scenario::OperatorField;

const NORMALIZATION_TOL: f64 = 1e-10;
const PURE_TOL: f64 = 1e-12;
/// Purities within this distance of 1/2 are treated as pure by the closed form.
pub const PURE_BAND: f64 = 1e-10;

/// Adopted value of `Σ_{j=1..3} t_jj` for mixtures of pure states.
pub const DIAGONAL_SUM: f64 = 0.25;
/// The alternative value `1/2` of the same sum, reported for comparison.
pub const DIAGONAL_SUM_ALT: f64 = 0.5;
/// Bound on `Σ_k t_0k² + Σ_{i≤j} t_ij²`.
pub const TWO_BODY_SLACK_BOUND: f64 = 0.375;

/// Signed constraint residuals of a `(ρ̂_ξ, ρ̂^{⊗2}_ξ)` pair.
///
/// Equality residuals vanish when satisfied. Slack residuals are
/// nonnegative when satisfied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ConstraintReport {
    /// `2 t_0j - μ_j`.
    pub trace_back: [f64; 3],
    /// `μ_0 - 1/2`.
    pub first_normalization: f64,
    /// `t_00 - 1/4`.
    pub second_normalization: f64,
    /// `1/2 - Σ_{j=0..3} μ_j²`.
    pub purity_slack: f64,
    /// `3/8 - (Σ_k t_0k² + Σ_{i≤j} t_ij²)`.
    pub two_body_slack: f64,
    /// `1 - Tr(X²)` for the reconstructed 4×4 matrix.
    pub two_body_purity_slack: f64,
    /// `t_jj - μ_j²`.
    pub variance: [f64; 3],
    /// `Σ_j t_jj - 1/4`.
    pub diagonal_sum: f64,
    /// `Σ_j t_jj - 1/2`, reported only.
    pub diagonal_sum_alt: f64,
    /// `sqrt(var_i var_j) - |t_ij - μ_i μ_j|` for pairs `12, 13, 23`.
    pub cauchy_schwarz: [f64; 3],
    /// Smallest eigenvalue of the reconstructed 4×4 matrix.
    pub min_eigenvalue: f64,
}

impl ConstraintReport {
    /// Largest violation among the enforced constraints (the alternative
    /// diagonal sum and the PSD eigenvalue are excluded).
    pub fn worst_violation(&self) -> f64 {
        let eq = self
            .trace_back
            .iter()
            .chain([self.first_normalization, self.second_normalization, self.diagonal_sum].iter())
            .map(|x| x.abs())
            .fold(0.0, f64::max);
        let slack = self
            .variance
            .iter()
            .chain(self.cauchy_schwarz.iter())
            .chain([self.purity_slack, self.two_body_slack, self.two_body_purity_slack].iter())
            .map(|&x| (-x).max(0.0))
            .fold(0.0, f64::max);
        eq.max(slack)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.worst_violation() <= tol && self.min_eigenvalue >= -tol
    }
}

pub fn check_constraints(first: &PauliVector, second: &SymmetricTwoBody) -> ConstraintReport {
    let mu = first.mu;
    let var: [f64; 3] = std::array::from_fn(|j| second.coeff(j + 1, j + 1) - mu[j + 1] * mu[j + 1]);
    let pairs = [(1, 2), (1, 3), (2, 3)];
    let cauchy_schwarz = pairs.map(|(i, j)| {
        let cov = second.coeff(i, j) - mu[i] * mu[j];
        (var[i - 1] * var[j - 1]).max(0.0).sqrt() - cov.abs()
    });
    let diag: f64 = (1..4).map(|j| second.coeff(j, j)).sum();
    let slack_sum: f64 = second.mu0k.iter().map(|x| x * x).sum::<f64>()
        + second.mujk.iter().map(|x| x * x).sum::<f64>();
    let ev = second.to_matrix().spectrum();
    ConstraintReport {
        trace_back: std::array::from_fn(|j| 2.0 * second.mu0k[j] - mu[j + 1]),
        first_normalization: mu[0] - 0.5,
        second_normalization: second.mu00 - 0.25,
        purity_slack: 0.5 - purity(first),
        two_body_slack: TWO_BODY_SLACK_BOUND - slack_sum,
        two_body_purity_slack: 1.0 - second.purity(),
        variance: var,
        diagonal_sum: diag - DIAGONAL_SUM,
        diagonal_sum_alt: diag - DIAGONAL_SUM_ALT,
        cauchy_schwarz,
        min_eigenvalue: ev[0],
    }
}

/// Entropy function used by the closure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntropyOrder {
    /// Mercator truncation of the given order (order 1 is the linear entropy).
    Mercator(usize),
    /// von Neumann entropy.
    Exact,
}

impl EntropyOrder {
    /// Scalar entropy density `s(λ)`, summed over the spectrum.
    pub fn s(&self, x: f64) -> f64 {
        match *self {
            EntropyOrder::Exact => entropy_term(x),
            EntropyOrder::Mercator(m) => {
                let y = 1.0 - x;
                let mut p = 1.0;
                let mut acc = 0.0;
                for k in 1..=m {
                    p *= y;
                    acc += p / k as f64;
                }
                x * acc
            }
        }
    }

    fn ds(&self, x: f64) -> f64 {
        match *self {
            EntropyOrder::Exact => -x.ln() - 1.0,
            EntropyOrder::Mercator(m) => {
                let y = 1.0 - x;
                let mut acc = 0.0;
                let mut pk1 = 1.0;
                for k in 1..=m {
                    let pk = pk1 * y;
                    acc += pk / k as f64 - x * pk1;
                    pk1 = pk;
                }
                acc
            }
        }
    }

    fn d2s(&self, x: f64) -> f64 {
        match *self {
            EntropyOrder::Exact => -1.0 / x,
            EntropyOrder::Mercator(m) => {
                let y = 1.0 - x;
                let mut acc = 0.0;
                let mut pk2 = 0.0;
                let mut pk1 = 1.0;
                for k in 1..=m {
                    acc += -2.0 * pk1 + (k - 1) as f64 * x * pk2;
                    pk2 = pk1;
                    pk1 *= y;
                }
                acc
            }
        }
    }

    /// Entropy of a 4×4 two-body operator; negative round-off eigenvalues are
    /// treated as zero.
    pub fn two_body_entropy(&self, t: &SymmetricTwoBody) -> f64 {
        t.to_matrix()
            .spectrum()
            .into_iter()
            .map(|x| self.s(x.max(0.0)))
            .sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClosureMethod {
    #[default]
    ClosedForm,
    Numeric {
        order: EntropyOrder,
        tol: f64,
        max_iter: usize,
    },
}

impl ClosureMethod {
    pub fn numeric(order: EntropyOrder) -> Self {
        ClosureMethod::Numeric { order, tol: 1e-8, max_iter: 10_000 }
    }

    pub fn label(&self) -> String {
        match self {
            ClosureMethod::ClosedForm => "closed-form".into(),
            ClosureMethod::Numeric { order: EntropyOrder::Exact, .. } => "numeric(exact)".into(),
            ClosureMethod::Numeric { order: EntropyOrder::Mercator(m), .. } => format!("numeric({m})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosureResult {
    pub second: SymmetricTwoBody,
    pub entropy_value: f64,
    pub method: String,
    pub constraint_residuals: ConstraintReport,
    pub converged: bool,
    pub iterations: usize,
}

fn validate_first(first: &PauliVector) -> Result<f64> {
    if (first.mu[0] - 0.5).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { trace: first.trace() });
    }
    let p = purity(first);
    if p > 0.5 + NORMALIZATION_TOL {
        return Err(Error::PurityExceeded { purity: p });
    }
    Ok(p)
}

fn with_trace_back(first: &PauliVector, mut t: SymmetricTwoBody) -> SymmetricTwoBody {
    t.mu00 = 0.5 * first.mu[0];
    for k in 0..3 {
        t.mu0k[k] = 0.5 * first.mu[k + 1];
    }
    t
}

/// Closed form `t_jk = μ_j μ_k + (1/3)(1/2 - 𝒫) δ_jk` without input checks.
///
/// This is `ρ ⊗ ρ` plus an isotropic variance `(1/3)(1/2 - 𝒫) Σ_k σ_k ⊗ σ_k`,
/// with `𝒫 = Σ_{j=0..3} μ_j²`.
pub fn closed_form_coordinates(first: &PauliVector) -> SymmetricTwoBody {
    let gap = 0.5 - purity(first);
    let v = if gap.abs() <= PURE_BAND { 0.0 } else { gap / 3.0 };
    let mu = first.mu;
    let mut t = SymmetricTwoBody::ZERO;
    for j in 1..4 {
        for k in j..4 {
            t.mujk[jk_index(j, k)] = mu[j] * mu[k] + if j == k { v } else { 0.0 };
        }
    }
    with_trace_back(first, t)
}

/// The diagonal-only variant `t_kk = μ_k² + (1/3)(1/2 - 𝒫)`, `t_jk = 0` for
/// `j ≠ k`. Kept for comparison; it is not rotation-equivariant and can
/// violate the Cauchy-Schwarz constraints.
pub fn closed_form_diagonal(first: &PauliVector) -> SymmetricTwoBody {
    let v = (0.5 - purity(first)) / 3.0;
    let mut t = SymmetricTwoBody::ZERO;
    for j in 1..4 {
        t.mujk[jk_index(j, j)] = first.mu[j] * first.mu[j] + v;
    }
    with_trace_back(first, t)
}

/// Linearized-entropy MaxEnt closure in closed form.
pub fn closure_closed_form(first: &PauliVector) -> Result<ClosureResult> {
    validate_first(first)?;
    let second = closed_form_coordinates(first);
    Ok(ClosureResult {
        entropy_value: 1.0 - second.purity(),
        method: ClosureMethod::ClosedForm.label(),
        constraint_residuals: check_constraints(first, &second),
        second,
        converged: true,
        iterations: 0,
    })
}

/// Orthonormal triplet basis `|00⟩, (|01⟩+|10⟩)/√2, |11⟩` as columns.
fn triplet_basis() -> nalgebra::Matrix4x3<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let h = C64::new(s, 0.0);
    nalgebra::Matrix4x3::new(o, z, z, z, h, z, z, h, z, z, z, o)
}

fn project(m: &Mat4) -> Matrix3<C64> {
    let v = triplet_basis();
    v.adjoint() * m * v
}

/// Free coordinates `x = (t11, t12, t13, t22, t23)`; `t33 = 1/4 - t11 - t22`.
struct Problem {
    mu: [f64; 3],
    base: Matrix3<C64>,
    dirs: [Matrix3<C64>; 5],
    order: EntropyOrder,
}

/// `(j, k, sign)` contributions of each free coordinate.
const COORD_MAP: [&[(usize, usize, f64)]; 5] = [
    &[(1, 1, 1.0), (3, 3, -1.0)],
    &[(1, 2, 1.0)],
    &[(1, 3, 1.0)],
    &[(2, 2, 1.0), (3, 3, -1.0)],
    &[(2, 3, 1.0)],
];

fn kron(a: usize, b: usize) -> Mat4 {
    sigma(a).kronecker(&sigma(b))
}

struct Eval {
    value: f64,
    grad: Vector5<f64>,
    hess: Matrix5<f64>,
}

impl Problem {
    fn new(first: &PauliVector, order: EntropyOrder) -> Self {
        let mut fixed = Mat4::zeros();
        fixed += kron(0, 0) * C64::from(0.25);
        for k in 1..4 {
            let c = C64::from(0.5 * first.mu[k]);
            fixed += (kron(0, k) + kron(k, 0)) * c;
        }
        fixed += kron(3, 3) * C64::from(0.25);
        let dirs = COORD_MAP.map(|terms| {
            let mut m = Mat4::zeros();
            for &(j, k, s) in terms {
                let d = if j == k { kron(j, j) } else { kron(j, k) + kron(k, j) };
                m += d * C64::from(s);
            }
            project(&m)
        });
        Self {
            mu: [first.mu[1], first.mu[2], first.mu[3]],
            base: project(&fixed),
            dirs,
            order,
        }
    }

    fn coords(x: &Vector5<f64>) -> [[f64; 3]; 3] {
        let t33 = 0.25 - x[0] - x[3];
        [[x[0], x[1], x[2]], [x[1], x[3], x[4]], [x[2], x[4], t33]]
    }

    fn to_two_body(&self, x: &Vector5<f64>) -> SymmetricTwoBody {
        let c = Self::coords(x);
        let mut t = SymmetricTwoBody {
            mu00: 0.25,
            mu0k: self.mu.map(|m| 0.5 * m),
            mujk: [0.0; 6],
        };
        for j in 1..4 {
            for k in j..4 {
                t.mujk[jk_index(j, k)] = c[j - 1][k - 1];
            }
        }
        t
    }

    fn matrix(&self, x: &Vector5<f64>) -> Matrix3<C64> {
        let mut m = self.base;
        for i in 0..5 {
            m += self.dirs[i] * C64::from(x[i]);
        }
        m
    }

    /// Variances, covariances and their (constant) gradients.
    fn moments(&self, x: &Vector5<f64>) -> ([f64; 3], [f64; 3]) {
        let c = Self::coords(x);
        let m = self.mu;
        let var = [c[0][0] - m[0] * m[0], c[1][1] - m[1] * m[1], c[2][2] - m[2] * m[2]];
        let cov = [c[0][1] - m[0] * m[1], c[0][2] - m[0] * m[2], c[1][2] - m[1] * m[2]];
        (var, cov)
    }

    const VAR_GRAD: [[f64; 5]; 3] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 0.0],
        [-1.0, 0.0, 0.0, -1.0, 0.0],
    ];
    const COV_GRAD: [[f64; 5]; 3] = [
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0],
    ];
    const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

    fn feasible(&self, x: &Vector5<f64>) -> bool {
        let (var, cov) = self.moments(x);
        if var.iter().any(|&v| v <= 0.0) {
            return false;
        }
        if Self::PAIRS.iter().zip(cov).any(|(&(i, j), c)| var[i] * var[j] - c * c <= 0.0) {
            return false;
        }
        let ev = self.matrix(x).symmetric_eigen().eigenvalues;
        ev.iter().all(|&l| l > 0.0)
    }

    /// Objective `S + β B` with gradient and Hessian.
    fn eval(&self, x: &Vector5<f64>, beta: f64) -> Eval {
        let eig = self.matrix(x).symmetric_eigen();
        let lam = eig.eigenvalues;
        let u = eig.eigenvectors;
        let g = |l: f64| self.order.s(l) + beta * l.ln();
        let dg = |l: f64| self.order.ds(l) + beta / l;
        let d2g = |l: f64| self.order.d2s(l) - beta / (l * l);
        let mut value: f64 = lam.iter().map(|&l| g(l)).sum();
        // matrix elements ⟨u_k| D_i |u_l⟩
        let elems: Vec<Matrix3<C64>> = self.dirs.iter().map(|d| u.adjoint() * d * u).collect();
        let mut grad = Vector5::zeros();
        let mut hess = Matrix5::zeros();
        for i in 0..5 {
            grad[i] = (0..3).map(|k| dg(lam[k]) * elems[i][(k, k)].re).sum();
        }
        for k in 0..3 {
            for l in 0..3 {
                let (a, b) = (lam[k], lam[l]);
                let scale = a.abs().max(b.abs()).max(1e-300);
                let f1 = if (a - b).abs() <= 1e-8 * scale {
                    d2g(0.5 * (a + b))
                } else {
                    (dg(a) - dg(b)) / (a - b)
                };
                for i in 0..5 {
                    for j in i..5 {
                        let prod: Complex<f64> = elems[i][(k, l)] * elems[j][(l, k)];
                        hess[(i, j)] += f1 * prod.re;
                    }
                }
            }
        }
        let (var, cov) = self.moments(x);
        for (v, gv) in var.iter().zip(Self::VAR_GRAD) {
            value += beta * v.ln();
            let gv = Vector5::from(gv);
            grad += gv * (beta / v);
            hess -= gv * gv.transpose() * (beta / (v * v));
        }
        for (&(i, j), (c, gc)) in Self::PAIRS.iter().zip(cov.iter().zip(Self::COV_GRAD)) {
            let q = var[i] * var[j] - c * c;
            let gi = Vector5::from(Self::VAR_GRAD[i]);
            let gj = Vector5::from(Self::VAR_GRAD[j]);
            let gc = Vector5::from(gc);
            let gq = gi * var[j] + gj * var[i] - gc * (2.0 * c);
            let hq = gi * gj.transpose() + gj * gi.transpose() - gc * gc.transpose() * 2.0;
            value += beta * q.ln();
            grad += gq * (beta / q);
            hess += hq * (beta / q) - gq * gq.transpose() * (beta / (q * q));
        }
        for i in 0..5 {
            for j in 0..i {
                hess[(i, j)] = hess[(j, i)];
            }
        }
        Eval { value, grad, hess }
    }
}

const BARRIER_TERMS: f64 = 9.0;

/// Numerical MaxEnt closure: maximizes the chosen entropy over the free
/// spatial coordinates subject to the trace-back equalities, the diagonal
/// sum, variance and Cauchy-Schwarz bounds, and positivity of the 4×4
/// operator.
///
/// Log-barrier interior-point method with damped Newton steps, started at
/// the closed-form point. The barrier weight is reduced until
/// `9 β < tol / 10`.
pub fn closure_numeric(first: &PauliVector, order: EntropyOrder, tol: f64, max_iter: usize) -> Result<ClosureResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    if let EntropyOrder::Mercator(0) = order {
        return Err(Error::InvalidArgument("Mercator order must be at least 1".into()));
    }
    let p = validate_first(first)?;
    let method = ClosureMethod::Numeric { order, tol, max_iter }.label();
    if p >= 0.5 - PURE_TOL {
        let mut second = SymmetricTwoBody::ZERO;
        for j in 1..4 {
            for k in j..4 {
                second.mujk[jk_index(j, k)] = first.mu[j] * first.mu[k];
            }
        }
        let second = with_trace_back(first, second);
        return Ok(ClosureResult {
            entropy_value: order.two_body_entropy(&second),
            method,
            constraint_residuals: check_constraints(first, &second),
            second,
            converged: true,
            iterations: 0,
        });
    }
    let problem = Problem::new(first, order);
    let start = closed_form_coordinates(first);
    let mut x = Vector5::new(
        start.coeff(1, 1),
        start.coeff(1, 2),
        start.coeff(1, 3),
        start.coeff(2, 2),
        start.coeff(2, 3),
    );
    let mut beta = 1e-3_f64;
    let target = tol / (10.0 * BARRIER_TERMS);
    let mut iterations = 0;
    let mut converged = false;
    'outer: loop {
        loop {
            if iterations >= max_iter {
                break 'outer;
            }
            iterations += 1;
            let e = problem.eval(&x, beta);
            let neg_h = -e.hess;
            let step = match neg_h.cholesky() {
                Some(ch) => ch.solve(&e.grad),
                None => e.grad * 1e-3,
            };
            let decrement = e.grad.dot(&step);
            if decrement < 1e-3 * tol {
                break;
            }
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial = x + step * alpha;
                if problem.feasible(&trial) {
                    let v = problem.eval(&trial, beta).value;
                    if v >= e.value + 1e-4 * alpha * decrement {
                        accepted = v > e.value || (trial - x).amax() > 0.0;
                        x = trial;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if beta <= target {
            converged = true;
            break;
        }
        beta = (beta * 0.1).max(target);
    }
    let second = problem.to_two_body(&x);
    Ok(ClosureResult {
        entropy_value: order.two_body_entropy(&second),
        method,
        constraint_residuals: check_constraints(first, &second),
        second,
        converged,
        iterations,
    })
}

/// Applies a closure method to a conditional first moment.
pub fn apply_closure(first: &PauliVector, method: &ClosureMethod) -> Result<ClosureResult> {
    match *method {
        ClosureMethod::ClosedForm => closure_closed_form(first),
        ClosureMethod::Numeric { order, tol, max_iter } => closure_numeric(first, order, tol, max_iter),
    }
}

/// Effective right-hand side with node diagnostics.
#[derive(Clone, Debug)]
pub struct EffectiveRhs {
    pub rhs: HierarchyRHS,
    /// Nodes with `F_C < 1e-12`; their right-hand side is zero.
    pub undefined: Vec<bool>,
    /// Defined nodes whose conditional purity exceeds `1/2 + 1e-8`.
    pub unphysical: usize,
}

/// Closed second-moment field `F_C ρ̂^{⊗2}_MaxEnt(ρ̂_ξ)` with the trace-back
/// coordinates copied from the first moment. Undefined nodes carry only the
/// trace-back coordinates. Nodes outside the physical region use the closed
/// form without validation.
pub fn closed_second_moment(first: &[PauliVector], method: &ClosureMethod) -> (Vec<SymmetricTwoBody>, Vec<bool>, usize) {
    let out: Vec<(SymmetricTwoBody, bool, bool)> = first
        .par_iter()
        .map(|rho| {
            let f = rho.trace();
            let mut t = SymmetricTwoBody::ZERO;
            let (mut undefined, mut unphysical) = (true, false);
            if f >= UNDEFINED_THRESHOLD {
                undefined = false;
                let cond = *rho * (1.0 / f);
                unphysical = purity(&cond) > 0.5 + 1e-8;
                let closed = match method {
                    ClosureMethod::ClosedForm => closed_form_coordinates(&cond),
                    m => apply_closure(&cond, m).map_or_else(|_| closed_form_coordinates(&cond), |r| r.second),
                };
                t = closed.scaled(f);
            }
            (with_trace_back(rho, t), undefined, unphysical)
        })
        .collect();
    let unphysical = out.iter().filter(|v| v.2).count();
    (out.iter().map(|v| v.0).collect(), out.iter().map(|v| v.1).collect(), unphysical)
}

/// Effective first-moment equation on nodal arrays; `F_C` is `Tr ρ̂(ξ)`.
pub fn effective_first_moment_rhs_nodes(
    grid: &crate::grid::PhaseGrid,
    first: &[PauliVector],
    hn: &NodalHamiltonian,
    method: &ClosureMethod,
    stencil: StencilOrder,
) -> EffectiveRhs {
    let (second, undefined, unphysical) = closed_second_moment(first, method);
    let mut rhs = first_moment_rhs_nodes(grid, first, &second, hn, stencil);
    for (node, &u) in undefined.iter().enumerate() {
        if u {
            rhs.d_first[node] = PauliVector::ZERO;
            rhs.d_f_c[node] = 0.0;
        }
    }
    EffectiveRhs { rhs, undefined, unphysical }
}

/// Effective first-moment equation: factorize, close each conditional state,
/// rescale by `F_C`, and evaluate the first-moment equation.
pub fn effective_first_moment_rhs(
    first: &MomentField,
    h: &OperatorField,
    method: &ClosureMethod,
    stencil: StencilOrder,
) -> Result<EffectiveRhs> {
    let hn = NodalHamiltonian::sample(&first.grid, h);
    Ok(effective_first_moment_rhs_nodes(&first.grid, first.first()?, &hn, method, stencil))
}
