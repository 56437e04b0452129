//! Dense-matrix oracles shared by the integration tests. Nothing here calls
//! into the crate's Pauli-coordinate algebra.

#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

pub type C = Complex<f64>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn pauli(j: usize) -> DMatrix<C> {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let entries = match j {
        0 => [one, z, z, one],
        1 => [z, one, one, z],
        2 => [z, c(0.0, -1.0), c(0.0, 1.0), z],
        3 => [one, z, z, -one],
        _ => panic!("pauli index {j}"),
    };
    DMatrix::from_row_slice(2, 2, &entries)
}

/// `Σ_j v_j σ_j`.
pub fn from_coords(v: [f64; 4]) -> DMatrix<C> {
    (0..4).fold(DMatrix::zeros(2, 2), |acc, j| acc + pauli(j) * c(v[j], 0.0))
}

/// `Re Tr(M σ_j) / 2`.
pub fn coords(m: &DMatrix<C>) -> [f64; 4] {
    std::array::from_fn(|j| (m * pauli(j)).trace().re / 2.0)
}

pub fn kron(a: &DMatrix<C>, b: &DMatrix<C>) -> DMatrix<C> {
    a.kronecker(b)
}

/// `Σ_ab t_ab σ_a ⊗ σ_b`.
pub fn two_body(t: &[[f64; 4]; 4]) -> DMatrix<C> {
    let mut m = DMatrix::zeros(4, 4);
    for a in 0..4 {
        for b in 0..4 {
            m += kron(&pauli(a), &pauli(b)) * c(t[a][b], 0.0);
        }
    }
    m
}

/// Trace over the first factor of a 4×4 operator.
pub fn partial_trace_first(m: &DMatrix<C>) -> DMatrix<C> {
    let mut out = DMatrix::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            out[(i, j)] = m[(i, j)] + m[(2 + i, 2 + j)];
        }
    }
    out
}

/// `-i (AB - BA)`.
pub fn commutator(a: &DMatrix<C>, b: &DMatrix<C>) -> DMatrix<C> {
    (a * b - b * a) * c(0.0, -1.0)
}

/// Eigenvalues of a Hermitian matrix via cyclic Jacobi on its real
/// `2n × 2n` embedding; each eigenvalue appears twice there.
pub fn hermitian_eigenvalues(m: &DMatrix<C>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let z = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            a[i][j] = z.re;
            a[n + i][n + j] = z.re;
            a[i][n + j] = -z.im;
            a[n + i][j] = z.im;
        }
    }
    let size = 2 * n;
    for _sweep in 0..100 {
        let off: f64 = (0..size).flat_map(|i| (0..size).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..size {
            for q in p + 1..size {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..size {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = cs * akp - sn * akq;
                    a[k][q] = sn * akp + cs * akq;
                }
                for k in 0..size {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = cs * apk - sn * aqk;
                    a[q][k] = sn * apk + cs * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..size).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

pub fn entropy_from_eigenvalues(ev: &[f64]) -> f64 {
    ev.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// Haar-like random unitary by Gram-Schmidt on Gaussian columns.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> DMatrix<C> {
    let mut cols: Vec<Vec<C>> = Vec::new();
    while cols.len() < n {
        let mut v: Vec<C> = (0..n).map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        for u in &cols {
            let proj: C = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= proj * y;
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        cols.push(v.into_iter().map(|x| x / norm).collect());
    }
    DMatrix::from_fn(n, n, |i, j| cols[j][i])
}

/// `U diag(λ) U†`.
pub fn with_spectrum<R: Rng>(spectrum: &[f64], rng: &mut R) -> DMatrix<C> {
    let n = spectrum.len();
    let u = random_unitary(n, rng);
    let d = DMatrix::from_fn(n, n, |i, j| if i == j { c(spectrum[i], 0.0) } else { c(0.0, 0.0) });
    &u * d * u.adjoint()
}

/// Random probability vector of length `n` with every entry at least `floor`.
pub fn random_spectrum<R: Rng>(n: usize, floor: f64, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| floor + (1.0 - n as f64 * floor) * x / s).collect()
}

/// Uniform direction on the unit sphere.
pub fn random_direction<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-8 {
            return v.map(|x| x / n);
        }
    }
}

/// Conditional first moment `(1/2, r n / 2)` with `r³` uniform on `[0, 1]`.
pub fn random_first_moment<R: Rng>(rng: &mut R) -> [f64; 4] {
    let n = random_direction(rng);
    let r = rng.random::<f64>().cbrt();
    [0.5, 0.5 * r * n[0], 0.5 * r * n[1], 0.5 * r * n[2]]
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
