//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero if any criterion fails. An optional argument filters criteria by
//! id prefix, e.g. `cargo test --test acceptance -- 6`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use hybrid_moments::ehrenfest::{advance, integrate_trajectory_sampled, Microstate};
use hybrid_moments::ensemble::{estimate_moment_field, sample_initial, silverman_bandwidth, MomentField};
use hybrid_moments::evolution::{compare_to_ensemble, evolve_effective, ComparisonConfig, EvolutionConfig};
use hybrid_moments::grid::{PhaseGrid, StencilOrder};
use hybrid_moments::hierarchy::{
    average_rate, average_rate_from_rhs, fig1_scan, first_moment_rhs_nodes, marginal_rhs, theta_family_second,
    Fig1Config, Fig1Row, NodalHamiltonian,
};
use hybrid_moments::maxent::{
    closed_second_moment, closure_closed_form, closure_numeric, effective_first_moment_rhs_nodes, ClosureMethod,
    EntropyOrder,
};
use hybrid_moments::oracle::{l2_check, mc_field_rate, mc_integrated_rate, smoothed_reference, step_both_ways};
use hybrid_moments::pauli::{
    commutator_coords, mercator_entropy, partial_trace_first, partial_trace_first_matrix, purity,
    von_neumann_entropy, Mat2, Mat4, PauliVector, PureBlochState, SymmetricTwoBody,
};
use hybrid_moments::scenario::{
    example_hamiltonian, example_initial_density, gaussian_pure_density, harmonic_hamiltonian, ClassicalPoint,
    Scenario,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, pass, detail }
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// 1. Microstate conservation and RK4 order.
fn microstate_conservation() -> Vec<Outcome> {
    let h = example_hamiltonian();
    let states: Vec<Microstate> = (0..100)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
            let xi = ClassicalPoint::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let psi = PureBlochState::normalized(common::random_direction(&mut rng)).unwrap();
            Microstate::new(xi, psi)
        })
        .collect();
    let drifts: Vec<(f64, f64)> = states
        .par_iter()
        .map(|s| {
            let tr = integrate_trajectory_sampled(s, &h, 10.0, 1e-3, 1).unwrap();
            (tr.max_relative_energy_drift, tr.max_norm_drift)
        })
        .collect();
    let energy = drifts.iter().map(|d| d.0).fold(0.0, f64::max);
    let norm = drifts.iter().map(|d| d.1).fold(0.0, f64::max);

    let dts = [4e-3, 2e-3, 1e-3];
    let probe = &states[..8];
    let state_vec = |m: &Microstate| -> [f64; 5] {
        let n = m.psi.n();
        [m.xi.r, m.xi.p, n[0], n[1], n[2]]
    };
    let reference: Vec<[f64; 5]> =
        probe.par_iter().map(|s| state_vec(&advance(s, &h, 10.0, 1.25e-4).unwrap().0)).collect();
    let errors: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            probe
                .par_iter()
                .zip(&reference)
                .map(|(s, r)| {
                    let v = state_vec(&advance(s, &h, 10.0, dt).unwrap().0);
                    v.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let slope = common::log_slope(&dts, &errors);
    vec![outcome(
        "1",
        energy <= 1e-8 && norm <= 1e-9 && (slope - 4.0).abs() <= 0.3,
        format!("max relative f_H drift {energy:.2e} (<= 1e-8), max Bloch-norm drift {norm:.2e} (<= 1e-9), RK4 slope {slope:.3} (4 ± 0.3; errors {})", sci(&errors)),
    )]
}

// 2. Pauli algebra against dense-matrix oracles.
fn algebra_oracles() -> Vec<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 10_000;
    let mut comm_err: f64 = 0.0;
    let mut ptr_err: f64 = 0.0;
    let mut ent_err: f64 = 0.0;
    let mut merc_err: f64 = 0.0;
    let to4 = |m: &nalgebra::DMatrix<common::C>| Mat4::from_fn(|i, j| m[(i, j)]);
    let to2 = |m: &nalgebra::DMatrix<common::C>| Mat2::from_fn(|i, j| m[(i, j)]);
    for _ in 0..n {
        let a: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let b: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let got = commutator_coords(&PauliVector { mu: a }, &PauliVector { mu: b });
        let want = common::coords(&common::commutator(&common::from_coords(a), &common::from_coords(b)));
        comm_err = comm_err.max(max_abs(&got.mu, &want));

        let mut t = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in i..4 {
                t[i][j] = rng.random_range(-1.0..1.0);
                t[j][i] = t[i][j];
            }
        }
        let dense = common::two_body(&t);
        let want = common::coords(&common::partial_trace_first(&dense));
        let got = partial_trace_first(&SymmetricTwoBody::from_coeffs(&t).unwrap());
        ptr_err = ptr_err.max(max_abs(&got.mu, &want));
        let got_m = partial_trace_first_matrix(&to4(&dense));
        let want_m = common::partial_trace_first(&dense);
        for i in 0..2 {
            for j in 0..2 {
                ptr_err = ptr_err.max((got_m[(i, j)] - want_m[(i, j)]).norm());
            }
        }

        let rho4 = common::with_spectrum(&common::random_spectrum(4, 0.0, &mut rng), &mut rng);
        let want = common::entropy_from_eigenvalues(&common::hermitian_eigenvalues(&rho4));
        ent_err = ent_err.max((von_neumann_entropy(&to4(&rho4)).unwrap() - want).abs());
        let rho2 = common::with_spectrum(&common::random_spectrum(2, 0.0, &mut rng), &mut rng);
        let want = common::entropy_from_eigenvalues(&common::hermitian_eigenvalues(&rho2));
        ent_err = ent_err.max((von_neumann_entropy(&to2(&rho2)).unwrap() - want).abs());

        let rho4 = common::with_spectrum(&common::random_spectrum(4, 0.2, &mut rng), &mut rng);
        let want = common::entropy_from_eigenvalues(&common::hermitian_eigenvalues(&rho4));
        merc_err = merc_err.max((mercator_entropy(&to4(&rho4), 60).unwrap() - want).abs());
        let rho2 = common::with_spectrum(&common::random_spectrum(2, 0.2, &mut rng), &mut rng);
        let want = common::entropy_from_eigenvalues(&common::hermitian_eigenvalues(&rho2));
        merc_err = merc_err.max((mercator_entropy(&to2(&rho2), 60).unwrap() - want).abs());
    }
    vec![outcome(
        "2",
        comm_err <= 1e-12 && ptr_err <= 1e-12 && ent_err <= 1e-12 && merc_err <= 1e-6,
        format!(
            "{n} inputs: commutator {comm_err:.1e}, partial trace {ptr_err:.1e}, von Neumann {ent_err:.1e} (<= 1e-12); Mercator-60 on spectra >= 0.2 {merc_err:.1e} (<= 1e-6)"
        ),
    )]
}

// 3. Exact moment-chain identities of the kernel estimator.
fn chain_identities() -> Vec<Outcome> {
    let e = sample_initial(&example_initial_density(), 100_000, 3).unwrap();
    let grid = PhaseGrid::square(4.0, 64).unwrap();
    let bw = silverman_bandwidth(&e).unwrap();
    let f = estimate_moment_field(&e, &grid, 2, bw).unwrap();
    let first = f.first().unwrap();
    let second = f.second().unwrap();
    let mut trace_mismatch = 0usize;
    let mut chain_mismatch = 0usize;
    for node in 0..grid.len() {
        if first[node].trace() != f.f_c[node] {
            trace_mismatch += 1;
        }
        if partial_trace_first(&second[node]) != first[node] {
            chain_mismatch += 1;
        }
    }
    vec![outcome(
        "3",
        trace_mismatch == 0 && chain_mismatch == 0,
        format!(
            "N = 1e5, {} nodes: nodes with Tr ρ̂ != F_C: {trace_mismatch}, nodes with Tr_1 ρ̂⊗2 != ρ̂: {chain_mismatch} (exact equality required)",
            grid.len()
        ),
    )]
}

fn theta_ranges(rows: &[Fig1Row], n_theta: usize) -> Vec<(f64, f64, f64)> {
    rows.chunks(n_theta)
        .map(|c| {
            let range = |f: fn(&Fig1Row) -> f64| {
                let (lo, hi) = c.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
                hi - lo
            };
            (c[0].r, range(|r| r.dmu1), range(|r| r.dmu3))
        })
        .collect()
}

/// Noise floor of the θ-scan: the largest change of any entry when the
/// point-stencil spacing is halved, plus a round-off allowance
/// `10³ ε max|d| / step`.
fn scan_noise_floor(h: &hybrid_moments::scenario::OperatorField, cfg: &Fig1Config) -> (Vec<Fig1Row>, f64) {
    let density = example_initial_density();
    let a = fig1_scan(h, &density, cfg).unwrap();
    let b = fig1_scan(h, &density, &Fig1Config { step: cfg.step / 2.0, ..*cfg }).unwrap();
    let stencil = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x.dmu1 - y.dmu1).abs().max((x.dmu3 - y.dmu3).abs()))
        .fold(0.0, f64::max);
    let scale = a.iter().map(|r| r.dmu1.abs().max(r.dmu3.abs())).fold(0.0, f64::max);
    (a, stencil + 1e3 * f64::EPSILON * scale.max(1.0) / cfg.step)
}

// 4. Structural reproduction of the θ-scan.
fn theta_scan() -> Vec<Outcome> {
    // At P = 0 the example density is even in P and ∂_P H is scalar, so every
    // θ gives the same rate there; the scan runs off that symmetry line.
    let cfg = Fig1Config { p_fixed: 1.0, ..Fig1Config::default() };
    let density = example_initial_density();
    let rs = hybrid_moments::hierarchy::linspace(cfg.r_min, cfg.r_max, cfg.n_r);
    let thetas = hybrid_moments::hierarchy::linspace(cfg.theta_min, cfg.theta_max, cfg.n_theta);
    let invariance = rs
        .par_iter()
        .map(|&r| {
            let xi = ClassicalPoint::new(r, cfg.p_fixed);
            let first = density.first_moment(xi);
            thetas
                .iter()
                .map(|&th| partial_trace_first(&theta_family_second(&density, xi, th)).max_abs_diff(&first))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);

    let (rows, floor) = scan_noise_floor(&example_hamiltonian(), &cfg);
    let ranges = theta_ranges(&rows, cfg.n_theta);
    let best = ranges.iter().map(|r| r.1.max(r.2)).fold(0.0, f64::max);
    let best_r = ranges.iter().max_by(|a, b| a.1.max(a.2).total_cmp(&b.1.max(b.2))).unwrap().0;

    let (axis_rows, _) = scan_noise_floor(&example_hamiltonian(), &Fig1Config::default());
    let axis = theta_ranges(&axis_rows, cfg.n_theta).iter().map(|r| r.1.max(r.2)).fold(0.0, f64::max);

    let (flat_rows, flat_floor) = scan_noise_floor(&hybrid_moments::scenario::uncoupled_hamiltonian(), &cfg);
    let flat = theta_ranges(&flat_rows, cfg.n_theta).iter().map(|r| r.1.max(r.2)).fold(0.0, f64::max);
    let flat_limit = flat_floor.max(floor);
    vec![
        outcome("4a", invariance <= 1e-12, format!("first moment across the θ-family: max deviation {invariance:.1e} (<= 1e-12)")),
        outcome(
            "4b",
            best > 10.0 * floor,
            format!(
                "P = {}: largest θ-range {best:.3e} at R = {best_r:.2} vs 10 × noise floor {:.3e} (on P = 0: {axis:.1e})",
                cfg.p_fixed,
                10.0 * floor
            ),
        ),
        outcome(
            "4c",
            flat <= flat_limit,
            format!("ξ-independent quantum part: largest θ-range {flat:.2e} vs noise floor {flat_limit:.2e}"),
        ),
    ]
}

const FINE_SPACING: f64 = 0.04;
const REFERENCE_DOMAIN: [f64; 4] = [-6.0, 6.0, -6.0, 6.0];

// 5. First-moment equation against Monte Carlo central differences.
fn hierarchy_vs_oracle() -> Vec<Outcome> {
    let density = example_initial_density();
    let h = example_hamiltonian();
    let e = sample_initial(&density, 100_000, 5).unwrap();
    let grid = PhaseGrid::square(4.0, 64).unwrap();
    let bw = silverman_bandwidth(&e).unwrap();
    let stepped = step_both_ways(&e, &h, 1e-3).unwrap();
    let mc = mc_field_rate(&stepped, &grid, bw).unwrap();
    let reference = smoothed_reference(
        |g| {
            let f = MomentField::from_density(&density, *g, 2);
            let hn = NodalHamiltonian::sample(g, &h);
            Ok(first_moment_rhs_nodes(g, f.first()?, f.second()?, &hn, StencilOrder::Fourth).d_first)
        },
        REFERENCE_DOMAIN,
        FINE_SPACING,
        &grid,
        bw,
    )
    .unwrap();
    let checks: Vec<_> = (0..4).map(|k| l2_check(&mc, &reference, k)).collect();
    let pass = checks.iter().all(|c| c.ratio <= 5.0);
    let detail = checks
        .iter()
        .map(|c| format!("μ{}: {:.2e}/{:.2e} = {:.2}", c.component, c.error, c.combined, c.ratio))
        .collect::<Vec<_>>()
        .join(", ");
    vec![outcome("5", pass, format!("N = 1e5, 64×64, δt = 1e-3, bandwidth {bw:.3}; L2 error / combined SE (<= 5): {detail}"))]
}

/// `v` read back from a closed second moment as the mean of `t_kk - μ_k²`.
fn implied_variance(f: &PauliVector, t: &SymmetricTwoBody) -> f64 {
    (1..4).map(|k| t.coeff(k, k) - f.mu[k] * f.mu[k]).sum::<f64>() / 3.0
}

// 6. Closure correctness.
fn closure_correctness() -> Vec<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let firsts: Vec<PauliVector> = (0..10_000).map(|_| PauliVector { mu: common::random_first_moment(&mut rng) }).collect();

    let mut worst: f64 = 0.0;
    let mut trace_back_exact = true;
    let mut var_negative = 0usize;
    let mut var_zero_off_boundary = 0usize;
    let mut var_nonzero_on_boundary = 0usize;
    let check_variance = |p: f64, v: f64, neg: &mut usize, off: &mut usize, on: &mut usize| {
        let pure = (p - 0.5).abs() <= 1e-10;
        if v < 0.0 {
            *neg += 1;
        }
        if pure && v.abs() > 1e-10 {
            *on += 1;
        }
        if !pure && v == 0.0 {
            *off += 1;
        }
    };
    for f in &firsts {
        let r = closure_closed_form(f).unwrap();
        worst = worst.max(r.constraint_residuals.worst_violation());
        let t = r.second;
        trace_back_exact &= t.mu00 == 0.25 && (0..3).all(|k| t.mu0k[k] == 0.5 * f.mu[k + 1]);
        check_variance(purity(f), implied_variance(f, &t), &mut var_negative, &mut var_zero_off_boundary, &mut var_nonzero_on_boundary);
    }
    for _ in 0..1000 {
        let n = common::random_direction(&mut rng);
        let f = PureBlochState::normalized(n).unwrap().projector();
        let t = closure_closed_form(&f).unwrap().second;
        check_variance(purity(&f), implied_variance(&f, &t), &mut var_negative, &mut var_zero_off_boundary, &mut var_nonzero_on_boundary);
    }

    let order1: Vec<f64> = firsts[..200]
        .par_iter()
        .map(|f| {
            let closed = closure_closed_form(f).unwrap().second;
            let num = closure_numeric(f, EntropyOrder::Mercator(1), 1e-10, 10_000).unwrap().second;
            num.max_abs_diff(&closed)
        })
        .collect();
    let order1_worst = order1.iter().copied().fold(0.0, f64::max);
    let order1_fail = order1.iter().filter(|&&d| d > 1e-6).count();

    let exact: Vec<(f64, bool)> = firsts[..1000]
        .par_iter()
        .map(|f| {
            let closed = closure_closed_form(f).unwrap().second;
            let s_closed = EntropyOrder::Exact.two_body_entropy(&closed);
            let r = closure_numeric(f, EntropyOrder::Exact, 1e-10, 10_000).unwrap();
            (r.entropy_value - s_closed, r.constraint_residuals.is_feasible(1e-9))
        })
        .collect();
    let exact_worst = exact.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
    let exact_infeasible = exact.iter().filter(|x| !x.1).count();

    vec![
        outcome("6a", worst <= 1e-12, format!("closed form on 1e4 random first moments: worst constraint violation {worst:.1e} (<= 1e-12)")),
        outcome("6b", trace_back_exact, "trace-back coordinates t_00 = 1/4, t_0k = μ_k/2 reproduced bit-for-bit".into()),
        outcome(
            "6c",
            var_negative == 0 && var_zero_off_boundary == 0 && var_nonzero_on_boundary == 0,
            format!("variance term: negative {var_negative}, zero away from purity 1/2: {var_zero_off_boundary}, nonzero at purity 1/2 ± 1e-10: {var_nonzero_on_boundary}"),
        ),
        outcome(
            "6d",
            order1_worst <= 1e-6,
            format!("order-1 numeric optimum vs closed form on 200 inputs: max coordinate gap {order1_worst:.3e} (<= 1e-6), {order1_fail} inputs beyond tolerance"),
        ),
        outcome(
            "6e",
            exact_worst >= -1e-8 && exact_infeasible == 0,
            format!("exact-entropy optimum minus closed-form entropy on 1000 inputs: min {exact_worst:.3e} (>= -1e-8), infeasible results {exact_infeasible}"),
        ),
    ]
}

// 7a. Uncoupled scenario, effective evolution against the ensemble.
fn uncoupled_limit() -> Outcome {
    let cfg = ComparisonConfig {
        n_members: 100_000,
        seed: 7,
        evolution: EvolutionConfig { t_end: 1.0, dt: 2e-3, sample_fractions: vec![0.0, 0.1, 0.5, 1.0], ..Default::default() },
        ..Default::default()
    };
    let grid = PhaseGrid::square(6.0, 64).unwrap();
    let report = compare_to_ensemble(&Scenario::uncoupled(), &grid, &cfg).unwrap();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for t in report.times.iter().filter(|t| t.t > 0.0) {
        for o in &t.observables {
            worst = worst.max(o.combined_z);
        }
        let z: Vec<String> = t.observables.iter().map(|o| format!("{} {:.2}", o.name, o.combined_z)).collect();
        parts.push(format!("t={}: {} (closure control {:.1e})", t.t, z.join(" "), t.closure_control.l2_difference));
    }
    outcome("7a", worst <= 3.0, format!("error / combined bar (<= 3): {}", parts.join("; ")))
}

// 7b. Pure classical transport, convergence under refinement.
fn transport_convergence() -> Outcome {
    let centre = ClassicalPoint::new(1.5, 0.0);
    let sigma = 0.7;
    let density = gaussian_pure_density(centre, sigma, PureBlochState::new(0.0, 0.0, 1.0).unwrap());
    let h = harmonic_hamiltonian();
    let t_end: f64 = 1.0;
    let exact = |x: ClassicalPoint| {
        let (c, s) = (t_end.cos(), t_end.sin());
        let (cr, cp) = (centre.r * c + centre.p * s, -centre.r * s + centre.p * c);
        let d2 = (x.r - cr).powi(2) + (x.p - cp).powi(2);
        (-0.5 * d2 / (sigma * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma * sigma)
    };
    let sizes = [32usize, 64, 128];
    let cfg = EvolutionConfig { t_end, dt: 2.5e-3, sample_fractions: vec![0.0, 1.0], ..Default::default() };
    let errors: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let grid = PhaseGrid::square(5.0, n).unwrap();
            let evo = evolve_effective(&MomentField::from_density(&density, grid, 1), &h, &cfg).unwrap();
            let f = &evo.last().field;
            let diff: Vec<f64> = grid.points().iter().zip(&f.f_c).map(|(&x, v)| v - exact(x)).collect();
            grid.l2_norm(&diff)
        })
        .collect();
    let spacing: Vec<f64> = sizes.iter().map(|&n| 10.0 / n as f64).collect();
    let slope = common::log_slope(&spacing, &errors);
    outcome(
        "7b",
        (slope - 2.0).abs() <= 0.3,
        format!("L2 error of F_C vs rotated Gaussian on 32/64/128 grids {}: slope {slope:.3} (2 ± 0.3)", sci(&errors)),
    )
}

// 8. Marginal equations against Monte Carlo central differences.
fn marginal_equations() -> Vec<Outcome> {
    let density = example_initial_density();
    let h = example_hamiltonian();
    let e = sample_initial(&density, 100_000, 8).unwrap();
    let grid = PhaseGrid::square(4.0, 64).unwrap();
    let bw = silverman_bandwidth(&e).unwrap();
    let stepped = step_both_ways(&e, &h, 1e-3).unwrap();
    let mc = mc_field_rate(&stepped, &grid, bw).unwrap();
    let reference = smoothed_reference(
        |g| {
            let f = MomentField::from_density(&density, *g, 1);
            let m = marginal_rhs(&f, &h, StencilOrder::Fourth)?;
            Ok(m.d_f_c.iter().map(|&d| PauliVector::scalar(0.5 * d)).collect())
        },
        REFERENCE_DOMAIN,
        FINE_SPACING,
        &grid,
        bw,
    )
    .unwrap();
    let field = l2_check(&mc, &reference, 0);

    let (mc_rate, mc_se) = mc_integrated_rate(&stepped);
    let quad = |n: usize| {
        let g = PhaseGrid::square(6.0, n).unwrap();
        marginal_rhs(&MomentField::from_density(&density, g, 1), &h, StencilOrder::Fourth).unwrap().d_rho
    };
    let (fine, coarse) = (quad(240), quad(120));
    let mut worst_ratio: f64 = 0.0;
    let mut parts = Vec::new();
    for k in 0..4 {
        let err = (mc_rate.mu[k] - fine.mu[k]).abs();
        let bar = mc_se.mu[k].hypot(fine.mu[k] - coarse.mu[k]);
        let ratio = if bar > 0.0 { err / bar } else if err == 0.0 { 0.0 } else { f64::INFINITY };
        worst_ratio = worst_ratio.max(ratio);
        parts.push(format!("μ{k}: {:.4e} vs {:.4e} ({ratio:.2})", mc_rate.mu[k], fine.mu[k]));
    }
    vec![
        outcome(
            "8a",
            field.ratio <= 5.0,
            format!("dF_C/dt field: L2 error {:.2e} / combined {:.2e} = {:.2} (<= 5)", field.error, field.combined, field.ratio),
        ),
        outcome("8b", worst_ratio <= 5.0, format!("d/dt ∫ρ̂ = ∫[Ĥ, ρ̂], error / combined bar (<= 5): {}", parts.join(", "))),
    ]
}

// 9. Conservation under the effective evolution.
fn effective_conservation() -> Vec<Outcome> {
    let grid = PhaseGrid::square(6.0, 64).unwrap();
    let cfg = EvolutionConfig { t_end: 1.0, dt: 2e-3, ..Default::default() };
    [("9 example", Scenario::example()), ("9 uncoupled", Scenario::uncoupled())]
        .into_iter()
        .map(|(id, sc)| {
            let init = MomentField::from_density(&sc.initial, grid, 1);
            let evo = evolve_effective(&init, &sc.hamiltonian, &cfg).unwrap();
            let p0 = evo.snapshots[0].total_probability;
            let mut drift: f64 = 0.0;
            let mut unit: f64 = 0.0;
            let mut rate: f64 = 0.0;
            let mut discrete: f64 = 0.0;
            let hn = NodalHamiltonian::sample(&grid, &sc.hamiltonian);
            for s in &evo.snapshots {
                drift = drift.max((s.total_probability - p0).abs());
                unit = unit.max((s.total_probability - 1.0).abs());
                let first = s.field.first().unwrap();
                let (second, _, _) = closed_second_moment(first, &ClosureMethod::ClosedForm);
                let closed = MomentField { second: Some(second), ..s.field.clone() };
                rate = rate.max(average_rate(&sc.hamiltonian, &s.field, &closed, &sc.hamiltonian).unwrap().abs());
                let rhs = effective_first_moment_rhs_nodes(&grid, first, &hn, &ClosureMethod::ClosedForm, StencilOrder::Second);
                discrete = discrete.max(average_rate_from_rhs(&sc.hamiltonian, &rhs.rhs).abs());
            }
            outcome(
                id,
                drift <= 1e-6 && rate <= 1e-10,
                format!(
                    "{} times: probability drift {drift:.1e} (<= 1e-6), |∫F_C - 1| {unit:.1e}, |d⟨H⟩/dt| {rate:.1e} (<= 1e-10); discrete ∫Tr(ρ̇̂ Ĥ) up to {discrete:.1e}",
                    evo.snapshots.len()
                ),
            )
        })
        .collect()
}

type Criterion = Box<dyn Fn() -> Vec<Outcome>>;

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: Vec<(&str, Criterion)> = vec![
        ("1", Box::new(microstate_conservation)),
        ("2", Box::new(algebra_oracles)),
        ("3", Box::new(chain_identities)),
        ("4", Box::new(theta_scan)),
        ("5", Box::new(hierarchy_vs_oracle)),
        ("6", Box::new(closure_correctness)),
        ("7", Box::new(|| vec![uncoupled_limit(), transport_convergence()])),
        ("8", Box::new(marginal_equations)),
        ("9", Box::new(effective_conservation)),
    ];
    let mut failed = Vec::new();
    for (id, run) in criteria {
        if filter.as_ref().is_some_and(|f| !id.starts_with(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let results = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            vec![outcome(id, false, format!("panicked: {msg}"))]
        });
        let secs = start.elapsed().as_secs_f64();
        for r in results {
            println!("{} criterion {:<12} [{secs:.1}s] {}", if r.pass { "PASS" } else { "FAIL" }, r.id, r.detail);
            if !r.pass {
                failed.push(r.id);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
