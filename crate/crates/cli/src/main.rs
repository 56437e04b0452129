use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hybrid_moments::config::RunConfig;
use hybrid_moments::ehrenfest::{integrate_trajectory_sampled, Microstate};
use hybrid_moments::ensemble::{estimate_moment_field, propagate, sample_initial, silverman_bandwidth, MomentField};
use hybrid_moments::evolution::{compare_to_ensemble, evolve_effective, Evolution};
use hybrid_moments::grid::{PhaseGrid, StencilOrder};
use hybrid_moments::hierarchy::{fig1_scan, first_moment_rhs_nodes, NodalHamiltonian};
use hybrid_moments::io;
use hybrid_moments::maxent::apply_closure;
use hybrid_moments::oracle::{l2_check, mc_field_rate, smoothed_reference, step_both_ways};
use hybrid_moments::pauli::{partial_trace_first, PauliVector, PureBlochState};
use hybrid_moments::scenario::ClassicalPoint;
use hybrid_moments::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Parser, Debug)]
#[command(name = "hybrid-sim", version, about = "Hybrid quantum-classical Ehrenfest ensemble simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed; overrides `ensemble.seed` and `maxent.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker-thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Single worker thread, so floating-point reductions run in a fixed order.
    #[arg(long, global = true)]
    reproducible: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Integrate one microstate.
    Trajectory,
    /// Sample and propagate a Monte Carlo ensemble; write members and moment fields.
    Ensemble,
    /// θ-scan of the first-moment rate.
    Fig1,
    /// Close supplied or random first moments and report the constraints.
    MaxentCheck,
    /// Evolve the closed first-moment equation on the grid.
    EvolveEffective,
    /// Compare the effective evolution with the Monte Carlo ensemble.
    Compare,
    /// Estimator identities and the Monte Carlo check of the first-moment equation.
    HierarchyCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Trajectory => "trajectory",
            Command::Ensemble => "ensemble",
            Command::Fig1 => "fig1",
            Command::MaxentCheck => "maxent-check",
            Command::EvolveEffective => "evolve-effective",
            Command::Compare => "compare",
            Command::HierarchyCheck => "hierarchy-check",
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("writing JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Threads(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Config { .. }) => 2,
            CliError::Core(Error::EvolutionAborted { .. } | Error::NonFiniteState { .. }) => 3,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

struct Run {
    command: Command,
    config: RunConfig,
    config_path: Option<PathBuf>,
    out: PathBuf,
    seed_override: Option<u64>,
    threads: usize,
    reproducible: bool,
    outputs: Vec<String>,
}

impl Run {
    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_owned());
        self.out.join(name)
    }

    fn seed(&self, configured: u64) -> u64 {
        self.seed_override.unwrap_or(configured)
    }

    fn write_manifest(&self, seed: Option<u64>, summary: Value) -> Result<()> {
        let hash: String = Sha256::digest(self.config.text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        let manifest = json!({
            "command": self.command.name(),
            "version": env!("CARGO_PKG_VERSION"),
            "config_path": self.config_path.as_ref().map(|p| p.display().to_string()),
            "config_sha256": hash,
            "config": self.config.text,
            "seed": seed,
            "threads": self.threads,
            "reproducible": self.reproducible,
            "outputs": self.outputs,
            "summary": summary,
        });
        std::fs::create_dir_all(&self.out).map_err(Error::from)?;
        std::fs::write(self.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?).map_err(Error::from)?;
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = if cli.reproducible { 1 } else { cli.threads.unwrap_or(0) };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Threads(e.to_string()))?;
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::parse("")?,
    };
    let out = match cli.out {
        Some(o) => o,
        None => config.output()?.directory.unwrap_or_else(|| PathBuf::from("out")),
    };
    let mut run = Run {
        command: cli.command,
        config,
        config_path: cli.config,
        out,
        seed_override: cli.seed,
        threads: rayon::current_num_threads(),
        reproducible: cli.reproducible,
        outputs: Vec::new(),
    };
    std::fs::create_dir_all(&run.out).map_err(Error::from)?;
    match cli.command {
        Command::Trajectory => trajectory(&mut run),
        Command::Ensemble => ensemble(&mut run),
        Command::Fig1 => fig1(&mut run),
        Command::MaxentCheck => maxent_check(&mut run),
        Command::EvolveEffective => evolve(&mut run),
        Command::Compare => compare(&mut run),
        Command::HierarchyCheck => hierarchy_check(&mut run),
    }
}

fn write_field(path: &Path, field: &MomentField) -> Result<()> {
    Ok(io::to_file(path, |w| io::write_moment_field(w, field))?)
}

fn trajectory(run: &mut Run) -> Result<()> {
    let scenario = run.config.scenario()?;
    let cfg = run.config.trajectory()?;
    let psi = PureBlochState::normalized(cfg.bloch)?;
    let s0 = Microstate::new(ClassicalPoint::new(cfg.r, cfg.p), psi);
    let traj = integrate_trajectory_sampled(&s0, &scenario.hamiltonian, cfg.t_end, cfg.dt, cfg.stride)?;
    io::to_file(&run.path("trajectory.csv"), |w| io::write_trajectory(w, &traj))?;
    println!(
        "trajectory: {} samples, max relative energy drift {:e}, max Bloch-norm drift {:e}",
        traj.samples.len(),
        traj.max_relative_energy_drift,
        traj.max_norm_drift
    );
    run.write_manifest(
        None,
        json!({
            "samples": traj.samples.len(),
            "max_relative_energy_drift": traj.max_relative_energy_drift,
            "max_norm_drift": traj.max_norm_drift,
        }),
    )
}

fn ensemble(run: &mut Run) -> Result<()> {
    let scenario = run.config.scenario()?;
    let grid = run.config.grid()?;
    let cfg = run.config.ensemble()?;
    let times = run.config.evolution()?.sample_times();
    let order = if run.config.output()?.write_second { 2 } else { 1 };
    let seed = run.seed(cfg.seed);
    let mut e = sample_initial(&scenario.initial, cfg.n, seed)?;
    let bandwidth = match cfg.bandwidth {
        Some(b) => b,
        None => silverman_bandwidth(&e)?,
    };
    let mut rows = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        e = propagate(&e, &scenario.hamiltonian, t - e.time(), cfg.dt)?;
        io::to_file(&run.path(&format!("ensemble_{i:03}.csv")), |w| io::write_ensemble(w, &e))?;
        let field = estimate_moment_field(&e, &grid, order, bandwidth)?;
        write_field(&run.path(&format!("moments_{i:03}.csv")), &field)?;
        rows.push(json!({ "index": i, "t": t, "total_probability": field.total_probability() }));
    }
    println!("ensemble: {} members, {} report times, bandwidth {bandwidth:e}", cfg.n, times.len());
    run.write_manifest(Some(seed), json!({ "members": cfg.n, "bandwidth": bandwidth, "times": rows }))
}

fn fig1(run: &mut Run) -> Result<()> {
    let scenario = run.config.scenario()?;
    let cfg = run.config.fig1()?;
    let rows = fig1_scan(&scenario.hamiltonian, &scenario.initial, &cfg)?;
    io::to_file(&run.path("fig1.csv"), |w| io::write_fig1(w, &rows))?;
    println!("fig1: {} rows", rows.len());
    run.write_manifest(None, json!({ "rows": rows.len(), "fig1": cfg }))
}

fn random_first_moment(rng: &mut ChaCha8Rng) -> PauliVector {
    let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(f64::MIN_POSITIVE);
    let r = 0.5 * rng.random::<f64>().cbrt() / norm;
    PauliVector::new(0.5, r * v[0], r * v[1], r * v[2])
}

fn maxent_check(run: &mut Run) -> Result<()> {
    let method = run.config.closure()?;
    let cfg = run.config.maxent()?;
    let seed = run.seed(cfg.seed);
    let mut inputs = cfg.first.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    inputs.extend((0..cfg.random).map(|_| random_first_moment(&mut rng)));
    let rows: Vec<_> = inputs.iter().map(|f| (*f, apply_closure(f, &method).map_err(|e| e.to_string()))).collect();
    io::to_file(&run.path("closure.csv"), |w| io::write_closure_report(w, &rows))?;
    let mut failures = 0;
    for (i, (f, r)) in rows.iter().enumerate() {
        match r {
            Ok(r) => {
                let t = &r.second;
                println!(
                    "{i}: mu = {:?} -> mu11 = {:.6}, mu22 = {:.6}, mu33 = {:.6}, entropy {:.6}, worst violation {:e}",
                    f.mu,
                    t.coeff(1, 1),
                    t.coeff(2, 2),
                    t.coeff(3, 3),
                    r.entropy_value,
                    r.constraint_residuals.worst_violation()
                );
            }
            Err(e) => {
                failures += 1;
                println!("{i}: mu = {:?} -> error: {e}", f.mu);
            }
        }
    }
    let results: Vec<Value> = rows
        .iter()
        .map(|(f, r)| match r {
            Ok(r) => json!({ "first": f.mu, "result": r }),
            Err(e) => json!({ "first": f.mu, "error": e }),
        })
        .collect();
    run.write_manifest(Some(seed), json!({ "method": method.label(), "failures": failures, "results": results }))
}

#[derive(Serialize)]
struct SnapshotSummary {
    t: f64,
    total_probability: f64,
    unphysical_fraction: f64,
    negative_fraction: f64,
    energy: f64,
}

fn write_evolution(run: &mut Run, evo: &Evolution) -> Result<Vec<SnapshotSummary>> {
    let mut summary = Vec::new();
    for (i, s) in evo.snapshots.iter().enumerate() {
        write_field(&run.path(&format!("moments_{i:03}.csv")), &s.field)?;
        summary.push(SnapshotSummary {
            t: s.t,
            total_probability: s.total_probability,
            unphysical_fraction: s.unphysical_fraction,
            negative_fraction: s.negative_fraction,
            energy: s.energy,
        });
    }
    Ok(summary)
}

fn evolve(run: &mut Run) -> Result<()> {
    let grid = run.config.grid()?;
    let scenario = run.config.scenario()?;
    let cfg = run.config.evolution()?;
    let initial = MomentField::from_density(&scenario.initial, grid, 1);
    let evo = match evolve_effective(&initial, &scenario.hamiltonian, &cfg) {
        Ok(evo) => evo,
        Err(Error::EvolutionAborted { t, last_good }) => {
            write_field(&run.path("last_good.csv"), &last_good)?;
            run.write_manifest(None, json!({ "aborted_at": t }))?;
            return Err(Error::EvolutionAborted { t, last_good }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let summary = write_evolution(run, &evo)?;
    let d = &evo.diagnostics;
    if d.cfl_warning {
        eprintln!("warning: dt {} exceeds the advective limit {:e}", cfg.dt, d.cfl_limit);
    }
    if d.probability_warning {
        eprintln!("warning: total probability drifted by {:e}", d.max_probability_drift);
    }
    println!(
        "evolve-effective: {} steps, {} snapshots, probability drift {:e}",
        d.steps,
        summary.len(),
        d.max_probability_drift
    );
    run.write_manifest(None, json!({ "closure": cfg.closure.label(), "snapshots": summary, "diagnostics": d }))
}

fn compare(run: &mut Run) -> Result<()> {
    let grid = run.config.grid()?;
    let scenario = run.config.scenario()?;
    let mut cfg = run.config.comparison()?;
    cfg.seed = run.seed(cfg.seed);
    let report = compare_to_ensemble(&scenario, &grid, &cfg)?;
    io::to_file(&run.path("comparison.csv"), |w| io::write_comparison(w, &report))?;
    std::fs::write(run.path("comparison.json"), serde_json::to_string_pretty(&report)?).map_err(Error::from)?;
    for t in &report.times {
        let worst = t.observables.iter().map(|o| o.combined_z).fold(0.0, f64::max);
        println!("t = {}: largest observable error / combined bar {worst:.3}", t.t);
    }
    run.write_manifest(Some(cfg.seed), json!({ "members": cfg.n_members, "bandwidth": report.bandwidth }))
}

/// Padding of the reference domain beyond the target grid, in bandwidths.
const REFERENCE_PADDING: f64 = 8.0;

fn hierarchy_check(run: &mut Run) -> Result<()> {
    let grid = run.config.grid()?;
    let scenario = run.config.scenario()?;
    let cfg = run.config.ensemble()?;
    let seed = run.seed(cfg.seed);
    let e = sample_initial(&scenario.initial, cfg.n, seed)?;
    let bandwidth = match cfg.bandwidth {
        Some(b) => b,
        None => silverman_bandwidth(&e)?,
    };
    let field = estimate_moment_field(&e, &grid, 2, bandwidth)?;
    let (first, second) = (field.first()?, field.second()?);
    let trace: Vec<f64> = first.iter().zip(&field.f_c).map(|(r, f)| (r.trace() - f).abs()).collect();
    let chain: Vec<f64> = second.iter().zip(first).map(|(t, r)| partial_trace_first(t).max_abs_diff(r)).collect();

    let stepped = step_both_ways(&e, &scenario.hamiltonian, cfg.delta)?;
    let mc = mc_field_rate(&stepped, &grid, bandwidth)?;
    let pad = REFERENCE_PADDING * bandwidth;
    let domain = [grid.r_min - pad, grid.r_max + pad, grid.p_min - pad, grid.p_max + pad];
    let spacing = (grid.dr().min(grid.dp()) / 2.0).min(bandwidth / 4.0);
    let reference = smoothed_reference(
        |g: &PhaseGrid| {
            let f = MomentField::from_density(&scenario.initial, *g, 2);
            let hn = NodalHamiltonian::sample(g, &scenario.hamiltonian);
            Ok(first_moment_rhs_nodes(g, f.first()?, f.second()?, &hn, StencilOrder::Fourth).d_first)
        },
        domain,
        spacing,
        &grid,
        bandwidth,
    )?;
    let checks: Vec<_> = (0..4).map(|k| l2_check(&mc, &reference, k)).collect();

    let path = run.path("hierarchy_check.csv");
    io::to_file(&path, |w| {
        let mut w = csv::Writer::from_writer(w);
        let mut header = vec!["R".to_string(), "P".into(), "trace_residual".into(), "chain_residual".into()];
        for prefix in ["mc", "mc_se", "reference"] {
            header.extend((0..4).map(|k| format!("{prefix}_mu{k}")));
        }
        w.write_record(&header)?;
        for (node, x) in grid.points().iter().enumerate() {
            let mut row = vec![x.r, x.p, trace[node], chain[node]];
            row.extend(mc.mean[node].mu);
            row.extend(mc.standard_error[node].mu);
            row.extend(reference.values[node].mu);
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    })?;
    let max_trace = trace.iter().copied().fold(0.0, f64::max);
    let max_chain = chain.iter().copied().fold(0.0, f64::max);
    println!("hierarchy-check: max |Tr ρ̂ - F_C| {max_trace:e}, max |Tr_1 ρ̂⊗2 - ρ̂| {max_chain:e}");
    for c in &checks {
        println!("  mu{}: L2 error {:e}, combined bar {:e}, ratio {:.3}", c.component, c.error, c.combined, c.ratio);
    }
    run.write_manifest(
        Some(seed),
        json!({
            "bandwidth": bandwidth,
            "max_trace_residual": max_trace,
            "max_chain_residual": max_chain,
            "oracle": checks,
        }),
    )
}
