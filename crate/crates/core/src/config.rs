//! Run configuration read from a TOML file.
//!
//! Blocks: `scenario`, `grid`, `integrator`, `ensemble`, `closure`, `output`,
//! `fig1`, `trajectory`, `maxent`. Each accessor reads one block; errors are
//! [`Error::Config`] carrying the dotted key, for example `grid.n_r`, or the
//! block name when a required block is absent.

use std::path::PathBuf;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::evolution::{ComparisonConfig, EvolutionConfig, Observable, DEFAULT_SAMPLE_FRACTIONS};
use crate::expr;
use crate::grid::{PhaseGrid, StencilOrder};
use crate::hierarchy::Fig1Config;
use crate::maxent::{ClosureMethod, EntropyOrder};
use crate::pauli::{PauliVector, PureBlochState};
use crate::scenario::{
    example_hamiltonian, example_initial_density, finite_difference_partials, gaussian_pure_density,
    harmonic_hamiltonian, uncoupled_hamiltonian, ClassicalDensity, ClassicalPoint, ConditionalMixtureField,
    PointwiseField, Scenario, DEFAULT_FD_STEP,
};

/// A parsed configuration file together with its source text.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub text: String,
    table: Table,
}

/// One block of the file.
#[derive(Clone, Copy, Debug)]
pub struct Block<'a> {
    name: &'a str,
    table: Option<&'a Table>,
}

impl<'a> Block<'a> {
    pub fn is_present(&self) -> bool {
        self.table.is_some()
    }

    fn key(&self, k: &str) -> String {
        format!("{}.{k}", self.name)
    }

    fn err(&self, k: &str, message: impl Into<String>) -> Error {
        Error::config(self.key(k), message)
    }

    fn value(&self, k: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(k))
    }

    pub fn f64_opt(&self, k: &str) -> Result<Option<f64>> {
        match self.value(k) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(v) => Err(self.err(k, format!("expected a number, found {}", v.type_str()))),
        }
    }

    pub fn f64_or(&self, k: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(k)?.unwrap_or(default))
    }

    pub fn f64_req(&self, k: &str) -> Result<f64> {
        self.f64_opt(k)?.ok_or_else(|| self.err(k, "missing"))
    }

    pub fn positive(&self, k: &str, default: Option<f64>) -> Result<f64> {
        let v = match default {
            Some(d) => self.f64_or(k, d)?,
            None => self.f64_req(k)?,
        };
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(k, format!("must be positive, got {v}")))
        }
    }

    pub fn u64_opt(&self, k: &str) -> Result<Option<u64>> {
        match self.value(k) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(v) => Err(self.err(k, format!("expected a nonnegative integer, found {v}"))),
        }
    }

    pub fn usize_or(&self, k: &str, default: usize) -> Result<usize> {
        Ok(self.u64_opt(k)?.map_or(default, |v| v as usize))
    }

    pub fn usize_req(&self, k: &str) -> Result<usize> {
        self.u64_opt(k)?.map(|v| v as usize).ok_or_else(|| self.err(k, "missing"))
    }

    pub fn bool_or(&self, k: &str, default: bool) -> Result<bool> {
        match self.value(k) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(v) => Err(self.err(k, format!("expected a boolean, found {}", v.type_str()))),
        }
    }

    pub fn str_opt(&self, k: &str) -> Result<Option<&'a str>> {
        match self.value(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(v) => Err(self.err(k, format!("expected a string, found {}", v.type_str()))),
        }
    }

    pub fn numbers<const N: usize>(&self, k: &str) -> Result<Option<[f64; N]>> {
        let Some(v) = self.value(k) else { return Ok(None) };
        let arr = v.as_array().ok_or_else(|| self.err(k, format!("expected an array of {N} numbers")))?;
        if arr.len() != N {
            return Err(self.err(k, format!("expected {N} entries, found {}", arr.len())));
        }
        let mut out = [0.0; N];
        for (o, x) in out.iter_mut().zip(arr) {
            *o = match x {
                Value::Float(f) => *f,
                Value::Integer(i) => *i as f64,
                _ => return Err(self.err(k, "entries must be numbers")),
            };
        }
        Ok(Some(out))
    }

    pub fn number_list(&self, k: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.value(k) else { return Ok(None) };
        let arr = v.as_array().ok_or_else(|| self.err(k, "expected an array of numbers"))?;
        arr.iter()
            .map(|x| match x {
                Value::Float(f) => Ok(*f),
                Value::Integer(i) => Ok(*i as f64),
                _ => Err(self.err(k, "entries must be numbers")),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn strings<const N: usize>(&self, k: &str) -> Result<Option<[String; N]>> {
        let Some(v) = self.value(k) else { return Ok(None) };
        let arr = v.as_array().ok_or_else(|| self.err(k, format!("expected an array of {N} strings")))?;
        if arr.len() != N {
            return Err(self.err(k, format!("expected {N} entries, found {}", arr.len())));
        }
        let mut out: [String; N] = std::array::from_fn(|_| String::new());
        for (o, x) in out.iter_mut().zip(arr) {
            *o = match x {
                Value::String(s) => s.clone(),
                Value::Float(f) => f.to_string(),
                Value::Integer(i) => i.to_string(),
                _ => return Err(self.err(k, "entries must be strings")),
            };
        }
        Ok(Some(out))
    }

    /// Nested table `k`, addressed in errors as `full`.
    fn sub(&self, k: &str, full: &'a str) -> Result<Block<'a>> {
        match self.value(k) {
            None => Ok(Block { name: full, table: None }),
            Some(Value::Table(t)) => Ok(Block { name: full, table: Some(t) }),
            Some(_) => Err(self.err(k, "expected a table")),
        }
    }
}

const BLOCKS: [&str; 9] = [
    "scenario", "grid", "integrator", "ensemble", "closure", "output", "fig1", "trajectory", "maxent",
];

/// Ensemble block: Monte Carlo settings.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub n: usize,
    pub seed: u64,
    pub bandwidth: Option<f64>,
    /// Microstate integrator step.
    pub dt: f64,
    /// Half-width of the central difference used by the oracles.
    pub delta: f64,
}

/// Trajectory block: one microstate run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryConfig {
    pub r: f64,
    pub p: f64,
    pub bloch: [f64; 3],
    pub t_end: f64,
    pub dt: f64,
    pub stride: usize,
}

/// Maxent block: first moments to close.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxentCheckConfig {
    pub first: Vec<PauliVector>,
    pub random: usize,
    pub seed: u64,
}

/// Output block.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub sample_fractions: Vec<f64>,
    pub write_second: bool,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| Error::config("config", e.to_string()))?;
        if let Some(k) = table.keys().find(|k| !BLOCKS.contains(&k.as_str())) {
            return Err(Error::config(k.clone(), "unknown block"));
        }
        for (k, v) in &table {
            if !v.is_table() {
                return Err(Error::config(k.clone(), "expected a table"));
            }
        }
        Ok(Self { text: text.to_owned(), table })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn block(&self, name: &'static str) -> Block<'_> {
        Block { name, table: self.table.get(name).and_then(Value::as_table) }
    }

    /// The block, or a config error naming it when absent.
    pub fn required(&self, name: &'static str) -> Result<Block<'_>> {
        let b = self.block(name);
        if b.is_present() {
            Ok(b)
        } else {
            Err(Error::config(name, "required block is missing"))
        }
    }

    /// Scenario block; the example scenario when absent.
    ///
    /// `name` is one of `example`, `uncoupled`, `harmonic`, `custom`. A custom
    /// scenario supplies `hamiltonian = [H0, H1, H2, H3]` as expressions in
    /// `R` and `P`. Any scenario may override its initial density with a
    /// `[scenario.initial]` table of kind `example`, `gaussian` (`center`,
    /// `sigma`, `bloch`) or `custom` (`density`, `bounds`, `bloch` as three
    /// expressions).
    pub fn scenario(&self) -> Result<Scenario> {
        let b = self.block("scenario");
        let name = b.str_opt("name")?.unwrap_or("example");
        let hamiltonian = match name {
            "example" => example_hamiltonian(),
            "uncoupled" => uncoupled_hamiltonian(),
            "harmonic" => harmonic_hamiltonian(),
            "custom" => {
                let src = b.strings::<4>("hamiltonian")?.ok_or_else(|| b.err("hamiltonian", "missing"))?;
                let field = PointwiseField::from_expressions([&src[0], &src[1], &src[2], &src[3]])
                    .map_err(|e| b.err("hamiltonian", e.to_string()))?;
                let step = b.positive("fd_step", Some(DEFAULT_FD_STEP))?;
                finite_difference_partials(&field, step)?
            }
            other => return Err(b.err("name", format!("unknown scenario `{other}`"))),
        };
        let initial = initial_density(&b.sub("initial", "scenario.initial")?)?;
        Ok(Scenario { name: name.to_owned(), hamiltonian, initial })
    }

    pub fn grid(&self) -> Result<PhaseGrid> {
        let b = self.required("grid")?;
        let (n_r, n_p) = match b.u64_opt("n")? {
            Some(n) => (n as usize, n as usize),
            None => (b.usize_req("n_r")?, b.usize_req("n_p")?),
        };
        let (r_min, r_max, p_min, p_max) = match b.f64_opt("half_width")? {
            Some(h) => (-h, h, -h, h),
            None => (b.f64_req("r_min")?, b.f64_req("r_max")?, b.f64_req("p_min")?, b.f64_req("p_max")?),
        };
        if n_r < crate::grid::MIN_NODES || n_p < crate::grid::MIN_NODES {
            return Err(b.err("n_r", format!("at least {} nodes per axis are required", crate::grid::MIN_NODES)));
        }
        if !(r_max > r_min) {
            return Err(b.err("r_max", "must exceed r_min"));
        }
        if !(p_max > p_min) {
            return Err(b.err("p_max", "must exceed p_min"));
        }
        PhaseGrid::new(r_min, r_max, p_min, p_max, n_r, n_p)
    }

    pub fn closure(&self) -> Result<ClosureMethod> {
        let b = self.block("closure");
        match b.str_opt("method")?.unwrap_or("closed_form") {
            "closed_form" => Ok(ClosureMethod::ClosedForm),
            "numeric" => {
                let order = match b.value("entropy_order") {
                    None => EntropyOrder::Exact,
                    Some(Value::String(s)) if s == "exact" => EntropyOrder::Exact,
                    Some(Value::Integer(m)) if *m >= 1 => EntropyOrder::Mercator(*m as usize),
                    Some(v) => return Err(b.err("entropy_order", format!("expected \"exact\" or an integer ≥ 1, found {v}"))),
                };
                Ok(ClosureMethod::Numeric {
                    order,
                    tol: b.positive("tol", Some(1e-8))?,
                    max_iter: b.usize_or("max_iter", 10_000)?,
                })
            }
            other => Err(b.err("method", format!("unknown closure `{other}`"))),
        }
    }

    pub fn output(&self) -> Result<OutputConfig> {
        let b = self.block("output");
        let sample_fractions = b.number_list("sample_fractions")?.unwrap_or_else(|| DEFAULT_SAMPLE_FRACTIONS.to_vec());
        if let Some(f) = sample_fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(b.err("sample_fractions", format!("fraction {f} outside [0, 1]")));
        }
        Ok(OutputConfig {
            directory: b.str_opt("directory")?.map(PathBuf::from),
            sample_fractions,
            write_second: b.bool_or("write_second", false)?,
        })
    }

    pub fn evolution(&self) -> Result<EvolutionConfig> {
        let b = self.required("integrator")?;
        let stencil = match b.str_opt("stencil")?.unwrap_or("second") {
            "second" => StencilOrder::Second,
            "fourth" => StencilOrder::Fourth,
            other => return Err(b.err("stencil", format!("unknown stencil `{other}`"))),
        };
        Ok(EvolutionConfig {
            t_end: {
                let t = b.f64_req("t_end")?;
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(b.err("t_end", format!("must be nonnegative, got {t}")));
                }
                t
            },
            dt: b.positive("dt", None)?,
            closure: self.closure()?,
            stencil,
            sample_fractions: self.output()?.sample_fractions,
            purity_projection: b.bool_or("purity_projection", false)?,
        })
    }

    pub fn ensemble(&self) -> Result<EnsembleConfig> {
        let b = self.required("ensemble")?;
        let n = b.usize_req("n")?;
        if n == 0 {
            return Err(b.err("n", "must be positive"));
        }
        Ok(EnsembleConfig {
            n,
            seed: b.u64_opt("seed")?.unwrap_or(1),
            bandwidth: match b.f64_opt("bandwidth")? {
                None => None,
                Some(_) => Some(b.positive("bandwidth", None)?),
            },
            dt: b.positive("dt", Some(1e-3))?,
            delta: b.positive("delta", Some(1e-3))?,
        })
    }

    pub fn comparison(&self) -> Result<ComparisonConfig> {
        let e = self.ensemble()?;
        let b = self.block("ensemble");
        let observables = match b.value("observables") {
            None => Observable::DEFAULT.to_vec(),
            Some(v) => {
                let arr = v.as_array().ok_or_else(|| b.err("observables", "expected an array of names"))?;
                arr.iter()
                    .map(|x| match x.as_str() {
                        Some("sigma1") => Ok(Observable::Sigma1),
                        Some("sigma2") => Ok(Observable::Sigma2),
                        Some("sigma3") => Ok(Observable::Sigma3),
                        Some("R") => Ok(Observable::R),
                        Some("P") => Ok(Observable::P),
                        Some("H") => Ok(Observable::Energy),
                        _ => Err(b.err("observables", format!("unknown observable {x}"))),
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(ComparisonConfig {
            n_members: e.n,
            seed: e.seed,
            bandwidth: e.bandwidth,
            mc_dt: e.dt,
            evolution: self.evolution()?,
            observables,
            grid_error: b.bool_or("grid_error", true)?,
        })
    }

    /// Fig1 block; defaults when absent.
    pub fn fig1(&self) -> Result<Fig1Config> {
        let b = self.block("fig1");
        let d = Fig1Config::default();
        let cfg = Fig1Config {
            r_min: b.f64_or("r_min", d.r_min)?,
            r_max: b.f64_or("r_max", d.r_max)?,
            n_r: b.usize_or("n_r", d.n_r)?,
            theta_min: b.f64_or("theta_min", d.theta_min)?,
            theta_max: b.f64_or("theta_max", d.theta_max)?,
            n_theta: b.usize_or("n_theta", d.n_theta)?,
            p_fixed: b.f64_or("p_fixed", d.p_fixed)?,
            step: b.positive("step", Some(d.step))?,
        };
        if cfg.n_r == 0 {
            return Err(b.err("n_r", "must be positive"));
        }
        if cfg.n_theta == 0 {
            return Err(b.err("n_theta", "must be positive"));
        }
        Ok(cfg)
    }

    pub fn trajectory(&self) -> Result<TrajectoryConfig> {
        let b = self.required("trajectory")?;
        let bloch = b.numbers::<3>("bloch")?.unwrap_or([0.0, 0.0, 1.0]);
        PureBlochState::normalized(bloch).map_err(|e| b.err("bloch", e.to_string()))?;
        let t_end = b.f64_req("t_end")?;
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(b.err("t_end", format!("must be nonnegative, got {t_end}")));
        }
        Ok(TrajectoryConfig {
            r: b.f64_or("r", 0.0)?,
            p: b.f64_or("p", 0.0)?,
            bloch,
            t_end,
            dt: b.positive("dt", Some(1e-3))?,
            stride: b.usize_or("stride", 1)?.max(1),
        })
    }

    /// Maxent block; when absent, the maximally mixed state alone.
    pub fn maxent(&self) -> Result<MaxentCheckConfig> {
        let b = self.block("maxent");
        let mut first = Vec::new();
        if let Some(v) = b.value("first") {
            let rows = v.as_array().ok_or_else(|| b.err("first", "expected an array of 4-vectors"))?;
            for (i, row) in rows.iter().enumerate() {
                let key = format!("first[{i}]");
                let arr = row.as_array().filter(|a| a.len() == 4).ok_or_else(|| b.err(&key, "expected 4 numbers"))?;
                let mut mu = [0.0; 4];
                for (m, x) in mu.iter_mut().zip(arr) {
                    *m = x
                        .as_float()
                        .or_else(|| x.as_integer().map(|i| i as f64))
                        .ok_or_else(|| b.err(&key, "entries must be numbers"))?;
                }
                first.push(PauliVector { mu });
            }
        }
        let random = b.usize_or("random", 0)?;
        if first.is_empty() && random == 0 {
            first.push(PauliVector::scalar(0.5));
        }
        Ok(MaxentCheckConfig { first, random, seed: b.u64_opt("seed")?.unwrap_or(1) })
    }
}

fn initial_density(b: &Block<'_>) -> Result<ConditionalMixtureField> {
    match b.str_opt("kind")?.unwrap_or("example") {
        "example" => Ok(example_initial_density()),
        "gaussian" => {
            let [r, p] = b.numbers::<2>("center")?.unwrap_or([0.0, 0.0]);
            let sigma = b.positive("sigma", Some(1.0))?;
            let bloch = b.numbers::<3>("bloch")?.unwrap_or([0.0, 0.0, 1.0]);
            let state = PureBlochState::normalized(bloch).map_err(|e| b.err("bloch", e.to_string()))?;
            Ok(gaussian_pure_density(ClassicalPoint::new(r, p), sigma, state))
        }
        "custom" => {
            let src = b.str_opt("density")?.ok_or_else(|| b.err("density", "missing"))?;
            let f = expr::parse(src).map_err(|e| b.err("density", e.to_string()))?;
            let bounds = b.numbers::<4>("bounds")?.ok_or_else(|| b.err("bounds", "missing"))?;
            let density = ClassicalDensity::custom(move |x| f.eval(x.r, x.p), bounds)
                .map_err(|e| b.err("density", e.to_string()))?;
            let bloch_src = b.strings::<3>("bloch")?.ok_or_else(|| b.err("bloch", "missing"))?;
            let parsed = bloch_src
                .iter()
                .map(|s| expr::parse(s))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| b.err("bloch", e.to_string()))?;
            let fallback = PureBlochState::new(0.0, 0.0, 1.0)?;
            Ok(ConditionalMixtureField::new(density, move |x| {
                let v = [0, 1, 2].map(|k| parsed[k].eval(x.r, x.p));
                vec![(1.0, PureBlochState::normalized(v).unwrap_or(fallback))]
            }))
        }
        other => Err(b.err("kind", format!("unknown initial density `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_grid_names_block() {
        let c = RunConfig::parse("[integrator]\ndt = 0.01\nt_end = 1.0\n").unwrap();
        match c.grid() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "grid"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_values_name_keys() {
        let c = RunConfig::parse("[grid]\nhalf_width = 4.0\nn = 4\n").unwrap();
        assert!(matches!(c.grid(), Err(Error::Config { key, .. }) if key == "grid.n_r"));
        let c = RunConfig::parse("[integrator]\ndt = -1\nt_end = 1\n").unwrap();
        assert!(matches!(c.evolution(), Err(Error::Config { key, .. }) if key == "integrator.dt"));
        let c = RunConfig::parse("[closure]\nmethod = \"magic\"\n").unwrap();
        assert!(matches!(c.closure(), Err(Error::Config { key, .. }) if key == "closure.method"));
        let c = RunConfig::parse("[scenario]\nname = \"custom\"\nhamiltonian = [\"R^\", \"0\", \"0\", \"0\"]\n").unwrap();
        assert!(matches!(c.scenario(), Err(Error::Config { key, .. }) if key == "scenario.hamiltonian"));
        assert!(matches!(RunConfig::parse("[gird]\n"), Err(Error::Config { key, .. }) if key == "gird"));
    }

    #[test]
    fn full_config() {
        let text = r#"
[scenario]
name = "custom"
hamiltonian = ["0.5*(R^2+P^2)", "0", "0", "-0.5"]
[scenario.initial]
kind = "gaussian"
center = [1.0, 0]
sigma = 0.5
bloch = [1, 0, 0]
[grid]
r_min = -4
r_max = 4
p_min = -3
p_max = 3
n_r = 32
n_p = 24
[integrator]
dt = 0.01
t_end = 0.5
stencil = "fourth"
[closure]
method = "numeric"
entropy_order = 3
[ensemble]
n = 100
seed = 7
observables = ["sigma3", "H"]
[output]
sample_fractions = [0.0, 1.0]
"#;
        let c = RunConfig::parse(text).unwrap();
        let s = c.scenario().unwrap();
        assert_eq!(s.name, "custom");
        let v = s.hamiltonian.eval(ClassicalPoint::new(1.0, 2.0));
        assert_eq!(v.mu, [2.5, 0.0, 0.0, -0.5]);
        assert!((s.hamiltonian.d_p(ClassicalPoint::new(1.0, 2.0)).mu[0] - 2.0).abs() < 1e-8);
        assert!((s.initial.f_c(ClassicalPoint::new(1.0, 0.0)) - 1.0 / (2.0 * std::f64::consts::PI * 0.25)).abs() < 1e-12);
        let g = c.grid().unwrap();
        assert_eq!((g.n_r, g.n_p, g.p_min), (32, 24, -3.0));
        let e = c.evolution().unwrap();
        assert_eq!(e.stencil, StencilOrder::Fourth);
        assert_eq!(e.sample_fractions, vec![0.0, 1.0]);
        assert!(matches!(e.closure, ClosureMethod::Numeric { order: EntropyOrder::Mercator(3), .. }));
        let cmp = c.comparison().unwrap();
        assert_eq!(cmp.seed, 7);
        assert_eq!(cmp.observables, vec![Observable::Sigma3, Observable::Energy]);
    }

    #[test]
    fn defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.fig1().unwrap(), Fig1Config::default());
        assert_eq!(c.scenario().unwrap().name, "example");
        assert_eq!(c.maxent().unwrap().first, vec![PauliVector::scalar(0.5)]);
        assert!(matches!(c.ensemble(), Err(Error::Config { key, .. }) if key == "ensemble"));
    }
}
