use hybrid_moments::config::RunConfig;
use hybrid_moments::maxent::{ClosureMethod, EntropyOrder};
use hybrid_moments::scenario::ClassicalPoint;
use hybrid_moments::Error;

fn key_of(e: Error) -> String {
    match e {
        Error::Config { key, .. } => key,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn full_file_parses() {
    let cfg = RunConfig::parse(
        r#"
[scenario]
name = "custom"
hamiltonian = ["0.5*(R^2 + P^2)", "0.1*R", "0", "cos(R)"]
[scenario.initial]
kind = "gaussian"
center = [1.0, -0.5]
sigma = 0.8
bloch = [0.0, 1.0, 0.0]
[grid]
n_r = 40
n_p = 32
r_min = -4
r_max = 5
p_min = -3
p_max = 3
[integrator]
t_end = 2.0
dt = 0.005
stencil = "fourth"
[closure]
method = "numeric"
entropy_order = 3
tol = 1e-9
[output]
sample_fractions = [0.0, 0.5, 1.0]
"#,
    )
    .unwrap();
    let grid = cfg.grid().unwrap();
    assert_eq!((grid.n_r, grid.n_p), (40, 32));
    let sc = cfg.scenario().unwrap();
    let h = sc.hamiltonian.eval(ClassicalPoint::new(2.0, 1.0));
    assert!((h.mu[0] - 2.5).abs() < 1e-12 && (h.mu[3] - 2f64.cos()).abs() < 1e-12);
    let evo = cfg.evolution().unwrap();
    assert_eq!(evo.sample_times(), vec![0.0, 1.0, 2.0]);
    assert!(matches!(evo.closure, ClosureMethod::Numeric { order: EntropyOrder::Mercator(3), .. }));
}

#[test]
fn errors_name_the_dotted_key() {
    let cases = [
        ("[grid]\nn = 16\n", "grid.r_min"),
        ("[grid]\nn = 4\nhalf_width = 2\n", "grid.n_r"),
        ("[scenario]\nname = \"nope\"\n", "scenario.name"),
        ("[scenario]\nname = \"custom\"\nhamiltonian = [\"R +\", \"0\", \"0\", \"0\"]\n", "scenario.hamiltonian"),
        ("[scenario.initial]\nkind = \"gaussian\"\nsigma = -1\n", "scenario.initial.sigma"),
        ("[closure]\nmethod = \"numeric\"\nentropy_order = 0\n", "closure.entropy_order"),
    ];
    for (text, key) in cases {
        let cfg = RunConfig::parse(text).unwrap();
        let err = if key.starts_with("grid") {
            cfg.grid().unwrap_err()
        } else if key.starts_with("closure") {
            cfg.closure().unwrap_err()
        } else {
            cfg.scenario().err().unwrap()
        };
        assert_eq!(key_of(err), key, "{text}");
    }
}

#[test]
fn missing_required_blocks_are_named() {
    let cfg = RunConfig::parse("").unwrap();
    assert_eq!(key_of(cfg.grid().unwrap_err()), "grid");
    assert_eq!(key_of(cfg.evolution().unwrap_err()), "integrator");
    assert_eq!(key_of(cfg.ensemble().unwrap_err()), "ensemble");
    assert_eq!(key_of(cfg.trajectory().unwrap_err()), "trajectory");
    assert!(cfg.fig1().is_ok() && cfg.maxent().is_ok() && cfg.scenario().is_ok());
}

#[test]
fn malformed_toml_is_a_config_error() {
    assert_eq!(key_of(RunConfig::parse("[grid\n").unwrap_err()), "config");
    assert_eq!(key_of(RunConfig::parse("grid = 3\n").unwrap_err()), "grid");
}
