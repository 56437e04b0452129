//! Ehrenfest microstate dynamics on `M_C × M_Q`.

use crate::error::{Error, Result};
use crate::pauli::{cross, PureBlochState};
use crate::scenario::{ClassicalPoint, OperatorField};

/// A hybrid microstate `(ξ, ρψ)` at time `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Microstate {
    pub xi: ClassicalPoint,
    pub psi: PureBlochState,
    pub t: f64,
}

impl Microstate {
    pub fn new(xi: ClassicalPoint, psi: PureBlochState) -> Self {
        Self { xi, psi, t: 0.0 }
    }
}

/// Time derivative of a microstate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tangent {
    pub dr: f64,
    pub dp: f64,
    pub dn: [f64; 3],
}

/// Unconstrained integrator state `(R, P, n)`; `n` may leave the sphere
/// between renormalizations.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RawState {
    pub r: f64,
    pub p: f64,
    pub n: [f64; 3],
}

impl RawState {
    pub fn from_microstate(s: &Microstate) -> Self {
        Self {
            r: s.xi.r,
            p: s.xi.p,
            n: s.psi.n(),
        }
    }

    pub fn xi(&self) -> ClassicalPoint {
        ClassicalPoint::new(self.r, self.p)
    }

    pub fn bloch_norm(&self) -> f64 {
        (self.n[0] * self.n[0] + self.n[1] * self.n[1] + self.n[2] * self.n[2]).sqrt()
    }

    fn is_finite(&self) -> bool {
        self.r.is_finite() && self.p.is_finite() && self.n.iter().all(|x| x.is_finite())
    }

    fn axpy(&self, c: f64, d: &Tangent) -> Self {
        Self {
            r: self.r + c * d.dr,
            p: self.p + c * d.dp,
            n: [
                self.n[0] + c * d.dn[0],
                self.n[1] + c * d.dn[1],
                self.n[2] + c * d.dn[2],
            ],
        }
    }
}

fn raw_rhs(s: &RawState, h: &OperatorField) -> Tangent {
    let xi = s.xi();
    let v = h.eval(xi);
    let hr = h.d_r(xi);
    let hp = h.d_p(xi);
    let n = s.n;
    let dr_f = hr.mu[0] + hr.mu[1] * n[0] + hr.mu[2] * n[1] + hr.mu[3] * n[2];
    let dp_f = hp.mu[0] + hp.mu[1] * n[0] + hp.mu[2] * n[1] + hp.mu[3] * n[2];
    let c = cross(v.spatial(), n);
    Tangent {
        dr: dp_f,
        dp: -dr_f,
        dn: [2.0 * c[0], 2.0 * c[1], 2.0 * c[2]],
    }
}

/// Ehrenfest vector field: `Ṙ = ∂_P f_H`, `Ṗ = -∂_R f_H`, `ṅ = 2 h × n`,
/// where `h` holds the spatial Pauli coordinates of `Ĥ(ξ)`.
pub fn microstate_rhs(s: &Microstate, h: &OperatorField) -> Tangent {
    raw_rhs(&RawState::from_microstate(s), h)
}

/// `f_H = Tr(ρψ Ĥ(ξ))`, classical part included.
pub fn hybrid_energy(s: &Microstate, h: &OperatorField) -> f64 {
    h.expectation(s.xi, s.psi.n())
}

/// One classical RK4 step of signed length `dt`, without renormalization.
pub fn rk4_step(s: &RawState, h: &OperatorField, dt: f64) -> RawState {
    let k1 = raw_rhs(s, h);
    let k2 = raw_rhs(&s.axpy(0.5 * dt, &k1), h);
    let k3 = raw_rhs(&s.axpy(0.5 * dt, &k2), h);
    let k4 = raw_rhs(&s.axpy(dt, &k3), h);
    let sixth = dt / 6.0;
    RawState {
        r: s.r + sixth * (k1.dr + 2.0 * k2.dr + 2.0 * k3.dr + k4.dr),
        p: s.p + sixth * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp),
        n: std::array::from_fn(|j| {
            s.n[j] + sixth * (k1.dn[j] + 2.0 * k2.dn[j] + 2.0 * k3.dn[j] + k4.dn[j])
        }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub xi: ClassicalPoint,
    pub n: [f64; 3],
    pub energy: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// Largest `| |n| - 1 |` observed before a renormalization.
    pub max_norm_drift: f64,
    /// Largest `|f_H(t) - f_H(0)| / |f_H(0)|` over the samples.
    pub max_relative_energy_drift: f64,
}

impl Trajectory {
    pub fn last_state(&self) -> Option<Microstate> {
        self.samples.last().map(|s| Microstate {
            xi: s.xi,
            psi: PureBlochState::from_raw(s.n),
            t: s.t,
        })
    }
}

fn step_plan(t_end: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "t_end must be nonnegative, got {t_end}"
        )));
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let last = if steps == 0 {
        0.0
    } else {
        t_end - (steps - 1) as f64 * dt
    };
    Ok((steps, last))
}

struct Stepper<'a> {
    h: &'a OperatorField,
    state: RawState,
    t: f64,
    max_norm_drift: f64,
}

impl Stepper<'_> {
    fn step(&mut self, dt: f64) -> Result<()> {
        let next = rk4_step(&self.state, self.h, dt);
        let norm = next.bloch_norm();
        if !next.is_finite() || norm == 0.0 {
            return Err(Error::NonFiniteState {
                t: self.t + dt,
                last_good: Microstate {
                    xi: self.state.xi(),
                    psi: PureBlochState::from_raw(self.state.n),
                    t: self.t,
                },
            });
        }
        self.max_norm_drift = self.max_norm_drift.max((norm - 1.0).abs());
        self.state = RawState {
            n: next.n.map(|x| x / norm),
            ..next
        };
        self.t += dt;
        Ok(())
    }
}

/// Integrates with RK4, renormalizing the Bloch vector after every step and
/// recording a sample every `stride` steps (the final state is always kept).
pub fn integrate_trajectory_sampled(
    s0: &Microstate,
    h: &OperatorField,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<Trajectory> {
    let (steps, last) = step_plan(t_end, dt)?;
    let stride = stride.max(1);
    let mut stepper = Stepper {
        h,
        state: RawState::from_microstate(s0),
        t: s0.t,
        max_norm_drift: 0.0,
    };
    let e0 = hybrid_energy(s0, h);
    let mut traj = Trajectory::default();
    let record = |st: &Stepper, traj: &mut Trajectory| {
        let ms = Microstate {
            xi: st.state.xi(),
            psi: PureBlochState::from_raw(st.state.n),
            t: st.t,
        };
        let energy = hybrid_energy(&ms, h);
        let drift = (energy - e0).abs() / e0.abs().max(f64::MIN_POSITIVE);
        traj.max_relative_energy_drift = traj.max_relative_energy_drift.max(drift);
        traj.samples.push(TrajectorySample {
            t: st.t,
            xi: ms.xi,
            n: st.state.n,
            energy,
        });
    };
    record(&stepper, &mut traj);
    for k in 0..steps {
        let this_dt = if k + 1 == steps { last } else { dt };
        stepper.step(this_dt)?;
        if (k + 1) % stride == 0 || k + 1 == steps {
            record(&stepper, &mut traj);
        }
    }
    traj.max_norm_drift = stepper.max_norm_drift;
    Ok(traj)
}

/// RK4 trajectory sampled at every step.
pub fn integrate_trajectory(
    s0: &Microstate,
    h: &OperatorField,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    integrate_trajectory_sampled(s0, h, t_end, dt, 1)
}

/// Advances a microstate by `t` without recording samples. Returns the final
/// state and the largest pre-renormalization norm drift.
pub fn advance(s0: &Microstate, h: &OperatorField, t: f64, dt: f64) -> Result<(Microstate, f64)> {
    let (steps, last) = step_plan(t, dt)?;
    let mut stepper = Stepper {
        h,
        state: RawState::from_microstate(s0),
        t: s0.t,
        max_norm_drift: 0.0,
    };
    for k in 0..steps {
        stepper.step(if k + 1 == steps { last } else { dt })?;
    }
    Ok((
        Microstate {
            xi: stepper.state.xi(),
            psi: PureBlochState::from_raw(stepper.state.n),
            t: stepper.t,
        },
        stepper.max_norm_drift,
    ))
}
