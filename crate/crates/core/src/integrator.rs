//! Fixed-step time integration of the chain state.
//!
//! The state of each link is flattened as `[R (9, column-major), r, v, ω, η, η̇]`.
//! Rotations follow `Ṙ = R ω̂` and are projected back onto SO(3) after every
//! step.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, solve, Chain, EndWrenches, LinkState, SystemSolution};
use crate::error::{Error, Result};
use crate::linalg::DenseLu;
use crate::screw::{skew, Mat3, RotationMatrix, Vec3, Vec6};
use crate::validation::{external_power, Energy};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Rk4,
    ExplicitEuler,
    /// Implicit midpoint rule solved by simplified Newton; for stiff links.
    ImplicitMidpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub h: f64,
    pub t_end: f64,
    /// Record every `stride`-th step.
    pub stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rk4,
            h: 1e-4,
            t_end: 1.0,
            stride: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub t: f64,
    pub links: Vec<LinkState>,
}

/// External wrenches as a function of time.
pub type Forcing<'a> = dyn Fn(f64) -> Vec<EndWrenches> + 'a;

/// The chain together with its loads, viewed as `ẏ = f(t, y)`.
pub struct Dynamics<'a> {
    pub chain: &'a Chain,
    forcing: Box<Forcing<'a>>,
    max_solve_residual: Cell<f64>,
    solves: Cell<usize>,
}

impl<'a> Dynamics<'a> {
    pub fn new(chain: &'a Chain, forcing: impl Fn(f64) -> Vec<EndWrenches> + 'a) -> Self {
        Self {
            chain,
            forcing: Box::new(forcing),
            max_solve_residual: Cell::new(0.0),
            solves: Cell::new(0),
        }
    }

    pub fn unforced(chain: &'a Chain) -> Self {
        let n = chain.len();
        Self::new(chain, move |_| (0..n).map(EndWrenches::zero).collect())
    }

    pub fn wrenches(&self, t: f64) -> Vec<EndWrenches> {
        (self.forcing)(t)
    }

    /// Largest relative solve residual seen so far.
    pub fn max_solve_residual(&self) -> f64 {
        self.max_solve_residual.get()
    }

    pub fn solve_count(&self) -> usize {
        self.solves.get()
    }

    pub fn len(&self) -> usize {
        self.chain.modal_dofs().iter().map(|d| 18 + 2 * d).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    pub fn pack(&self, s: &ChainState) -> DVector<f64> {
        let mut y = DVector::zeros(self.len());
        let mut o = 0;
        for l in &s.links {
            let d = l.eta.len();
            y.rows_mut(o, 9).copy_from_slice(l.rot.matrix().as_slice());
            y.rows_mut(o + 9, 3).copy_from(&l.r);
            y.rows_mut(o + 12, 3).copy_from(&l.v);
            y.rows_mut(o + 15, 3).copy_from(&l.omega);
            y.rows_mut(o + 18, d).copy_from(&l.eta);
            y.rows_mut(o + 18 + d, d).copy_from(&l.eta_dot);
            o += 18 + 2 * d;
        }
        y
    }

    pub fn unpack(&self, t: f64, y: &DVector<f64>) -> ChainState {
        let mut o = 0;
        let links = self
            .chain
            .modal_dofs()
            .into_iter()
            .map(|d| {
                let v3 = |k: usize| Vec3::new(y[o + k], y[o + k + 1], y[o + k + 2]);
                let rot = Mat3::from_column_slice(y.rows(o, 9).as_slice());
                let s = LinkState {
                    rot: RotationMatrix::closest(&rot),
                    r: v3(9),
                    v: v3(12),
                    omega: v3(15),
                    eta: y.rows(o + 18, d).into_owned(),
                    eta_dot: y.rows(o + 18 + d, d).into_owned(),
                };
                o += 18 + 2 * d;
                s
            })
            .collect();
        ChainState { t, links }
    }

    /// Solves the stacked system at `state`.
    pub fn solve_at(&self, state: &ChainState) -> Result<SystemSolution> {
        let mats = assemble(self.chain, &state.links, &self.wrenches(state.t))?;
        let sol = solve(&mats)?;
        self.solves.set(self.solves.get() + 1);
        if sol.relative_residual > self.max_solve_residual.get() {
            self.max_solve_residual.set(sol.relative_residual);
        }
        Ok(sol)
    }

    /// State rate `ṙ` and the solution it came from.
    pub fn derivative(&self, state: &ChainState) -> Result<(DVector<f64>, SystemSolution)> {
        let sol = self.solve_at(state)?;
        let mut dy = DVector::zeros(self.len());
        let mut o = 0;
        for (i, l) in state.links.iter().enumerate() {
            let d = l.eta.len();
            let rdot = l.rot.matrix() * skew(&l.omega);
            dy.rows_mut(o, 9).copy_from_slice(rdot.as_slice());
            dy.rows_mut(o + 9, 3).copy_from(&l.v);
            dy.rows_mut(o + 12, 6).copy_from(&sol.z_dot[i]);
            dy.rows_mut(o + 18, d).copy_from(&l.eta_dot);
            dy.rows_mut(o + 18 + d, d).copy_from(&sol.eta_ddot[i]);
            o += 18 + 2 * d;
        }
        Ok((dy, sol))
    }

    fn f(&self, t: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.unpack(t, y);
        if !s.links.iter().all(LinkState::is_finite) {
            return Err(Error::NonFinite("state".into()));
        }
        Ok(self.derivative(&s)?.0)
    }
}

/// Stepper carrying the frozen Newton matrix of the implicit scheme.
pub struct Stepper {
    pub scheme: Scheme,
    pub h: f64,
    newton: Option<DenseLu>,
    newton_age: usize,
    last_rate: Option<DVector<f64>>,
}

const NEWTON_REFRESH: usize = 50;
const NEWTON_MAX_ITER: usize = 12;

impl Stepper {
    pub fn new(scheme: Scheme, h: f64) -> Self {
        Self {
            scheme,
            h,
            newton: None,
            newton_age: 0,
            last_rate: None,
        }
    }

    /// Advances by one step of length `h` (or `h_override`).
    pub fn step(
        &mut self,
        dynamics: &Dynamics,
        state: &ChainState,
        h_override: Option<f64>,
    ) -> Result<ChainState> {
        let h = h_override.unwrap_or(self.h);
        let t = state.t;
        let y = dynamics.pack(state);
        let y1 = match self.scheme {
            Scheme::ExplicitEuler => &y + h * dynamics.f(t, &y)?,
            Scheme::Rk4 => {
                let k1 = dynamics.f(t, &y)?;
                let k2 = dynamics.f(t + 0.5 * h, &(&y + 0.5 * h * &k1))?;
                let k3 = dynamics.f(t + 0.5 * h, &(&y + 0.5 * h * &k2))?;
                let k4 = dynamics.f(t + h, &(&y + h * &k3))?;
                &y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            }
            Scheme::ImplicitMidpoint => self.midpoint(dynamics, t, &y, h)?,
        };
        let next = dynamics.unpack(t + h, &y1);
        if !next.links.iter().all(LinkState::is_finite) {
            return Err(Error::NonFinite("state after step".into()));
        }
        Ok(next)
    }

    fn jacobian(
        dynamics: &Dynamics,
        t: f64,
        y: &DVector<f64>,
        f0: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        let n = y.len();
        let mut j = DMatrix::zeros(n, n);
        let mut yp = y.clone();
        for c in 0..n {
            let eps = 1e-7 * y[c].abs().max(1e-3);
            yp[c] = y[c] + eps;
            let fp = dynamics.f(t, &yp)?;
            yp[c] = y[c];
            j.set_column(c, &((fp - f0) / eps));
        }
        Ok(j)
    }

    fn refresh(&mut self, dynamics: &Dynamics, t: f64, y: &DVector<f64>, h: f64) -> Result<()> {
        log::debug!("refreshing Newton matrix at t = {t}");
        let f0 = dynamics.f(t, y)?;
        let j = Self::jacobian(dynamics, t, y, &f0)?;
        let n = y.len();
        self.newton = Some(DenseLu::new(&(DMatrix::identity(n, n) - 0.5 * h * j))?);
        self.newton_age = 0;
        Ok(())
    }

    /// Solves `k = f(t + h/2, y + h k / 2)` and returns `y + h k`.
    fn midpoint(
        &mut self,
        dynamics: &Dynamics,
        t: f64,
        y: &DVector<f64>,
        h: f64,
    ) -> Result<DVector<f64>> {
        if self.newton.is_none() || self.newton_age >= NEWTON_REFRESH {
            self.refresh(dynamics, t, y, h)?;
        }
        self.newton_age += 1;
        let tm = t + 0.5 * h;
        for attempt in 0..2 {
            let mut k = match &self.last_rate {
                Some(k) if k.len() == y.len() => k.clone(),
                _ => dynamics.f(t, y)?,
            };
            let scale = 1.0 + y.amax();
            for _ in 0..NEWTON_MAX_ITER {
                let ym = y + 0.5 * h * &k;
                let res = &k - dynamics.f(tm, &ym)?;
                let lu = self.newton.as_ref().expect("Newton matrix present");
                let dk = lu.solve(&res).ok_or(Error::SingularSystem {
                    condition: f64::INFINITY,
                })?;
                k -= &dk;
                if h * dk.amax() <= 1e-13 * scale {
                    self.last_rate = Some(k.clone());
                    return Ok(y + h * k);
                }
            }
            if attempt == 0 {
                self.last_rate = None;
                self.refresh(dynamics, tm, y, h)?;
            }
        }
        Err(Error::Residual { relative: f64::NAN })
    }
}

/// One stored sample of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub t: f64,
    pub links: Vec<LinkState>,
    pub wrenches: Vec<Vec6>,
    /// Norm of the velocity-level constraint residual of each joint.
    pub residuals: Vec<f64>,
    pub energy: Energy,
    /// External work done on the chain since the start, trapezoidal per step.
    pub work: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<Record>,
    pub steps: usize,
    pub max_solve_residual: f64,
}

fn record(dynamics: &Dynamics, state: &ChainState, work: f64) -> Result<Record> {
    let sol = dynamics.solve_at(state)?;
    let residuals = dynamics
        .chain
        .joint_residuals(&state.links)?
        .iter()
        .map(|r| r.velocity.norm())
        .collect();
    Ok(Record {
        t: state.t,
        links: state.links.clone(),
        wrenches: sol.wrenches,
        residuals,
        energy: Energy::of(dynamics.chain, &state.links),
        work,
    })
}

/// Number of steps for `t_end` at step `h`, tolerating round-off in the ratio.
pub fn step_count(h: f64, t_end: f64) -> usize {
    let n = t_end / h;
    let r = n.round();
    if (n - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        n.ceil() as usize
    }
}

/// Integrates from `initial` to `config.t_end`, recording every `stride` steps
/// and the final state. Failures carry the time at which they occurred.
pub fn simulate(
    dynamics: &Dynamics,
    initial: &ChainState,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    simulate_with(dynamics, initial, config, |_| {})
}

/// As [`simulate`], calling `observe` after every step with the new state.
pub fn simulate_with(
    dynamics: &Dynamics,
    initial: &ChainState,
    config: &IntegratorConfig,
    observe: impl FnMut(&ChainState),
) -> Result<Trajectory> {
    let out = integrate(dynamics, initial, config, observe);
    match out.failure {
        Some(f) => Err(f.error),
        None => Ok(out.trajectory),
    }
}

/// A run that stopped early: the error (tagged with its time) and the last
/// state that was integrated successfully.
#[derive(Debug)]
pub struct Failure {
    pub error: Error,
    pub state: ChainState,
}

/// Everything recorded up to the end of the run or the first failure.
#[derive(Debug)]
pub struct Outcome {
    pub trajectory: Trajectory,
    pub failure: Option<Failure>,
}

pub fn integrate(
    dynamics: &Dynamics,
    initial: &ChainState,
    config: &IntegratorConfig,
    mut observe: impl FnMut(&ChainState),
) -> Outcome {
    let fail = |trajectory: Trajectory, error: Error, state: &ChainState| {
        log::warn!("integration stopped at t = {}: {error}", state.t);
        Outcome {
            trajectory,
            failure: Some(Failure {
                error: Error::AtTime {
                    time: state.t,
                    source: Box::new(error),
                },
                state: state.clone(),
            }),
        }
    };
    let mut traj = Trajectory::default();
    if !(config.h > 0.0 && config.h.is_finite()) {
        return fail(
            traj,
            Error::OutOfRange {
                what: "step",
                value: config.h,
                lo: 0.0,
                hi: f64::INFINITY,
            },
            initial,
        );
    }
    if !(config.t_end >= 0.0 && config.t_end.is_finite()) {
        return fail(
            traj,
            Error::OutOfRange {
                what: "t_end",
                value: config.t_end,
                lo: 0.0,
                hi: f64::INFINITY,
            },
            initial,
        );
    }
    let stride = config.stride.max(1);
    let n = step_count(config.h, config.t_end);
    let t0 = initial.t;
    log::info!(
        "integrating {n} steps with {:?} at h = {}",
        config.scheme,
        config.h
    );
    let mut stepper = Stepper::new(config.scheme, config.h);
    let mut state = initial.clone();
    let power = |s: &ChainState| external_power(dynamics.chain, &s.links, &dynamics.wrenches(s.t));
    let mut work = 0.0;
    let mut p_prev = power(&state);
    match record(dynamics, &state, work) {
        Ok(r) => traj.records.push(r),
        Err(e) => return fail(traj, e, &state),
    }
    for k in 1..=n {
        let t_next = if k == n {
            t0 + config.t_end
        } else {
            t0 + k as f64 * config.h
        };
        let h = t_next - state.t;
        let mut next = match stepper.step(dynamics, &state, Some(h)) {
            Ok(s) => s,
            Err(e) => {
                traj.steps = k - 1;
                traj.max_solve_residual = dynamics.max_solve_residual();
                return fail(traj, e, &state);
            }
        };
        next.t = t_next;
        let p = power(&next);
        work += 0.5 * h * (p_prev + p);
        p_prev = p;
        state = next;
        observe(&state);
        if k % stride == 0 || k == n {
            match record(dynamics, &state, work) {
                Ok(r) => traj.records.push(r),
                Err(e) => {
                    traj.steps = k;
                    traj.max_solve_residual = dynamics.max_solve_residual();
                    return fail(traj, e, &state);
                }
            }
        }
    }
    traj.steps = n;
    traj.max_solve_residual = dynamics.max_solve_residual();
    Outcome {
        trajectory: traj,
        failure: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joints::JointSpec;
    use crate::link::{LinkModel, LinkOptions, LinkParameters};
    use crate::modal::{BasisFamily, BasisKind};
    use approx::assert_relative_eq;

    fn chain(joint: JointSpec, g: Vec3, opts: LinkOptions) -> Chain {
        let p = LinkParameters {
            rho: 2700.0,
            e: 7e10,
            a: 1e-4,
            l1: 0.0,
            l2: 1.0,
            iy: 1e-9,
            iz: 1e-9,
        };
        let link = LinkModel::new(
            p,
            BasisFamily {
                kind: BasisKind::ClampedFree,
                r: 2,
            },
            opts,
        )
        .unwrap();
        Chain {
            links: vec![link],
            joints: vec![joint],
            gravity: g,
            baumgarte: None,
        }
    }

    #[test]
    fn rest_state_is_stationary() {
        let c = chain(
            JointSpec::free(),
            Vec3::zeros(),
            LinkOptions {
                polar_inertia: true,
                ..Default::default()
            },
        );
        let dyn_ = Dynamics::unforced(&c);
        let s = ChainState {
            t: 0.0,
            links: vec![LinkState::at_rest(
                RotationMatrix::identity(),
                Vec3::zeros(),
                6,
            )],
        };
        let (dy, _) = dyn_.derivative(&s).unwrap();
        assert_eq!(dy.amax(), 0.0);
        for scheme in [Scheme::Rk4, Scheme::ExplicitEuler, Scheme::ImplicitMidpoint] {
            let next = Stepper::new(scheme, 1e-3).step(&dyn_, &s, None).unwrap();
            assert_eq!(next.links, s.links);
        }
    }

    #[test]
    fn pack_roundtrip() {
        let c = chain(JointSpec::fixed(), Vec3::zeros(), LinkOptions::default());
        let d = Dynamics::unforced(&c);
        let mut l = LinkState::at_rest(
            RotationMatrix::from_axis_angle(&Vec3::y(), 0.3),
            Vec3::new(1.0, 2.0, 3.0),
            6,
        );
        l.eta = DVector::from_fn(6, |i, _| i as f64);
        let s = ChainState {
            t: 0.5,
            links: vec![l],
        };
        let back = d.unpack(0.5, &d.pack(&s));
        assert_relative_eq!(
            back.links[0].rot.matrix(),
            s.links[0].rot.matrix(),
            epsilon = 1e-15
        );
        assert_eq!(back.links[0].eta, s.links[0].eta);
    }

    #[test]
    fn free_spin_about_principal_axis_is_steady() {
        let c = chain(
            JointSpec::free(),
            Vec3::zeros(),
            LinkOptions {
                polar_inertia: true,
                ..Default::default()
            },
        );
        let d = Dynamics::unforced(&c);
        let mut l = LinkState::at_rest(RotationMatrix::identity(), Vec3::new(-0.5, 0.0, 0.0), 6);
        l.omega = Vec3::new(0.0, 0.0, 2.0);
        // Frame origin at −l/2 puts the centroid on the inertial origin.
        let s = ChainState {
            t: 0.0,
            links: vec![l],
        };
        let (_, sol) = d.derivative(&s).unwrap();
        let w_dot: Vec3 = sol.z_dot[0].fixed_rows::<3>(3).into();
        assert!(w_dot.amax() < 1e-9, "{w_dot:?}");
    }

    #[test]
    fn zero_duration_gives_single_record() {
        let c = chain(
            JointSpec::fixed(),
            Vec3::new(0.0, -9.81, 0.0),
            LinkOptions::default(),
        );
        let d = Dynamics::unforced(&c);
        let s = ChainState {
            t: 0.0,
            links: vec![LinkState::at_rest(
                RotationMatrix::identity(),
                Vec3::zeros(),
                6,
            )],
        };
        let cfg = IntegratorConfig {
            t_end: 0.0,
            ..Default::default()
        };
        let tr = simulate(&d, &s, &cfg).unwrap();
        assert_eq!(tr.records.len(), 1);
        assert_eq!(tr.records[0].links, s.links);
    }

    #[test]
    fn failure_keeps_partial_trajectory() {
        let c = chain(
            JointSpec::fixed(),
            Vec3::new(0.0, -9.81, 0.0),
            LinkOptions::default(),
        );
        let d = Dynamics::unforced(&c);
        let s = ChainState {
            t: 0.0,
            links: vec![LinkState::at_rest(
                RotationMatrix::identity(),
                Vec3::zeros(),
                6,
            )],
        };
        // Far past the explicit stability limit of the axial modes.
        let cfg = IntegratorConfig {
            scheme: Scheme::ExplicitEuler,
            h: 1e-3,
            t_end: 10.0,
            stride: 1,
        };
        let out = integrate(&d, &s, &cfg, |_| {});
        let f = out.failure.expect("blows up");
        assert!(matches!(f.error, Error::AtTime { .. }));
        assert!(!out.trajectory.records.is_empty());
        assert!(f.state.links.iter().all(LinkState::is_finite));
        assert!(f.state.t > 0.0 && f.state.t < 10.0);
    }

    #[test]
    fn stride_and_count() {
        assert_eq!(step_count(1e-4, 1.0), 10000);
        assert_eq!(step_count(0.3, 1.0), 4);
        let c = chain(
            JointSpec::fixed(),
            Vec3::new(0.0, -9.81, 0.0),
            LinkOptions::default(),
        );
        let d = Dynamics::unforced(&c);
        let s = ChainState {
            t: 0.0,
            links: vec![LinkState::at_rest(
                RotationMatrix::identity(),
                Vec3::zeros(),
                6,
            )],
        };
        let cfg = IntegratorConfig {
            t_end: 0.01,
            h: 1e-4,
            stride: 10,
            ..Default::default()
        };
        let tr = simulate(&d, &s, &cfg).unwrap();
        assert_eq!(tr.records.len(), 11);
        assert_relative_eq!(tr.records[10].t, 0.01, epsilon = 1e-15);
        assert!(tr.max_solve_residual <= 1e-9);
    }
}
