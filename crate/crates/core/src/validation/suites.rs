//! Seeded property suites run by the `validate` subcommand.

use std::time::Instant;

use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{energy_audit, planar_angle, planar_rotation, work_balance, Energy, RodChain};
use crate::assembly::{assemble, schur_check, solve, Chain, EndWrenches, LinkState};
use crate::integrator::{simulate, ChainState, Dynamics, IntegratorConfig, Scheme};
use crate::joints::{JointKind, JointSpec};
use crate::link::{mass_matrix, LinkModel, LinkOptions, LinkParameters};
use crate::modal::{bending_roots, BasisFamily, BasisKind};
use crate::screw::{
    rotation_exp, transform_dot, AdjointTransform, FrameId, Mat3, Mat6, RotationMatrix, Twist,
    Vec3, Wrench,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "tolerance", rename_all = "kebab-case")]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
}

impl Bound {
    pub fn holds(&self, value: f64) -> bool {
        match *self {
            Bound::AtMost(t) => value <= t,
            Bound::AtLeast(t) => value >= t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl Metric {
    pub fn new(name: &str, value: f64, bound: Bound) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            pass: bound.holds(value),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub name: String,
    pub seed: u64,
    pub metrics: Vec<Metric>,
    pub pass: bool,
    pub runtime_s: f64,
}

fn report(name: &str, seed: u64, start: Instant, metrics: Vec<Metric>) -> OracleReport {
    let pass = metrics.iter().all(|m| m.pass);
    OracleReport {
        name: name.into(),
        seed,
        metrics,
        pass,
        runtime_s: start.elapsed().as_secs_f64(),
    }
}

fn unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn vec3(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    scale
        * Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
}

fn rotation(rng: &mut ChaCha8Rng) -> RotationMatrix {
    let axis = unit(rng);
    RotationMatrix::from_axis_angle(&axis, rng.random_range(-3.0..3.0))
}

/// The canonical aluminium test link.
pub fn canonical_link(r: usize, kind: BasisKind, opts: LinkOptions) -> LinkModel {
    let p = LinkParameters {
        rho: 2700.0,
        e: 7e10,
        a: 1e-4,
        l1: 0.0,
        l2: 1.0,
        iy: 1e-9,
        iz: 1e-9,
    };
    LinkModel::new(p, BasisFamily { kind, r }, opts).expect("canonical link is valid")
}

/// Modal coordinates whose deflection peaks at `amplitude` over the link.
fn bounded_eta(rng: &mut ChaCha8Rng, m: &LinkModel, amplitude: f64) -> DVector<f64> {
    let eta = DVector::from_fn(m.dof(), |_, _| rng.random_range(-1.0..1.0));
    let rule = m.basis.default_rule();
    let peak = rule
        .nodes()
        .iter()
        .map(|&x| (m.basis.evaluate(x, 0).expect("node inside link") * &eta).amax())
        .fold(0.0, f64::max);
    eta * (amplitude / peak.max(f64::MIN_POSITIVE))
}

/// Smooth rotating frame: `R(t) = R0 exp(a1 α(t)) exp(a2 β(t))`, origin `p(t)`.
#[derive(Clone, Debug)]
pub struct FrameTrajectory {
    r0: Mat3,
    a1: Vec3,
    a2: Vec3,
    alpha: [f64; 3],
    beta: [f64; 3],
    p: [Vec3; 3],
}

impl FrameTrajectory {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let c = |rng: &mut ChaCha8Rng| {
            [
                rng.random_range(-1.0..1.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-1.0..1.0),
            ]
        };
        Self {
            r0: *rotation(rng).matrix(),
            a1: unit(rng),
            a2: unit(rng),
            alpha: c(rng),
            beta: c(rng),
            p: [vec3(rng, 1.0), vec3(rng, 1.0), vec3(rng, 1.0)],
        }
    }

    fn angle(c: &[f64; 3], t: f64) -> (f64, f64) {
        (
            c[0] + c[1] * t + c[2] * (2.0 * t).sin(),
            c[1] + 2.0 * c[2] * (2.0 * t).cos(),
        )
    }

    pub fn rotation(&self, t: f64) -> Mat3 {
        let (a, _) = Self::angle(&self.alpha, t);
        let (b, _) = Self::angle(&self.beta, t);
        self.r0 * rotation_exp(&(self.a1 * a)) * rotation_exp(&(self.a2 * b))
    }

    pub fn origin(&self, t: f64) -> (Vec3, Vec3) {
        let p = self.p[0] + self.p[1] * t + self.p[2] * (3.0 * t).sin();
        let dp = self.p[1] + 3.0 * self.p[2] * (3.0 * t).cos();
        (p, dp)
    }

    pub fn transform(&self, t: f64) -> AdjointTransform {
        AdjointTransform::from_parts(&self.rotation(t), &self.origin(t).0)
    }

    /// Body twist: `ω = a1 α̇` seen through the second factor, plus `a2 β̇`;
    /// `v = Rᵀ ṗ`.
    pub fn twist(&self, t: f64) -> Twist {
        let (_, da) = Self::angle(&self.alpha, t);
        let (b, db) = Self::angle(&self.beta, t);
        let omega = rotation_exp(&(self.a2 * b)).transpose() * self.a1 * da + self.a2 * db;
        let v = self.rotation(t).transpose() * self.origin(t).1;
        Twist::new(v, omega, FrameId::Body(0))
    }
}

/// Slope of `log residual` against `log Δt`, central differences.
pub fn transform_derivative_order(
    traj: &FrameTrajectory,
    t: f64,
    steps: &[f64],
    derivative: impl Fn(&AdjointTransform, &Twist) -> Mat6,
) -> (f64, Vec<f64>) {
    let exact = derivative(&traj.transform(t), &traj.twist(t));
    let res: Vec<f64> = steps
        .iter()
        .map(|&dt| {
            let fd =
                (traj.transform(t + dt).matrix() - traj.transform(t - dt).matrix()) / (2.0 * dt);
            (fd - exact).norm()
        })
        .collect();
    (fit_order(steps, &res), res)
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_order(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Frame-derivative identity on random trajectories; `derivative` is injectable
/// so a corrupted operator can be shown to fail.
pub fn transform_derivative_suite(
    seed: u64,
    derivative: impl Fn(&AdjointTransform, &Twist) -> Mat6,
) -> OracleReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_order, mut worst_res) = (f64::INFINITY, 0.0f64);
    for _ in 0..20 {
        let traj = FrameTrajectory::random(&mut rng);
        let t = rng.random_range(0.0..1.0);
        let (order, res) = transform_derivative_order(&traj, t, &[1e-2, 1e-3, 1e-4], &derivative);
        worst_order = worst_order.min(order);
        worst_res = worst_res.max(res[2]);
    }
    report(
        "transform-derivative",
        seed,
        start,
        vec![
            Metric::new("min convergence order", worst_order, Bound::AtLeast(1.9)),
            Metric::new("max residual at dt=1e-4", worst_res, Bound::AtMost(1e-5)),
        ],
    )
}

pub fn mass_matrix_suite(seed: u64, count: usize) -> OracleReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let models: Vec<LinkModel> = (1..=2)
        .map(|r| canonical_link(r, BasisKind::ClampedFree, LinkOptions::default()))
        .collect();
    let (mut sym, mut failures) = (0.0f64, 0usize);
    for k in 0..count {
        let m = &models[k % 2];
        let mut s = LinkState::at_rest(rotation(&mut rng), vec3(&mut rng, 1.0), m.dof());
        s.v = vec3(&mut rng, 2.0);
        s.omega = vec3(&mut rng, 2.0);
        let amplitude = 0.1 * m.params.length() * rng.random_range(0.01..1.0);
        s.eta = bounded_eta(&mut rng, m, amplitude);
        s.eta_dot = DVector::from_fn(m.dof(), |_, _| rng.random_range(-0.1..0.1));
        let d = m.sample(&s.eta, &s.eta_dot);
        let mm = mass_matrix(&m.params, &m.opts, &s.kinematic(0), &d);
        sym = sym.max((mm - mm.transpose()).norm() / mm.norm());
        if mm.cholesky().is_none() {
            failures += 1;
        }
    }
    report(
        "mass-matrix",
        seed,
        start,
        vec![
            Metric::new("max symmetry residual", sym, Bound::AtMost(1e-12)),
            Metric::new("cholesky failures", failures as f64, Bound::AtMost(0.0)),
        ],
    )
}

/// A random serial chain with states that need not satisfy the joints.
pub fn random_chain(
    rng: &mut ChaCha8Rng,
    n: usize,
    r: usize,
) -> (Chain, Vec<LinkState>, Vec<EndWrenches>) {
    let mut links = Vec::new();
    let mut joints = Vec::new();
    let mut states = Vec::new();
    let mut wrenches = Vec::new();
    for i in 0..n {
        let p = LinkParameters {
            rho: rng.random_range(1000.0..8000.0),
            e: rng.random_range(1e10..2e11),
            a: rng.random_range(5e-5..2e-4),
            l1: 0.0,
            l2: rng.random_range(0.5..1.5),
            iy: rng.random_range(5e-10..2e-9),
            iz: rng.random_range(5e-10..2e-9),
        };
        let pick = rng.random_range(0..3);
        let joint = match (i, pick) {
            (0, 0) => JointSpec::fixed(),
            (0, 2) => JointSpec::free(),
            _ => JointSpec::revolute(unit(rng)),
        };
        // A free link needs roll inertia that modal motion cannot mimic.
        let opts = LinkOptions {
            polar_inertia: joint.kind == JointKind::Free,
            ..Default::default()
        };
        let m = LinkModel::new(
            p,
            BasisFamily {
                kind: BasisKind::ClampedFree,
                r,
            },
            opts,
        )
        .expect("valid link");
        let mut s = LinkState::at_rest(rotation(rng), vec3(rng, 1.0), m.dof());
        s.v = vec3(rng, 1.0);
        s.omega = vec3(rng, 1.0);
        s.eta = bounded_eta(rng, &m, 0.05 * p.l2);
        s.eta_dot = DVector::from_fn(m.dof(), |_, _| rng.random_range(-0.1..0.1));
        joints.push(joint);
        let w = |rng: &mut ChaCha8Rng| {
            Wrench::new(
                vec3(rng, 1.0),
                Vec3::new(
                    0.0,
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                ),
                FrameId::Body(i + 1),
            )
        };
        wrenches.push(EndWrenches {
            base: w(rng),
            tip: w(rng),
        });
        links.push(m);
        states.push(s);
    }
    let chain = Chain {
        links,
        joints,
        gravity: Vec3::new(0.0, -9.81, 0.0),
        baumgarte: None,
    };
    (chain, states, wrenches)
}

pub fn schur_suite(seed: u64, samples: usize) -> OracleReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut det_err, mut nonzero, mut residual, mut failures) = (0.0f64, 0usize, 0.0f64, 0usize);
    for n in 1..=3 {
        for r in 1..=2 {
            for _ in 0..samples {
                let (chain, states, wrenches) = random_chain(&mut rng, n, r);
                let m = assemble(&chain, &states, &wrenches).expect("finite random chain");
                let rep = schur_check(&m);
                det_err = det_err
                    .max((rep.det_m_sys - rep.det_m_q * rep.det_schur).abs() / rep.det_m_sys.abs());
                nonzero += usize::from(!rep.wrench_columns_zero);
                match solve(&m) {
                    Ok(sol) => residual = residual.max(sol.relative_residual),
                    Err(_) => failures += 1,
                }
            }
        }
    }
    report(
        "schur-complement",
        seed,
        start,
        vec![
            Metric::new(
                "max determinant identity error",
                det_err,
                Bound::AtMost(1e-6),
            ),
            Metric::new(
                "nonzero wrench columns in modal rows",
                nonzero as f64,
                Bound::AtMost(0.0),
            ),
            Metric::new("max relative solve residual", residual, Bound::AtMost(1e-9)),
            Metric::new("failed solves", failures as f64, Bound::AtMost(0.0)),
        ],
    )
}

pub fn modal_roots_suite() -> OracleReport {
    let start = Instant::now();
    let cf = bending_roots(BasisKind::ClampedFree, 3).expect("roots bracket");
    let ff = bending_roots(BasisKind::FreeFreeElastic, 2).expect("roots bracket");
    // Roots of cos·cosh = ∓1 by Newton from their asymptotes.
    let newton = |x0: f64, rhs: f64| {
        let mut x = x0;
        for _ in 0..50 {
            let f = x.cos() * x.cosh() - rhs;
            let df = -x.sin() * x.cosh() + x.cos() * x.sinh();
            x -= f / df;
        }
        x
    };
    let mut err = 0.0f64;
    for (k, &b) in cf.iter().enumerate() {
        err = err.max((b - newton((k as f64 + 0.5) * std::f64::consts::PI, -1.0)).abs());
    }
    for (k, &b) in ff.iter().enumerate() {
        err = err.max((b - newton((k as f64 + 1.5) * std::f64::consts::PI, 1.0)).abs());
    }
    report(
        "modal-roots",
        0,
        start,
        vec![Metric::new("max root error", err, Bound::AtMost(1e-10))],
    )
}

pub fn pendulum_oracle_suite() -> OracleReport {
    let start = Instant::now();
    let (l, g) = (1.0, 9.81);
    let single = RodChain {
        masses: vec![1.0],
        lengths: vec![l],
        g,
    };
    let h = 1e-3;
    let traj = single.solve(&[0.01], &[0.0], h, 5.0);
    let mut crossings = Vec::new();
    for (k, w) in traj.windows(2).enumerate() {
        if w[0].0[0] > 0.0 && w[1].0[0] <= 0.0 {
            crossings.push(h * (k as f64 + w[0].0[0] / (w[0].0[0] - w[1].0[0])));
        }
    }
    let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    let expected = 2.0 * std::f64::consts::PI * (2.0 * l / (3.0 * g)).sqrt();
    let double = RodChain {
        masses: vec![1.0, 0.5],
        lengths: vec![1.0, 0.7],
        g,
    };
    let traj = double.solve(&[1.2, -0.4], &[0.0, 1.0], h, 2.0);
    let e0 = double.energy(&traj[0].0, &traj[0].1);
    let drift = traj
        .iter()
        .map(|(a, b)| (double.energy(a, b) - e0).abs())
        .fold(0.0, f64::max)
        / e0.abs();
    let rest = single
        .solve(&[0.0], &[0.0], h, 1.0)
        .iter()
        .map(|(a, b)| a[0].abs() + b[0].abs())
        .fold(0.0, f64::max);
    report(
        "pendulum-oracle",
        0,
        start,
        vec![
            Metric::new(
                "small-angle period relative error",
                (period / expected - 1.0).abs(),
                Bound::AtMost(5e-3),
            ),
            Metric::new("double pendulum energy drift", drift, Bound::AtMost(1e-8)),
            Metric::new("rest state motion", rest, Bound::AtMost(0.0)),
        ],
    )
}

pub fn rigid_limit_suite() -> OracleReport {
    let start = Instant::now();
    let mut link = canonical_link(2, BasisKind::ClampedFree, LinkOptions::default());
    link = LinkModel::new(
        LinkParameters {
            e: link.params.e * 1e6,
            ..link.params
        },
        link.basis.family(),
        link.opts,
    )
    .expect("valid link");
    let mass = link.params.mass();
    let chain = Chain {
        links: vec![link],
        joints: vec![JointSpec::revolute(Vec3::z())],
        gravity: Vec3::new(0.0, -9.81, 0.0),
        baumgarte: None,
    };
    let dynamics = Dynamics::unforced(&chain);
    let theta0 = 0.3;
    let s = ChainState {
        t: 0.0,
        links: vec![LinkState::at_rest(
            planar_rotation(theta0),
            Vec3::zeros(),
            6,
        )],
    };
    let cfg = IntegratorConfig {
        scheme: Scheme::ImplicitMidpoint,
        h: 1e-4,
        t_end: 0.5,
        stride: 100,
    };
    let metric = match simulate(&dynamics, &s, &cfg) {
        Ok(tr) => {
            let oracle = RodChain {
                masses: vec![mass],
                lengths: vec![1.0],
                g: 9.81,
            }
            .solve(&[theta0], &[0.0], 1e-2, 0.5);
            tr.records
                .iter()
                .zip(&oracle)
                .map(|(r, o)| (planar_angle(r.links[0].rot.matrix()) - o.0[0]).abs())
                .fold(0.0, f64::max)
        }
        Err(_) => f64::INFINITY,
    };
    report(
        "rigid-limit",
        0,
        start,
        vec![Metric::new(
            "max joint angle error (rad)",
            metric,
            Bound::AtMost(1e-3),
        )],
    )
}

pub fn free_fall_suite() -> OracleReport {
    let start = Instant::now();
    let link = canonical_link(
        2,
        BasisKind::ClampedFree,
        LinkOptions {
            polar_inertia: true,
            ..Default::default()
        },
    );
    let chain = Chain {
        links: vec![link],
        joints: vec![JointSpec::free()],
        gravity: Vec3::new(0.0, -9.81, 0.0),
        baumgarte: None,
    };
    let dynamics = Dynamics::unforced(&chain);
    let mut l = LinkState::at_rest(
        RotationMatrix::from_axis_angle(&Vec3::z(), 0.4),
        Vec3::zeros(),
        6,
    );
    l.v = Vec3::new(0.3, 0.5, 0.0);
    let s = ChainState {
        t: 0.0,
        links: vec![l],
    };
    let cfg = IntegratorConfig {
        scheme: Scheme::ImplicitMidpoint,
        h: 1e-4,
        t_end: 0.2,
        stride: 100,
    };
    let metric = match simulate(&dynamics, &s, &cfg) {
        Ok(tr) => {
            let e: Vec<Energy> = tr.records.iter().map(|r| r.energy).collect();
            let (first, last) = (e[0], e[e.len() - 1]);
            let dk = last.kinetic - first.kinetic;
            let dp = last.gravitational - first.gravitational;
            (dk + dp).abs() / dk.abs()
        }
        Err(_) => f64::INFINITY,
    };
    report(
        "free-fall",
        0,
        start,
        vec![Metric::new(
            "|ΔKE + ΔPE| / |ΔKE|",
            metric,
            Bound::AtMost(1e-5),
        )],
    )
}

pub fn forced_work_suite() -> OracleReport {
    let start = Instant::now();
    let link = canonical_link(2, BasisKind::ClampedFree, LinkOptions::default());
    let chain = Chain {
        links: vec![link],
        joints: vec![JointSpec::revolute(Vec3::z())],
        gravity: Vec3::new(0.0, -9.81, 0.0),
        baumgarte: None,
    };
    let dynamics = Dynamics::new(&chain, |t| {
        let f = Vec3::new(0.0, 0.2 * (6.0 * t).sin(), 0.05);
        vec![EndWrenches {
            base: Wrench::zero(FrameId::Body(1)),
            tip: Wrench::new(f, Vec3::zeros(), FrameId::Body(1)),
        }]
    });
    let s = ChainState {
        t: 0.0,
        links: vec![LinkState::at_rest(planar_rotation(0.2), Vec3::zeros(), 6)],
    };
    let cfg = IntegratorConfig {
        scheme: Scheme::Rk4,
        h: 1e-4,
        t_end: 0.5,
        stride: 50,
    };
    let (imbalance, drift) = match simulate(&dynamics, &s, &cfg) {
        Ok(tr) => {
            let e: Vec<Energy> = tr.records.iter().map(|r| r.energy).collect();
            let w: Vec<f64> = tr.records.iter().map(|r| r.work).collect();
            (
                work_balance(&e, &w).max_rel_imbalance,
                energy_audit(&e).max_rel_drift,
            )
        }
        Err(_) => (f64::INFINITY, 0.0),
    };
    report(
        "forced-work",
        0,
        start,
        vec![
            Metric::new("max |ΔE − W| relative", imbalance, Bound::AtMost(2e-4)),
            Metric::new(
                "energy change relative (nonzero)",
                drift,
                Bound::AtLeast(1e-3),
            ),
        ],
    )
}

/// Every suite, seeded where randomized.
pub fn property_suites(seed: u64) -> Vec<OracleReport> {
    let jobs: Vec<Box<dyn Fn() -> OracleReport + Send + Sync>> = vec![
        Box::new(move || transform_derivative_suite(seed, transform_dot)),
        Box::new(move || mass_matrix_suite(seed, 1000)),
        Box::new(move || schur_suite(seed, 5)),
        Box::new(modal_roots_suite),
        Box::new(pendulum_oracle_suite),
        Box::new(rigid_limit_suite),
        Box::new(free_fall_suite),
        Box::new(forced_work_suite),
    ];
    std::thread::scope(|scope| {
        let handles: Vec<_> = jobs.iter().map(|job| scope.spawn(job)).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("suite thread"))
            .collect()
    })
}
