//! Independent checks: energy and momentum by direct quadrature, reference
//! solutions for rigid pendulum chains, and randomized property suites.
//!
//! Nothing here reuses the assembly kernels; shapes are evaluated from the basis
//! and integrated on a separate rule.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::assembly::{Chain, EndWrenches, LinkState};
use crate::link::LinkModel;
use crate::quadrature::CompositeRule;
use crate::screw::{Mat3, Vec3};

pub mod suites;

pub use suites::{property_suites, Bound, Metric, OracleReport};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Energy {
    pub kinetic: f64,
    pub elastic: f64,
    pub gravitational: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Momentum {
    /// Inertial linear momentum.
    pub linear: Vec3,
    /// Inertial angular momentum about the inertial origin.
    pub angular: Vec3,
}

struct Sample {
    w: f64,
    /// Inertial position of the centerline point.
    p: Vec3,
    /// Inertial velocity of the centerline point.
    u: Vec3,
    strain: Vec3,
}

fn audit_rule(m: &LinkModel) -> CompositeRule {
    CompositeRule::new(m.params.l1, m.params.l2, 6, 12)
}

fn samples(m: &LinkModel, s: &LinkState) -> Vec<Sample> {
    let rule = audit_rule(m);
    let rot = s.rot.matrix();
    rule.nodes()
        .iter()
        .zip(rule.weights())
        .map(|(&xi, &w)| {
            let phi = m.basis.evaluate(xi, 0).expect("node inside link");
            let d1 = m.basis.evaluate(xi, 1).expect("node inside link") * &s.eta;
            let d2 = m.basis.evaluate(xi, 2).expect("node inside link") * &s.eta;
            let body = s.r + Vec3::new(xi, 0.0, 0.0) + &phi * &s.eta;
            let vel = s.v + &phi * &s.eta_dot + s.omega.cross(&body);
            Sample {
                w,
                p: rot * body,
                u: rot * vel,
                strain: Vec3::new(d1[0], d2[1], d2[2]),
            }
        })
        .collect()
}

fn roll_inertia(m: &LinkModel) -> f64 {
    if m.opts.polar_inertia {
        m.params.polar_inertia()
    } else {
        0.0
    }
}

impl Energy {
    pub fn of_link(m: &LinkModel, s: &LinkState, gravity: &Vec3) -> Self {
        let p = &m.params;
        let rho_a = p.rho_a();
        let (ea, eiz, eiy) = (p.e * p.a, p.e * p.iz, p.e * p.iy);
        let mut e = Energy::default();
        for q in samples(m, s) {
            e.kinetic += 0.5 * rho_a * q.w * q.u.norm_squared();
            e.elastic += 0.5
                * q.w
                * (ea * q.strain.x.powi(2) + eiz * q.strain.y.powi(2) + eiy * q.strain.z.powi(2));
            e.gravitational -= rho_a * q.w * gravity.dot(&q.p);
        }
        e.kinetic += 0.5 * roll_inertia(m) * s.omega.x.powi(2);
        e.total = e.kinetic + e.elastic + e.gravitational;
        e
    }

    pub fn of(chain: &Chain, states: &[LinkState]) -> Self {
        chain
            .links
            .iter()
            .zip(states)
            .fold(Energy::default(), |acc, (m, s)| {
                let e = Self::of_link(m, s, &chain.gravity);
                Energy {
                    kinetic: acc.kinetic + e.kinetic,
                    elastic: acc.elastic + e.elastic,
                    gravitational: acc.gravitational + e.gravitational,
                    total: acc.total + e.total,
                }
            })
    }
}

impl Momentum {
    pub fn of_link(m: &LinkModel, s: &LinkState) -> Self {
        let rho_a = m.params.rho_a();
        let mut out = Momentum::default();
        for q in samples(m, s) {
            out.linear += rho_a * q.w * q.u;
            out.angular += rho_a * q.w * q.p.cross(&q.u);
        }
        out.angular += s.rot.matrix() * Vec3::new(roll_inertia(m) * s.omega.x, 0.0, 0.0);
        out
    }

    pub fn of(chain: &Chain, states: &[LinkState]) -> Self {
        chain
            .links
            .iter()
            .zip(states)
            .fold(Momentum::default(), |acc, (m, s)| {
                let p = Self::of_link(m, s);
                Momentum {
                    linear: acc.linear + p.linear,
                    angular: acc.angular + p.angular,
                }
            })
    }
}

/// Power delivered by external end wrenches (body coordinates, applied to the
/// link) through the velocity of the deformed end points.
pub fn external_power(chain: &Chain, states: &[LinkState], wrenches: &[EndWrenches]) -> f64 {
    let mut p = 0.0;
    for ((m, s), w) in chain.links.iter().zip(states).zip(wrenches) {
        for (xi, wr) in [(m.params.l1, &w.base), (m.params.l2, &w.tip)] {
            if wr.force == Vec3::zeros() && wr.torque == Vec3::zeros() {
                continue;
            }
            let phi = m.basis.evaluate(xi, 0).expect("end inside link");
            let point = s.r + Vec3::new(xi, 0.0, 0.0) + &phi * &s.eta;
            let u = s.v + &phi * &s.eta_dot + s.omega.cross(&point);
            p += wr.force.dot(&u) + wr.torque.dot(&s.omega);
        }
    }
    p
}

/// Drift of a scalar series relative to its first value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyAudit {
    pub initial: f64,
    pub max_abs_drift: f64,
    /// Drift over the largest energy magnitude present.
    pub max_rel_drift: f64,
}

/// Compares the energy change with the external work at every sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct WorkBalance {
    pub final_work: f64,
    pub final_change: f64,
    /// `max |ΔE − W|` over the largest energy magnitude present.
    pub max_rel_imbalance: f64,
}

pub fn work_balance(energies: &[Energy], work: &[f64]) -> WorkBalance {
    let (Some(first), Some(last), Some(&w_last)) = (energies.first(), energies.last(), work.last())
    else {
        return WorkBalance::default();
    };
    let scale = energies
        .iter()
        .map(|e| {
            e.kinetic
                .abs()
                .max(e.elastic.abs())
                .max(e.gravitational.abs())
        })
        .fold(f64::MIN_POSITIVE, f64::max);
    let worst = energies
        .iter()
        .zip(work)
        .map(|(e, w)| (e.total - first.total - w).abs())
        .fold(0.0, f64::max);
    WorkBalance {
        final_work: w_last,
        final_change: last.total - first.total,
        max_rel_imbalance: worst / scale,
    }
}

pub fn energy_audit(energies: &[Energy]) -> EnergyAudit {
    let Some(first) = energies.first() else {
        return EnergyAudit::default();
    };
    let scale = energies
        .iter()
        .map(|e| {
            e.kinetic
                .abs()
                .max(e.elastic.abs())
                .max(e.gravitational.abs())
        })
        .fold(f64::MIN_POSITIVE, f64::max);
    let max_abs_drift = energies
        .iter()
        .map(|e| (e.total - first.total).abs())
        .fold(0.0, f64::max);
    EnergyAudit {
        initial: first.total,
        max_abs_drift,
        max_rel_drift: max_abs_drift / scale,
    }
}

/// Planar chain of uniform rigid rods swinging about `z`, each rod pinned to the
/// tip of the previous one. Angles are measured from the downward vertical.
#[derive(Clone, Debug, PartialEq)]
pub struct RodChain {
    pub masses: Vec<f64>,
    pub lengths: Vec<f64>,
    pub g: f64,
}

impl RodChain {
    fn lever(&self, i: usize, j: usize) -> f64 {
        match j.cmp(&i) {
            std::cmp::Ordering::Less => self.lengths[j],
            std::cmp::Ordering::Equal => 0.5 * self.lengths[i],
            std::cmp::Ordering::Greater => 0.0,
        }
    }

    /// Angular accelerations from the Lagrange equations.
    pub fn accelerations(&self, theta: &[f64], theta_dot: &[f64]) -> Vec<f64> {
        let n = self.masses.len();
        let c = DMatrix::from_fn(n, n, |j, k| {
            (0..n)
                .map(|i| self.masses[i] * self.lever(i, j) * self.lever(i, k))
                .sum::<f64>()
        });
        let mut mass = DMatrix::from_fn(n, n, |j, k| c[(j, k)] * (theta[j] - theta[k]).cos());
        for j in 0..n {
            mass[(j, j)] += self.masses[j] * self.lengths[j].powi(2) / 12.0;
        }
        let rhs = DVector::from_fn(n, |j, _| {
            let coriolis: f64 = (0..n)
                .map(|k| c[(j, k)] * (theta[j] - theta[k]).sin() * theta_dot[k].powi(2))
                .sum();
            let moment: f64 = (0..n).map(|i| self.masses[i] * self.lever(i, j)).sum();
            -coriolis - self.g * theta[j].sin() * moment
        });
        mass.lu()
            .solve(&rhs)
            .expect("rod chain mass matrix is positive definite")
            .iter()
            .copied()
            .collect()
    }

    pub fn energy(&self, theta: &[f64], theta_dot: &[f64]) -> f64 {
        let n = self.masses.len();
        let mut base = nalgebra::Vector2::zeros();
        let mut base_vel = nalgebra::Vector2::zeros();
        let mut e = 0.0;
        for i in 0..n {
            let (l, m) = (self.lengths[i], self.masses[i]);
            let dir = nalgebra::Vector2::new(theta[i].sin(), -theta[i].cos());
            let dir_dot = nalgebra::Vector2::new(theta[i].cos(), theta[i].sin()) * theta_dot[i];
            let c = base + 0.5 * l * dir;
            let cv = base_vel + 0.5 * l * dir_dot;
            e += 0.5 * m * cv.norm_squared()
                + 0.5 * m * l * l / 12.0 * theta_dot[i].powi(2)
                + m * self.g * c.y;
            base += l * dir;
            base_vel += l * dir_dot;
        }
        e
    }

    /// Angles and rates at every multiple of `h` up to `t_end`, integrated by
    /// RK4 with ten substeps per sample.
    pub fn solve(
        &self,
        theta0: &[f64],
        theta_dot0: &[f64],
        h: f64,
        t_end: f64,
    ) -> Vec<(Vec<f64>, Vec<f64>)> {
        let n = self.masses.len();
        let rate = |y: &[f64]| -> Vec<f64> {
            let mut out = y[n..].to_vec();
            out.extend(self.accelerations(&y[..n], &y[n..]));
            out
        };
        let axpy = |y: &[f64], a: f64, k: &[f64]| -> Vec<f64> {
            y.iter().zip(k).map(|(y, k)| y + a * k).collect()
        };
        let sub = h / 10.0;
        let steps = crate::integrator::step_count(h, t_end);
        let mut y: Vec<f64> = theta0.iter().chain(theta_dot0).copied().collect();
        let mut out = vec![(y[..n].to_vec(), y[n..].to_vec())];
        for _ in 0..steps {
            for _ in 0..10 {
                let k1 = rate(&y);
                let k2 = rate(&axpy(&y, 0.5 * sub, &k1));
                let k3 = rate(&axpy(&y, 0.5 * sub, &k2));
                let k4 = rate(&axpy(&y, sub, &k3));
                for i in 0..2 * n {
                    y[i] += sub / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            out.push((y[..n].to_vec(), y[n..].to_vec()));
        }
        out
    }
}

/// Swing angle about `z` of a link whose axis is body `x`, from the downward
/// vertical `−y`.
pub fn planar_angle(rot: &Mat3) -> f64 {
    let d = rot.column(0);
    d.x.atan2(-d.y)
}

/// Rotation placing body `x` at swing angle `theta` about `z`.
pub fn planar_rotation(theta: f64) -> crate::screw::RotationMatrix {
    crate::screw::RotationMatrix::from_axis_angle(&Vec3::z(), theta - std::f64::consts::FRAC_PI_2)
}
