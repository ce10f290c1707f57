//! Browser demo: mode shapes, a plucked cantilever and a flexible pendulum
//! against its rigid counterpart. Each operation returns JSON for plotting.

use std::f64::consts::PI;

use flexchain::assembly::{Chain, LinkState};
use flexchain::integrator::{simulate, ChainState, Dynamics, IntegratorConfig, Scheme};
use flexchain::joints::JointSpec;
use flexchain::link::{LinkModel, LinkOptions, LinkParameters};
use flexchain::modal::{bending_frequency, BasisFamily, BasisKind, ModalBasis};
use flexchain::screw::{RotationMatrix, Vec3};
use flexchain::{Error, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const STRIP: LinkParameters = LinkParameters {
    rho: 2700.0,
    e: 7e10,
    a: 1e-4,
    l1: 0.0,
    l2: 1.0,
    iy: 1e-9,
    iz: 1e-9,
};

#[derive(Clone, Debug, Serialize)]
pub struct ModeShapes {
    pub x: Vec<f64>,
    pub axial: Vec<Vec<f64>>,
    pub bending: Vec<Vec<f64>>,
    /// `β_k l` for each bending mode.
    pub beta_l: Vec<f64>,
}

pub fn mode_shapes(kind: BasisKind, modes: usize, samples: usize) -> Result<ModeShapes> {
    let basis = ModalBasis::new(BasisFamily { kind, r: modes }, 0.0, 1.0)?;
    let samples = samples.max(2);
    let x: Vec<f64> = (0..samples)
        .map(|k| k as f64 / (samples - 1) as f64)
        .collect();
    let axial = (0..modes)
        .map(|p| x.iter().map(|&s| basis.axial_scalar(p, s, 0)).collect())
        .collect();
    let bending = (0..modes)
        .map(|p| x.iter().map(|&s| basis.bending_scalar(p, s, 0)).collect())
        .collect();
    Ok(ModeShapes {
        x,
        axial,
        bending,
        beta_l: basis.bending_wavenumbers(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TipTrace {
    pub t: Vec<f64>,
    pub tip: Vec<f64>,
    /// First bending frequency from the Euler–Bernoulli formula (rad/s).
    pub omega_theory: f64,
    /// Frequency measured from the downward zero crossings of the tip.
    pub omega_measured: f64,
}

/// Clamped strip released from the static shape of a tip load with tip
/// deflection `amplitude`.
pub fn plucked_tip(amplitude: f64, t_end: f64) -> Result<TipTrace> {
    let link = LinkModel::new(
        STRIP,
        BasisFamily {
            kind: BasisKind::ClampedFree,
            r: 2,
        },
        LinkOptions::default(),
    )?;
    let eta = link.basis.project(&link.basis.default_rule(), |x| {
        Vec3::new(0.0, amplitude * x * x * (3.0 - x) / 2.0, 0.0)
    });
    let tip_shape = link.basis.evaluate(STRIP.l2, 0)?;
    let beta = link.basis.bending_wavenumbers()[0];
    let chain = Chain {
        links: vec![link],
        joints: vec![JointSpec::fixed()],
        gravity: Vec3::zeros(),
        baumgarte: None,
    };
    let mut state = LinkState::at_rest(RotationMatrix::identity(), Vec3::zeros(), 6);
    state.eta = eta;
    let cfg = IntegratorConfig {
        scheme: Scheme::Rk4,
        h: 1e-4,
        t_end,
        stride: 5,
    };
    let tr = simulate(
        &Dynamics::unforced(&chain),
        &ChainState {
            t: 0.0,
            links: vec![state],
        },
        &cfg,
    )?;
    let t: Vec<f64> = tr.records.iter().map(|r| r.t).collect();
    let tip: Vec<f64> = tr
        .records
        .iter()
        .map(|r| (&tip_shape * &r.links[0].eta).y)
        .collect();
    let crossings: Vec<f64> = t
        .windows(2)
        .zip(tip.windows(2))
        .filter(|(_, y)| y[0] > 0.0 && y[1] <= 0.0)
        .map(|(t, y)| t[0] + (t[1] - t[0]) * y[0] / (y[0] - y[1]))
        .collect();
    let omega_measured = match crossings.as_slice() {
        [first, .., last] => 2.0 * PI * (crossings.len() - 1) as f64 / (last - first),
        _ => f64::NAN,
    };
    Ok(TipTrace {
        t,
        tip,
        omega_theory: bending_frequency(beta, STRIP.e * STRIP.iz, STRIP.rho_a()),
        omega_measured,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PendulumTrace {
    pub t: Vec<f64>,
    /// Swing angle from the vertical, flexible link.
    pub flexible: Vec<f64>,
    /// Uniform rigid rod with the same mass and length.
    pub rigid: Vec<f64>,
    /// Tip deflection relative to the rigid link axis.
    pub deflection: Vec<f64>,
}

fn swing_angle(rot: &RotationMatrix) -> f64 {
    let d = rot.matrix() * Vec3::x();
    d.x.atan2(-d.y)
}

/// Pendulum released from `theta0` with Young's modulus scaled by
/// `stiffness_scale`. Integrated with implicit midpoint at `h = 1e-3`.
pub fn pendulum(theta0: f64, stiffness_scale: f64, t_end: f64) -> Result<PendulumTrace> {
    if !(stiffness_scale > 0.0 && stiffness_scale.is_finite()) {
        return Err(Error::OutOfRange {
            what: "stiffness scale",
            value: stiffness_scale,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let params = LinkParameters {
        e: STRIP.e * stiffness_scale,
        ..STRIP
    };
    let link = LinkModel::new(
        params,
        BasisFamily {
            kind: BasisKind::ClampedFree,
            r: 2,
        },
        LinkOptions::default(),
    )?;
    let tip_shape = link.basis.evaluate(params.l2, 0)?;
    let g = 9.81;
    let chain = Chain {
        links: vec![link],
        joints: vec![JointSpec::revolute(Vec3::z())],
        gravity: Vec3::new(0.0, -g, 0.0),
        baumgarte: None,
    };
    let rot = RotationMatrix::from_axis_angle(&Vec3::z(), theta0 - PI / 2.0);
    let cfg = IntegratorConfig {
        scheme: Scheme::ImplicitMidpoint,
        h: 1e-3,
        t_end,
        stride: 10,
    };
    let tr = simulate(
        &Dynamics::unforced(&chain),
        &ChainState {
            t: 0.0,
            links: vec![LinkState::at_rest(rot, Vec3::zeros(), 6)],
        },
        &cfg,
    )?;
    let t: Vec<f64> = tr.records.iter().map(|r| r.t).collect();
    let flexible = tr
        .records
        .iter()
        .map(|r| swing_angle(&r.links[0].rot))
        .collect();
    let deflection = tr
        .records
        .iter()
        .map(|r| (&tip_shape * &r.links[0].eta).y)
        .collect();
    let rigid = rigid_pendulum(theta0, params.length(), g, &t);
    Ok(PendulumTrace {
        t,
        flexible,
        rigid,
        deflection,
    })
}

/// `θ̈ = −(3g / 2l) sin θ` sampled at `times`, RK4 with at most 1e-4 s steps.
fn rigid_pendulum(theta0: f64, l: f64, g: f64, times: &[f64]) -> Vec<f64> {
    let f = |y: [f64; 2]| [y[1], -1.5 * g / l * y[0].sin()];
    let mut y = [theta0, 0.0];
    let mut now = 0.0;
    times
        .iter()
        .map(|&target| {
            let n = ((target - now) / 1e-4).ceil().max(0.0) as usize;
            if n > 0 {
                let h = (target - now) / n as f64;
                for _ in 0..n {
                    let k1 = f(y);
                    let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
                    let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
                    let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
                    for i in 0..2 {
                        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                    }
                }
                now = target;
            }
            y[0]
        })
        .collect()
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = modeShapes)]
pub fn mode_shapes_js(
    kind: &str,
    modes: usize,
    samples: usize,
) -> std::result::Result<String, JsError> {
    let kind = match kind {
        "clamped-free" => BasisKind::ClampedFree,
        "free-free-elastic" => BasisKind::FreeFreeElastic,
        other => return Err(JsError::new(&format!("unknown basis kind {other:?}"))),
    };
    to_js(mode_shapes(kind, modes, samples))
}

#[wasm_bindgen(js_name = pluckedTip)]
pub fn plucked_tip_js(amplitude: f64, t_end: f64) -> std::result::Result<String, JsError> {
    to_js(plucked_tip(amplitude, t_end))
}

#[wasm_bindgen(js_name = pendulum)]
pub fn pendulum_js(
    theta0: f64,
    stiffness_scale: f64,
    t_end: f64,
) -> std::result::Result<String, JsError> {
    to_js(pendulum(theta0, stiffness_scale, t_end))
}
