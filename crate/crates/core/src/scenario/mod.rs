//! Scenario documents: one TOML file describing the chain, its loads, the
//! integrator and the outputs.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::assembly::{Chain, EndWrenches, LinkState};
use crate::error::{ConfigIssue, Error, Result};
use crate::integrator::{ChainState, IntegratorConfig, Scheme};
use crate::joints::{Baumgarte, JointKind, JointSpec};
use crate::link::{LinkModel, LinkOptions, LinkParameters};
use crate::modal::{BasisFamily, BasisKind};
use crate::screw::{FrameId, RotationMatrix, Vec3, Wrench};

pub mod output;
pub mod run;

pub use run::{run, Command, RunOptions, RunReport};

fn default_gravity() -> [f64; 3] {
    [0.0, -9.81, 0.0]
}

fn default_modes() -> usize {
    2
}

fn default_step() -> f64 {
    1e-4
}

fn default_t_end() -> f64 {
    1.0
}

fn default_stride() -> usize {
    100
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn default_alpha() -> f64 {
    Baumgarte::default().alpha
}

fn default_beta() -> f64 {
    Baumgarte::default().beta
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    #[serde(default)]
    pub basis: BasisSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub baumgarte: BaumgarteSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub links: Vec<LinkConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    #[serde(default)]
    pub kind: BasisKind,
    /// Modes per axis, `r`.
    #[serde(default = "default_modes")]
    pub modes: usize,
}

impl Default for BasisSection {
    fn default() -> Self {
        Self {
            kind: BasisKind::default(),
            modes: default_modes(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            scheme: Scheme::default(),
            step: default_step(),
            t_end: default_t_end(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaumgarteSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

impl Default for BaumgarteSection {
    fn default() -> Self {
        Self {
            enabled: false,
            alpha: default_alpha(),
            beta: default_beta(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Record every `stride`-th step.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "OutputSection::default_csv")]
    pub csv: String,
    #[serde(default = "OutputSection::default_summary")]
    pub summary: String,
}

impl OutputSection {
    fn default_csv() -> String {
        "trajectory.csv".into()
    }

    fn default_summary() -> String {
        "summary.json".into()
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            stride: default_stride(),
            csv: Self::default_csv(),
            summary: Self::default_summary(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub rho: f64,
    pub e: f64,
    pub a: f64,
    #[serde(default)]
    pub l1: f64,
    pub l2: f64,
    pub iy: f64,
    pub iz: f64,
    #[serde(default)]
    pub polar_inertia: bool,
    #[serde(default)]
    pub include_elastic_moments: bool,
    #[serde(default)]
    pub modal_end_loads: bool,
    #[serde(default)]
    pub joint: JointConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub loads: Vec<LoadConfig>,
}

/// The joint connecting this link to its parent (or to the ground).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConfig {
    #[serde(default)]
    pub kind: JointKind,
    /// Revolute axis in the link's body frame.
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    /// Inertial position of the base joint.
    #[serde(default)]
    pub anchor: [f64; 3],
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            kind: JointKind::default(),
            axis: default_axis(),
            anchor: [0.0; 3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// Orientation as an axis-angle rotation from the inertial axes.
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    #[serde(default)]
    pub angle: f64,
    /// Inertial frame origin; by default the link hangs from its joint.
    #[serde(default)]
    pub origin: Option<[f64; 3]>,
    /// Body-frame twist.
    #[serde(default)]
    pub v: [f64; 3],
    #[serde(default)]
    pub omega: [f64; 3],
    #[serde(default)]
    pub eta: Option<Vec<f64>>,
    #[serde(default)]
    pub eta_dot: Option<Vec<f64>>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            axis: default_axis(),
            angle: 0.0,
            origin: None,
            v: [0.0; 3],
            omega: [0.0; 3],
            eta: None,
            eta_dot: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadEnd {
    Base,
    #[default]
    Tip,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadKind {
    #[default]
    Constant,
    Sinusoid,
}

/// External wrench at a link end, body coordinates, applied to the link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    #[serde(default)]
    pub end: LoadEnd,
    #[serde(default)]
    pub kind: LoadKind,
    #[serde(default)]
    pub force: [f64; 3],
    #[serde(default)]
    pub torque: [f64; 3],
    /// Hz, sinusoids only.
    #[serde(default)]
    pub frequency: f64,
    /// rad, sinusoids only.
    #[serde(default)]
    pub phase: f64,
    /// Active interval `[t0, t1)`; always on when absent.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
}

impl LoadConfig {
    pub fn factor(&self, t: f64) -> f64 {
        if let Some([t0, t1]) = self.window {
            if t < t0 || t >= t1 {
                return 0.0;
            }
        }
        match self.kind {
            LoadKind::Constant => 1.0,
            LoadKind::Sinusoid => {
                (2.0 * std::f64::consts::PI * self.frequency * t + self.phase).sin()
            }
        }
    }
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

struct Issues(Vec<ConfigIssue>);

impl Issues {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(ConfigIssue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn positive(&mut self, path: String, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.push(path, format!("must be positive and finite, got {v}"));
        }
    }

    fn finite(&mut self, path: String, v: &[f64]) {
        if !v.iter().all(|x| x.is_finite()) {
            self.push(path, "must be finite");
        }
    }
}

impl ScenarioConfig {
    /// Every problem with the document, not just the first.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut out = Issues(Vec::new());
        out.finite("gravity".into(), &self.gravity);
        if !(1..=12).contains(&self.basis.modes) {
            out.push(
                "basis.modes",
                format!("must be between 1 and 12, got {}", self.basis.modes),
            );
        }
        out.positive("integrator.step".into(), self.integrator.step);
        if !(self.integrator.t_end >= 0.0 && self.integrator.t_end.is_finite()) {
            out.push(
                "integrator.t_end",
                format!(
                    "must be non-negative and finite, got {}",
                    self.integrator.t_end
                ),
            );
        }
        if self.baumgarte.enabled {
            for (k, v) in [
                ("alpha", self.baumgarte.alpha),
                ("beta", self.baumgarte.beta),
            ] {
                if !(v >= 0.0 && v.is_finite()) {
                    out.push(
                        format!("baumgarte.{k}"),
                        format!("must be non-negative and finite, got {v}"),
                    );
                }
            }
        }
        if self.output.stride == 0 {
            out.push("output.stride", "must be at least 1");
        }
        if self.links.is_empty() {
            out.push("links", "at least one link is required");
        }
        let dof = 3 * self.basis.modes;
        for (i, l) in self.links.iter().enumerate() {
            let p = |f: &str| format!("links[{i}].{f}");
            for (f, v) in [
                ("rho", l.rho),
                ("e", l.e),
                ("a", l.a),
                ("iy", l.iy),
                ("iz", l.iz),
            ] {
                out.positive(p(f), v);
            }
            out.finite(p("l1"), &[l.l1]);
            if !(l.l2 > l.l1 && l.l2.is_finite()) {
                out.push(p("l2"), format!("must exceed l1 = {}, got {}", l.l1, l.l2));
            }
            out.finite(p("joint.anchor"), &l.joint.anchor);
            if l.joint.kind == JointKind::Revolute
                && !(v3(l.joint.axis).norm() > 1e-12
                    && v3(l.joint.axis).iter().all(|x| x.is_finite()))
            {
                out.push(p("joint.axis"), "must be a non-zero finite vector");
            }
            let init = &l.initial;
            out.finite(p("initial.angle"), &[init.angle]);
            if init.angle != 0.0 && !(v3(init.axis).norm() > 1e-12) {
                out.push(p("initial.axis"), "must be non-zero when angle is set");
            }
            out.finite(p("initial.v"), &init.v);
            out.finite(p("initial.omega"), &init.omega);
            if let Some(o) = init.origin {
                out.finite(p("initial.origin"), &o);
            }
            for (f, v) in [
                ("initial.eta", &init.eta),
                ("initial.eta_dot", &init.eta_dot),
            ] {
                if let Some(v) = v {
                    if v.len() != dof {
                        out.push(
                            p(f),
                            format!("needs {dof} entries (3 × modes), got {}", v.len()),
                        );
                    }
                    out.finite(p(f), v);
                }
            }
            for (k, load) in l.loads.iter().enumerate() {
                let q = |f: &str| format!("links[{i}].loads[{k}].{f}");
                out.finite(q("force"), &load.force);
                out.finite(q("torque"), &load.torque);
                if load.torque[0] != 0.0 {
                    out.push(q("torque"), "axial torque on a flexible link is not supported (torsion is not modelled)");
                }
                if !(load.frequency >= 0.0 && load.frequency.is_finite()) {
                    out.push(
                        q("frequency"),
                        format!("must be non-negative and finite, got {}", load.frequency),
                    );
                }
                out.finite(q("phase"), &[load.phase]);
                if let Some([t0, t1]) = load.window {
                    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
                        out.push(
                            q("window"),
                            format!("must satisfy t0 < t1, got [{t0}, {t1}]"),
                        );
                    }
                }
            }
        }
        out.0
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        IntegratorConfig {
            scheme: self.integrator.scheme,
            h: self.integrator.step,
            t_end: self.integrator.t_end,
            stride: self.output.stride,
        }
    }

    /// External end wrenches of every link at time `t`.
    pub fn wrenches(&self, t: f64) -> Vec<EndWrenches> {
        self.links
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let mut w = EndWrenches::zero(i);
                for load in &l.loads {
                    let s = load.factor(t);
                    let add = Wrench::new(
                        s * v3(load.force),
                        s * v3(load.torque),
                        FrameId::Body(i + 1),
                    );
                    match load.end {
                        LoadEnd::Base => w.base = w.base + add,
                        LoadEnd::Tip => w.tip = w.tip + add,
                    }
                }
                w
            })
            .collect()
    }

    /// Link models, joints and the initial state.
    pub fn build(&self) -> Result<(Chain, ChainState)> {
        let issues = self.issues();
        if !issues.is_empty() {
            return Err(Error::Config(issues));
        }
        let family = BasisFamily {
            kind: self.basis.kind,
            r: self.basis.modes,
        };
        let mut links = Vec::new();
        let mut joints = Vec::new();
        let mut states: Vec<LinkState> = Vec::new();
        for (i, l) in self.links.iter().enumerate() {
            let params = LinkParameters {
                rho: l.rho,
                e: l.e,
                a: l.a,
                l1: l.l1,
                l2: l.l2,
                iy: l.iy,
                iz: l.iz,
            };
            let opts = LinkOptions {
                polar_inertia: l.polar_inertia,
                include_elastic_moments: l.include_elastic_moments,
                modal_end_loads: l.modal_end_loads,
            };
            let model = LinkModel::new(params, family, opts)?;
            let axis = v3(l.joint.axis);
            let joint = match l.joint.kind {
                JointKind::Fixed => JointSpec::fixed(),
                JointKind::Revolute => JointSpec::revolute(axis.normalize()),
                JointKind::Free => JointSpec::free(),
            }
            .with_anchor(v3(l.joint.anchor));
            let init = &l.initial;
            let rot = if init.angle == 0.0 {
                RotationMatrix::identity()
            } else {
                RotationMatrix::from_axis_angle(&v3(init.axis).normalize(), init.angle)
            };
            let dof = model.dof();
            let eta = init
                .eta
                .as_ref()
                .map_or(DVector::zeros(dof), |v| DVector::from_column_slice(v));
            let eta_dot = init
                .eta_dot
                .as_ref()
                .map_or(DVector::zeros(dof), |v| DVector::from_column_slice(v));
            let origin = match init.origin {
                Some(o) => v3(o),
                None => {
                    let attach = match states.last() {
                        Some(ps) => {
                            let pm: &LinkModel = &links[i - 1];
                            let tip = ps.r
                                + Vec3::new(pm.params.l2, 0.0, 0.0)
                                + pm.basis.evaluate(pm.params.l2, 0)? * &ps.eta;
                            ps.rot.matrix() * tip
                        }
                        None => v3(l.joint.anchor),
                    };
                    let base = Vec3::new(l.l1, 0.0, 0.0) + model.basis.evaluate(l.l1, 0)? * &eta;
                    attach - rot.matrix() * base
                }
            };
            let mut s = LinkState::placed(rot, origin, dof);
            s.v = v3(init.v);
            s.omega = v3(init.omega);
            s.eta = eta;
            s.eta_dot = eta_dot;
            links.push(model);
            joints.push(joint);
            states.push(s);
        }
        let baumgarte = self.baumgarte.enabled.then_some(Baumgarte {
            alpha: self.baumgarte.alpha,
            beta: self.baumgarte.beta,
        });
        let chain = Chain {
            links,
            joints,
            gravity: v3(self.gravity),
            baumgarte,
        };
        Ok((
            chain,
            ChainState {
                t: 0.0,
                links: states,
            },
        ))
    }
}

/// Parses and validates a scenario document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let path = e.span().map_or_else(
            || "document".to_string(),
            |s| format!("document[{}..{}]", s.start, s.end),
        );
        Error::Config(vec![ConfigIssue {
            path,
            message: e.message().to_string(),
        }])
    })?;
    let issues = cfg.issues();
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(issues))
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}
