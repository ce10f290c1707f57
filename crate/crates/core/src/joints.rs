//! Joint constraints between consecutive links.
//!
//! Constraint rows compare the twists of the two end points meeting at a
//! joint, both expressed in inertial coordinates about the joint point
//! `c`, via `X(R, −c) = [[R, −ĉR], [0, R]]`. The linear part of `X z` is then
//! the inertial velocity of the material end point.

use nalgebra::Matrix6xX;
use serde::{Deserialize, Serialize};

use crate::link::{LinkKinematicState, LinkModel, NodalDeformation};
use crate::screw::{AdjointTransform, FrameId, Mat3, Mat6, Screw, Twist, Vec3, Vec6};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JointKind {
    Fixed,
    #[default]
    Revolute,
    /// No constraint; the interaction wrench is zero.
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub kind: JointKind,
    /// Rotation axis in the child's body frame (unit), used by revolute joints.
    pub axis: Vec3,
    /// Inertial position of the base joint; ignored for other joints.
    pub anchor: Vec3,
}

impl JointSpec {
    pub fn fixed() -> Self {
        Self {
            kind: JointKind::Fixed,
            axis: Vec3::z(),
            anchor: Vec3::zeros(),
        }
    }

    pub fn revolute(axis: Vec3) -> Self {
        Self {
            kind: JointKind::Revolute,
            axis: axis.normalize(),
            anchor: Vec3::zeros(),
        }
    }

    pub fn free() -> Self {
        Self {
            kind: JointKind::Free,
            axis: Vec3::z(),
            anchor: Vec3::zeros(),
        }
    }

    pub fn with_anchor(mut self, anchor: Vec3) -> Self {
        self.anchor = anchor;
        self
    }

    /// Number of unconstrained directions.
    pub fn released(&self) -> usize {
        match self.kind {
            JointKind::Fixed => 0,
            JointKind::Revolute => 1,
            JointKind::Free => 6,
        }
    }
}

/// Projector `P` onto the constrained directions and its rate `Q = Ṗ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub p: Mat6,
    pub q: Mat6,
}

/// `P = blockdiag(I, I − aaᵀ)` with `a = R_child ⁱa`, and `Q` from `ȧ = R ω̂ ⁱa`.
pub fn projection(joint: &JointSpec, rot_child: &Mat3, omega_child: &Vec3) -> Projection {
    match joint.kind {
        JointKind::Fixed => Projection {
            p: Mat6::identity(),
            q: Mat6::zeros(),
        },
        JointKind::Free => Projection {
            p: Mat6::zeros(),
            q: Mat6::zeros(),
        },
        JointKind::Revolute => {
            let a = rot_child * joint.axis;
            let a_dot = rot_child * omega_child.cross(&joint.axis);
            let mut p = Mat6::identity();
            p.fixed_view_mut::<3, 3>(3, 3)
                .copy_from(&(Mat3::identity() - a * a.transpose()));
            let mut q = Mat6::zeros();
            q.fixed_view_mut::<3, 3>(3, 3)
                .copy_from(&(-(a_dot * a.transpose() + a * a_dot.transpose())));
            Projection { p, q }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum End {
    Base,
    Tip,
}

/// A link's model, kinematic state and sampled deformation, read together.
#[derive(Clone, Copy)]
pub struct LinkView<'a> {
    pub model: &'a LinkModel,
    pub state: &'a LinkKinematicState,
    pub def: &'a NodalDeformation,
}

impl LinkView<'_> {
    fn xi(&self, end: End) -> f64 {
        match end {
            End::Base => self.model.params.l1,
            End::Tip => self.model.params.l2,
        }
    }

    fn slot(end: End) -> usize {
        match end {
            End::Base => 0,
            End::Tip => 1,
        }
    }

    /// `r_ob` at the end, body coordinates.
    pub fn end_position(&self, end: End) -> Vec3 {
        self.state.r + Vec3::new(self.xi(end), 0.0, 0.0) + self.def.r_ends[Self::slot(end)]
    }

    /// Inertial position of the end point.
    pub fn end_point(&self, end: End) -> Vec3 {
        self.state.rot() * self.end_position(end)
    }

    pub fn end_transform(&self, end: End) -> AdjointTransform {
        AdjointTransform::from_parts(self.state.rot(), &(-self.end_point(end)))
    }

    /// Velocity-product terms of `d/dt (X z_end)`: `[R(ω×(2(v+v_ξ) + ω×r_ob)); 0]`.
    pub fn end_bias(&self, end: End) -> Vec6 {
        let w = self.state.omega();
        let v = self.state.v() + self.def.v_ends[Self::slot(end)];
        let lin = self.state.rot() * w.cross(&(2.0 * v + w.cross(&self.end_position(end))));
        Vec6::new(lin.x, lin.y, lin.z, 0.0, 0.0, 0.0)
    }

    /// `[φ(l)η̈ contribution; 0]` mapped by `X`: `[Rφ(l); 0]`.
    pub fn end_modal_block(&self, end: End) -> Matrix6xX<f64> {
        let phi = match end {
            End::Base => &self.model.cache.base[0],
            End::Tip => &self.model.cache.tip[0],
        };
        let mut m = Matrix6xX::zeros(phi.ncols());
        m.fixed_rows_mut::<3>(0)
            .copy_from(&(self.state.rot() * phi));
        m
    }
}

/// Endpoint screw `s_i + s_b(l) + s_ξ(l)` in body coordinates.
pub fn endpoint_screw(view: &LinkView, end: End, frame: FrameId) -> Screw {
    Screw::new(view.end_position(end), view.state.rot.log(), frame)
}

/// Endpoint twist `z_i + (v_ξ(l), 0)` in body coordinates.
pub fn endpoint_twist(view: &LinkView, end: End) -> Twist {
    let z = view.state.z;
    Twist::new(
        z.linear_vel + view.def.v_ends[LinkView::slot(end)],
        z.angular_vel,
        z.frame,
    )
}

/// `X_child z_B − X_parent z_T`, the unprojected twist mismatch at a joint.
/// For the base joint the parent is the ground.
pub fn twist_mismatch(parent: Option<&LinkView>, child: &LinkView) -> Vec6 {
    let mut d = child
        .end_transform(End::Base)
        .apply(&endpoint_twist(child, End::Base).to_vector());
    if let Some(p) = parent {
        d -= p
            .end_transform(End::Tip)
            .apply(&endpoint_twist(p, End::Tip).to_vector());
    }
    d
}

/// Velocity-level residual `P (X_c z_B − X_p z_T)`.
pub fn velocity_constraint_residual(
    joint: &JointSpec,
    parent: Option<&LinkView>,
    child: &LinkView,
) -> Vec6 {
    let pr = projection(joint, child.state.rot(), &child.state.omega());
    pr.p * twist_mismatch(parent, child)
}

/// Translational position mismatch `c_B − c_T` (inertial); the anchor stands
/// in for the parent at the base joint.
pub fn position_residual(joint: &JointSpec, parent: Option<&LinkView>, child: &LinkView) -> Vec3 {
    if joint.kind == JointKind::Free {
        return Vec3::zeros();
    }
    let target = parent.map_or(joint.anchor, |p| p.end_point(End::Tip));
    child.end_point(End::Base) - target
}

/// Constraint drift feedback gains.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baumgarte {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for Baumgarte {
    fn default() -> Self {
        Self {
            alpha: 20.0,
            beta: 100.0,
        }
    }
}

/// Acceleration-level constraint rows of one joint:
/// `child ż_c + parent ż_p + child_modal η̈_c + parent_modal η̈_p + wrench μ + bias = 0`.
pub struct ConstraintRows {
    pub child: Mat6,
    pub parent: Option<Mat6>,
    pub child_modal: Matrix6xX<f64>,
    pub parent_modal: Option<Matrix6xX<f64>>,
    /// `I − P`: pins the interaction-wrench components along released axes.
    pub wrench: Mat6,
    pub bias: Vec6,
}

pub fn acceleration_constraint_rows(
    joint: &JointSpec,
    parent: Option<&LinkView>,
    child: &LinkView,
    stabilization: Option<Baumgarte>,
) -> ConstraintRows {
    let pr = projection(joint, child.state.rot(), &child.state.omega());
    let xc = child.end_transform(End::Base);
    let d = twist_mismatch(parent, child);
    let mut b_rel = child.end_bias(End::Base);
    if let Some(p) = parent {
        b_rel -= p.end_bias(End::Tip);
    }
    let mut bias = pr.q * d + pr.p * b_rel;
    if let Some(g) = stabilization {
        let e = position_residual(joint, parent, child);
        bias += g.alpha * (pr.p * d);
        if joint.kind != JointKind::Free {
            bias += g.beta * Vec6::new(e.x, e.y, e.z, 0.0, 0.0, 0.0);
        }
    }
    ConstraintRows {
        child: pr.p * xc.matrix(),
        parent: parent.map(|p| -(pr.p * p.end_transform(End::Tip).matrix())),
        child_modal: pr.p * child.end_modal_block(End::Base),
        parent_modal: parent.map(|p| -(pr.p * p.end_modal_block(End::Tip))),
        wrench: Mat6::identity() - pr.p,
        bias,
    }
}

/// Body-frame wrench about the inertial origin exerted by an interaction
/// wrench `μ` given about the joint point in inertial coordinates: `Xᵀ μ`.
pub fn wrench_on_link(x: &AdjointTransform, mu: &Vec6) -> Vec6 {
    x.matrix().transpose() * mu
}
