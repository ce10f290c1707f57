//! Continuous single-link model: mass matrix, coupling and bias vectors, end
//! wrenches and the distributed displacement equation.
//!
//! Integrals over the link run on sampled deformation fields
//! ([`NodalDeformation`]), so the same code serves modal and analytic fields.

use nalgebra::{DMatrix, DVector, Matrix6xX};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modal::{BasisFamily, DeformationField, ModalBasis, ModalIntegralCache, ShapeMatrix};
use crate::quadrature::CompositeRule;
use crate::screw::{skew, Mat3, Mat6, RotationMatrix, Twist, Vec3, Vec6, Wrench};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkParameters {
    /// Mass density (kg/m³).
    pub rho: f64,
    /// Young's modulus (Pa).
    pub e: f64,
    /// Cross-section area (m²).
    pub a: f64,
    pub l1: f64,
    pub l2: f64,
    pub iy: f64,
    pub iz: f64,
}

impl LinkParameters {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("rho", self.rho),
            ("E", self.e),
            ("A", self.a),
            ("Iy", self.iy),
            ("Iz", self.iz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::OutOfRange {
                    what,
                    value: v,
                    lo: 0.0,
                    hi: f64::INFINITY,
                });
            }
        }
        if !(self.l2 > self.l1) || !self.l1.is_finite() || !self.l2.is_finite() {
            return Err(Error::OutOfRange {
                what: "l2 − l1",
                value: self.l2 - self.l1,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.l2 - self.l1
    }

    pub fn rho_a(&self) -> f64 {
        self.rho * self.a
    }

    pub fn mass(&self) -> f64 {
        self.rho_a() * self.length()
    }

    pub fn elasticity(&self) -> ElasticityMatrices {
        ElasticityMatrices {
            iv1: Mat3::from_diagonal(&Vec3::new(self.e * self.a, 0.0, 0.0)),
            iv2: Mat3::from_diagonal(&Vec3::new(0.0, self.e * self.iz, self.e * self.iy)),
            h: Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0),
        }
    }

    /// Roll inertia of the cross-section, `ρ(Iy + Iz)l`.
    pub fn polar_inertia(&self) -> f64 {
        self.rho * (self.iy + self.iz) * self.length()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElasticityMatrices {
    pub iv1: Mat3,
    pub iv2: Mat3,
    pub h: Mat3,
}

/// Pose and twist of a link frame. `r` is `ⁱr_i`, the frame origin in body
/// coordinates; the inertial origin position is `R r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkKinematicState {
    pub rot: RotationMatrix,
    pub r: Vec3,
    pub z: Twist,
}

impl LinkKinematicState {
    pub fn v(&self) -> Vec3 {
        self.z.linear_vel
    }

    pub fn omega(&self) -> Vec3 {
        self.z.angular_vel
    }

    pub fn rot(&self) -> &Mat3 {
        self.rot.matrix()
    }
}

/// Any deformation field that can be evaluated along the link.
pub trait Deformation {
    /// `r_ξ` or its spatial derivative of order ≤ 4.
    fn displacement(&self, xi: f64, order: usize) -> Vec3;
    fn velocity(&self, xi: f64) -> Vec3;
}

impl Deformation for DeformationField<'_> {
    fn displacement(&self, xi: f64, order: usize) -> Vec3 {
        let xi = xi.clamp(self.basis().l1(), self.basis().l2());
        DeformationField::displacement(self, xi, order).unwrap_or_else(|_| Vec3::zeros())
    }

    fn velocity(&self, xi: f64) -> Vec3 {
        let xi = xi.clamp(self.basis().l1(), self.basis().l2());
        DeformationField::velocity(self, xi, 0).unwrap_or_else(|_| Vec3::zeros())
    }
}

/// Identically zero deformation.
pub struct Undeformed;

impl Deformation for Undeformed {
    fn displacement(&self, _: f64, _: usize) -> Vec3 {
        Vec3::zeros()
    }

    fn velocity(&self, _: f64) -> Vec3 {
        Vec3::zeros()
    }
}

/// Deformation sampled at quadrature nodes plus the two end points.
#[derive(Clone, Debug)]
pub struct NodalDeformation {
    pub xi: Vec<f64>,
    pub w: Vec<f64>,
    /// `r_ξ`, `r_ξ′`, `r_ξ″` at the nodes.
    pub r: [Vec<Vec3>; 3],
    pub v: Vec<Vec3>,
    pub r_ends: [Vec3; 2],
    pub v_ends: [Vec3; 2],
}

impl NodalDeformation {
    pub fn sample(field: &impl Deformation, rule: &CompositeRule, l1: f64, l2: f64) -> Self {
        let xi = rule.nodes().to_vec();
        Self {
            r: [0, 1, 2].map(|o| xi.iter().map(|&x| field.displacement(x, o)).collect()),
            v: xi.iter().map(|&x| field.velocity(x)).collect(),
            r_ends: [field.displacement(l1, 0), field.displacement(l2, 0)],
            v_ends: [field.velocity(l1), field.velocity(l2)],
            w: rule.weights().to_vec(),
            xi,
        }
    }

    pub fn from_modal(
        cache: &ModalIntegralCache,
        eta: &DVector<f64>,
        eta_dot: &DVector<f64>,
    ) -> Self {
        let apply =
            |m: &Vec<ShapeMatrix>, q: &DVector<f64>| m.iter().map(|p| p * q).collect::<Vec<Vec3>>();
        Self {
            xi: cache.rule.nodes().to_vec(),
            w: cache.rule.weights().to_vec(),
            r: [0, 1, 2].map(|o| apply(&cache.node_values[o], eta)),
            v: apply(&cache.node_values[0], eta_dot),
            r_ends: [&cache.base[0] * eta, &cache.tip[0] * eta],
            v_ends: [&cache.base[0] * eta_dot, &cache.tip[0] * eta_dot],
        }
    }

    /// `r_ob = r_i + [ξ,0,0] + r_ξ` at node `k`.
    fn r_ob(&self, r_i: &Vec3, k: usize) -> Vec3 {
        r_i + Vec3::new(self.xi[k], 0.0, 0.0) + self.r[0][k]
    }

    fn nodes(&self) -> impl Iterator<Item = usize> {
        0..self.xi.len()
    }
}

/// Centerline position `r_ob(ξ) = r_i + r_b(ξ) + r_ξ(ξ)` in body coordinates.
pub fn centerline_position(
    params: &LinkParameters,
    field: &impl Deformation,
    r_i: &Vec3,
    xi: f64,
) -> Result<Vec3> {
    let tol = 1e-12 * params.length().max(1.0);
    if !(xi >= params.l1 - tol && xi <= params.l2 + tol) {
        return Err(Error::OutOfRange {
            what: "ξ",
            value: xi,
            lo: params.l1,
            hi: params.l2,
        });
    }
    Ok(r_i + Vec3::new(xi, 0.0, 0.0) + field.displacement(xi, 0))
}

/// Model switches that are off by default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkOptions {
    /// Adds the cross-section roll inertia and its gyroscopic moment.
    #[serde(default)]
    pub polar_inertia: bool,
    /// Adds the quadratic elastic moment terms to the bias vector.
    #[serde(default)]
    pub include_elastic_moments: bool,
    /// Lets end forces (joint and external) drive the modal equations through
    /// `φ(end)ᵀ Rᵀ f`. Without it an interior joint exchanges work with the
    /// parent's tip deformation that the modal rows never see.
    #[serde(default)]
    pub modal_end_loads: bool,
}

/// `M*_i`; `ρA∫r̂_ob r̂_obᵀ` with the slender-rod reduction.
pub fn mass_matrix(
    params: &LinkParameters,
    opts: &LinkOptions,
    state: &LinkKinematicState,
    d: &NodalDeformation,
) -> Mat6 {
    let rho_a = params.rho_a();
    let (mut s1, mut s2) = (Vec3::zeros(), Mat3::zeros());
    for k in d.nodes() {
        let r = d.r_ob(&state.r, k);
        let rs = skew(&r);
        s1 += d.w[k] * r;
        s2 += d.w[k] * rs * rs.transpose();
    }
    let c = rho_a * skew(&s1);
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(params.mass() * Mat3::identity()));
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-c));
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&c);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&(rho_a * s2));
    if opts.polar_inertia {
        m[(3, 3)] += params.polar_inertia();
    }
    m
}

/// `G*_i` for element accelerations `v̇_ξ` sampled at the nodes of `d`.
pub fn coupling_vector(
    params: &LinkParameters,
    state: &LinkKinematicState,
    d: &NodalDeformation,
    vdot: &[Vec3],
) -> Vec6 {
    let rho_a = params.rho_a();
    let (mut f, mut t) = (Vec3::zeros(), Vec3::zeros());
    for k in d.nodes() {
        f += d.w[k] * vdot[k];
        t += d.w[k] * d.r_ob(&state.r, k).cross(&vdot[k]);
    }
    stack(&(rho_a * f), &(rho_a * t))
}

/// Modal form of the coupling: `G* = M_W η̈` with `M_W = ρA[∫φ; ∫r̂_ob φ]`.
pub fn coupling_matrix(
    params: &LinkParameters,
    cache: &ModalIntegralCache,
    state: &LinkKinematicState,
    d: &NodalDeformation,
) -> Matrix6xX<f64> {
    let n = cache.phi0.ncols();
    let mut m = Matrix6xX::zeros(n);
    for k in d.nodes() {
        let phi = &cache.node_values[0][k];
        let rs = skew(&d.r_ob(&state.r, k));
        let mut top = m.fixed_rows_mut::<3>(0);
        top += d.w[k] * phi;
        let mut bottom = m.fixed_rows_mut::<3>(3);
        bottom += d.w[k] * (rs * phi);
    }
    m * params.rho_a()
}

/// `H*_i`: Coriolis, centrifugal and gravity terms moved to the left-hand side.
pub fn bias_vector(
    params: &LinkParameters,
    opts: &LinkOptions,
    state: &LinkKinematicState,
    d: &NodalDeformation,
    gravity: &Vec3,
) -> Vec6 {
    let rho_a = params.rho_a();
    let (v, w) = (state.v(), state.omega());
    let g_body = state.rot().transpose() * gravity;
    let (mut f, mut t) = (Vec3::zeros(), Vec3::zeros());
    for k in d.nodes() {
        let r = d.r_ob(&state.r, k);
        let a = 2.0 * w.cross(&(v + d.v[k])) + w.cross(&w.cross(&r)) - g_body;
        f += d.w[k] * a;
        t += d.w[k] * r.cross(&a);
    }
    let mut t = rho_a * t;
    if opts.polar_inertia {
        let jp = params.polar_inertia();
        t += w.cross(&Vec3::new(jp * w.x, 0.0, 0.0));
    }
    if opts.include_elastic_moments {
        t += elastic_moment_terms(params, d);
    }
    stack(&(rho_a * f), &t)
}

/// `∫ r̂_ξ′ Iv1 r_ξ′ dξ + ∫ r̂_ξ″ Iv2 r_ξ″ dξ`.
pub fn elastic_moment_terms(params: &LinkParameters, d: &NodalDeformation) -> Vec3 {
    let el = params.elasticity();
    d.nodes()
        .map(|k| {
            d.w[k]
                * (d.r[1][k].cross(&(el.iv1 * d.r[1][k])) + d.r[2][k].cross(&(el.iv2 * d.r[2][k])))
        })
        .sum()
}

/// `F*_i` from the wrench applied at the base and the wrench the tip exerts
/// on its surroundings, both in body coordinates; moments are taken about the
/// inertial origin through the deformed end points `r_ob(l1)`, `r_ob(l2)`.
pub fn end_wrench_vector(f_base: &Wrench, f_tip: &Wrench, r_base: &Vec3, r_tip: &Vec3) -> Vec6 {
    stack(
        &(f_base.force - f_tip.force),
        &(f_base.torque - f_tip.torque + r_base.cross(&f_base.force) - r_tip.cross(&f_tip.force)),
    )
}

/// Accelerations supplied to [`displacement_residual`].
pub struct LinkAccelerations<'a> {
    pub v_dot: Vec3,
    pub omega_dot: Vec3,
    pub vdot_xi: &'a dyn Fn(f64) -> Vec3,
}

/// Pointwise residual of the distributed displacement equation per unit mass.
pub fn displacement_residual(
    params: &LinkParameters,
    state: &LinkKinematicState,
    field: &impl Deformation,
    acc: &LinkAccelerations,
    gravity: &Vec3,
    xi: f64,
) -> Result<Vec3> {
    let r = centerline_position(params, field, &state.r, xi)?;
    let (v, w) = (state.v(), state.omega());
    let el = params.elasticity();
    let inertial = acc.v_dot + (acc.vdot_xi)(xi) - skew(&r) * acc.omega_dot
        + 2.0 * w.cross(&(v + field.velocity(xi)))
        + w.cross(&w.cross(&r));
    let elastic =
        (el.iv2 * field.displacement(xi, 4) - el.iv1 * field.displacement(xi, 2)) / params.rho_a();
    Ok(inertial - state.rot().transpose() * gravity + elastic)
}

/// End conditions: shear/axial force and bending moment balance at both ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryResiduals {
    pub force_base: Vec3,
    pub force_tip: Vec3,
    pub moment_base: Vec3,
    pub moment_tip: Vec3,
}

impl BoundaryResiduals {
    pub fn max_norm(&self) -> f64 {
        [
            self.force_base,
            self.force_tip,
            self.moment_base,
            self.moment_tip,
        ]
        .iter()
        .map(|v| v.amax())
        .fold(0.0, f64::max)
    }
}

pub fn boundary_residuals(
    params: &LinkParameters,
    field: &impl Deformation,
    f_base: &Wrench,
    f_tip: &Wrench,
) -> BoundaryResiduals {
    let el = params.elasticity();
    let (l1, l2) = (params.l1, params.l2);
    let force = |x: f64, f: &Vec3| {
        el.iv2 * field.displacement(x, 3) - el.iv1 * field.displacement(x, 1) - f
    };
    let moment = |x: f64, t: &Vec3| -el.iv2 * field.displacement(x, 2) - el.h * t;
    BoundaryResiduals {
        force_base: force(l1, &f_base.force),
        force_tip: force(l2, &f_tip.force),
        moment_base: moment(l1, &f_base.torque),
        moment_tip: moment(l2, &f_tip.torque),
    }
}

fn stack(a: &Vec3, b: &Vec3) -> Vec6 {
    Vec6::new(a.x, a.y, a.z, b.x, b.y, b.z)
}

/// A link together with its modal basis and integral cache.
#[derive(Clone, Debug)]
pub struct LinkModel {
    pub params: LinkParameters,
    pub opts: LinkOptions,
    pub basis: ModalBasis,
    pub cache: ModalIntegralCache,
    /// `∫φᵀ Iv2 φ⁗ − ∫φᵀ Iv1 φ″`.
    pub stiffness: DMatrix<f64>,
}

/// Modal-row contributions for one link, per unit mass.
pub struct ModalRows {
    /// `[∫φᵀ, −∫φᵀ r̂_ob]`, `3r × 6`.
    pub m_d: DMatrix<f64>,
    /// `(1/ρA) K η + ∫φᵀ(2ω×v_ob + ω×ω×r_ob − Rᵀg)`.
    pub h: DVector<f64>,
}

impl LinkModel {
    pub fn new(params: LinkParameters, family: BasisFamily, opts: LinkOptions) -> Result<Self> {
        params.validate()?;
        let basis = ModalBasis::new(family, params.l1, params.l2)?;
        let cache = ModalIntegralCache::build(&basis)?;
        let stiffness = cache.stiffness(
            params.e * params.a,
            params.e * params.iz,
            params.e * params.iy,
        );
        Ok(Self {
            params,
            opts,
            basis,
            cache,
            stiffness,
        })
    }

    pub fn dof(&self) -> usize {
        self.basis.dof()
    }

    pub fn sample(&self, eta: &DVector<f64>, eta_dot: &DVector<f64>) -> NodalDeformation {
        NodalDeformation::from_modal(&self.cache, eta, eta_dot)
    }

    pub fn modal_rows(
        &self,
        state: &LinkKinematicState,
        d: &NodalDeformation,
        eta: &DVector<f64>,
        gravity: &Vec3,
    ) -> ModalRows {
        let n = self.dof();
        let (v, w) = (state.v(), state.omega());
        let g_body = state.rot().transpose() * gravity;
        let mut m_d = DMatrix::zeros(n, 6);
        let mut h = &self.stiffness * eta / self.params.rho_a();
        for k in d.nodes() {
            let phi_t = self.cache.node_values[0][k].transpose();
            let r = d.r_ob(&state.r, k);
            let a = 2.0 * w.cross(&(v + d.v[k])) + w.cross(&w.cross(&r)) - g_body;
            let mut lin = m_d.columns_mut(0, 3);
            lin += d.w[k] * &phi_t;
            let mut ang = m_d.columns_mut(3, 3);
            ang -= d.w[k] * (&phi_t * skew(&r));
            h.axpy(d.w[k], &(&phi_t * a), 1.0);
        }
        ModalRows { m_d, h }
    }
}
