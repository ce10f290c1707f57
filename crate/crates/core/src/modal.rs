//! Assumed-mode bases for axial and bending deformation of a link.
//!
//! Every link carries `r` modes per axis. The shape matrix `φ(ξ)` is `3 × 3r`
//! with column `3(p−1) + k` holding mode `p` along axis `k` (x axial, y and z
//! bending), so `r_ξ = φ η` stacks `(η_x, η_y, η_z)` per mode.

use nalgebra::{DMatrix, DVector, Matrix3xX};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::CompositeRule;
use crate::screw::Vec3;

pub type ShapeMatrix = Matrix3xX<f64>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    /// Clamped at the joint-side end `l1`, free at `l2`.
    #[default]
    ClampedFree,
    /// Free at both ends, rigid-body modes removed.
    FreeFreeElastic,
}

impl BasisKind {
    pub fn name(&self) -> &'static str {
        match self {
            BasisKind::ClampedFree => "clamped-free",
            BasisKind::FreeFreeElastic => "free-free-elastic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisFamily {
    pub kind: BasisKind,
    pub r: usize,
}

/// Closed-form coefficients of one bending eigenfunction
/// `A e^{βs} + B e^{−βs} + C cos βs + D sin βs` (before normalisation).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
struct BendingShape {
    beta: f64,
    /// `A e^{βl}`, kept finite for large `βl`.
    a_scaled: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl BendingShape {
    fn eval(&self, s: f64, len: f64, order: usize) -> f64 {
        let x = self.beta * s;
        let bn = self.beta.powi(order as i32);
        let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
        let growing = self.a_scaled * (self.beta * (s - len)).exp();
        let decaying = sign * self.b * (-x).exp();
        let phase = order as f64 * std::f64::consts::FRAC_PI_2;
        let trig = self.c * (x + phase).cos() + self.d * (x + phase).sin();
        bn * (growing + decaying + trig)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModalBasis {
    family: BasisFamily,
    l1: f64,
    l2: f64,
    axial_k: Vec<f64>,
    bending: Vec<BendingShape>,
}

fn bisect(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    family: &'static str,
    mode: usize,
) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a), f(b));
    if !(fa * fb < 0.0) {
        return Err(Error::RootFinding {
            family,
            mode,
            lo,
            hi,
        });
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a) < 4.0 * f64::EPSILON * m.abs() {
            return Ok(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    let m = 0.5 * (a + b);
    if (b - a) < 1e-12 * m.abs() {
        Ok(m)
    } else {
        Err(Error::RootFinding {
            family,
            mode,
            lo,
            hi,
        })
    }
}

/// Dimensionless roots `βl` of the bending frequency equation.
pub fn bending_roots(kind: BasisKind, r: usize) -> Result<Vec<f64>> {
    use std::f64::consts::PI;
    (1..=r)
        .map(|p| {
            let pf = p as f64;
            match kind {
                // cos x cosh x = −1
                BasisKind::ClampedFree => bisect(
                    |x| x.cos() + 1.0 / x.cosh(),
                    (pf - 1.0) * PI,
                    pf * PI,
                    kind.name(),
                    p,
                ),
                // cos x cosh x = 1, rigid modes excluded
                BasisKind::FreeFreeElastic => bisect(
                    |x| x.cos() - 1.0 / x.cosh(),
                    pf * PI,
                    (pf + 1.0) * PI,
                    kind.name(),
                    p,
                ),
            }
        })
        .collect()
}

fn bending_shape(kind: BasisKind, big_l: f64, len: f64) -> BendingShape {
    let beta = big_l / len;
    let (s, c) = big_l.sin_cos();
    let em = (-big_l).exp();
    match kind {
        BasisKind::ClampedFree => {
            let sigma = (big_l.cosh() + c) / (big_l.sinh() + s);
            BendingShape {
                beta,
                a_scaled: (s - c - em) / (1.0 - em * em + 2.0 * s * em),
                b: 0.5 * (1.0 + sigma),
                c: -1.0,
                d: sigma,
            }
        }
        BasisKind::FreeFreeElastic => {
            let sigma = (big_l.cosh() - c) / (big_l.sinh() - s);
            BendingShape {
                beta,
                a_scaled: (c - s - em) / (1.0 - em * em - 2.0 * s * em),
                b: 0.5 * (1.0 + sigma),
                c: 1.0,
                d: -sigma,
            }
        }
    }
}

/// Circular frequency of a bending mode, `β² √(EI/ρA)`.
pub fn bending_frequency(beta: f64, ei: f64, rho_a: f64) -> f64 {
    beta * beta * (ei / rho_a).sqrt()
}

/// Circular frequency of an axial mode, `k √(E/ρ)`.
pub fn axial_frequency(k: f64, e: f64, rho: f64) -> f64 {
    k * (e / rho).sqrt()
}

impl ModalBasis {
    /// Bending and axial eigenfunctions on `[l1, l2]`, unit L²-normalised.
    pub fn new(family: BasisFamily, l1: f64, l2: f64) -> Result<Self> {
        if family.r == 0 {
            return Err(Error::OutOfRange {
                what: "modes per axis",
                value: 0.0,
                lo: 1.0,
                hi: f64::INFINITY,
            });
        }
        let len = l2 - l1;
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::OutOfRange {
                what: "link length",
                value: len,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        let bending = bending_roots(family.kind, family.r)?
            .into_iter()
            .map(|bl| bending_shape(family.kind, bl, len))
            .collect();
        let axial_k = (1..=family.r)
            .map(|p| {
                let pf = p as f64;
                match family.kind {
                    BasisKind::ClampedFree => (2.0 * pf - 1.0) * std::f64::consts::PI / (2.0 * len),
                    BasisKind::FreeFreeElastic => pf * std::f64::consts::PI / len,
                }
            })
            .collect();
        Ok(Self {
            family,
            l1,
            l2,
            axial_k,
            bending,
        })
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn r(&self) -> usize {
        self.family.r
    }

    pub fn dof(&self) -> usize {
        3 * self.family.r
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn length(&self) -> f64 {
        self.l2 - self.l1
    }

    /// Bending wavenumbers `β_p` (1/m).
    pub fn bending_wavenumbers(&self) -> Vec<f64> {
        self.bending.iter().map(|b| b.beta).collect()
    }

    /// Axial wavenumbers `k_p` (1/m).
    pub fn axial_wavenumbers(&self) -> &[f64] {
        &self.axial_k
    }

    /// Axial shape `p` (0-based) or its derivative at local coordinate `s = ξ − l1`.
    pub fn axial_scalar(&self, p: usize, s: f64, order: usize) -> f64 {
        let k = self.axial_k[p];
        let norm = (2.0 / self.length()).sqrt();
        let phase = k * s + order as f64 * std::f64::consts::FRAC_PI_2;
        let base = match self.family.kind {
            BasisKind::ClampedFree => phase.sin(),
            BasisKind::FreeFreeElastic => phase.cos(),
        };
        norm * k.powi(order as i32) * base
    }

    /// Bending shape `p` (0-based) or its derivative at `s = ξ − l1`.
    pub fn bending_scalar(&self, p: usize, s: f64, order: usize) -> f64 {
        let len = self.length();
        self.bending[p].eval(s, len, order) / len.sqrt()
    }

    fn check_point(&self, xi: f64, order: usize) -> Result<f64> {
        if order > 4 {
            return Err(Error::DerivativeOrder(order));
        }
        let tol = 1e-12 * self.length().max(1.0);
        if !(xi >= self.l1 - tol && xi <= self.l2 + tol) {
            return Err(Error::OutOfRange {
                what: "ξ",
                value: xi,
                lo: self.l1,
                hi: self.l2,
            });
        }
        Ok((xi - self.l1).clamp(0.0, self.length()))
    }

    /// `φ(ξ)` or its `order`-th derivative, `3 × 3r`.
    pub fn evaluate(&self, xi: f64, order: usize) -> Result<ShapeMatrix> {
        let s = self.check_point(xi, order)?;
        Ok(self.evaluate_unchecked(s, order))
    }

    fn evaluate_unchecked(&self, s: f64, order: usize) -> ShapeMatrix {
        let r = self.family.r;
        let mut m = ShapeMatrix::zeros(3 * r);
        for p in 0..r {
            let b = self.bending_scalar(p, s, order);
            m[(0, 3 * p)] = self.axial_scalar(p, s, order);
            m[(1, 3 * p + 1)] = b;
            m[(2, 3 * p + 2)] = b;
        }
        m
    }

    /// Deformation field for the given modal coordinates.
    pub fn reconstruct<'a>(
        &'a self,
        eta: &DVector<f64>,
        eta_dot: &DVector<f64>,
    ) -> Result<DeformationField<'a>> {
        for (v, what) in [(eta, "η"), (eta_dot, "η̇")] {
            if v.len() != self.dof() {
                return Err(Error::DimensionMismatch {
                    what: if what == "η" {
                        "modal coordinates"
                    } else {
                        "modal velocities"
                    },
                    expected: self.dof(),
                    got: v.len(),
                });
            }
        }
        Ok(DeformationField {
            basis: self,
            eta: eta.clone(),
            eta_dot: eta_dot.clone(),
        })
    }

    /// L² projection of a vector field onto the basis (the Gram matrix is the identity).
    pub fn project(&self, rule: &CompositeRule, f: impl Fn(f64) -> Vec3) -> DVector<f64> {
        let mut eta = DVector::zeros(self.dof());
        for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
            let phi = self.evaluate_unchecked(x - self.l1, 0);
            eta += w * phi.transpose() * f(x);
        }
        eta
    }

    /// Default quadrature rule on `[l1, l2]`: 4 panels of 16 Gauss points.
    pub fn default_rule(&self) -> CompositeRule {
        CompositeRule::new(self.l1, self.l2, 4, 16)
    }
}

/// `r_ξ(ξ) = φ(ξ) η` and `v_ξ(ξ) = φ(ξ) η̇`.
pub struct DeformationField<'a> {
    basis: &'a ModalBasis,
    eta: DVector<f64>,
    eta_dot: DVector<f64>,
}

impl DeformationField<'_> {
    pub fn basis(&self) -> &ModalBasis {
        self.basis
    }

    pub fn displacement(&self, xi: f64, order: usize) -> Result<Vec3> {
        Ok(self.basis.evaluate(xi, order)? * &self.eta)
    }

    pub fn velocity(&self, xi: f64, order: usize) -> Result<Vec3> {
        Ok(self.basis.evaluate(xi, order)? * &self.eta_dot)
    }
}

/// Precomputed modal integrals and node samples for one link.
#[derive(Clone, Debug)]
pub struct ModalIntegralCache {
    pub rule: CompositeRule,
    /// `φ`, `φ′`, `φ″` at each quadrature node.
    pub node_values: [Vec<ShapeMatrix>; 3],
    /// `∫φ dξ`.
    pub phi0: ShapeMatrix,
    /// `∫ξ φ dξ`; `∫skew(r_b)φ = skew(e_x) · phi1`.
    pub phi1: ShapeMatrix,
    /// `∫φᵀφ dξ`.
    pub gram: DMatrix<f64>,
    /// `∫φᵀφ⁗ dξ`.
    pub k4: DMatrix<f64>,
    /// `∫φ″ᵀφ″ dξ`, the symmetric counterpart of `k4`.
    pub k4_sym: DMatrix<f64>,
    /// `∫φᵀφ″ dξ`.
    pub k2: DMatrix<f64>,
    /// `−∫φ′ᵀφ′ dξ`, the symmetric counterpart of `k2`.
    pub k2_sym: DMatrix<f64>,
    /// `φ` derivatives of order 0..=3 at `l1`.
    pub base: [ShapeMatrix; 4],
    /// `φ` derivatives of order 0..=3 at `l2`.
    pub tip: [ShapeMatrix; 4],
}

struct Integrals {
    phi0: ShapeMatrix,
    phi1: ShapeMatrix,
    gram: DMatrix<f64>,
    k4: DMatrix<f64>,
    k4_sym: DMatrix<f64>,
    k2: DMatrix<f64>,
    k2_sym: DMatrix<f64>,
}

impl Integrals {
    fn compute(basis: &ModalBasis, rule: &CompositeRule) -> Self {
        let n = basis.dof();
        let mut out = Self {
            phi0: ShapeMatrix::zeros(n),
            phi1: ShapeMatrix::zeros(n),
            gram: DMatrix::zeros(n, n),
            k4: DMatrix::zeros(n, n),
            k4_sym: DMatrix::zeros(n, n),
            k2: DMatrix::zeros(n, n),
            k2_sym: DMatrix::zeros(n, n),
        };
        for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
            let s = x - basis.l1;
            let d: Vec<ShapeMatrix> = (0..=4).map(|o| basis.evaluate_unchecked(s, o)).collect();
            out.phi0 += w * &d[0];
            out.phi1 += (w * x) * &d[0];
            out.gram += w * d[0].transpose() * &d[0];
            out.k4 += w * d[0].transpose() * &d[4];
            out.k4_sym += w * d[2].transpose() * &d[2];
            out.k2 += w * d[0].transpose() * &d[2];
            out.k2_sym -= w * d[1].transpose() * &d[1];
        }
        out
    }

    fn max_rel_diff(&self, other: &Self) -> f64 {
        let pairs: [(&[f64], &[f64], f64); 7] = [
            (self.phi0.as_slice(), other.phi0.as_slice(), 1.0),
            (self.phi1.as_slice(), other.phi1.as_slice(), 1.0),
            (self.gram.as_slice(), other.gram.as_slice(), 1.0),
            (self.k4.as_slice(), other.k4.as_slice(), 1.0),
            (self.k4_sym.as_slice(), other.k4_sym.as_slice(), 1.0),
            (self.k2.as_slice(), other.k2.as_slice(), 1.0),
            (self.k2_sym.as_slice(), other.k2_sym.as_slice(), 1.0),
        ];
        pairs
            .iter()
            .map(|(a, b, floor)| {
                let scale = b.iter().fold(*floor, |m, v| m.max(v.abs()));
                a.iter()
                    .zip(b.iter())
                    .fold(0.0f64, |m, (x, y)| m.max((x - y).abs() / scale))
            })
            .fold(0.0, f64::max)
    }
}

impl ModalIntegralCache {
    /// Integrals on the default 64-point rule, verified against a finer rule.
    pub fn build(basis: &ModalBasis) -> Result<Self> {
        let rule = basis.default_rule();
        let coarse = Integrals::compute(basis, &rule);
        let fine = Integrals::compute(basis, &CompositeRule::new(basis.l1, basis.l2, 8, 24));
        let rel_diff = coarse.max_rel_diff(&fine);
        if !(rel_diff <= 1e-8) {
            return Err(Error::Quadrature {
                what: "modal integral cache",
                rel_diff,
            });
        }
        let node_values = [0, 1, 2].map(|o| {
            rule.nodes()
                .iter()
                .map(|&x| basis.evaluate_unchecked(x - basis.l1, o))
                .collect()
        });
        let ends = |s: f64| [0, 1, 2, 3].map(|o| basis.evaluate_unchecked(s, o));
        Ok(Self {
            node_values,
            phi0: coarse.phi0,
            phi1: coarse.phi1,
            gram: coarse.gram,
            k4: coarse.k4,
            k4_sym: coarse.k4_sym,
            k2: coarse.k2,
            k2_sym: coarse.k2_sym,
            base: ends(0.0),
            tip: ends(basis.length()),
            rule,
        })
    }

    /// Modal stiffness `∫φᵀ Iv2 φ⁗ − ∫φᵀ Iv1 φ″` with `Iv1 = diag(EA,0,0)`,
    /// `Iv2 = diag(0, EIz, EIy)`.
    pub fn stiffness(&self, ea: f64, ei_z: f64, ei_y: f64) -> DMatrix<f64> {
        let n = self.gram.nrows();
        DMatrix::from_fn(n, n, |i, j| match i % 3 {
            0 => -ea * self.k2[(i, j)],
            1 => ei_z * self.k4[(i, j)],
            _ => ei_y * self.k4[(i, j)],
        })
    }
}
