//! Stacked equations of motion of the whole chain and their solution.
//!
//! Unknowns are `q = [F_J0, ż_1, F_J1, ż_2, …, F_J(n−1), ż_n]` followed by
//! the modal accelerations of every link. Rows are interleaved the same way:
//! joint `j` constraint rows, then link `j+1` dynamics rows, then all modal
//! rows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joints::{
    acceleration_constraint_rows, position_residual, velocity_constraint_residual, Baumgarte, End,
    JointSpec, LinkView,
};
use crate::linalg::DenseLu;
use crate::link::{
    bias_vector, coupling_matrix, end_wrench_vector, mass_matrix, LinkKinematicState, LinkModel,
    NodalDeformation,
};
use crate::screw::{FrameId, Mat6, RotationMatrix, Twist, Vec3, Vec6, Wrench};

/// Per-link state advanced by the integrator.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkState {
    pub rot: RotationMatrix,
    /// `ⁱr_i`, frame origin in body coordinates.
    pub r: Vec3,
    pub v: Vec3,
    pub omega: Vec3,
    pub eta: DVector<f64>,
    pub eta_dot: DVector<f64>,
}

impl LinkState {
    pub fn at_rest(rot: RotationMatrix, r: Vec3, dof: usize) -> Self {
        Self {
            rot,
            r,
            v: Vec3::zeros(),
            omega: Vec3::zeros(),
            eta: DVector::zeros(dof),
            eta_dot: DVector::zeros(dof),
        }
    }

    /// Link at rest whose frame origin sits at the inertial point `origin`.
    pub fn placed(rot: RotationMatrix, origin: Vec3, dof: usize) -> Self {
        let r = rot.matrix().transpose() * origin;
        Self::at_rest(rot, r, dof)
    }

    pub fn kinematic(&self, index: usize) -> LinkKinematicState {
        LinkKinematicState {
            rot: self.rot,
            r: self.r,
            z: Twist::new(self.v, self.omega, FrameId::Body(index + 1)),
        }
    }

    /// Inertial position of the frame origin.
    pub fn origin(&self) -> Vec3 {
        self.rot.matrix() * self.r
    }

    pub fn is_finite(&self) -> bool {
        self.rot
            .matrix()
            .iter()
            .chain(self.r.iter())
            .chain(self.v.iter())
            .chain(self.omega.iter())
            .all(|x| x.is_finite())
            && self
                .eta
                .iter()
                .chain(self.eta_dot.iter())
                .all(|x| x.is_finite())
    }
}

/// External wrenches applied to a link at its two ends, body coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EndWrenches {
    pub base: Wrench,
    pub tip: Wrench,
}

impl EndWrenches {
    pub fn zero(index: usize) -> Self {
        Self {
            base: Wrench::zero(FrameId::Body(index + 1)),
            tip: Wrench::zero(FrameId::Body(index + 1)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Chain {
    pub links: Vec<LinkModel>,
    /// `joints[j]` connects link `j` (child) to link `j−1` or the ground.
    pub joints: Vec<JointSpec>,
    pub gravity: Vec3,
    pub baumgarte: Option<Baumgarte>,
}

/// Sampled deformation and kinematic state of every link at one instant.
pub struct ChainSnapshot<'a> {
    chain: &'a Chain,
    kin: Vec<LinkKinematicState>,
    def: Vec<NodalDeformation>,
}

impl<'a> ChainSnapshot<'a> {
    pub fn view(&self, i: usize) -> LinkView<'_> {
        LinkView {
            model: &self.chain.links[i],
            state: &self.kin[i],
            def: &self.def[i],
        }
    }

    pub fn parent(&self, j: usize) -> Option<LinkView<'_>> {
        (j > 0).then(|| self.view(j - 1))
    }
}

/// Constraint monitors for one joint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointResiduals {
    pub velocity: Vec6,
    pub position: Vec3,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn modal_dofs(&self) -> Vec<usize> {
        self.links.iter().map(|l| l.dof()).collect()
    }

    pub fn snapshot(&self, states: &[LinkState]) -> Result<ChainSnapshot<'_>> {
        if states.len() != self.links.len() {
            return Err(Error::DimensionMismatch {
                what: "link states",
                expected: self.links.len(),
                got: states.len(),
            });
        }
        if self.joints.len() != self.links.len() {
            return Err(Error::DimensionMismatch {
                what: "joints",
                expected: self.links.len(),
                got: self.joints.len(),
            });
        }
        for (l, s) in self.links.iter().zip(states) {
            if s.eta.len() != l.dof() || s.eta_dot.len() != l.dof() {
                return Err(Error::DimensionMismatch {
                    what: "modal coordinates",
                    expected: l.dof(),
                    got: s.eta.len(),
                });
            }
        }
        Ok(ChainSnapshot {
            chain: self,
            kin: states
                .iter()
                .enumerate()
                .map(|(i, s)| s.kinematic(i))
                .collect(),
            def: self
                .links
                .iter()
                .zip(states)
                .map(|(l, s)| l.sample(&s.eta, &s.eta_dot))
                .collect(),
        })
    }

    pub fn joint_residuals(&self, states: &[LinkState]) -> Result<Vec<JointResiduals>> {
        let snap = self.snapshot(states)?;
        Ok((0..self.len())
            .map(|j| {
                let (p, c) = (snap.parent(j), snap.view(j));
                JointResiduals {
                    velocity: velocity_constraint_residual(&self.joints[j], p.as_ref(), &c),
                    position: position_residual(&self.joints[j], p.as_ref(), &c),
                }
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemMatrices {
    pub m_q: DMatrix<f64>,
    pub m_w: DMatrix<f64>,
    pub m_dphi: DMatrix<f64>,
    pub m_wphi: DMatrix<f64>,
    pub h_q: DVector<f64>,
    pub h_phi: DVector<f64>,
    pub f_q: DVector<f64>,
    /// Modal coordinate count per link.
    pub dofs: Vec<usize>,
}

impl SystemMatrices {
    pub fn links(&self) -> usize {
        self.dofs.len()
    }

    pub fn dim(&self) -> usize {
        self.m_q.nrows() + self.m_wphi.nrows()
    }

    pub fn m_sys(&self) -> DMatrix<f64> {
        let (nq, nm) = (self.m_q.nrows(), self.m_wphi.nrows());
        let mut m = DMatrix::zeros(nq + nm, nq + nm);
        m.view_mut((0, 0), (nq, nq)).copy_from(&self.m_q);
        m.view_mut((0, nq), (nq, nm)).copy_from(&self.m_w);
        m.view_mut((nq, 0), (nm, nq)).copy_from(&self.m_dphi);
        m.view_mut((nq, nq), (nm, nm)).copy_from(&self.m_wphi);
        m
    }

    /// `F_sys − H_sys`.
    pub fn rhs(&self) -> DVector<f64> {
        let nq = self.m_q.nrows();
        let mut b = DVector::zeros(self.dim());
        b.rows_mut(0, nq).copy_from(&(&self.f_q - &self.h_q));
        b.rows_mut(nq, self.h_phi.len()).copy_from(&(-&self.h_phi));
        b
    }
}

fn put6(m: &mut DMatrix<f64>, r: usize, c: usize, b: &Mat6) {
    m.view_mut((r, c), (6, 6)).copy_from(b);
}

fn put_vec6(v: &mut DVector<f64>, r: usize, b: &Vec6) {
    v.rows_mut(r, 6).copy_from(b);
}

/// Builds every block of the stacked system at one instant.
pub fn assemble(
    chain: &Chain,
    states: &[LinkState],
    wrenches: &[EndWrenches],
) -> Result<SystemMatrices> {
    let snap = chain.snapshot(states)?;
    let n = chain.len();
    if wrenches.len() != n {
        return Err(Error::DimensionMismatch {
            what: "end wrenches",
            expected: n,
            got: wrenches.len(),
        });
    }
    let dofs = chain.modal_dofs();
    let offs: Vec<usize> = dofs
        .iter()
        .scan(0, |acc, d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let (nq, nm) = (12 * n, dofs.iter().sum::<usize>());
    let mut m = SystemMatrices {
        m_q: DMatrix::zeros(nq, nq),
        m_w: DMatrix::zeros(nq, nm),
        m_dphi: DMatrix::zeros(nm, nq),
        m_wphi: DMatrix::zeros(nm, nm),
        h_q: DVector::zeros(nq),
        h_phi: DVector::zeros(nm),
        f_q: DVector::zeros(nq),
        dofs: dofs.clone(),
    };
    for i in 0..n {
        let link = &chain.links[i];
        let view = snap.view(i);
        let parent = snap.parent(i);
        let (cr, dr) = (12 * i, 12 * i + 6);

        // Joint i constraint rows.
        let rows =
            acceleration_constraint_rows(&chain.joints[i], parent.as_ref(), &view, chain.baumgarte);
        put6(&mut m.m_q, cr, cr, &rows.wrench);
        put6(&mut m.m_q, cr, dr, &rows.child);
        m.m_w
            .view_mut((cr, offs[i]), (6, dofs[i]))
            .copy_from(&rows.child_modal);
        if let (Some(pb), Some(pm)) = (rows.parent, rows.parent_modal) {
            put6(&mut m.m_q, cr, 12 * (i - 1) + 6, &pb);
            m.m_w
                .view_mut((cr, offs[i - 1]), (6, dofs[i - 1]))
                .copy_from(&pm);
        }
        put_vec6(&mut m.h_q, cr, &rows.bias);

        // Link i dynamics rows.
        let kin = &snap.kin[i];
        let d = &snap.def[i];
        put6(
            &mut m.m_q,
            dr,
            cr,
            &(-view.end_transform(End::Base).matrix().transpose()),
        );
        put6(
            &mut m.m_q,
            dr,
            dr,
            &mass_matrix(&link.params, &link.opts, kin, d),
        );
        if i + 1 < n {
            put6(
                &mut m.m_q,
                dr,
                12 * (i + 1),
                &view.end_transform(End::Tip).matrix().transpose(),
            );
        }
        m.m_w
            .view_mut((dr, offs[i]), (6, dofs[i]))
            .copy_from(&coupling_matrix(&link.params, &link.cache, kin, d));
        put_vec6(
            &mut m.h_q,
            dr,
            &bias_vector(&link.params, &link.opts, kin, d, &chain.gravity),
        );
        let tip_reaction = -wrenches[i].tip;
        let f = end_wrench_vector(
            &wrenches[i].base,
            &tip_reaction,
            &view.end_position(End::Base),
            &view.end_position(End::Tip),
        );
        put_vec6(&mut m.f_q, dr, &f);

        // Modal rows.
        let mr = link.modal_rows(kin, d, &states[i].eta, &chain.gravity);
        m.m_dphi
            .view_mut((offs[i], dr), (dofs[i], 6))
            .copy_from(&mr.m_d);
        m.m_wphi
            .view_mut((offs[i], offs[i]), (dofs[i], dofs[i]))
            .copy_from(&link.cache.gram);
        m.h_phi.rows_mut(offs[i], dofs[i]).copy_from(&mr.h);
        if link.opts.modal_end_loads {
            let inv = 1.0 / link.params.rho_a();
            let rt = states[i].rot.matrix().transpose();
            let (phi_b, phi_t) = (&link.cache.base[0], &link.cache.tip[0]);
            let mut col = m.m_dphi.view_mut((offs[i], cr), (dofs[i], 3));
            col -= inv * phi_b.transpose() * rt;
            if i + 1 < n {
                let mut col = m.m_dphi.view_mut((offs[i], 12 * (i + 1)), (dofs[i], 3));
                col += inv * phi_t.transpose() * rt;
            }
            let q = phi_b.transpose() * wrenches[i].base.force
                + phi_t.transpose() * wrenches[i].tip.force;
            let mut h = m.h_phi.rows_mut(offs[i], dofs[i]);
            h -= inv * q;
        }
    }
    let finite = |x: &[f64]| x.iter().all(|v| v.is_finite());
    if !(finite(m.m_q.as_slice())
        && finite(m.m_w.as_slice())
        && finite(m.m_dphi.as_slice())
        && finite(m.h_q.as_slice())
        && finite(m.h_phi.as_slice())
        && finite(m.f_q.as_slice()))
    {
        return Err(Error::NonFinite("system matrices".into()));
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemSolution {
    pub x: DVector<f64>,
    /// Twist rates `ż_i` (body coordinates).
    pub z_dot: Vec<Vec6>,
    /// Interaction wrenches `F_Jj`: applied by the parent (or ground) to the
    /// child, inertial coordinates about the joint point.
    pub wrenches: Vec<Vec6>,
    pub eta_ddot: Vec<DVector<f64>>,
    pub condition: f64,
    pub relative_residual: f64,
}

pub const MAX_CONDITION: f64 = 1e12;
pub const MAX_RELATIVE_RESIDUAL: f64 = 1e-9;

/// Splits a solution vector into twist rates, wrenches and modal accelerations.
pub fn extract(x: &DVector<f64>, dofs: &[usize]) -> (Vec<Vec6>, Vec<Vec6>, Vec<DVector<f64>>) {
    let n = dofs.len();
    let block = |k: usize| Vec6::from_iterator(x.rows(6 * k, 6).iter().copied());
    let wrenches = (0..n).map(|j| block(2 * j)).collect();
    let z_dot = (0..n).map(|i| block(2 * i + 1)).collect();
    let mut off = 12 * n;
    let eta_ddot = dofs
        .iter()
        .map(|&d| {
            let v = x.rows(off, d).into_owned();
            off += d;
            v
        })
        .collect();
    (z_dot, wrenches, eta_ddot)
}

pub fn solve(m: &SystemMatrices) -> Result<SystemSolution> {
    let a = m.m_sys();
    let b = m.rhs();
    let lu = DenseLu::new(&a)?;
    let condition = lu.condition_estimate();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    let x = lu.solve(&b).ok_or(Error::SingularSystem { condition })?;
    let scale = b.norm().max(f64::MIN_POSITIVE);
    let relative_residual = if b.norm() == 0.0 {
        (&a * &x).norm()
    } else {
        (&a * &x - &b).norm() / scale
    };
    if !(relative_residual <= MAX_RELATIVE_RESIDUAL) {
        return Err(Error::Residual {
            relative: relative_residual,
        });
    }
    let (z_dot, wrenches, eta_ddot) = extract(&x, &m.dofs);
    Ok(SystemSolution {
        x,
        z_dot,
        wrenches,
        eta_ddot,
        condition,
        relative_residual,
    })
}

/// Block-elimination diagnostics for the stacked system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchurReport {
    pub det_m_q: f64,
    pub det_schur: f64,
    pub det_m_sys: f64,
    pub condition_m_q: f64,
    pub condition_schur: f64,
    pub condition_m_sys: f64,
    /// Every `M_Dφ` column belonging to an interaction wrench is exactly zero.
    pub wrench_columns_zero: bool,
    pub singular: bool,
}

/// `S = M_Wφ − M_Dφ M_q⁻¹ M_W` and the determinant identity `det M_sys = det M_q · det S`.
pub fn schur_check(m: &SystemMatrices) -> SchurReport {
    let n = m.links();
    let wrench_columns_zero = (0..n).all(|j| m.m_dphi.columns(12 * j, 6).iter().all(|&v| v == 0.0));
    let full = DenseLu::new(&m.m_sys()).ok();
    let (det_m_sys, condition_m_sys) = full.as_ref().map_or((f64::NAN, f64::INFINITY), |lu| {
        (lu.determinant(), lu.condition_estimate())
    });
    let Ok(lu_q) = DenseLu::new(&m.m_q) else {
        return SchurReport {
            det_m_q: f64::NAN,
            det_schur: f64::NAN,
            det_m_sys,
            condition_m_q: f64::INFINITY,
            condition_schur: f64::INFINITY,
            condition_m_sys,
            wrench_columns_zero,
            singular: true,
        };
    };
    let det_m_q = lu_q.determinant();
    let condition_m_q = lu_q.condition_estimate();
    let mut s = m.m_wphi.clone();
    let mut schur_ok = condition_m_q <= MAX_CONDITION;
    if schur_ok {
        for c in 0..m.m_w.ncols() {
            match lu_q.solve(&m.m_w.column(c).into_owned()) {
                Some(y) => {
                    let col = &m.m_dphi * y;
                    let mut sc = s.column_mut(c);
                    sc -= col;
                }
                None => schur_ok = false,
            }
        }
    }
    let (det_schur, condition_schur) = if schur_ok {
        match DenseLu::new(&s) {
            Ok(lu) => (lu.determinant(), lu.condition_estimate()),
            Err(_) => (f64::NAN, f64::INFINITY),
        }
    } else {
        (f64::NAN, f64::INFINITY)
    };
    let singular = !(condition_m_q <= MAX_CONDITION
        && condition_schur <= MAX_CONDITION
        && condition_m_sys <= MAX_CONDITION);
    SchurReport {
        det_m_q,
        det_schur,
        det_m_sys,
        condition_m_q,
        condition_schur,
        condition_m_sys,
        wrench_columns_zero,
        singular,
    }
}
