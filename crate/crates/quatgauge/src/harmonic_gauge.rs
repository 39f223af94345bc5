//! Analytic-gauge construction by non-abelian parallel transport, and the
//! prepotential extraction and residual checks that come with it.
//!
//! For a core masked off the head coordinates (ADHM cores), the potential
//! vanishes identically along the fiber flows and along d/dz^{±1},
//! d/dz^{±2}.  The gauge map g is built by transporting the identity from
//! a reference point along a fixed tree of coordinate lines; in the
//! resulting gauge the components A'_0, A'_{-a}, A'_{+1}, A'_{+2} vanish
//! (to transport accuracy) and the surviving components A'_{--}, A'_{++}
//! are the prepotentials.

use crate::curvature::{curvature_from_core, DiffEngine};
use crate::error::{Error, Result};
use crate::gauge::{potential, Core};
use crate::geometry::{
    complex_direction, flow_step, gen_hmm, gen_hpp, FiberTag, HarmonicPoint, PmSign,
    TangentDirection,
};
use crate::quatlin::{exp2x2, CMatrix};
use crate::scalar::{cx, rl, Real, C};
use serde::{Deserialize, Serialize};

/// Integrate dg/ds = -A(gamma'(s)) g along one straight flow segment of
/// parameter length 1 with the given fixed step count (classical RK4).
fn transport_segment<T: Real>(
    core: &Core<T>,
    start: &HarmonicPoint<T>,
    dir: &TangentDirection<T>,
    steps: usize,
    eng: &DiffEngine<T>,
    g: CMatrix<T>,
) -> Result<CMatrix<T>> {
    if core.kills(dir) {
        return Ok(g);
    }
    let a_at = |s: T| -> Result<CMatrix<T>> {
        let p = flow_step(start, dir, s);
        Ok(potential(core, &p.base, dir, eng)?
            .value
            .scale(C::new(-T::one(), T::zero())))
    };
    let h = T::one() / rl(steps as f64);
    let hc = C::new(h, T::zero());
    let half = cx::<T>(0.5, 0.0);
    let sixth = C::new(h / rl::<T>(6.0), T::zero());
    let mut g = g;
    let mut b_start = a_at(T::zero())?;
    for i in 0..steps {
        let s = rl::<T>(i as f64) * h;
        let b_mid = a_at(s + h / rl(2.0))?;
        let b_end = a_at(s + h)?;
        let k1 = b_start.mul(&g);
        let k2 = b_mid.mul(&g.add(&k1.scale(hc * half)));
        let k3 = b_mid.mul(&g.add(&k2.scale(hc * half)));
        let k4 = b_end.mul(&g.add(&k3.scale(hc)));
        let incr = k1
            .add(&k2.scale(cx(2.0, 0.0)))
            .add(&k3.scale(cx(2.0, 0.0)))
            .add(&k4);
        g = g.add(&incr.scale(sixth));
        b_start = b_end;
    }
    Ok(g)
}

/// Parallel transport of `gauge_start` along a sequence of flow segments
/// (direction, duration), solving dg/dt = -A(gamma') g with RK4 steps of
/// size at most 1e-2.
pub fn parallel_transport<T: Real>(
    core: &Core<T>,
    start: &HarmonicPoint<T>,
    gauge_start: &CMatrix<T>,
    path: &[(TangentDirection<T>, T)],
    eng: &DiffEngine<T>,
) -> Result<CMatrix<T>> {
    let mut g = gauge_start.clone();
    let mut point = start.clone();
    for (dir, t) in path {
        let t_abs = t.abs().to_f64().unwrap_or(0.0);
        if t_abs == 0.0 {
            continue;
        }
        let steps = (t_abs / 1e-2).ceil().max(1.0) as usize;
        // reparametrize the segment to unit length: velocity t * dir
        if dir.fiber.is_some() {
            // tag flows cannot be rescaled by a complex factor; integrate
            // in the original parameter with position along the tag flow
            if core.kills(dir) {
                point = flow_step(&point, dir, *t);
                continue;
            }
            let h = *t / rl(steps as f64);
            let hc = C::new(h, T::zero());
            let half = cx::<T>(0.5, 0.0);
            let sixth = hc / cx(6.0, 0.0);
            let a_at = |s: T| -> Result<CMatrix<T>> {
                let p = flow_step(&point, dir, s);
                Ok(potential(core, &p.base, dir, eng)?
                    .value
                    .scale(C::new(-T::one(), T::zero())))
            };
            let mut b_start = a_at(T::zero())?;
            for i in 0..steps {
                let s = rl::<T>(i as f64) * h;
                let b_mid = a_at(s + h / rl(2.0))?;
                let b_end = a_at(s + h)?;
                let k1 = b_start.mul(&g);
                let k2 = b_mid.mul(&g.add(&k1.scale(hc * half)));
                let k3 = b_mid.mul(&g.add(&k2.scale(hc * half)));
                let k4 = b_end.mul(&g.add(&k3.scale(hc)));
                g = g.add(
                    &k1.add(&k2.scale(cx(2.0, 0.0)))
                        .add(&k3.scale(cx(2.0, 0.0)))
                        .add(&k4)
                        .scale(sixth),
                );
                b_start = b_end;
            }
            point = flow_step(&point, dir, *t);
        } else {
            let scaled = dir.scaled(C::new(*t, T::zero()));
            g = transport_segment(core, &point, &scaled, steps, eng, g)?;
            point = flow_step(&point, &scaled, T::one());
        }
    }
    Ok(g)
}

/// Norm of the deviation from the identity of the holonomy around a
/// rectangle of side `side` in the (z^{-a}, z^{-b}) plane at `hp`.
pub fn minus_plane_holonomy<T: Real>(
    core: &Core<T>,
    hp: &HarmonicPoint<T>,
    a: usize,
    b: usize,
    side: T,
    eng: &DiffEngine<T>,
) -> Result<T> {
    let da = complex_direction(a, PmSign::Minus, hp)?;
    let db = complex_direction(b, PmSign::Minus, hp)?;
    let path = vec![
        (da.clone(), side),
        (db.clone(), side),
        (da, -side),
        (db, -side),
    ];
    let g = parallel_transport(core, hp, &CMatrix::identity(core.m_eff), &path, eng)?;
    Ok(g.sub(&CMatrix::identity(core.m_eff)).frobenius_norm())
}

/// An analytic gauge anchored at a reference point.
///
/// The gauge value at a target point is obtained by transporting the
/// identity from the reference along the fixed tree: z^{+a} (a >= 3)
/// at the reference fiber, then the H--/H++ fiber factors, then z^{-a}
/// in `minus_order` and z^{+1}, z^{+2} at the leaf fiber, with the
/// H_0 factor last (it carries no transport).
#[derive(Clone)]
pub struct AnalyticGauge<T: Real> {
    pub reference: HarmonicPoint<T>,
    core: Core<T>,
    pub minus_order: Vec<usize>,
    pub steps_per_segment: usize,
    /// Step for finite differences of g when forming components.
    pub fd_step: T,
    /// Half-width of the coordinate cell around the reference.
    pub cell_half_width: T,
    eng: DiffEngine<T>,
}

impl<T: Real> std::fmt::Debug for AnalyticGauge<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnalyticGauge")
            .field("minus_order", &self.minus_order)
            .field("steps_per_segment", &self.steps_per_segment)
            .finish_non_exhaustive()
    }
}

/// Build the analytic gauge for a core, verifying first that the
/// minus-sector distribution is flat (holonomy check); a non-instanton
/// core fails with a Flatness error.
pub fn analytic_gauge<T: Real>(
    core: &Core<T>,
    reference: &HarmonicPoint<T>,
    eng: &DiffEngine<T>,
) -> Result<AnalyticGauge<T>> {
    let n = reference.n();
    let limit = rl::<T>(1e-5);
    if n >= 1 {
        let hol = minus_plane_holonomy(core, reference, 3, 4, rl(0.3), eng)?;
        if hol > limit {
            return Err(Error::Flatness {
                holonomy: hol.to_f64().unwrap_or(f64::NAN),
                limit: limit.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok(AnalyticGauge {
        reference: reference.clone(),
        core: core.clone(),
        minus_order: (1..=2 * (n + 1)).collect(),
        steps_per_segment: 40,
        fd_step: rl(1e-3),
        cell_half_width: rl(0.5),
        eng: *eng,
    })
}

/// The transport parameters of a target point relative to the reference.
struct CellParams<T: Real> {
    tau: C<T>,
    /// Leaf fiber matrix u_L = u_ref e^{beta H--} e^{gamma H++}.
    u_leaf: CMatrix<T>,
    /// Coefficients of the plus segments a = 3..2n+2, at the reference fiber.
    w_plus: Vec<C<T>>,
    /// Coefficients of the minus segments (in minus_order) at the leaf.
    w_minus: Vec<C<T>>,
    /// Coefficients of z^{+1}, z^{+2} at the leaf.
    w_head: [C<T>; 2],
}

impl<T: Real> AnalyticGauge<T> {
    fn params(&self, hp: &HarmonicPoint<T>) -> Result<CellParams<T>> {
        let n = self.reference.n();
        let len = 2 * (n + 1);
        let u_ref = &self.reference.u;
        let u_ref_inv = CMatrix::two_by_two(
            u_ref[(1, 1)],
            -u_ref[(0, 1)],
            -u_ref[(1, 0)],
            u_ref[(0, 0)],
        );
        let v = u_ref_inv.mul(&hp.u);
        let a = v[(0, 0)];
        if a.norm() < rl(1e-9) {
            return Err(Error::OutOfCell(
                "fiber factor leaves the H--/H++/H0 chart (u^1_+ -> 0)".into(),
            ));
        }
        let tau = a.ln();
        if tau.norm() > self.cell_half_width * rl(2.0) + rl(0.1) {
            return Err(Error::OutOfCell(format!(
                "|tau| = {:e} outside the fiber interval",
                tau.norm().to_f64().unwrap_or(f64::NAN)
            )));
        }
        let beta = v[(1, 0)] / a;
        let gamma = a * v[(0, 1)];
        let u_leaf = u_ref
            .mul(&exp2x2(&gen_hmm::<T>().scale(beta)))
            .mul(&exp2x2(&gen_hpp::<T>().scale(gamma)));
        let hp_ref_fiber = HarmonicPoint {
            base: self.reference.base.clone(),
            u: u_ref.clone(),
        };
        let hp_leaf = HarmonicPoint {
            base: self.reference.base.clone(),
            u: u_leaf.clone(),
        };
        // columns of the square displacement system
        let mut cols: Vec<(Vec<C<T>>, Vec<C<T>>)> = Vec::with_capacity(2 * len);
        for a_idx in 3..=len {
            cols.push(complex_direction(a_idx, PmSign::Plus, &hp_ref_fiber)?.internal());
        }
        for &a_idx in &self.minus_order {
            cols.push(complex_direction(a_idx, PmSign::Minus, &hp_leaf)?.internal());
        }
        cols.push(complex_direction(1, PmSign::Plus, &hp_leaf)?.internal());
        cols.push(complex_direction(2, PmSign::Plus, &hp_leaf)?.internal());
        let dim = 2 * len;
        let mat = CMatrix::from_fn(dim, dim, |r, c| {
            if r < len {
                cols[c].0[r]
            } else {
                cols[c].1[r - len]
            }
        });
        let mut rhs = CMatrix::zeros(dim, 1);
        for j in 0..len {
            rhs[(j, 0)] = hp.base.zeta[j] - self.reference.base.zeta[j];
            rhs[(len + j, 0)] = hp.base.zeta_t[j] - self.reference.base.zeta_t[j];
        }
        let w = mat.solve(&rhs)?;
        let lim = self.cell_half_width + rl(0.05);
        for r in 0..dim {
            let v = w[(r, 0)];
            if v.re.abs() > lim || v.im.abs() > lim {
                return Err(Error::OutOfCell(format!(
                    "transport coefficient {} = {:e} exceeds the cell",
                    r,
                    v.norm().to_f64().unwrap_or(f64::NAN)
                )));
            }
        }
        let n_plus = len - 2;
        let w_plus = (0..n_plus).map(|i| w[(i, 0)]).collect();
        let w_minus = (0..len).map(|i| w[(n_plus + i, 0)]).collect();
        let w_head = [w[(n_plus + len, 0)], w[(n_plus + len + 1, 0)]];
        Ok(CellParams {
            tau,
            u_leaf,
            w_plus,
            w_minus,
            w_head,
        })
    }

    /// The gauge value g at a target point in the cell.
    pub fn g_at(&self, hp: &HarmonicPoint<T>) -> Result<CMatrix<T>> {
        let n = self.reference.n();
        let len = 2 * (n + 1);
        let p = self.params(hp)?;
        let hp_ref_fiber = self.reference.clone();
        let mut g = CMatrix::identity(self.core.m_eff);
        let mut point = hp_ref_fiber.clone();
        // plus segments at the reference fiber
        for (i, a_idx) in (3..=len).enumerate() {
            let w = p.w_plus[i];
            if w.norm_sqr() == T::zero() {
                continue;
            }
            let dir = complex_direction(a_idx, PmSign::Plus, &hp_ref_fiber)?.scaled(w);
            g = transport_segment(&self.core, &point, &dir, self.steps_per_segment, &self.eng, g)?;
            point = flow_step(&point, &dir, T::one());
        }
        // fiber factors: no transport for u-independent cores
        point.u = p.u_leaf.clone();
        let hp_leaf = HarmonicPoint {
            base: self.reference.base.clone(),
            u: p.u_leaf.clone(),
        };
        // minus segments in the fixed order, then z^{+1}, z^{+2}
        for (i, &a_idx) in self.minus_order.iter().enumerate() {
            let w = p.w_minus[i];
            if w.norm_sqr() == T::zero() {
                continue;
            }
            let dir = complex_direction(a_idx, PmSign::Minus, &hp_leaf)?.scaled(w);
            g = transport_segment(&self.core, &point, &dir, self.steps_per_segment, &self.eng, g)?;
            point = flow_step(&point, &dir, T::one());
        }
        for (i, a_idx) in [1usize, 2].into_iter().enumerate() {
            let w = p.w_head[i];
            if w.norm_sqr() == T::zero() {
                continue;
            }
            let dir = complex_direction(a_idx, PmSign::Plus, &hp_leaf)?.scaled(w);
            g = transport_segment(&self.core, &point, &dir, self.steps_per_segment, &self.eng, g)?;
            point = flow_step(&point, &dir, T::one());
        }
        // the trailing H_0 factor carries no transport
        let _ = p.tau;
        Ok(g)
    }

    /// Transformed potential component A'(X) = g^{-1} (A(X) g + D_X g).
    pub fn component(&self, hp: &HarmonicPoint<T>, dir: &TangentDirection<T>) -> Result<CMatrix<T>> {
        let gv = self.g_at(hp)?;
        let ginv = gv.inverse().map_err(|_| Error::SingularGauge)?;
        let a_val = potential(&self.core, &hp.base, dir, &self.eng)?.value;
        let h = self.fd_step;
        let gp = self.g_at(&flow_step(hp, dir, h))?;
        let gm = self.g_at(&flow_step(hp, dir, -h))?;
        let dg = gp
            .sub(&gm)
            .scale(C::new(T::one() / (rl::<T>(2.0) * h), T::zero()));
        Ok(ginv.mul(&a_val.mul(&gv).add(&dg)))
    }
}

/// The prepotential A_{--} in the analytic gauge.
pub fn prepotential_minus<T: Real>(ag: &AnalyticGauge<T>, hp: &HarmonicPoint<T>) -> Result<CMatrix<T>> {
    ag.component(hp, &TangentDirection::from_tag(hp.n(), FiberTag::Hmm))
}

/// A point sample of the prepotential pair and the derived components.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrepotentialSample<T: Real> {
    pub point: HarmonicPoint<T>,
    pub a_mm: CMatrix<T>,
    pub a_pp: CMatrix<T>,
    /// A_{+a} = -dA_{++}/dz^{-a} for a = 3..2n+2.
    pub a_pa: Vec<CMatrix<T>>,
}

/// Central difference of a matrix-valued field along a frozen direction.
pub fn field_derivative<T: Real>(
    f: impl Fn(&HarmonicPoint<T>) -> Result<CMatrix<T>>,
    hp: &HarmonicPoint<T>,
    dir: &TangentDirection<T>,
    h: T,
) -> Result<CMatrix<T>> {
    let fp = f(&flow_step(hp, dir, h))?;
    let fm = f(&flow_step(hp, dir, -h))?;
    Ok(fp
        .sub(&fm)
        .scale(C::new(T::one() / (rl::<T>(2.0) * h), T::zero())))
}

/// The second prepotential A_{++} together with A_{+a} = -dA_{++}/dz^{-a}.
pub fn prepotential_plus<T: Real>(
    ag: &AnalyticGauge<T>,
    hp: &HarmonicPoint<T>,
) -> Result<PrepotentialSample<T>> {
    let n = hp.n();
    let a_mm = prepotential_minus(ag, hp)?;
    let a_pp = ag.component(hp, &TangentDirection::from_tag(n, FiberTag::Hpp))?;
    let h = ag.fd_step;
    let mut a_pa = Vec::new();
    for a_idx in 3..=2 * (n + 1) {
        let dir = complex_direction(a_idx, PmSign::Minus, hp)?;
        let d = field_derivative(
            |q| ag.component(q, &TangentDirection::from_tag(n, FiberTag::Hpp)),
            hp,
            &dir,
            h,
        )?;
        a_pa.push(d.scale(C::new(-T::one(), T::zero())));
    }
    Ok(PrepotentialSample {
        point: hp.clone(),
        a_mm,
        a_pp,
        a_pa,
    })
}

/// Residual block accompanying a serialized prepotential sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrepotentialResiduals {
    /// H_0 . A_{--} + 2 A_{--}.
    pub homogeneity_minus: f64,
    /// H_0 . A_{++} - 2 A_{++}.
    pub homogeneity_plus: f64,
    /// Characterising system residual.
    pub characterising: f64,
}

/// A prepotential sample paired with its residual block, the JSON wire
/// form used by CLI reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrepotentialReport<T: Real> {
    pub sample: PrepotentialSample<T>,
    pub residuals: PrepotentialResiduals,
}

/// Evaluate the prepotentials at a point together with the residuals of
/// the laws they satisfy.
pub fn prepotential_report<T: Real>(
    ag: &AnalyticGauge<T>,
    hp: &HarmonicPoint<T>,
) -> Result<PrepotentialReport<T>> {
    let n = hp.n();
    let h = ag.fd_step;
    let sample = prepotential_plus(ag, hp)?;
    let amm_field = |q: &HarmonicPoint<T>| prepotential_minus(ag, q);
    let app_field =
        |q: &HarmonicPoint<T>| ag.component(q, &TangentDirection::from_tag(n, FiberTag::Hpp));
    let h0_amm = field_derivative(amm_field, hp, &TangentDirection::from_tag(n, FiberTag::H0), h)?;
    let homogeneity_minus = h0_amm
        .add(&sample.a_mm.scale(cx(2.0, 0.0)))
        .max_abs()
        .to_f64()
        .unwrap_or(f64::NAN);
    let h0_app = field_derivative(app_field, hp, &TangentDirection::from_tag(n, FiberTag::H0), h)?;
    let homogeneity_plus = h0_app
        .sub(&sample.a_pp.scale(cx(2.0, 0.0)))
        .max_abs()
        .to_f64()
        .unwrap_or(f64::NAN);
    let characterising = check_characterising(ag, hp)?.to_f64().unwrap_or(f64::NAN);
    Ok(PrepotentialReport {
        sample,
        residuals: PrepotentialResiduals {
            homogeneity_minus,
            homogeneity_plus,
            characterising,
        },
    })
}

/// Residual of the characterising system of the Leznov field B_{++} = A_{++}:
/// H-- . B_{++} = H_{++} . A_{--} - [A_{--}, B_{++}] and H_0 . B_{++} = 2 B_{++}.
pub fn check_characterising<T: Real>(ag: &AnalyticGauge<T>, hp: &HarmonicPoint<T>) -> Result<T> {
    let n = hp.n();
    // the outer differences sit on top of the transport finite differences;
    // a larger step keeps the stacked noise amplification in check
    let h = ag.fd_step * rl::<T>(4.0);
    let a_mm = prepotential_minus(ag, hp)?;
    let b_pp = ag.component(hp, &TangentDirection::from_tag(n, FiberTag::Hpp))?;
    let app_field = |q: &HarmonicPoint<T>| ag.component(q, &TangentDirection::from_tag(n, FiberTag::Hpp));
    let amm_field = |q: &HarmonicPoint<T>| prepotential_minus(ag, q);
    let hmm_b = field_derivative(app_field, hp, &TangentDirection::from_tag(n, FiberTag::Hmm), h)?;
    let hpp_a = field_derivative(amm_field, hp, &TangentDirection::from_tag(n, FiberTag::Hpp), h)?;
    let r1 = hmm_b
        .sub(&hpp_a.sub(&a_mm.commutator(&b_pp)))
        .max_abs();
    let h0_b = field_derivative(app_field, hp, &TangentDirection::from_tag(n, FiberTag::H0), h)?;
    let r2 = h0_b.sub(&b_pp.scale(cx(2.0, 0.0))).max_abs();
    Ok(r1.max(r2))
}

/// Residual of the curvature relation F'(d/dz^{+a}, d/dz^{-b}) =
/// d^2 A_{++} / dz^{-a} dz^{-b}, compared through the gauge-transformed
/// core curvature; returns the max relative residual over a, b >= 3.
pub fn check_curvature_relation<T: Real>(
    ag: &AnalyticGauge<T>,
    hp: &HarmonicPoint<T>,
) -> Result<T> {
    let n = hp.n();
    // stacked second differences: enlarge the step to suppress noise
    let h = ag.fd_step * rl::<T>(4.0);
    let gv = ag.g_at(hp)?;
    let ginv = gv.inverse().map_err(|_| Error::SingularGauge)?;
    let app_field = |q: &HarmonicPoint<T>| ag.component(q, &TangentDirection::from_tag(n, FiberTag::Hpp));
    let mut worst = T::zero();
    for a_idx in 3..=2 * (n + 1) {
        for b_idx in 3..=2 * (n + 1) {
            let da = complex_direction(a_idx, PmSign::Plus, hp)?;
            let db = complex_direction(b_idx, PmSign::Minus, hp)?;
            let f = curvature_from_core(&ag.core, hp, &da, &db, &ag.eng)?;
            let f_prime = ginv.mul(&f).mul(&gv);
            // stacked outer differences of A_{++}
            let da_minus = complex_direction(a_idx, PmSign::Minus, hp)?;
            let inner = |q: &HarmonicPoint<T>| {
                let d = complex_direction(b_idx, PmSign::Minus, q)?;
                field_derivative(app_field, q, &d, h)
            };
            let second = field_derivative(inner, hp, &da_minus, h)?;
            let denom = T::one().max(f_prime.max_abs());
            worst = worst.max(f_prime.sub(&second).max_abs() / denom);
        }
    }
    Ok(worst)
}

/// Check that two prepotential fields are related by an admissible gauge
/// parameter ghat: A'_{--} = e^{-ghat} (A_{--} + H-- . ghat) e^{ghat},
/// after verifying the constraints H_0 ghat = 0 and vanishing z^{-a},
/// z^{+1}, z^{+2} derivatives of ghat.
pub fn check_equivalence<T: Real>(
    a_mm_1: impl Fn(&HarmonicPoint<T>) -> Result<CMatrix<T>>,
    a_mm_2: impl Fn(&HarmonicPoint<T>) -> Result<CMatrix<T>>,
    ghat: impl Fn(&HarmonicPoint<T>) -> CMatrix<T>,
    points: &[HarmonicPoint<T>],
    tol: T,
) -> Result<bool> {
    let h = rl::<T>(1e-4);
    let ghat_ok = |q: &HarmonicPoint<T>| -> Result<CMatrix<T>> { Ok(ghat(q)) };
    for hp in points {
        let n = hp.n();
        // constraint checks on ghat
        let mut constraint = field_derivative(ghat_ok, hp, &TangentDirection::from_tag(n, FiberTag::H0), h)?
            .max_abs();
        for a_idx in 1..=2 * (n + 1) {
            let d = complex_direction(a_idx, PmSign::Minus, hp)?;
            constraint = constraint.max(field_derivative(ghat_ok, hp, &d, h)?.max_abs());
        }
        for a_idx in 1..=2usize {
            let d = complex_direction(a_idx, PmSign::Plus, hp)?;
            constraint = constraint.max(field_derivative(ghat_ok, hp, &d, h)?.max_abs());
        }
        if constraint > tol {
            return Err(Error::Constraint(format!(
                "ghat violates its admissibility constraints (residual {:e})",
                constraint.to_f64().unwrap_or(f64::NAN)
            )));
        }
    }
    for hp in points {
        let n = hp.n();
        let gh = ghat(hp);
        let e_plus = gh.expm();
        let e_minus = gh.scale(C::new(-T::one(), T::zero())).expm();
        let hmm_gh = field_derivative(ghat_ok, hp, &TangentDirection::from_tag(n, FiberTag::Hmm), h)?;
        let want = e_minus.mul(&a_mm_1(hp)?.add(&hmm_gh)).mul(&e_plus);
        let got = a_mm_2(hp)?;
        if got.sub(&want).max_abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adhm::{core_from_adhm, one_instanton};
    use crate::geometry::chart_from_quaternions;
    use crate::quatlin::Quaternion;

    type Q = Quaternion<f64>;

    fn reference(n: usize) -> HarmonicPoint<f64> {
        let mut q = vec![Q::one()];
        for i in 0..n {
            q.push(Q::new(0.1 + 0.05 * i as f64, 0.2, -0.1, 0.15));
        }
        HarmonicPoint::over(chart_from_quaternions(&q).unwrap())
    }

    #[test]
    fn transport_zero_potential() {
        let core = crate::gauge::Core::constant(1, CMatrix::<f64>::zeros(2, 2));
        let eng = DiffEngine::default();
        let hp = reference(1);
        let d = complex_direction(3, PmSign::Minus, &hp).unwrap();
        let g0 = CMatrix::from_fn(2, 2, |i, j| C::new(i as f64 + 1.0, j as f64));
        let g = parallel_transport(&core, &hp, &g0, &[(d, 0.4)], &eng).unwrap();
        assert!(g.sub(&g0).max_abs() == 0.0);
    }

    #[test]
    fn transport_constant_potential() {
        // a core with constant nonzero A along one direction:
        // lambda = L * zeta_2 gives A(d/dzeta_2) constant at zeta = 0 lines?
        // Use the closed-form oracle instead: transport along a segment
        // where A is constant because we choose the field by hand.
        // Here: check against exp by transporting a a straight segment of
        // the 1-instanton with very short length (first-order agreement).
        let data = one_instanton::<f64>(1, &[Q::zero()], 1.0).unwrap();
        let core = core_from_adhm(&data);
        let eng = DiffEngine::default();
        let hp = reference(1);
        let d = complex_direction(3, PmSign::Minus, &hp).unwrap();
        let t = 1e-3;
        let g = parallel_transport(&core, &hp, &CMatrix::identity(2), &[(d.clone(), t)], &eng)
            .unwrap();
        let a_val = potential(&core, &hp.base, &d, &eng).unwrap().value;
        let approx = CMatrix::identity(2).sub(&a_val.scale(C::new(t, 0.0)));
        assert!(g.sub(&approx).max_abs() < 1e-5);
    }

    #[test]
    fn holonomy_small_for_instanton() {
        let data = one_instanton::<f64>(1, &[Q::zero()], 1.0).unwrap();
        let core = core_from_adhm(&data);
        let eng = DiffEngine::default();
        let hol = minus_plane_holonomy(&core, &reference(1), 3, 4, 0.3, &eng).unwrap();
        assert!(hol < 1e-6, "holonomy {hol:e}");
    }

    #[test]
    fn gauge_identity_at_reference() {
        let data = one_instanton::<f64>(1, &[Q::zero()], 1.0).unwrap();
        let core = core_from_adhm(&data);
        let eng = DiffEngine::default();
        let hp = reference(1);
        let ag = analytic_gauge(&core, &hp, &eng).unwrap();
        let g = ag.g_at(&hp).unwrap();
        assert!(g.sub(&CMatrix::identity(2)).max_abs() < 1e-12);
    }

    #[test]
    fn flat_core_gauge_is_identity() {
        let core = crate::gauge::Core::constant(1, CMatrix::<f64>::zeros(2, 2));
        let eng = DiffEngine::default();
        let hp = reference(1);
        let ag = analytic_gauge(&core, &hp, &eng).unwrap();
        let mut target = hp.clone();
        target.base.zeta[2] = target.base.zeta[2] + C::new(0.2, -0.1);
        target.base.zeta_t[2] = target.base.zeta_t[2] + C::new(0.2, 0.1);
        let g = ag.g_at(&target).unwrap();
        assert!(g.sub(&CMatrix::identity(2)).max_abs() < 1e-13);
        assert!(prepotential_minus(&ag, &target).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn vanishing_components_on_cell_point() {
        let data = one_instanton::<f64>(1, &[Q::zero()], 1.0).unwrap();
        let core = core_from_adhm(&data);
        let eng = DiffEngine::default();
        let hp = reference(1);
        let ag = analytic_gauge(&core, &hp, &eng).unwrap();
        let mut target = hp.clone();
        target.base.zeta[2] = target.base.zeta[2] + C::new(0.15, -0.1);
        target.base.zeta_t[2] = target.base.zeta_t[2] + C::new(0.15, 0.1);
        target.base.zeta[3] = target.base.zeta[3] + C::new(-0.05, 0.2);
        target.base.zeta_t[3] = target.base.zeta_t[3] + C::new(-0.05, -0.2);
        // A'_0
        let a0 = ag
            .component(&target, &TangentDirection::from_tag(1, FiberTag::H0))
            .unwrap();
        assert!(a0.max_abs() < 5e-6, "A'_0 = {:e}", a0.max_abs());
        // A'_{-a}
        for a_idx in 1..=4usize {
            let d = complex_direction(a_idx, PmSign::Minus, &target).unwrap();
            let am = ag.component(&target, &d).unwrap();
            assert!(am.max_abs() < 5e-6, "A'_-{a_idx} = {:e}", am.max_abs());
        }
        // A'_{+1}, A'_{+2}
        for a_idx in 1..=2usize {
            let d = complex_direction(a_idx, PmSign::Plus, &target).unwrap();
            let ap = ag.component(&target, &d).unwrap();
            assert!(ap.max_abs() < 5e-6, "A'_+{a_idx} = {:e}", ap.max_abs());
        }
    }

    #[test]
    fn flatness_error_for_perturbed_data() {
        let data = crate::adhm::two_column_example::<f64>(1, Q::i()).unwrap();
        let bad = crate::adhm::perturb(&data, 0.3, 7);
        let core = core_from_adhm(&bad);
        let eng = DiffEngine::default();
        match analytic_gauge(&core, &reference(1), &eng) {
            Err(Error::Flatness { .. }) => {}
            other => panic!("expected Flatness error, got {other:?}"),
        }
    }

    #[test]
    fn equivalence_trivial_ghat() {
        let data = one_instanton::<f64>(1, &[Q::zero()], 1.0).unwrap();
        let core = core_from_adhm(&data);
        let eng = DiffEngine::default();
        let hp = reference(1);
        let ag = analytic_gauge(&core, &hp, &eng).unwrap();
        let mut target = hp.clone();
        target.base.zeta[2] = target.base.zeta[2] + C::new(0.1, 0.05);
        target.base.zeta_t[2] = target.base.zeta_t[2] + C::new(0.1, -0.05);
        let f1 = |q: &HarmonicPoint<f64>| prepotential_minus(&ag, q);
        let f2 = |q: &HarmonicPoint<f64>| prepotential_minus(&ag, q);
        let zero_ghat = |_: &HarmonicPoint<f64>| CMatrix::<f64>::zeros(2, 2);
        let pts = vec![target];
        assert!(check_equivalence(f1, f2, zero_ghat, &pts, 1e-6).unwrap());
    }

    #[test]
    fn equivalence_rejects_inadmissible_ghat() {
        let hp = reference(1);
        let zero = |_: &HarmonicPoint<f64>| Ok(CMatrix::<f64>::zeros(2, 2));
        // ghat depending on z^{-3} violates the constraints
        let bad_ghat = |q: &HarmonicPoint<f64>| {
            let z = crate::geometry::z_pm(q)[(1, 2)];
            CMatrix::identity(2).scale(z)
        };
        let pts = vec![hp];
        assert!(matches!(
            check_equivalence(zero, zero, bad_ghat, &pts, 1e-6),
            Err(Error::Constraint(_))
        ));
    }
}
