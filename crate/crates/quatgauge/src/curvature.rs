//! Numerical differentiation and the two independent curvature paths.
//!
//! Curvature is computed once from the potential,
//! F(X,Y) = X.A(Y) - Y.A(X) + [A(X), A(Y)] - A([X,Y]),
//! and once directly from the core through the closed formula
//! F = R (D_X nu G D_Y nu^dagger - D_Y nu G D_X nu^dagger) R with
//! G = (I + nu^dagger nu)^{-1}; the two serve as mutual oracles.
//! The decomposition into F^(1) + F^(2) and the instanton residual
//! ||F^(2)|| / ||F|| live here as well.

use crate::error::{Error, Result};
use crate::gauge::{potential, Core};
use crate::geometry::{
    bracket_rhs, coordinate_direction, flow_step, ConePoint, HarmonicPoint, TangentDirection,
};
use crate::quatlin::CMatrix;
use crate::scalar::{rl, Real, C};
use serde::{Deserialize, Serialize};

/// Finite-difference configuration: central differences with an optional
/// Richardson extrapolation level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffEngine<T: Real> {
    pub step: T,
    pub richardson: bool,
}

impl<T: Real> Default for DiffEngine<T> {
    fn default() -> Self {
        DiffEngine {
            step: rl(1e-4),
            richardson: true,
        }
    }
}

impl<T: Real> DiffEngine<T> {
    pub fn with_step(step: T) -> Self {
        DiffEngine {
            step,
            richardson: true,
        }
    }

    /// Central difference of a matrix field along `dir` at `hp`.
    pub fn directional_derivative<F>(
        &self,
        field: F,
        hp: &HarmonicPoint<T>,
        dir: &TangentDirection<T>,
    ) -> Result<CMatrix<T>>
    where
        F: Fn(&HarmonicPoint<T>) -> CMatrix<T>,
    {
        if self.step < rl(1e-12) {
            return Err(Error::StepUnderflow(self.step.to_f64().unwrap_or(0.0)));
        }
        let central = |h: T| -> CMatrix<T> {
            let fp = field(&flow_step(hp, dir, h));
            let fm = field(&flow_step(hp, dir, -h));
            fp.sub(&fm)
                .scale(C::new(T::one() / (rl::<T>(2.0) * h), T::zero()))
        };
        let d1 = central(self.step);
        if !self.richardson {
            return Ok(d1);
        }
        let d2 = central(self.step / rl(2.0));
        // (4 D(h/2) - D(h)) / 3
        Ok(d2
            .scale(C::new(rl(4.0), T::zero()))
            .sub(&d1)
            .scale(C::new(T::one() / rl(3.0), T::zero())))
    }
}

/// The Lie bracket of two directions as data for the A([X,Y]) term.
enum DirBracket<T: Real> {
    Zero,
    Combo(Vec<(C<T>, crate::geometry::FiberTag)>),
    Dir(TangentDirection<T>),
}

fn direction_bracket<T: Real>(
    x: &TangentDirection<T>,
    y: &TangentDirection<T>,
    n: usize,
) -> Result<DirBracket<T>> {
    let x_has_coeffs = x.coeffs.iter().any(|c| c.norm_sqr() != T::zero());
    let y_has_coeffs = y.coeffs.iter().any(|c| c.norm_sqr() != T::zero());
    match (x.fiber, y.fiber) {
        (None, None) => Ok(DirBracket::Zero),
        (Some(tx), Some(ty)) => {
            if x_has_coeffs || y_has_coeffs {
                return Err(Error::Constraint(
                    "mixed coefficient+tag directions have no tabulated bracket".into(),
                ));
            }
            Ok(DirBracket::Combo(bracket_rhs::<T>(tx, ty)))
        }
        // [G, V] = -(M v) for a linear field G and constant field V
        (Some(tag), None) => Ok(linear_constant_bracket(tag, y, n, true)),
        (None, Some(tag)) => Ok(linear_constant_bracket(tag, x, n, false)),
    }
}

fn linear_constant_bracket<T: Real>(
    tag: crate::geometry::FiberTag,
    v: &TangentDirection<T>,
    n: usize,
    tag_first: bool,
) -> DirBracket<T> {
    use crate::geometry::FiberTag::*;
    // H-tags are pure fiber flows and commute with base translations
    let m: Option<[[C<T>; 2]; 2]> = match tag {
        H0 | Hpp | Hmm => None,
        GD => Some([
            [C::new(T::one(), T::zero()), C::new(T::zero(), T::zero())],
            [C::new(T::zero(), T::zero()), C::new(T::one(), T::zero())],
        ]),
        G0 => Some([
            [C::new(T::zero(), T::one()), C::new(T::zero(), T::zero())],
            [C::new(T::zero(), T::zero()), C::new(T::zero(), -T::one())],
        ]),
        G1 => Some([
            [C::new(T::zero(), T::zero()), C::new(-T::one(), T::zero())],
            [C::new(T::one(), T::zero()), C::new(T::zero(), T::zero())],
        ]),
        G2 => Some([
            [C::new(T::zero(), T::zero()), C::new(T::zero(), T::one())],
            [C::new(T::zero(), T::one()), C::new(T::zero(), T::zero())],
        ]),
    };
    let Some(m) = m else {
        return DirBracket::Zero;
    };
    let (vz, vzt) = v.internal();
    let len = 2 * (n + 1);
    let zero = C::new(T::zero(), T::zero());
    let mut dz = vec![zero; len];
    let mut dzt = vec![zero; len];
    // [G, V] = -(M v); [V, G] = +(M v); the conjugate half uses conj(M)
    let s = if tag_first { -T::one() } else { T::one() };
    let sc = C::new(s, T::zero());
    dz[0] = sc * (m[0][0] * vz[0] + m[0][1] * vz[1]);
    dz[1] = sc * (m[1][0] * vz[0] + m[1][1] * vz[1]);
    dzt[0] = sc * (m[0][0].conj() * vzt[0] + m[0][1].conj() * vzt[1]);
    dzt[1] = sc * (m[1][0].conj() * vzt[0] + m[1][1].conj() * vzt[1]);
    DirBracket::Dir(TangentDirection::from_internal(&dz, &dzt))
}

/// Curvature of an arbitrary potential field by the structure equation
/// F(X,Y) = X.A(Y) - Y.A(X) + [A(X), A(Y)] - A([X,Y]).
pub fn curvature_of_field<T: Real, A>(
    a_of: A,
    hp: &HarmonicPoint<T>,
    dir_x: &TangentDirection<T>,
    dir_y: &TangentDirection<T>,
    eng: &DiffEngine<T>,
) -> Result<CMatrix<T>>
where
    A: Fn(&HarmonicPoint<T>, &TangentDirection<T>) -> Result<CMatrix<T>>,
{
    let n = hp.n();
    let ax = a_of(hp, dir_x)?;
    let ay = a_of(hp, dir_y)?;
    let x_of_ay = eng.directional_derivative(
        |q: &HarmonicPoint<T>| a_of(q, dir_y).expect("potential evaluation inside derivative"),
        hp,
        dir_x,
    )?;
    let y_of_ax = eng.directional_derivative(
        |q: &HarmonicPoint<T>| a_of(q, dir_x).expect("potential evaluation inside derivative"),
        hp,
        dir_y,
    )?;
    let mut f = x_of_ay.sub(&y_of_ax).add(&ax.commutator(&ay));
    match direction_bracket(dir_x, dir_y, n)? {
        DirBracket::Zero => {}
        DirBracket::Combo(combo) => {
            for (c, tag) in combo {
                let d = TangentDirection::from_tag(n, tag);
                f = f.sub(&a_of(hp, &d)?.scale(c));
            }
        }
        DirBracket::Dir(d) => {
            f = f.sub(&a_of(hp, &d)?);
        }
    }
    Ok(f)
}

/// Curvature from the canonical potential of a core.
pub fn curvature_from_potential<T: Real>(
    core: &Core<T>,
    hp: &HarmonicPoint<T>,
    dir_x: &TangentDirection<T>,
    dir_y: &TangentDirection<T>,
    eng: &DiffEngine<T>,
) -> Result<CMatrix<T>> {
    curvature_of_field(
        |q: &HarmonicPoint<T>, d: &TangentDirection<T>| {
            potential(core, &q.base, d, eng).map(|p| p.value)
        },
        hp,
        dir_x,
        dir_y,
        eng,
    )
}

/// Derivatives of nu and its conjugate extension along a direction.
fn core_derivatives<T: Real>(
    core: &Core<T>,
    hp: &HarmonicPoint<T>,
    dir: &TangentDirection<T>,
    eng: &DiffEngine<T>,
) -> Result<(CMatrix<T>, CMatrix<T>)> {
    if core.kills(dir) {
        return Ok((
            CMatrix::zeros(core.m_eff, core.k_eff),
            CMatrix::zeros(core.k_eff, core.m_eff),
        ));
    }
    let dnu = eng.directional_derivative(|q: &HarmonicPoint<T>| core.nu(&q.base), hp, dir)?;
    let dnud = eng.directional_derivative(|q: &HarmonicPoint<T>| core.nu_dag(&q.base), hp, dir)?;
    Ok((dnu, dnud))
}

fn core_curvature_from_derivs<T: Real>(
    r: &CMatrix<T>,
    g: &CMatrix<T>,
    dx: &(CMatrix<T>, CMatrix<T>),
    dy: &(CMatrix<T>, CMatrix<T>),
) -> CMatrix<T> {
    let b = dx.0.mul(g).mul(&dy.1).sub(&dy.0.mul(g).mul(&dx.1));
    r.mul(&b).mul(r)
}

/// Curvature directly from the core (the closed Stiefel formula).
pub fn curvature_from_core<T: Real>(
    core: &Core<T>,
    hp: &HarmonicPoint<T>,
    dir_x: &TangentDirection<T>,
    dir_y: &TangentDirection<T>,
    eng: &DiffEngine<T>,
) -> Result<CMatrix<T>> {
    let p = &hp.base;
    let r = core.r_factor(p)?;
    let g = CMatrix::identity(core.k_eff)
        .add(&core.nu_dag(p).mul(&core.nu(p)))
        .inverse()?;
    let dx = core_derivatives(core, hp, dir_x, eng)?;
    let dy = core_derivatives(core, hp, dir_y, eng)?;
    Ok(core_curvature_from_derivs(&r, &g, &dx, &dy))
}

/// Curvature evaluated on the full complexified coordinate frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureSample<T: Real> {
    pub point: HarmonicPoint<T>,
    /// F[(i,a)][(j,b)], i,j in {0,1} for rows 1,2 and a,b in 0..2n+2.
    pub f: Vec<Vec<CMatrix<T>>>,
    pub cols: usize,
    /// Symmetric S[a][b]; filled by [`decompose`].
    pub s: Option<Vec<Vec<CMatrix<T>>>>,
    pub f_norm: T,
    pub f2_norm: Option<T>,
}

impl<T: Real> CurvatureSample<T> {
    pub fn idx(&self, i: usize, a: usize) -> usize {
        i * self.cols + a
    }

    /// F with 1-based paper indices (i, a; j, b).
    pub fn f_at(&self, i: usize, a: usize, j: usize, b: usize) -> &CMatrix<T> {
        &self.f[(i - 1) * self.cols + (a - 1)][(j - 1) * self.cols + (b - 1)]
    }
}

/// Evaluate the curvature of a core on all pairs of coordinate directions
/// d/dz^{ia}, caching the first derivatives of nu per direction.
pub fn curvature_components<T: Real>(
    core: &Core<T>,
    hp: &HarmonicPoint<T>,
    eng: &DiffEngine<T>,
) -> Result<CurvatureSample<T>> {
    let n = hp.n();
    let cols = 2 * (n + 1);
    let p = &hp.base;
    let r = core.r_factor(p)?;
    let g = CMatrix::identity(core.k_eff)
        .add(&core.nu_dag(p).mul(&core.nu(p)))
        .inverse()?;
    let mut derivs = Vec::with_capacity(2 * cols);
    for i in 1..=2usize {
        for a in 1..=cols {
            let d = coordinate_direction::<T>(n, i, a)?;
            derivs.push(core_derivatives(core, hp, &d, eng)?);
        }
    }
    let dim = 2 * cols;
    let mut f = vec![vec![CMatrix::zeros(core.m_eff, core.m_eff); dim]; dim];
    let mut norm_sq = T::zero();
    for p_idx in 0..dim {
        for q_idx in p_idx + 1..dim {
            let val = core_curvature_from_derivs(&r, &g, &derivs[p_idx], &derivs[q_idx]);
            let nrm = val.frobenius_norm();
            norm_sq += nrm * nrm + nrm * nrm;
            f[q_idx][p_idx] = val.scale(C::new(-T::one(), T::zero()));
            f[p_idx][q_idx] = val;
        }
    }
    Ok(CurvatureSample {
        point: hp.clone(),
        f,
        cols,
        s: None,
        f_norm: norm_sq.sqrt(),
        f2_norm: None,
    })
}

/// Split F into F^(1) = eps (x) S plus the remainder F^(2) and record
/// ||F^(2)||.
pub fn decompose<T: Real>(sample: &mut CurvatureSample<T>) -> Result<()> {
    let cols = sample.cols;
    let dim = 2 * cols;
    // antisymmetry sanity: F[p][q] + F[q][p] = 0 holds by construction for
    // samples we build, but guard externally-assembled ones
    let mut asym = T::zero();
    for p in 0..dim {
        for q in 0..dim {
            asym = asym.max(sample.f[p][q].add(&sample.f[q][p]).max_abs());
        }
    }
    let scale = T::one().max(sample.f_norm);
    if asym > rl::<T>(1e-8) * scale {
        return Err(Error::Constraint(format!(
            "curvature antisymmetry residual {:e}",
            asym.to_f64().unwrap_or(f64::NAN)
        )));
    }
    // S_ab = (F[1,a][2,b] - F[2,a][1,b]) / 2, symmetrized exactly
    let half = C::new(rl::<T>(0.5), T::zero());
    let mut s = vec![vec![CMatrix::zeros(0, 0); cols]; cols];
    for a in 0..cols {
        for b in a..cols {
            let v = sample.f[a][cols + b].sub(&sample.f[cols + a][b]).scale(half);
            s[b][a] = v.clone();
            s[a][b] = v;
        }
    }
    // F^(2) = F - eps (x) S with eps_{12} = +1
    let mut f2_sq = T::zero();
    for p in 0..dim {
        for q in 0..dim {
            let (i, a) = (p / cols, p % cols);
            let (j, b) = (q / cols, q % cols);
            let f1 = if i == 0 && j == 1 {
                s[a][b].clone()
            } else if i == 1 && j == 0 {
                s[a][b].scale(C::new(-T::one(), T::zero()))
            } else {
                CMatrix::zeros(sample.f[p][q].rows, sample.f[p][q].cols)
            };
            let resid = sample.f[p][q].sub(&f1).frobenius_norm();
            f2_sq += resid * resid;
        }
    }
    sample.s = Some(s);
    sample.f2_norm = Some(f2_sq.sqrt());
    Ok(())
}

/// ||F^(2)|| / ||F||, the pointwise instanton verdict (0 for zero F).
pub fn instanton_residual<T: Real>(
    core: &Core<T>,
    hp: &HarmonicPoint<T>,
    eng: &DiffEngine<T>,
) -> Result<T> {
    let mut sample = curvature_components(core, hp, eng)?;
    decompose(&mut sample)?;
    let f2 = sample.f2_norm.unwrap();
    Ok(f2 / (sample.f_norm + T::epsilon()))
}

/// Yang-Mills density sum_{p<q} -Re tr(F_pq^2) over the real coordinate
/// frame at u = identity.
pub fn ym_density<T: Real>(core: &Core<T>, p: &ConePoint<T>, eng: &DiffEngine<T>) -> Result<T> {
    let hp = HarmonicPoint::over(p.clone());
    let n = hp.n();
    let cols = 2 * (n + 1);
    let r = core.r_factor(p)?;
    let g = CMatrix::identity(core.k_eff)
        .add(&core.nu_dag(p).mul(&core.nu(p)))
        .inverse()?;
    // partials along d/dzeta_j and d/dzeta_t_j
    let zero = C::new(T::zero(), T::zero());
    let one = C::new(T::one(), T::zero());
    let mut dz_parts = Vec::with_capacity(cols);
    let mut dzt_parts = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut dz = vec![zero; cols];
        dz[j] = one;
        let d = TangentDirection::from_internal(&dz, &vec![zero; cols]);
        dz_parts.push(core_derivatives(core, &hp, &d, eng)?);
        let mut dzt = vec![zero; cols];
        dzt[j] = one;
        let d = TangentDirection::from_internal(&vec![zero; cols], &dzt);
        dzt_parts.push(core_derivatives(core, &hp, &d, eng)?);
    }
    // real directions: d/dRe zeta_j = dz + dzt, d/dIm zeta_j = i dz - i dzt
    let i_c = C::new(T::zero(), T::one());
    let combine = |a: &(CMatrix<T>, CMatrix<T>), ca: C<T>, b: &(CMatrix<T>, CMatrix<T>), cb: C<T>| {
        (
            a.0.scale(ca).add(&b.0.scale(cb)),
            a.1.scale(ca).add(&b.1.scale(cb)),
        )
    };
    let mut real_derivs = Vec::with_capacity(2 * cols);
    for j in 0..cols {
        real_derivs.push(combine(&dz_parts[j], one, &dzt_parts[j], one));
        real_derivs.push(combine(&dz_parts[j], i_c, &dzt_parts[j], -i_c));
    }
    let mut density = T::zero();
    for a in 0..real_derivs.len() {
        for b in a + 1..real_derivs.len() {
            let f = core_curvature_from_derivs(&r, &g, &real_derivs[a], &real_derivs[b]);
            density -= f.mul(&f).trace().re;
        }
    }
    Ok(density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{complex_direction, sample_harmonic_point, FiberTag, PmSign};
    use crate::quatlin::Quaternion;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_core() -> Core<f64> {
        // lambda = A0 + A1 zeta_2 + B1 zeta_t_3, mask on slots 2 and 3
        let a0 = CMatrix::from_fn(2, 2, |i, j| C::new(0.1 * (i as f64 + 1.0), 0.2 * j as f64));
        let a1 = CMatrix::from_fn(2, 2, |i, j| C::new(0.3 - 0.1 * j as f64, 0.1 * i as f64));
        let b1 = CMatrix::from_fn(2, 2, |i, j| C::new(0.05 * (i + j) as f64, -0.2));
        let (a0d, a1d, b1d) = (a0.dagger(), a1.dagger(), b1.dagger());
        Core::new(
            2,
            2,
            vec![false, false, true, true],
            move |p| a0.add(&a1.scale(p.zeta[2])).add(&b1.scale(p.zeta_t[3])),
            move |p| a0d.add(&a1d.scale(p.zeta_t[2])).add(&b1d.scale(p.zeta[3])),
        )
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let eng = DiffEngine::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let hp = sample_harmonic_point::<f64, _>(1, 0.5, &mut rng);
        let d = complex_direction(3, PmSign::Plus, &hp).unwrap();
        let out = eng
            .directional_derivative(|_| CMatrix::<f64>::identity(2), &hp, &d)
            .unwrap();
        assert!(out.max_abs() == 0.0);
    }

    #[test]
    fn derivative_of_coordinate() {
        let eng = DiffEngine::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let hp = sample_harmonic_point::<f64, _>(1, 0.5, &mut rng);
        let d = complex_direction(2, PmSign::Plus, &hp).unwrap();
        let field = |q: &HarmonicPoint<f64>| {
            let z = crate::geometry::z_pm(q);
            CMatrix {
                rows: 1,
                cols: 1,
                data: vec![z[(0, 1)]],
            }
        };
        let out = eng.directional_derivative(field, &hp, &d).unwrap();
        assert!((out[(0, 0)] - C::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn derivative_exact_on_quadratics() {
        // f = zeta_2^2: derivative along d/dzeta_2 is 2 zeta_2, and the
        // Richardson level makes the central difference exact for cubics
        let eng = DiffEngine::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hp = sample_harmonic_point::<f64, _>(1, 0.5, &mut rng);
        let d = coordinate_direction::<f64>(1, 1, 3).unwrap();
        let field = |q: &HarmonicPoint<f64>| CMatrix {
            rows: 1,
            cols: 1,
            data: vec![q.base.zeta[2] * q.base.zeta[2] * q.base.zeta[2]],
        };
        let z = hp.base.zeta[2];
        let out = eng.directional_derivative(field, &hp, &d).unwrap();
        assert!((out[(0, 0)] - C::new(3.0, 0.0) * z * z).norm() < 1e-11);
    }

    #[test]
    fn step_underflow() {
        let eng = DiffEngine::<f64>::with_step(1e-13);
        let hp = HarmonicPoint::over(ConePoint::new(vec![C::new(1.0, 0.0); 4]));
        let d = coordinate_direction::<f64>(1, 1, 1).unwrap();
        assert!(matches!(
            eng.directional_derivative(|_| CMatrix::<f64>::identity(1), &hp, &d),
            Err(Error::StepUnderflow(_))
        ));
    }

    #[test]
    fn constant_core_flat() {
        let eng = DiffEngine::default();
        let core = Core::constant(
            1,
            CMatrix::from_fn(2, 2, |i, j| C::new(i as f64, j as f64 * 0.5)),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let hp = sample_harmonic_point::<f64, _>(1, 0.5, &mut rng);
        let dx = complex_direction(3, PmSign::Plus, &hp).unwrap();
        let dy = complex_direction(3, PmSign::Minus, &hp).unwrap();
        assert!(curvature_from_core(&core, &hp, &dx, &dy, &eng)
            .unwrap()
            .max_abs()
            == 0.0);
        assert!(curvature_from_potential(&core, &hp, &dx, &dy, &eng)
            .unwrap()
            .max_abs()
            == 0.0);
    }

    #[test]
    fn curvature_antisymmetric() {
        let eng = DiffEngine::default();
        let core = test_core();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hp = sample_harmonic_point::<f64, _>(1, 0.5, &mut rng);
        let dx = coordinate_direction::<f64>(1, 1, 3).unwrap();
        let dy = coordinate_direction::<f64>(1, 2, 4).unwrap();
        let fxy = curvature_from_core(&core, &hp, &dx, &dy, &eng).unwrap();
        let fyx = curvature_from_core(&core, &hp, &dy, &dx, &eng).unwrap();
        assert!(fxy.add(&fyx).max_abs() < 1e-15);
        let fxx = curvature_from_core(&core, &hp, &dx, &dx, &eng).unwrap();
        assert!(fxx.max_abs() == 0.0);
    }

    #[test]
    fn oracle_agreement_generic_core() {
        let eng = DiffEngine::default();
        let core = test_core();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..3 {
            let hp = sample_harmonic_point::<f64, _>(1, 0.5, &mut rng);
            for (ax, sx, ay, sy) in [
                (3usize, PmSign::Plus, 4usize, PmSign::Minus),
                (3, PmSign::Plus, 3, PmSign::Minus),
                (4, PmSign::Plus, 4, PmSign::Minus),
            ] {
                let dx = complex_direction(ax, sx, &hp).unwrap();
                let dy = complex_direction(ay, sy, &hp).unwrap();
                let f1 = curvature_from_potential(&core, &hp, &dx, &dy, &eng).unwrap();
                let f2 = curvature_from_core(&core, &hp, &dx, &dy, &eng).unwrap();
                let denom = 1.0_f64.max(f2.max_abs());
                assert!(
                    f1.sub(&f2).max_abs() / denom < 1e-6,
                    "mismatch {:e}",
                    f1.sub(&f2).max_abs()
                );
            }
        }
    }

    #[test]
    fn invariant_directions_flat_for_masked_cores() {
        // cores independent of (zeta^0, zeta^0') and u: F(H,.) = F(G,.) = 0
        // exactly
        let eng = DiffEngine::default();
        let core = test_core();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let hp = sample_harmonic_point::<f64, _>(1, 0.5, &mut rng);
        let dy = coordinate_direction::<f64>(1, 1, 3).unwrap();
        for tag in FiberTag::ALL {
            let dx = TangentDirection::from_tag(1, tag);
            let f = curvature_from_potential(&core, &hp, &dx, &dy, &eng).unwrap();
            assert!(f.max_abs() == 0.0, "{} not exactly flat", tag.label());
            let fc = curvature_from_core(&core, &hp, &dx, &dy, &eng).unwrap();
            assert!(fc.max_abs() == 0.0);
        }
    }

    #[test]
    fn components_and_projection() {
        let eng = DiffEngine::default();
        let core = test_core();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let hp = sample_harmonic_point::<f64, _>(1, 0.5, &mut rng);
        let mut sample = curvature_components(&core, &hp, &eng).unwrap();
        decompose(&mut sample).unwrap();
        let s = sample.s.as_ref().unwrap();
        // exact symmetry by construction
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(s[a][b], s[b][a]);
            }
        }
        // Pythagoras: ||F||^2 = ||F1||^2 + ||F2||^2
        let mut f1_sq = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let nrm = s[a][b].frobenius_norm();
                f1_sq += 2.0 * nrm * nrm;
            }
        }
        let f2 = sample.f2_norm.unwrap();
        let total = (f1_sq + f2 * f2).sqrt();
        assert!(
            (total - sample.f_norm).abs() < 1e-10 * (1.0 + sample.f_norm),
            "norm mismatch {total} vs {}",
            sample.f_norm
        );
    }

    #[test]
    fn residual_zero_for_flat() {
        let eng = DiffEngine::default();
        let core = Core::constant(1, CMatrix::<f64>::zeros(2, 2));
        let hp = HarmonicPoint::over(
            crate::geometry::chart_from_quaternions(&[
                Quaternion::one(),
                Quaternion::new(0.2, 0.1, -0.3, 0.4),
            ])
            .unwrap(),
        );
        assert_eq!(instanton_residual(&core, &hp, &eng).unwrap(), 0.0);
    }

    #[test]
    fn ym_density_flat_zero_and_nonnegative() {
        let eng = DiffEngine::default();
        let flat = Core::constant(1, CMatrix::<f64>::zeros(2, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let hp = sample_harmonic_point::<f64, _>(1, 0.5, &mut rng);
        assert_eq!(ym_density(&flat, &hp.base, &eng).unwrap(), 0.0);
        let core = test_core();
        let d = ym_density(&core, &hp.base, &eng).unwrap();
        assert!(d > 0.0, "density {d}");
    }
}
