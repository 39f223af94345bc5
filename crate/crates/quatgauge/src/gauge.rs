//! Canonical-form connection data: cores, the frames xi and eta, the
//! Stiefel canonical potential A = xi^dagger d xi, gauge transformations
//! and covariant derivatives.
//!
//! A core is an evaluable matrix field lambda on the cone chart together
//! with a declared dependency mask; the connection it generates is the
//! pullback of the canonical connection under the frame
//! xi = [I; lambda] (I + lambda^dagger lambda)^{-1/2}.  Off the real
//! slice, lambda^dagger is replaced by its own holomorphic extension,
//! which cores carry explicitly.

use std::sync::Arc;

use crate::curvature::DiffEngine;
use crate::error::{Error, Result};
use crate::geometry::{ConePoint, HarmonicPoint, TangentDirection};
use crate::quatlin::{hermitian_inv_sqrt, inv_sqrt_denman_beavers, CMatrix};
use crate::scalar::{rl, Real, C};

/// The canonical frame xi = [I_m; lambda] (I_m + lambda^dagger lambda)^{-1/2}.
pub fn xi_of_lambda<T: Real>(lam: &CMatrix<T>) -> Result<CMatrix<T>> {
    let m = lam.cols;
    let h = CMatrix::identity(m).add(&lam.dagger().mul(lam));
    let r = hermitian_inv_sqrt(&h, rl(1e-12))?;
    Ok(CMatrix::identity(m).vstack(lam).mul(&r))
}

/// The complementary frame eta = [nu; I_k] (I_k + nu^dagger nu)^{-1/2}.
pub fn eta_of_nu<T: Real>(nu: &CMatrix<T>) -> Result<CMatrix<T>> {
    let k = nu.cols;
    let h = CMatrix::identity(k).add(&nu.dagger().mul(nu));
    let r = hermitian_inv_sqrt(&h, rl(1e-12))?;
    Ok(nu.vstack(&CMatrix::identity(k)).mul(&r))
}

type CoreFn<T> = Arc<dyn Fn(&ConePoint<T>) -> CMatrix<T> + Send + Sync>;

/// An evaluable core field lambda with its conjugate extension.
///
/// `eval` returns lambda (k_eff x m_eff); `eval_dag` returns the
/// holomorphic extension of lambda^dagger, equal to eval(p)^dagger on the
/// real slice.  `mask[j]` declares whether lambda may depend on the
/// complex coordinate pair (zeta_j, zeta_t_j); derivatives along
/// directions touching only masked-out coordinates (or the fiber) are
/// exact zeros.
#[derive(Clone)]
pub struct Core<T: Real> {
    pub k_eff: usize,
    pub m_eff: usize,
    pub mask: Vec<bool>,
    eval: CoreFn<T>,
    eval_dag: CoreFn<T>,
}

impl<T: Real> std::fmt::Debug for Core<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Core")
            .field("k_eff", &self.k_eff)
            .field("m_eff", &self.m_eff)
            .field("mask", &self.mask)
            .finish_non_exhaustive()
    }
}

impl<T: Real> Core<T> {
    pub fn new(
        k_eff: usize,
        m_eff: usize,
        mask: Vec<bool>,
        eval: impl Fn(&ConePoint<T>) -> CMatrix<T> + Send + Sync + 'static,
        eval_dag: impl Fn(&ConePoint<T>) -> CMatrix<T> + Send + Sync + 'static,
    ) -> Self {
        Core {
            k_eff,
            m_eff,
            mask,
            eval: Arc::new(eval),
            eval_dag: Arc::new(eval_dag),
        }
    }

    /// Constant core: flat connection.
    pub fn constant(n: usize, value: CMatrix<T>) -> Self {
        let dag = value.dagger();
        Core::new(
            value.rows,
            value.cols,
            vec![false; 2 * (n + 1)],
            move |_| value.clone(),
            move |_| dag.clone(),
        )
    }

    /// lambda at p.
    pub fn lambda(&self, p: &ConePoint<T>) -> CMatrix<T> {
        (self.eval)(p)
    }

    /// Holomorphic extension of lambda^dagger at p.
    pub fn lambda_dag(&self, p: &ConePoint<T>) -> CMatrix<T> {
        (self.eval_dag)(p)
    }

    /// nu = -lambda^dagger (conjugate core).
    pub fn nu(&self, p: &ConePoint<T>) -> CMatrix<T> {
        self.lambda_dag(p).scale(C::new(-T::one(), T::zero()))
    }

    /// Holomorphic extension of nu^dagger = -lambda.
    pub fn nu_dag(&self, p: &ConePoint<T>) -> CMatrix<T> {
        self.lambda(p).scale(C::new(-T::one(), T::zero()))
    }

    /// (I_m + lambda^dagger lambda)^{-1/2}, holomorphically extended.
    pub fn r_factor(&self, p: &ConePoint<T>) -> Result<CMatrix<T>> {
        let h = CMatrix::identity(self.m_eff).add(&self.lambda_dag(p).mul(&self.lambda(p)));
        inv_sqrt_denman_beavers(&h)
    }

    /// xi = [I; lambda] R.
    pub fn xi(&self, p: &ConePoint<T>) -> Result<CMatrix<T>> {
        let r = self.r_factor(p)?;
        Ok(CMatrix::identity(self.m_eff).vstack(&self.lambda(p)).mul(&r))
    }

    /// Holomorphic extension of xi^dagger = R [I | lambda^dagger].
    pub fn xi_dag(&self, p: &ConePoint<T>) -> Result<CMatrix<T>> {
        let r = self.r_factor(p)?;
        Ok(r.mul(&CMatrix::identity(self.m_eff).hstack(&self.lambda_dag(p))))
    }

    /// True iff the derivative along `dir` vanishes identically by the
    /// dependency mask (the direction moves only masked-out coordinates
    /// and/or the fiber).
    pub fn kills(&self, dir: &TangentDirection<T>) -> bool {
        let (dz, dzt) = dir.internal();
        let moved_base = |j: usize| {
            dz[j].re != T::zero()
                || dz[j].im != T::zero()
                || dzt[j].re != T::zero()
                || dzt[j].im != T::zero()
        };
        for j in 0..self.mask.len() {
            if self.mask[j] && moved_base(j) {
                return false;
            }
        }
        if let Some(tag) = dir.fiber {
            use crate::geometry::FiberTag::*;
            // G-tags move (zeta^0, zeta^0'); H-tags move only u
            let moves_head = matches!(tag, GD | G0 | G1 | G2);
            if moves_head && (self.mask[0] || self.mask[1]) {
                return false;
            }
        }
        true
    }
}

/// A potential value A(X) at a point, along the direction it was
/// evaluated on.
#[derive(Debug, Clone)]
pub struct PotentialValue<T: Real> {
    pub value: CMatrix<T>,
    pub direction: TangentDirection<T>,
}

/// The canonical potential A(X) = xi^dagger D_X xi of a core at p.
pub fn potential<T: Real>(
    core: &Core<T>,
    p: &ConePoint<T>,
    dir: &TangentDirection<T>,
    eng: &DiffEngine<T>,
) -> Result<PotentialValue<T>> {
    if core.kills(dir) {
        return Ok(PotentialValue {
            value: CMatrix::zeros(core.m_eff, core.m_eff),
            direction: dir.clone(),
        });
    }
    let hp = HarmonicPoint::over(p.clone());
    let dxi = eng.directional_derivative(
        |q: &HarmonicPoint<T>| core.xi(&q.base).expect("frame evaluation inside derivative"),
        &hp,
        dir,
    )?;
    Ok(PotentialValue {
        value: core.xi_dag(p)?.mul(&dxi),
        direction: dir.clone(),
    })
}

type GaugeFn<T> = Arc<dyn Fn(&HarmonicPoint<T>) -> CMatrix<T> + Send + Sync>;

/// An invertible matrix-valued gauge change on harmonic space.
#[derive(Clone)]
pub struct GaugeMap<T: Real> {
    pub m_eff: usize,
    eval: GaugeFn<T>,
}

impl<T: Real> std::fmt::Debug for GaugeMap<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaugeMap")
            .field("m_eff", &self.m_eff)
            .finish_non_exhaustive()
    }
}

impl<T: Real> GaugeMap<T> {
    pub fn new(
        m_eff: usize,
        eval: impl Fn(&HarmonicPoint<T>) -> CMatrix<T> + Send + Sync + 'static,
    ) -> Self {
        GaugeMap {
            m_eff,
            eval: Arc::new(eval),
        }
    }

    pub fn identity(m_eff: usize) -> Self {
        GaugeMap::new(m_eff, move |_| CMatrix::identity(m_eff))
    }

    pub fn at(&self, hp: &HarmonicPoint<T>) -> CMatrix<T> {
        (self.eval)(hp)
    }
}

/// A' = g^{-1} A g + g^{-1} D_X g.
pub fn gauge_transform<T: Real>(
    a: &PotentialValue<T>,
    g: &GaugeMap<T>,
    hp: &HarmonicPoint<T>,
    dir: &TangentDirection<T>,
    eng: &DiffEngine<T>,
) -> Result<PotentialValue<T>> {
    let gv = g.at(hp);
    let ginv = gv.inverse().map_err(|_| Error::SingularGauge)?;
    let dg = eng.directional_derivative(|q: &HarmonicPoint<T>| g.at(q), hp, dir)?;
    Ok(PotentialValue {
        value: ginv.mul(&a.value).mul(&gv).add(&ginv.mul(&dg)),
        direction: dir.clone(),
    })
}

/// Covariant derivative D_X s = X . s + A(X) s of a section field.
pub fn covariant_derivative<T: Real>(
    a_of: impl Fn(&HarmonicPoint<T>, &TangentDirection<T>) -> Result<CMatrix<T>>,
    s: impl Fn(&HarmonicPoint<T>) -> CMatrix<T>,
    hp: &HarmonicPoint<T>,
    dir: &TangentDirection<T>,
    eng: &DiffEngine<T>,
) -> Result<CMatrix<T>> {
    let sv = s(hp);
    let av = a_of(hp, dir)?;
    if av.cols != sv.rows {
        return Err(Error::Shape(format!(
            "covariant derivative: A is {}x{}, s is {}x{}",
            av.rows, av.cols, sv.rows, sv.cols
        )));
    }
    let ds = eng.directional_derivative(&s, hp, dir)?;
    Ok(ds.add(&av.mul(&sv)))
}
