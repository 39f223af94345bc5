//! The flat hyperkähler cone over HP^n and its harmonic space.
//!
//! Points of the cone chart carry the complex coordinates
//! (zeta^0, zeta^0', ..., zeta^n, zeta^n') together with an independent
//! copy `zeta_t` of their conjugates.  On the real slice
//! `zeta_t = conj(zeta)`; keeping the two halves independent makes every
//! coordinate function holomorphic in the doubled variables, so flows of
//! complex vector fields (needed for the invariant fields and for
//! transport along z^{-a} lines) are ordinary smooth flows.
//!
//! The harmonic space adds an SL(2, C) matrix u = (u^i_±); z^{±a} are the
//! rows of u^{-1} z.

use crate::error::{Error, Result};
use crate::quatlin::{exp2x2, CMatrix, Quaternion};
use crate::scalar::{cx, rl, Real, C};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A point of the cone chart (q^0 != 0) of H^{n+1} \ {0}.
///
/// `zeta` is ordered (zeta^0, zeta^0', zeta^1, zeta^1', ...), length
/// 2(n+1).  `zeta_t` holds the formal conjugates; construct through
/// [`ConePoint::new`] to place the point on the real slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConePoint<T: Real> {
    pub zeta: Vec<C<T>>,
    pub zeta_t: Vec<C<T>>,
}

impl<T: Real> ConePoint<T> {
    /// Real-slice point: zeta_t = conj(zeta).
    pub fn new(zeta: Vec<C<T>>) -> Self {
        let zeta_t = zeta.iter().map(|z| z.conj()).collect();
        ConePoint { zeta, zeta_t }
    }

    /// Fully complexified point with independent conjugate coordinates.
    pub fn from_parts(zeta: Vec<C<T>>, zeta_t: Vec<C<T>>) -> Self {
        assert_eq!(zeta.len(), zeta_t.len(), "cone point halves");
        ConePoint { zeta, zeta_t }
    }

    /// The HP^n dimension parameter n (zeta has length 2(n+1)).
    pub fn n(&self) -> usize {
        self.zeta.len() / 2 - 1
    }

    /// Distance from the real slice; zero iff zeta_t = conj(zeta).
    pub fn reality_residual(&self) -> T {
        self.zeta
            .iter()
            .zip(&self.zeta_t)
            .map(|(z, zt)| (*zt - z.conj()).norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }
}

/// A point of the harmonic-space chart: cone point plus u in SL(2, C).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicPoint<T: Real> {
    pub base: ConePoint<T>,
    pub u: CMatrix<T>,
}

impl<T: Real> HarmonicPoint<T> {
    /// Checked constructor: u must be 2x2 with det u = 1.
    pub fn new(base: ConePoint<T>, u: CMatrix<T>) -> Result<Self> {
        if u.rows != 2 || u.cols != 2 {
            return Err(Error::Shape("harmonic point needs a 2x2 u".into()));
        }
        let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
        let resid = (det - C::new(T::one(), T::zero())).norm();
        if resid > rl(1e-9) {
            return Err(Error::Constraint(format!(
                "det u differs from 1 by {:e}",
                resid.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(HarmonicPoint { base, u })
    }

    /// The point over the same base with u = identity.
    pub fn over(base: ConePoint<T>) -> Self {
        HarmonicPoint {
            base,
            u: CMatrix::identity(2),
        }
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }
}

/// Tags for the invariant vector fields of the harmonic fibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FiberTag {
    /// Fiber dilation H_0.
    H0,
    /// Fiber raising H_{++}.
    Hpp,
    /// Fiber lowering H_{--}.
    Hmm,
    /// Cone dilation G_D = eta d_eta + zeta d_zeta.
    GD,
    /// Rotation G_0.
    G0,
    /// Rotation G_1.
    G1,
    /// Rotation G_2.
    G2,
}

impl FiberTag {
    pub const ALL: [FiberTag; 7] = [
        FiberTag::H0,
        FiberTag::Hpp,
        FiberTag::Hmm,
        FiberTag::GD,
        FiberTag::G0,
        FiberTag::G1,
        FiberTag::G2,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            FiberTag::H0 => "H0",
            FiberTag::Hpp => "H++",
            FiberTag::Hmm => "H--",
            FiberTag::GD => "G_D",
            FiberTag::G0 => "G0",
            FiberTag::G1 => "G1",
            FiberTag::G2 => "G2",
        }
    }
}

/// sl2 basis element H_0 = diag(1, -1).
pub fn gen_h0<T: Real>() -> CMatrix<T> {
    CMatrix::two_by_two(cx(1.0, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(-1.0, 0.0))
}

/// sl2 basis element H_{++} = [[0,1],[0,0]].
pub fn gen_hpp<T: Real>() -> CMatrix<T> {
    CMatrix::two_by_two(cx(0.0, 0.0), cx(1.0, 0.0), cx(0.0, 0.0), cx(0.0, 0.0))
}

/// sl2 basis element H_{--} = [[0,0],[1,0]].
pub fn gen_hmm<T: Real>() -> CMatrix<T> {
    CMatrix::two_by_two(cx(0.0, 0.0), cx(0.0, 0.0), cx(1.0, 0.0), cx(0.0, 0.0))
}

/// Base matrix (action on (eta, zeta)) and fiber generator of a tag.
///
/// The base part of a G-field acts linearly on (zeta^0, zeta^0'); the flow
/// is (zeta^0, zeta^0') -> exp(tM) (zeta^0, zeta^0'), with the conjugate
/// coordinates driven by conj(M).  H-fields are pure fiber flows
/// u -> u exp(tX).
pub(crate) fn tag_generators<T: Real>(tag: FiberTag) -> (Option<CMatrix<T>>, Option<CMatrix<T>>) {
    match tag {
        FiberTag::H0 => (None, Some(gen_h0())),
        FiberTag::Hpp => (None, Some(gen_hpp())),
        FiberTag::Hmm => (None, Some(gen_hmm())),
        FiberTag::GD => (Some(CMatrix::identity(2)), None),
        FiberTag::G0 => (
            Some(CMatrix::two_by_two(
                cx(0.0, 1.0),
                cx(0.0, 0.0),
                cx(0.0, 0.0),
                cx(0.0, -1.0),
            )),
            // i H_0
            Some(CMatrix::two_by_two(
                cx(0.0, 1.0),
                cx(0.0, 0.0),
                cx(0.0, 0.0),
                cx(0.0, -1.0),
            )),
        ),
        FiberTag::G1 => (
            Some(CMatrix::two_by_two(
                cx(0.0, 0.0),
                cx(-1.0, 0.0),
                cx(1.0, 0.0),
                cx(0.0, 0.0),
            )),
            Some(CMatrix::two_by_two(
                cx(0.0, 0.0),
                cx(1.0, 0.0),
                cx(-1.0, 0.0),
                cx(0.0, 0.0),
            )),
        ),
        FiberTag::G2 => (
            Some(CMatrix::two_by_two(
                cx(0.0, 0.0),
                cx(0.0, 1.0),
                cx(0.0, 1.0),
                cx(0.0, 0.0),
            )),
            Some(CMatrix::two_by_two(
                cx(0.0, 0.0),
                cx(0.0, 1.0),
                cx(0.0, 1.0),
                cx(0.0, 0.0),
            )),
        ),
    }
}

/// A complexified tangent direction on harmonic space.
///
/// `coeffs` has length 4(n+1): coeffs[2j] multiplies d/d(Re zeta_j) and
/// coeffs[2j+1] multiplies d/d(Im zeta_j), with complex coefficients so
/// Wirtinger directions are expressible.  An optional fiber tag adds one
/// of the invariant flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentDirection<T: Real> {
    pub coeffs: Vec<C<T>>,
    pub fiber: Option<FiberTag>,
}

impl<T: Real> TangentDirection<T> {
    pub fn zero(n: usize) -> Self {
        TangentDirection {
            coeffs: vec![C::new(T::zero(), T::zero()); 4 * (n + 1)],
            fiber: None,
        }
    }

    pub fn from_coeffs(coeffs: Vec<C<T>>) -> Self {
        TangentDirection {
            coeffs,
            fiber: None,
        }
    }

    pub fn from_tag(n: usize, tag: FiberTag) -> Self {
        TangentDirection {
            coeffs: vec![C::new(T::zero(), T::zero()); 4 * (n + 1)],
            fiber: Some(tag),
        }
    }

    /// Holomorphic/antiholomorphic split: returns (dzeta, dzeta_t), each
    /// of length 2(n+1), with dzeta_j = c_{2j} + i c_{2j+1} and
    /// dzeta_t_j = c_{2j} - i c_{2j+1}.
    pub fn internal(&self) -> (Vec<C<T>>, Vec<C<T>>) {
        let half = self.coeffs.len() / 2;
        let i = C::new(T::zero(), T::one());
        let mut dz = Vec::with_capacity(half);
        let mut dzt = Vec::with_capacity(half);
        for j in 0..half {
            let a = self.coeffs[2 * j];
            let b = self.coeffs[2 * j + 1];
            dz.push(a + i * b);
            dzt.push(a - i * b);
        }
        (dz, dzt)
    }

    /// Inverse of [`TangentDirection::internal`].
    pub(crate) fn from_internal(dzeta: &[C<T>], dzeta_t: &[C<T>]) -> Self {
        assert_eq!(dzeta.len(), dzeta_t.len());
        let half = cx::<T>(0.5, 0.0);
        let mihalf = cx::<T>(0.0, -0.5);
        let mut coeffs = Vec::with_capacity(2 * dzeta.len());
        for j in 0..dzeta.len() {
            let a = dzeta[j];
            let b = dzeta_t[j];
            coeffs.push((a + b) * half);
            coeffs.push((a - b) * mihalf);
        }
        TangentDirection {
            coeffs,
            fiber: None,
        }
    }

    /// Velocity of this direction in the zeta coordinates at `hp`,
    /// including the base motion induced by a G-type fiber tag.
    pub fn base_velocity(&self, hp: &HarmonicPoint<T>) -> Vec<C<T>> {
        let (mut dz, _) = self.internal();
        if let Some(tag) = self.fiber {
            if let (Some(m), _) = tag_generators::<T>(tag) {
                let eta = hp.base.zeta[0];
                let zeta = hp.base.zeta[1];
                dz[0] = dz[0] + m[(0, 0)] * eta + m[(0, 1)] * zeta;
                dz[1] = dz[1] + m[(1, 0)] * eta + m[(1, 1)] * zeta;
            }
        }
        dz
    }

    pub fn scaled(&self, s: C<T>) -> Self {
        assert!(
            self.fiber.is_none(),
            "cannot scale a direction with a fiber tag"
        );
        TangentDirection {
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
            fiber: None,
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        assert!(
            self.fiber.is_none() || o.fiber.is_none(),
            "cannot add two tagged directions"
        );
        TangentDirection {
            coeffs: self
                .coeffs
                .iter()
                .zip(&o.coeffs)
                .map(|(&a, &b)| a + b)
                .collect(),
            fiber: self.fiber.or(o.fiber),
        }
    }
}

/// Frame configuration: the positive constant kappa standing in for |Lambda|
/// on the flat cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec<T: Real> {
    pub kappa: T,
}

impl<T: Real> Default for FrameSpec<T> {
    fn default() -> Self {
        FrameSpec { kappa: T::one() }
    }
}

/// Chart map (q^0, ..., q^n) -> cone coordinates, q^0 != 0.
///
/// zeta^0 + zeta^0' j = q^0 and zeta^a + zeta^a' j = r^a = q^a (q^0)^{-1}.
pub fn chart_from_quaternions<T: Real>(q: &[Quaternion<T>]) -> Result<ConePoint<T>> {
    if q.is_empty() {
        return Err(Error::Chart("need at least one quaternion".into()));
    }
    let q0 = q[0];
    if q0.norm_sq() == T::zero() {
        return Err(Error::Chart("q^0 = 0 is outside the chart".into()));
    }
    let q0_inv = q0.inverse()?;
    let mut zeta = Vec::with_capacity(2 * q.len());
    let (a, b) = q0.complex_pair();
    zeta.push(a);
    zeta.push(b);
    for qa in &q[1..] {
        let r = *qa * q0_inv;
        let (ra, rb) = r.complex_pair();
        zeta.push(ra);
        zeta.push(rb);
    }
    Ok(ConePoint::new(zeta))
}

/// The 2 x (2n+2) matrix (z^{ia}).
///
/// Row 1 is zeta itself; row 2 holds the conjugate pattern
/// (-zeta_t^0', zeta_t^0, -zeta_t^1', zeta_t^1, ...), extended
/// holomorphically through `zeta_t`.
pub fn z_matrix<T: Real>(p: &ConePoint<T>) -> CMatrix<T> {
    let cols = p.zeta.len();
    let mut m = CMatrix::zeros(2, cols);
    for alpha in 0..cols / 2 {
        m[(0, 2 * alpha)] = p.zeta[2 * alpha];
        m[(0, 2 * alpha + 1)] = p.zeta[2 * alpha + 1];
        m[(1, 2 * alpha)] = -p.zeta_t[2 * alpha + 1];
        m[(1, 2 * alpha + 1)] = p.zeta_t[2 * alpha];
    }
    m
}

/// The rows (z^{+a}; z^{-a}) = u^{-1} (z^{ia}).
pub fn z_pm<T: Real>(hp: &HarmonicPoint<T>) -> CMatrix<T> {
    // u = [[a,b],[c,d]], det 1: rows of u^{-1} are (d,-b) and (-c,a)
    let u = &hp.u;
    let uinv = CMatrix::two_by_two(u[(1, 1)], -u[(0, 1)], -u[(1, 0)], u[(0, 0)]);
    uinv.mul(&z_matrix(&hp.base))
}

/// The complexified coordinate direction d/dz^{ia} in internal form.
///
/// `i_row` is 1 or 2, `a` is the 1-based column 1..2n+2.
fn z_coordinate_direction<T: Real>(n: usize, i_row: usize, a: usize) -> (Vec<C<T>>, Vec<C<T>>) {
    let len = 2 * (n + 1);
    let mut dz = vec![C::new(T::zero(), T::zero()); len];
    let mut dzt = vec![C::new(T::zero(), T::zero()); len];
    let alpha = (a - 1) / 2;
    let primed = (a - 1) % 2 == 1;
    let one = C::new(T::one(), T::zero());
    match (i_row, primed) {
        // z^{1(2a+1)} = zeta^a, z^{1(2a+2)} = zeta^a'
        (1, false) => dz[2 * alpha] = one,
        (1, true) => dz[2 * alpha + 1] = one,
        // z^{2(2a+1)} = -zeta_t^a', z^{2(2a+2)} = zeta_t^a
        (2, false) => dzt[2 * alpha + 1] = -one,
        (2, true) => dzt[2 * alpha] = one,
        _ => unreachable!(),
    }
    (dz, dzt)
}

/// The coordinate direction d/dz^{ia} as a tangent direction.
pub fn coordinate_direction<T: Real>(n: usize, i_row: usize, a: usize) -> Result<TangentDirection<T>> {
    if !(1..=2).contains(&i_row) || a < 1 || a > 2 * (n + 1) {
        return Err(Error::Index(format!("z^{{{i_row}{a}}} out of range")));
    }
    let (dz, dzt) = z_coordinate_direction::<T>(n, i_row, a);
    Ok(TangentDirection::from_internal(&dz, &dzt))
}

/// Sign selector for [`complex_direction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PmSign {
    Plus,
    Minus,
}

/// The direction d/dz^{±a} = u^i_± d/dz^{ia} at `hp`.
pub fn complex_direction<T: Real>(
    a: usize,
    sign: PmSign,
    hp: &HarmonicPoint<T>,
) -> Result<TangentDirection<T>> {
    let n = hp.n();
    if a < 1 || a > 2 * (n + 1) {
        return Err(Error::Index(format!("column {a} outside 1..{}", 2 * (n + 1))));
    }
    let col = match sign {
        PmSign::Plus => 0,
        PmSign::Minus => 1,
    };
    let u1 = hp.u[(0, col)];
    let u2 = hp.u[(1, col)];
    let (dz1, dzt1) = z_coordinate_direction::<T>(n, 1, a);
    let (dz2, dzt2) = z_coordinate_direction::<T>(n, 2, a);
    let len = dz1.len();
    let mut dz = Vec::with_capacity(len);
    let mut dzt = Vec::with_capacity(len);
    for j in 0..len {
        dz.push(u1 * dz1[j] + u2 * dz2[j]);
        dzt.push(u1 * dzt1[j] + u2 * dzt2[j]);
    }
    Ok(TangentDirection::from_internal(&dz, &dzt))
}

/// The invariant vector field with the given tag, as a flowable direction.
///
/// The direction carries only the tag; base motion of the G-fields is part
/// of the tag's flow (see [`flow_step`]).  Use
/// [`TangentDirection::base_velocity`] to read off the induced base
/// velocity at a point.
pub fn invariant_vector_field<T: Real>(tag: FiberTag, hp: &HarmonicPoint<T>) -> TangentDirection<T> {
    TangentDirection::from_tag(hp.n(), tag)
}

/// Move `hp` along `dir` for time `t`.
///
/// Coefficient parts translate the coordinates along a straight line;
/// fiber tags apply the exact flow: u -> u exp(t X) and, for G-tags,
/// (zeta^0, zeta^0') -> exp(t M) (zeta^0, zeta^0') with the conjugate
/// half driven by conj(M).
pub fn flow_step<T: Real>(hp: &HarmonicPoint<T>, dir: &TangentDirection<T>, t: T) -> HarmonicPoint<T> {
    let mut out = hp.clone();
    let tc = C::new(t, T::zero());
    if dir.coeffs.iter().any(|c| c.re != T::zero() || c.im != T::zero()) {
        let (dz, dzt) = dir.internal();
        for j in 0..dz.len() {
            out.base.zeta[j] = out.base.zeta[j] + tc * dz[j];
            out.base.zeta_t[j] = out.base.zeta_t[j] + tc * dzt[j];
        }
    }
    if let Some(tag) = dir.fiber {
        let (base_m, fiber_x) = tag_generators::<T>(tag);
        if let Some(m) = base_m {
            let e = exp2x2(&m.scale(tc));
            let eta = out.base.zeta[0];
            let zeta = out.base.zeta[1];
            out.base.zeta[0] = e[(0, 0)] * eta + e[(0, 1)] * zeta;
            out.base.zeta[1] = e[(1, 0)] * eta + e[(1, 1)] * zeta;
            let ec = exp2x2(&m.conj().scale(tc));
            let eta_t = out.base.zeta_t[0];
            let zeta_t = out.base.zeta_t[1];
            out.base.zeta_t[0] = ec[(0, 0)] * eta_t + ec[(0, 1)] * zeta_t;
            out.base.zeta_t[1] = ec[(1, 0)] * eta_t + ec[(1, 1)] * zeta_t;
        }
        if let Some(x) = fiber_x {
            out.u = out.u.mul(&exp2x2(&x.scale(tc)));
        }
    }
    out
}

/// Strongly adapted vertical frame (e_{+1}, e_{+2}, e_{-1}, e_{-2}) at `hp`.
///
/// f_{11} = (eta d_eta + zeta d_zeta) / (kappa s), f_{12} =
/// (-zeta d_eta + eta d_zeta) / (kappa s) with s = sqrt(|eta|^2 + |zeta|^2),
/// f_{2j} = conj(f_{1j}), and e_{±j} = u^i_± f_{ij}.
pub fn strongly_adapted_vertical_frame<T: Real>(
    hp: &HarmonicPoint<T>,
    spec: &FrameSpec<T>,
) -> Result<[TangentDirection<T>; 4]> {
    let n = hp.n();
    let eta = hp.base.zeta[0];
    let zeta = hp.base.zeta[1];
    let eta_t = hp.base.zeta_t[0];
    let zeta_t = hp.base.zeta_t[1];
    let s2 = eta * eta_t + zeta * zeta_t;
    if s2.norm() == T::zero() {
        return Err(Error::Chart("(eta, zeta) = 0 has no vertical frame".into()));
    }
    let kap = C::new(spec.kappa, T::zero());
    let pref = C::new(T::one(), T::zero()) / (kap * s2.sqrt());
    let len = 2 * (n + 1);
    let zero = vec![C::new(T::zero(), T::zero()); len];
    let mk = |slot0: C<T>, slot1: C<T>, upper: bool| {
        let mut dz = zero.clone();
        let mut dzt = zero.clone();
        if upper {
            dz[0] = slot0;
            dz[1] = slot1;
        } else {
            dzt[0] = slot0;
            dzt[1] = slot1;
        }
        (dz, dzt)
    };
    // f_{1j} live in the holomorphic half, f_{2j} in the conjugate half
    let f11 = mk(pref * eta, pref * zeta, true);
    let f12 = mk(-pref * zeta, pref * eta, true);
    let f21 = mk(pref * eta_t, pref * zeta_t, false);
    let f22 = mk(-pref * zeta_t, pref * eta_t, false);
    let combine = |col: usize, f1: &(Vec<C<T>>, Vec<C<T>>), f2: &(Vec<C<T>>, Vec<C<T>>)| {
        let u1 = hp.u[(0, col)];
        let u2 = hp.u[(1, col)];
        let dz: Vec<C<T>> = (0..len).map(|j| u1 * f1.0[j] + u2 * f2.0[j]).collect();
        let dzt: Vec<C<T>> = (0..len).map(|j| u1 * f1.1[j] + u2 * f2.1[j]).collect();
        TangentDirection::from_internal(&dz, &dzt)
    };
    Ok([
        combine(0, &f11, &f21),
        combine(0, &f12, &f22),
        combine(1, &f11, &f21),
        combine(1, &f12, &f22),
    ])
}

/// Draw a harmonic point for property tests and CLI sampling.
///
/// zeta^0 = 1 + box-uniform, all other coordinates box-uniform, resampled
/// until |(zeta^0, zeta^0')| >= 0.3; u = exp of a random bounded sl2
/// element (det u = 1 exactly).
pub fn sample_harmonic_point<T: Real, R: Rng>(
    n: usize,
    box_half: f64,
    rng: &mut R,
) -> HarmonicPoint<T> {
    let len = 2 * (n + 1);
    let mut unif = |half: f64| -> C<T> { cx(rng.gen_range(-half..=half), rng.gen_range(-half..=half)) };
    let zeta = loop {
        let mut z: Vec<C<T>> = Vec::with_capacity(len);
        z.push(cx::<T>(1.0, 0.0) + unif(box_half));
        for _ in 1..len {
            z.push(unif(box_half));
        }
        let head = (z[0].norm_sqr() + z[1].norm_sqr()).sqrt();
        if head >= rl(0.3) {
            break z;
        }
    };
    let mut gen = CMatrix::<T>::zeros(2, 2);
    for basis in [gen_h0::<T>(), gen_hpp(), gen_hmm()] {
        let a = cx::<T>(rng.gen_range(-0.3..=0.3), rng.gen_range(-0.3..=0.3));
        gen = gen.add(&basis.scale(a));
    }
    HarmonicPoint {
        base: ConePoint::new(zeta),
        u: exp2x2(&gen),
    }
}

/// The Lie bracket [x, y] of two invariant fields as a linear combination
/// of invariant fields.
///
/// This is the table the library implements (and which
/// [`verify_bracket_table`] confirms against finite-difference flow
/// commutators); the sign in [G0, H--] = -2i H-- is the numerically
/// determined one.
pub fn bracket_rhs<T: Real>(x: FiberTag, y: FiberTag) -> Vec<(C<T>, FiberTag)> {
    use FiberTag::*;
    if x == y {
        return vec![];
    }
    // canonical order; swapped arguments negate
    let canonical: Option<Vec<(C<T>, FiberTag)>> = match (x, y) {
        (H0, Hpp) => Some(vec![(cx(2.0, 0.0), Hpp)]),
        (H0, Hmm) => Some(vec![(cx(-2.0, 0.0), Hmm)]),
        (Hpp, Hmm) => Some(vec![(cx(1.0, 0.0), H0)]),
        (G0, G1) => Some(vec![(cx(2.0, 0.0), G2)]),
        (G0, G2) => Some(vec![(cx(-2.0, 0.0), G1)]),
        (G1, G2) => Some(vec![(cx(2.0, 0.0), G0)]),
        (G0, H0) => Some(vec![]),
        (G0, Hpp) => Some(vec![(cx(0.0, 2.0), Hpp)]),
        (G0, Hmm) => Some(vec![(cx(0.0, -2.0), Hmm)]),
        (G1, H0) => Some(vec![(cx(-2.0, 0.0), Hpp), (cx(-2.0, 0.0), Hmm)]),
        (G1, Hpp) => Some(vec![(cx(1.0, 0.0), H0)]),
        (G1, Hmm) => Some(vec![(cx(1.0, 0.0), H0)]),
        (G2, H0) => Some(vec![(cx(0.0, -2.0), Hpp), (cx(0.0, 2.0), Hmm)]),
        (G2, Hpp) => Some(vec![(cx(0.0, -1.0), H0)]),
        (G2, Hmm) => Some(vec![(cx(0.0, 1.0), H0)]),
        (GD, _) => Some(vec![]),
        _ => None,
    };
    match canonical {
        Some(v) => v,
        None => bracket_rhs::<T>(y, x)
            .into_iter()
            .map(|(c, t)| (-c, t))
            .collect(),
    }
}

/// One row of the verified bracket table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BracketEntry {
    pub lhs: String,
    pub rhs: String,
    pub max_residual: f64,
    pub pass: bool,
}

/// Outcome of [`verify_bracket_table`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BracketReport {
    pub entries: Vec<BracketEntry>,
    /// Numerically determined sign s in [G0, H--] = s * 2i H--.
    pub g0_hmm_sign: i32,
    pub all_pass: bool,
}

fn coords_of<T: Real>(hp: &HarmonicPoint<T>) -> Vec<C<T>> {
    let mut v = hp.base.zeta.clone();
    v.extend_from_slice(&hp.base.zeta_t);
    v.extend_from_slice(&hp.u.data);
    v
}

/// Velocity of the tagged invariant field at `hp`, in the flat coordinate
/// vector (zeta, zeta_t, u entries).
fn tag_velocity<T: Real>(tag: FiberTag, hp: &HarmonicPoint<T>) -> Vec<C<T>> {
    let len = hp.base.zeta.len();
    let zero = C::new(T::zero(), T::zero());
    let mut v = vec![zero; 2 * len + 4];
    let (base_m, fiber_x) = tag_generators::<T>(tag);
    if let Some(m) = base_m {
        let eta = hp.base.zeta[0];
        let zeta = hp.base.zeta[1];
        v[0] = m[(0, 0)] * eta + m[(0, 1)] * zeta;
        v[1] = m[(1, 0)] * eta + m[(1, 1)] * zeta;
        let mc = m.conj();
        let eta_t = hp.base.zeta_t[0];
        let zeta_t = hp.base.zeta_t[1];
        v[len] = mc[(0, 0)] * eta_t + mc[(0, 1)] * zeta_t;
        v[len + 1] = mc[(1, 0)] * eta_t + mc[(1, 1)] * zeta_t;
    }
    if let Some(x) = fiber_x {
        let ux = hp.u.mul(&x);
        for k in 0..4 {
            v[2 * len + k] = ux.data[k];
        }
    }
    v
}

fn flow_commutator_displacement<T: Real>(
    hp: &HarmonicPoint<T>,
    x: FiberTag,
    y: FiberTag,
    t: T,
) -> Vec<C<T>> {
    let n = hp.n();
    let dx = TangentDirection::from_tag(n, x);
    let dy = TangentDirection::from_tag(n, y);
    let p1 = flow_step(hp, &dx, t);
    let p2 = flow_step(&p1, &dy, t);
    let p3 = flow_step(&p2, &dx, -t);
    let p4 = flow_step(&p3, &dy, -t);
    let c0 = coords_of(hp);
    let c4 = coords_of(&p4);
    let inv_t2 = C::new(T::one() / (t * t), T::zero());
    c0.iter()
        .zip(&c4)
        .map(|(&a, &b)| (b - a) * inv_t2)
        .collect()
}

/// Finite-difference estimate of [X, Y] at `hp` (linear Richardson level).
fn bracket_estimate<T: Real>(hp: &HarmonicPoint<T>, x: FiberTag, y: FiberTag, step: T) -> Vec<C<T>> {
    let d1 = flow_commutator_displacement(hp, x, y, step);
    let d2 = flow_commutator_displacement(hp, x, y, step / rl(2.0));
    let two = cx::<T>(2.0, 0.0);
    d2.iter().zip(&d1).map(|(&a, &b)| two * a - b).collect()
}

fn combo_velocity<T: Real>(rhs: &[(C<T>, FiberTag)], hp: &HarmonicPoint<T>) -> Vec<C<T>> {
    let len = 2 * hp.base.zeta.len() + 4;
    let mut v = vec![C::new(T::zero(), T::zero()); len];
    for (c, tag) in rhs {
        let fv = tag_velocity(*tag, hp);
        for k in 0..len {
            v[k] = v[k] + *c * fv[k];
        }
    }
    v
}

fn rhs_label<T: Real>(rhs: &[(C<T>, FiberTag)]) -> String {
    if rhs.is_empty() {
        return "0".into();
    }
    rhs.iter()
        .map(|(c, tag)| {
            let re = c.re.to_f64().unwrap_or(f64::NAN);
            let im = c.im.to_f64().unwrap_or(f64::NAN);
            let coeff = if im == 0.0 {
                format!("{re}")
            } else if re == 0.0 {
                format!("{im}i")
            } else {
                format!("({re}+{im}i)")
            };
            format!("{coeff} {}", tag.label())
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Verify the full bracket table of the invariant fields by
/// finite-difference flow commutators at `samples` random points.
///
/// The sign of [G0, H--] is determined numerically (both candidates are
/// tried) and reported rather than assumed.
pub fn verify_bracket_table<T: Real>(
    n: usize,
    samples: usize,
    step: T,
    tol: T,
    seed: u64,
) -> BracketReport {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<HarmonicPoint<T>> = (0..samples)
        .map(|_| sample_harmonic_point(n, 0.5, &mut rng))
        .collect();
    let i2 = cx::<T>(0.0, 2.0);
    let mi2 = cx::<T>(0.0, -2.0);
    use FiberTag::*;
    let mut table: Vec<(FiberTag, FiberTag, Vec<(C<T>, FiberTag)>)> = Vec::new();
    for (x, y) in [
        (H0, Hpp),
        (H0, Hmm),
        (Hpp, Hmm),
        (G0, G1),
        (G0, G2),
        (G1, G2),
        (G0, H0),
        (G0, Hpp),
        (G1, H0),
        (G1, Hpp),
        (G1, Hmm),
        (G2, H0),
        (G2, Hpp),
        (G2, Hmm),
    ] {
        table.push((x, y, bracket_rhs::<T>(x, y)));
    }
    for other in [H0, Hpp, Hmm, G0, G1, G2] {
        table.push((GD, other, vec![]));
    }

    let residual_for = |x: FiberTag, y: FiberTag, rhs: &[(C<T>, FiberTag)]| -> T {
        let mut worst = T::zero();
        for p in &points {
            let est = bracket_estimate(p, x, y, step);
            let want = combo_velocity(rhs, p);
            for k in 0..est.len() {
                worst = worst.max((est[k] - want[k]).norm());
            }
        }
        worst
    };

    let mut entries = Vec::new();
    let mut all_pass = true;
    for (x, y, rhs) in &table {
        let r = residual_for(*x, *y, rhs);
        let pass = r <= tol;
        all_pass &= pass;
        entries.push(BracketEntry {
            lhs: format!("[{}, {}]", x.label(), y.label()),
            rhs: rhs_label(rhs),
            max_residual: r.to_f64().unwrap_or(f64::NAN),
            pass,
        });
    }

    // the printed table leaves the sign of [G0, H--] = ±2i H-- open
    let r_minus = residual_for(G0, Hmm, &[(mi2, Hmm)]);
    let r_plus = residual_for(G0, Hmm, &[(i2, Hmm)]);
    let (sign, r) = if r_minus <= r_plus {
        (-1, r_minus)
    } else {
        (1, r_plus)
    };
    let pass = r <= tol;
    all_pass &= pass;
    entries.push(BracketEntry {
        lhs: "[G0, H--]".into(),
        rhs: format!("{}2i H--", if sign < 0 { "-" } else { "+" }),
        max_residual: r.to_f64().unwrap_or(f64::NAN),
        pass,
    });

    BracketReport {
        entries,
        g0_hmm_sign: sign,
        all_pass,
    }
}
