//! ADHM-style matrix data on HP^n: validation of the algebraic
//! conditions, the field nu(z), and example generators.
//!
//! The data is a tuple (A_0, ..., A_n) of m x k quaternionic matrices;
//! nu(p) = A_0 + sum_a A_a blockdiag_k(M(r^a)) generates an instanton
//! core lambda = -nu^dagger when the reality and commutation conditions
//! hold.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::Core;
use crate::geometry::ConePoint;
use crate::quatlin::{quat_conj_transpose, CMatrix, QuatMatrix, Quaternion};
use crate::scalar::{rl, Real, C};

/// The tuple (n, k, m, A_0..A_n) of quaternionic matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AdhmData<T: Real> {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    /// n+1 matrices, each m x k quaternionic.
    pub a: Vec<QuatMatrix<T>>,
}

/// JSON wire form of one matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdhmWireMatrix<T: Real> {
    pub index: usize,
    pub rows: Vec<Vec<Quaternion<T>>>,
}

/// JSON wire form of [`AdhmData`]:
/// {"n", "k", "m", "matrices": [{"index", "rows": [[{w,x,y,z}, ...], ...]}]}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdhmWire<T: Real> {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub matrices: Vec<AdhmWireMatrix<T>>,
}

impl<T: Real> AdhmData<T> {
    pub fn new(n: usize, k: usize, m: usize, a: Vec<QuatMatrix<T>>) -> Result<Self> {
        if a.len() != n + 1 {
            return Err(Error::Shape(format!(
                "expected {} matrices, got {}",
                n + 1,
                a.len()
            )));
        }
        for (i, mat) in a.iter().enumerate() {
            if mat.qrows != m || mat.qcols != k {
                return Err(Error::Shape(format!(
                    "matrix {i} is {}x{}, expected {m}x{k}",
                    mat.qrows, mat.qcols
                )));
            }
        }
        Ok(AdhmData { n, k, m, a })
    }

    pub fn to_wire(&self) -> AdhmWire<T> {
        AdhmWire {
            n: self.n,
            k: self.k,
            m: self.m,
            matrices: self
                .a
                .iter()
                .enumerate()
                .map(|(index, mat)| AdhmWireMatrix {
                    index,
                    rows: (0..mat.qrows)
                        .map(|i| (0..mat.qcols).map(|j| mat[(i, j)]).collect())
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_wire(wire: &AdhmWire<T>) -> Result<Self> {
        let mut a = vec![QuatMatrix::zeros(wire.m, wire.k); wire.n + 1];
        let mut seen = vec![false; wire.n + 1];
        for wm in &wire.matrices {
            if wm.index > wire.n {
                return Err(Error::Index(format!(
                    "matrix index {} exceeds n = {}",
                    wm.index, wire.n
                )));
            }
            if wm.rows.len() != wire.m || wm.rows.iter().any(|r| r.len() != wire.k) {
                return Err(Error::Shape(format!(
                    "matrix {} must be {}x{}",
                    wm.index, wire.m, wire.k
                )));
            }
            a[wm.index] = QuatMatrix::from_fn(wire.m, wire.k, |i, j| wm.rows[i][j]);
            seen[wm.index] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::Shape("missing matrix indices in wire data".into()));
        }
        AdhmData::new(wire.n, wire.k, wire.m, a)
    }
}

/// Residuals of the algebraic ADHM conditions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Per-a norm of the quaternion-imaginary part of A_a A_a^dagger.
    pub reality_residuals: Vec<f64>,
    /// Per-(a,b) norm of A_a A_b^dagger - A_b A_a^dagger, a < b.
    pub commutation_residuals: Vec<(usize, usize, f64)>,
    /// Max deviation of I + nu^dagger nu from the R (x) I_2 block pattern
    /// at sampled points (a consequence of the conditions).
    pub consequence_residual: f64,
    pub tol: f64,
    pub valid: bool,
}

/// Check the reality and commutation conditions on the data.
pub fn validate<T: Real>(data: &AdhmData<T>, tol: T) -> ValidationReport {
    let dags: Vec<QuatMatrix<T>> = data.a.iter().map(quat_conj_transpose).collect();
    let mut reality = Vec::with_capacity(data.n + 1);
    for a in 0..=data.n {
        let p = data.a[a].mul(&dags[a]);
        reality.push(p.imag_norm().to_f64().unwrap_or(f64::NAN));
    }
    let mut commutation = Vec::new();
    for a in 0..=data.n {
        for b in a + 1..=data.n {
            let lhs = data.a[a].mul(&dags[b]);
            let rhs = data.a[b].mul(&dags[a]);
            commutation.push((a, b, lhs.sub(&rhs).frobenius_norm().to_f64().unwrap_or(f64::NAN)));
        }
    }
    // consequence: I + nu^dagger nu has real-multiple 2x2 blocks
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut consequence = 0.0f64;
    for _ in 0..5 {
        let p = sample_cone_point::<T, _>(data.n, 0.8, &mut rng);
        let nu = nu_at(data, &p).expect("sampled point is in the chart");
        let w = CMatrix::identity(2 * data.k).add(&nu.dagger().mul(&nu));
        for bi in 0..data.k {
            for bj in 0..data.k {
                let blk = w.block(2 * bi, 2 * bj, 2, 2);
                let mean = (blk[(0, 0)].re + blk[(1, 1)].re) / rl::<T>(2.0);
                let dev = blk
                    .sub(&CMatrix::identity(2).scale(C::new(mean, T::zero())))
                    .max_abs();
                consequence = consequence.max(dev.to_f64().unwrap_or(f64::NAN));
            }
        }
    }
    let tol_f = tol.to_f64().unwrap_or(1e-10);
    let valid = reality.iter().all(|&r| r < tol_f)
        && commutation.iter().all(|&(_, _, r)| r < tol_f);
    ValidationReport {
        reality_residuals: reality,
        commutation_residuals: commutation,
        consequence_residual: consequence,
        tol: tol_f,
        valid,
    }
}

fn sample_cone_point<T: Real, R: Rng>(n: usize, box_half: f64, rng: &mut R) -> ConePoint<T> {
    use crate::scalar::cx;
    let len = 2 * (n + 1);
    let mut zeta: Vec<C<T>> = Vec::with_capacity(len);
    zeta.push(cx::<T>(1.0, 0.0) + cx(rng.gen_range(-box_half..=box_half), rng.gen_range(-box_half..=box_half)));
    for _ in 1..len {
        zeta.push(cx(
            rng.gen_range(-box_half..=box_half),
            rng.gen_range(-box_half..=box_half),
        ));
    }
    ConePoint::new(zeta)
}

/// The 2x2 matrix M(r^a) read from the cone coordinates, extended
/// holomorphically: [[zeta^a, -zeta_t^a'], [zeta^a', zeta_t^a]].
fn m_hat<T: Real>(p: &ConePoint<T>, slot: usize) -> CMatrix<T> {
    CMatrix::two_by_two(
        p.zeta[2 * slot],
        -p.zeta_t[2 * slot + 1],
        p.zeta[2 * slot + 1],
        p.zeta_t[2 * slot],
    )
}

/// Holomorphic extension of M(r^a)^dagger.
fn m_hat_dag<T: Real>(p: &ConePoint<T>, slot: usize) -> CMatrix<T> {
    CMatrix::two_by_two(
        p.zeta_t[2 * slot],
        p.zeta_t[2 * slot + 1],
        -p.zeta[2 * slot + 1],
        p.zeta[2 * slot],
    )
}

fn blockdiag<T: Real>(block: &CMatrix<T>, copies: usize) -> CMatrix<T> {
    let mut m = CMatrix::zeros(2 * copies, 2 * copies);
    for i in 0..copies {
        m.set_block(2 * i, 2 * i, block);
    }
    m
}

fn check_chart<T: Real>(data: &AdhmData<T>, p: &ConePoint<T>) -> Result<()> {
    if p.zeta.len() != 2 * (data.n + 1) {
        return Err(Error::Shape(format!(
            "point has {} coordinates, data expects {}",
            p.zeta.len(),
            2 * (data.n + 1)
        )));
    }
    let head = p.zeta[0].norm_sqr()
        + p.zeta[1].norm_sqr()
        + p.zeta_t[0].norm_sqr()
        + p.zeta_t[1].norm_sqr();
    if head == T::zero() {
        return Err(Error::Chart("(zeta^0, zeta^0') = 0".into()));
    }
    Ok(())
}

/// nu(p) = complexify(A_0) + sum_a complexify(A_a) blockdiag_k(M(r^a)).
pub fn nu_at<T: Real>(data: &AdhmData<T>, p: &ConePoint<T>) -> Result<CMatrix<T>> {
    check_chart(data, p)?;
    let mut nu = data.a[0].complexify();
    for slot in 1..=data.n {
        let factor = blockdiag(&m_hat(p, slot), data.k);
        nu = nu.add(&data.a[slot].complexify().mul(&factor));
    }
    Ok(nu)
}

/// Holomorphic extension of nu(p)^dagger.
pub fn nu_dag_at<T: Real>(data: &AdhmData<T>, p: &ConePoint<T>) -> Result<CMatrix<T>> {
    check_chart(data, p)?;
    let mut nd = data.a[0].complexify().dagger();
    for slot in 1..=data.n {
        let factor = blockdiag(&m_hat_dag(p, slot), data.k);
        nd = nd.add(&factor.mul(&data.a[slot].complexify().dagger()));
    }
    Ok(nd)
}

/// The core lambda = -nu^dagger of the data, masked to depend only on the
/// r^a coordinates.
pub fn core_from_adhm<T: Real>(data: &AdhmData<T>) -> Core<T> {
    let mut mask = vec![true; 2 * (data.n + 1)];
    mask[0] = false;
    mask[1] = false;
    let d1 = data.clone();
    let d2 = data.clone();
    Core::new(
        2 * data.k,
        2 * data.m,
        mask,
        move |p| {
            nu_dag_at(&d1, p)
                .expect("chart point")
                .scale(C::new(-T::one(), T::zero()))
        },
        move |p| {
            nu_at(&d2, p)
                .expect("chart point")
                .scale(C::new(-T::one(), T::zero()))
        },
    )
}

/// The k = m = 1 instanton family: A_a = 1 for a = 1..n and
/// A_0 = scale - sum_a center_a, so nu(r) = scale + sum_a (r^a - center_a).
///
/// For the data to satisfy the commutation conditions the folded A_0 must
/// be a real quaternion; pass real centers (or centers whose sum is real).
pub fn one_instanton<T: Real>(n: usize, center: &[Quaternion<T>], scale: T) -> Result<AdhmData<T>> {
    if center.len() != n {
        return Err(Error::Shape(format!(
            "need {n} centers, got {}",
            center.len()
        )));
    }
    let mut a0 = Quaternion::new(scale, T::zero(), T::zero(), T::zero());
    for c in center {
        a0 = a0 - *c;
    }
    let mut mats = vec![QuatMatrix::from_fn(1, 1, |_, _| a0)];
    for _ in 0..n {
        mats.push(QuatMatrix::identity(1));
    }
    AdhmData::new(n, 1, 1, mats)
}

/// A valid two-column (k = 2, m = 1) family: A_0 = (c, -c) and
/// A_a = (1, 1) for a = 1..n.  Validity needs c + conj(c) folded into the
/// cross products to stay real, which holds for any quaternion c since the
/// two offsets cancel: A_0 A_a^† = c - c = 0.
///
/// Unlike the k = 1 family, whose data is automatically equivalent to an
/// instanton (its nu field is a single embedded quaternion, so I + ν†ν is
/// real-scalar for any entries), this family genuinely depends on the
/// algebraic conditions, making it the right base for negative controls.
pub fn two_column_example<T: Real>(n: usize, offset: Quaternion<T>) -> Result<AdhmData<T>> {
    let mut a0 = QuatMatrix::zeros(1, 2);
    a0[(0, 0)] = offset;
    a0[(0, 1)] = -offset;
    let mut mats = vec![a0];
    for _ in 0..n {
        let mut m = QuatMatrix::zeros(1, 2);
        m[(0, 0)] = Quaternion::one();
        m[(0, 1)] = Quaternion::one();
        mats.push(m);
    }
    AdhmData::new(n, 2, 1, mats)
}

/// Add a seeded random quaternionic perturbation of norm `epsilon` to one
/// entry of one coefficient matrix (the affine offset is excluded: bumping
/// it only translates the instanton center); deterministic per seed.
pub fn perturb<T: Real>(data: &AdhmData<T>, epsilon: T, seed: u64) -> AdhmData<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let which = rng.gen_range(1..=data.n);
    let i = rng.gen_range(0..data.m);
    let j = rng.gen_range(0..data.k);
    let mut q = Quaternion::new(
        rl::<T>(rng.gen_range(-1.0..=1.0)),
        rl::<T>(rng.gen_range(-1.0..=1.0)),
        rl::<T>(rng.gen_range(-1.0..=1.0)),
        rl::<T>(rng.gen_range(-1.0..=1.0)),
    );
    let norm = q.norm();
    if norm == T::zero() {
        q = Quaternion::i();
    } else {
        q = q.scale(T::one() / norm);
    }
    let mut out = data.clone();
    out.a[which][(i, j)] = out.a[which][(i, j)] + q.scale(epsilon);
    out
}
