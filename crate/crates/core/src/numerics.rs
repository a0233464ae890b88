//! Scalar special functions and small dense Hermitian linear algebra.
//!
//! Everything here is pure and allocation-light; matrices are at most a few
//! antennas wide, so the eigensolver favours robustness over speed.

use std::f64::consts::E;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Column vector of complex channel or beam coefficients.
pub type ComplexVector = DVector<Complex64>;
/// Dense complex matrix.
pub type ComplexMatrix = DMatrix<Complex64>;

/// The branch point of the real Lambert W function, `-1/e`.
pub const BRANCH_POINT: f64 = -1.0 / E;

// Inputs this close below -1/e are rounding noise from evaluating -exp(-1).
const BRANCH_SLACK: f64 = 1e-15;
const HALLEY_STEP_TOL: f64 = 1e-14;
const HALLEY_MAX_ITERS: usize = 64;

fn branch_series(p: f64) -> f64 {
    // Expansion of W around -1/e in p = ±sqrt(2(e·x + 1)).
    -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p - 43.0 / 540.0 * p * p * p * p
}

fn branch_distance(x: f64) -> f64 {
    // 2·e·(x + 1/e), computed as a difference so that it is exact near -1/e.
    (2.0 * E * (x - BRANCH_POINT)).max(0.0)
}

fn halley(x: f64, mut w: f64) -> f64 {
    for _ in 0..HALLEY_MAX_ITERS {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        w -= step;
        if step.abs() <= HALLEY_STEP_TOL * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// Principal branch `W0(x)`, defined for `x >= -1/e`, with `W0(x) >= -1`.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < BRANCH_POINT - BRANCH_SLACK {
        return Err(Error::domain("lambert_w0", format!("x = {x} < -1/e")));
    }
    if x <= BRANCH_POINT {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let guess = if x < -0.25 {
        branch_series(branch_distance(x).sqrt())
    } else if x < 3.0 {
        x.ln_1p()
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };
    Ok(halley(x, guess).max(-1.0))
}

/// Lower branch `W_{-1}(x)`, defined for `-1/e <= x < 0`, with `W_{-1}(x) <= -1`.
pub fn lambert_wm1(x: f64) -> Result<f64> {
    if x.is_nan() || x < BRANCH_POINT - BRANCH_SLACK || x >= 0.0 {
        return Err(Error::domain(
            "lambert_wm1",
            format!("x = {x} outside [-1/e, 0)"),
        ));
    }
    if x <= BRANCH_POINT {
        return Ok(-1.0);
    }
    let guess = if x < -0.25 {
        branch_series(-branch_distance(x).sqrt())
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    };
    Ok(halley(x, guess).min(-1.0))
}

/// `F(x) = exp(W0(-e^{-x}) + x)`: the root `y >= 1` of `ln y + 1/y = x`.
///
/// This inverts the detection-threshold function on its increasing branch,
/// so `ln y + 1/y >= x` holds for `y >= 1` exactly when `y >= F(x)`.
pub fn big_f(x: f64) -> Result<f64> {
    if x.is_nan() || x < 1.0 {
        return Err(Error::domain("big_f", format!("x = {x} < 1")));
    }
    let w = lambert_w0(-(-x).exp())?;
    Ok((w + x).exp().max(1.0))
}

/// The discarded branch `exp(W_{-1}(-e^{-x}) + x)`, the root in `(0, 1]`.
///
/// Only used to exercise branch selection; the solvers never call it.
pub fn big_f_lower(x: f64) -> Result<f64> {
    if x.is_nan() || x < 1.0 {
        return Err(Error::domain("big_f_lower", format!("x = {x} < 1")));
    }
    let arg = -(-x).exp();
    if arg >= 0.0 {
        // e^{-x} underflowed; the lower root tends to zero.
        return Ok(0.0);
    }
    let w = lambert_wm1(arg)?;
    Ok((w + x).exp().min(1.0))
}

/// Dense Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Validates that `m` is square and Hermitian to 1e-12 relative tolerance,
    /// then symmetrizes it exactly.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "Hermitian matrix must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        let n = m.nrows();
        for i in 0..n {
            for j in i..n {
                let d = (m[(i, j)] - m[(j, i)].conj()).norm();
                if !m[(i, j)].re.is_finite() || !m[(i, j)].im.is_finite() || d > 1e-12 * scale {
                    return Err(Error::domain(
                        "HermitianMatrix::new",
                        format!("entry ({i},{j}) breaks Hermitian symmetry"),
                    ));
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Builds `(m + m^H)/2` without validation.
    pub fn symmetrized(m: ComplexMatrix) -> Self {
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        Self(h)
    }

    /// The rank-one matrix `h h^H`.
    pub fn outer(h: &ComplexVector) -> Self {
        Self::symmetrized(h * h.adjoint())
    }

    pub fn identity(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(ComplexMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// `Re Tr(self · other)`, exact for Hermitian pairs.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.transpose().iter())
            .map(|(a, b)| (a * b).re)
            .sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// `v^H · self · v` (real for Hermitian input).
    pub fn quad_form(&self, v: &ComplexVector) -> f64 {
        (v.adjoint() * &self.0 * v)[(0, 0)].re
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(&self.0 * Complex64::new(c, 0.0))
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Self {
        Self(&self.0 - &other.0)
    }

    pub fn eig(&self) -> HermitianEigen {
        hermitian_eig(self)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eig().values[0]
    }

    pub fn lambda_min(&self) -> f64 {
        *self.eig().values.last().expect("nonempty")
    }
}

/// Eigen-decomposition with eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<ComplexVector>,
}

impl HermitianEigen {
    /// Reassembles `Σ λ_i u_i u_i^H`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.vectors[0].len();
        let mut out = ComplexMatrix::zeros(n, n);
        for (lam, u) in self.values.iter().zip(&self.vectors) {
            out += u * u.adjoint() * Complex64::new(*lam, 0.0);
        }
        out
    }
}

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations.
///
/// Each rotation first removes the phase of the pivot `a_pq`, then applies
/// the classical real rotation to the resulting 2x2 real symmetric block.
pub fn hermitian_eig(h: &HermitianMatrix) -> HermitianEigen {
    let n = h.dim();
    let mut a = h.matrix().clone();
    let mut v = ComplexMatrix::identity(n, n);
    let scale = h.frobenius_norm();
    if scale > 0.0 {
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)].norm_sqr())
                .sum::<f64>()
                .sqrt();
            if off <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    HermitianEigen {
        values: order.iter().map(|&i| a[(i, i)].re).collect(),
        vectors: order.iter().map(|&i| v.column(i).into_owned()).collect(),
    }
}

fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    if r <= 1e-300 * (app.abs() + aqq.abs()) {
        a[(p, q)] = Complex64::new(0.0, 0.0);
        a[(q, p)] = Complex64::new(0.0, 0.0);
        return;
    }
    let phase = apq / r;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // G = D·R with D = diag(.., e^{-jφ} at q, ..), R the real rotation.
    let g_pp = Complex64::new(c, 0.0);
    let g_pq = Complex64::new(s, 0.0);
    let g_qp = -phase.conj() * s;
    let g_qq = phase.conj() * c;
    let n = a.nrows();
    for i in 0..n {
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a[(i, p)] = aip * g_pp + aiq * g_qp;
        a[(i, q)] = aip * g_pq + aiq * g_qq;
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip * g_pp + viq * g_qp;
        v[(i, q)] = vip * g_pq + viq * g_qq;
    }
    for j in 0..n {
        let apj = a[(p, j)];
        let aqj = a[(q, j)];
        a[(p, j)] = g_pp.conj() * apj + g_qp.conj() * aqj;
        a[(q, j)] = g_pq.conj() * apj + g_qq.conj() * aqj;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
}

/// Euclidean norm of a complex vector.
pub fn norm(v: &ComplexVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `v / ‖v‖`, or `None` for the zero vector.
pub fn normalized(v: &ComplexVector) -> Option<ComplexVector> {
    let n = norm(v);
    (n > 0.0 && n.is_finite()).then(|| v.map(|z| z / n))
}

/// `|a^H b|²`.
pub fn abs_inner_sq(a: &ComplexVector, b: &ComplexVector) -> f64 {
    a.dotc(b).norm_sqr()
}

/// Unit dominant right singular vector of `g`; `None` when `g` is zero.
pub fn dominant_right_singular(g: &ComplexMatrix) -> Option<ComplexVector> {
    let gram = HermitianMatrix::symmetrized(g.adjoint() * g);
    let eig = gram.eig();
    (eig.values[0] > 0.0).then(|| eig.vectors[0].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn w0_anchors() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert_eq!(lambert_w0(BRANCH_POINT).unwrap(), -1.0);
        assert_eq!(lambert_w0(-(-1.0f64).exp()).unwrap(), -1.0);
        let w = lambert_w0(1.0).unwrap();
        assert!((w - 0.567_143_290_4).abs() < 1e-10);
        assert!(lambert_w0(-0.4).is_err());
    }

    #[test]
    fn wm1_anchors() {
        assert_eq!(lambert_wm1(BRANCH_POINT).unwrap(), -1.0);
        assert!((lambert_wm1(-0.1).unwrap() + 3.577_152_064_0).abs() < 1e-9);
        assert!((lambert_wm1(-0.01).unwrap() + 6.472_775_124_3).abs() < 1e-9);
        assert!(lambert_wm1(0.0).is_err());
        assert!(lambert_wm1(0.5).is_err());
        assert!(lambert_wm1(-0.5).is_err());
    }

    #[test]
    fn w_residual_near_branch_point() {
        for k in 1..40 {
            let x = BRANCH_POINT + 10f64.powi(-k / 2);
            for (w, x) in [(lambert_w0(x).unwrap(), x), (lambert_wm1(x.min(-1e-300)).unwrap(), x.min(-1e-300))] {
                assert!((w * w.exp() - x).abs() <= 1e-12 * x.abs().max(1.0), "x = {x}");
            }
        }
    }

    fn bisect_f(x: f64) -> f64 {
        let (mut lo, mut hi) = (1.0f64, 1.0f64);
        while hi.ln() + 1.0 / hi < x {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.ln() + 1.0 / mid < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn big_f_matches_bisection() {
        for x in [1.0001, 1.01, 1.1, 1.5, 3.0, 7.0, 20.0] {
            let y = big_f(x).unwrap();
            assert!((y - bisect_f(x)).abs() <= 1e-9 * y, "x = {x}");
        }
    }

    #[test]
    fn big_f_anchors() {
        assert_eq!(big_f(1.0).unwrap(), 1.0);
        assert!((big_f(2.0).unwrap() - bisect_f(2.0)).abs() < 1e-9);
        assert!((big_f(2.0).unwrap() - 6.305_395_279_3).abs() < 1e-9);
        assert!(big_f(0.99).is_err());
        assert_eq!(big_f_lower(1.0).unwrap(), 1.0);
        let lo = big_f_lower(2.0).unwrap();
        assert!(lo < 1.0 && (lo.ln() + 1.0 / lo - 2.0).abs() < 1e-10);
    }

    #[test]
    fn big_f_far_field() {
        let y = big_f(40.0).unwrap();
        assert!((y.ln() + 1.0 / y - 40.0).abs() < 1e-12);
    }

    #[test]
    fn hermitian_validation() {
        let bad = ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 1.), c(0., 1.), c(1., 0.)]);
        assert!(HermitianMatrix::new(bad).is_err());
        let good = ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 1.), c(0., -1.), c(1., 0.)]);
        assert!(HermitianMatrix::new(good).is_ok());
        assert!(HermitianMatrix::new(ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn eig_identity_and_rank_one() {
        let e = hermitian_eig(&HermitianMatrix::identity(4));
        assert!(e.values.iter().all(|&l| (l - 1.0).abs() < 1e-14));

        let h = dvector![c(1.0, 2.0), c(-0.5, 0.1), c(0.0, -3.0)];
        let e = hermitian_eig(&HermitianMatrix::outer(&h));
        let n2 = h.iter().map(|z| z.norm_sqr()).sum::<f64>();
        assert!((e.values[0] - n2).abs() < 1e-12 * n2);
        assert!(e.values[1..].iter().all(|l| l.abs() < 1e-12 * n2));
        assert!(abs_inner_sq(&e.vectors[0], &h) > (1.0 - 1e-12) * n2);
    }

    #[test]
    fn eig_residual_and_reconstruction() {
        let raw = ComplexMatrix::from_fn(5, 5, |i, j| c((i * 7 + j * 3) as f64 % 5.0 - 2.0, (i as f64 - j as f64) * 0.3));
        let h = HermitianMatrix::symmetrized(raw);
        let e = hermitian_eig(&h);
        let hn = h.frobenius_norm();
        for (lam, u) in e.values.iter().zip(&e.vectors) {
            let r = h.matrix() * u - u * Complex64::new(*lam, 0.0);
            assert!(norm(&r) <= 1e-10 * hn);
            assert!((norm(u) - 1.0).abs() < 1e-12);
        }
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let diff = e.reconstruct() - h.matrix();
        assert!(diff.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() <= 1e-9 * hn);
    }
}
