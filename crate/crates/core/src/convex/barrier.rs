//! Log-barrier interior-point engine over `R^n`.
//!
//! Minimizes a linear objective `c^T x` subject to convex quadratic
//! inequalities and at most one linear matrix inequality `F(x) ≻ 0`.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use crate::numerics::ComplexMatrix;

/// `x^T P x + q^T x + r < 0`, with `P` symmetric PSD (absent when linear).
#[derive(Debug, Clone)]
pub(crate) struct Quad {
    pub p: Option<DMatrix<f64>>,
    pub q: DVector<f64>,
    pub r: f64,
}

impl Quad {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let lin = self.q.dot(x) + self.r;
        match &self.p {
            Some(p) => x.dot(&(p * x)) + lin,
            None => lin,
        }
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.p {
            Some(p) => p * x * 2.0 + &self.q,
            None => self.q.clone(),
        }
    }

    /// The same constraint in `(x, s)` space with `-s` added.
    pub fn lifted(&self) -> Quad {
        let n = self.q.len();
        let q = self.q.clone().insert_row(n, -1.0);
        Quad {
            p: self.p.as_ref().map(|p| p.clone().insert_row(n, 0.0).insert_column(n, 0.0)),
            q,
            r: self.r,
        }
    }
}

/// `F0 + Σ x_k F_k ≻ 0` with Hermitian `F_k`.
#[derive(Debug, Clone)]
pub(crate) struct Lmi {
    pub f0: ComplexMatrix,
    pub fk: Vec<ComplexMatrix>,
}

impl Lmi {
    pub fn at(&self, x: &DVector<f64>) -> ComplexMatrix {
        let mut s = self.f0.clone();
        for (k, f) in self.fk.iter().enumerate() {
            if x[k] != 0.0 {
                s += f * Complex64::new(x[k], 0.0);
            }
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.f0.nrows()
    }

    /// The same inequality in `(x, s)` space with `+s·I` added.
    pub fn lifted(&self) -> Lmi {
        let mut fk = self.fk.clone();
        fk.push(ComplexMatrix::identity(self.dim(), self.dim()));
        Lmi {
            f0: self.f0.clone(),
            fk,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BarrierProblem {
    pub c: DVector<f64>,
    pub quads: Vec<Quad>,
    pub lmi: Option<Lmi>,
}

struct Local {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

/// Lower Cholesky factor of a Hermitian matrix, or `None` unless it is
/// numerically positive definite. (nalgebra's complex Cholesky takes complex
/// square roots of negative pivots instead of failing.)
fn hermitian_cholesky(a: &ComplexMatrix) -> Option<ComplexMatrix> {
    let n = a.nrows();
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex64::new(djj, 0.0);
        for i in j + 1..n {
            let mut z = a[(i, j)];
            for k in 0..j {
                z -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = z / djj;
        }
    }
    Some(l)
}

fn log_det_from_factor(l: &ComplexMatrix) -> f64 {
    (0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum()
}

fn inverse_from_factor(l: &ComplexMatrix) -> ComplexMatrix {
    let n = l.nrows();
    // L^{-1} by forward substitution, then A^{-1} = L^{-H} L^{-1}.
    let mut li = ComplexMatrix::zeros(n, n);
    for col in 0..n {
        for i in col..n {
            let mut z = if i == col { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            for k in col..i {
                z -= l[(i, k)] * li[(k, col)];
            }
            li[(i, col)] = z / l[(i, i)];
        }
    }
    li.adjoint() * li
}

fn re_trace_prod(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    // Re Tr(AB) without forming the product.
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (a[(i, j)], b[(j, i)]);
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

impl BarrierProblem {
    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// Barrier parameter weight: the number of scalar constraints plus the
    /// LMI order.
    pub fn order(&self) -> usize {
        self.quads.len() + self.lmi.as_ref().map_or(0, Lmi::dim)
    }

    fn barrier_value(&self, x: &DVector<f64>) -> Option<f64> {
        let mut v = 0.0;
        for q in &self.quads {
            let f = q.value(x);
            if !(f < 0.0) {
                return None;
            }
            v -= (-f).ln();
        }
        if let Some(lmi) = &self.lmi {
            v -= log_det_from_factor(&hermitian_cholesky(&lmi.at(x))?);
        }
        v.is_finite().then_some(v)
    }

    fn local(&self, x: &DVector<f64>) -> Option<Local> {
        let n = self.dim();
        let mut value = 0.0;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        for q in &self.quads {
            let f = q.value(x);
            if !(f < 0.0) {
                return None;
            }
            value -= (-f).ln();
            let g = q.grad(x);
            grad.axpy(-1.0 / f, &g, 1.0);
            hess.ger(1.0 / (f * f), &g, &g, 1.0);
            if let Some(p) = &q.p {
                hess += p * (-2.0 / f);
            }
        }
        if let Some(lmi) = &self.lmi {
            let l = hermitian_cholesky(&lmi.at(x))?;
            value -= log_det_from_factor(&l);
            let inv = inverse_from_factor(&l);
            let pk: Vec<ComplexMatrix> = lmi.fk.iter().map(|f| &inv * f).collect();
            for k in 0..pk.len() {
                grad[k] -= (0..lmi.dim()).map(|i| pk[k][(i, i)].re).sum::<f64>();
                for j in 0..=k {
                    let h = re_trace_prod(&pk[k], &pk[j]);
                    hess[(k, j)] += h;
                    if j != k {
                        hess[(j, k)] += h;
                    }
                }
            }
        }
        value.is_finite().then_some(Local { value, grad, hess })
    }

    pub fn is_interior(&self, x: &DVector<f64>) -> bool {
        self.barrier_value(x).is_some()
    }
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let n = hess.nrows();
    let scale = (0..n).map(|i| hess[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut h = hess.clone();
        if reg > 0.0 {
            for i in 0..n {
                h[(i, i)] += reg;
            }
        }
        if let Some(ch) = Cholesky::new(h) {
            let d = -ch.solve(grad);
            if d.iter().all(|z| z.is_finite()) {
                return Some(d);
            }
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stop {
    /// `m·μ` reached the tolerance.
    Converged,
    /// The caller's early-exit test fired after a centering stage.
    Early,
    /// A centering stage ran out of Newton steps.
    Budget,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: DVector<f64>,
    pub mu: f64,
    pub newton_steps: usize,
    pub stop: Stop,
}

pub(crate) const NEWTON_BUDGET: usize = 200;
const NEWTON_TOL: f64 = 1e-10;

/// Path-following: minimize `c^T x + μ·B(x)` for `μ = 1, 0.1, …` until
/// `m·μ <= tol`. `x0` must be strictly interior.
pub(crate) fn path_follow(
    prob: &BarrierProblem,
    x0: DVector<f64>,
    tol: f64,
    early: impl Fn(&DVector<f64>) -> bool,
) -> Outcome {
    debug_assert!(prob.is_interior(&x0));
    let m = prob.order().max(1) as f64;
    let mut x = x0;
    let mut mu = 1.0;
    let mut steps = 0;
    loop {
        let centered = center(prob, &mut x, mu, &mut steps);
        if !centered {
            return Outcome { x, mu, newton_steps: steps, stop: Stop::Budget };
        }
        if early(&x) {
            return Outcome { x, mu, newton_steps: steps, stop: Stop::Early };
        }
        if m * mu <= tol {
            return Outcome { x, mu, newton_steps: steps, stop: Stop::Converged };
        }
        mu /= 10.0;
    }
}

/// Newton centering for a fixed `μ`; false when the step budget ran out.
fn center(prob: &BarrierProblem, x: &mut DVector<f64>, mu: f64, steps: &mut usize) -> bool {
    let t = 1.0 / mu;
    for _ in 0..NEWTON_BUDGET {
        let Some(loc) = prob.local(x) else {
            return false;
        };
        let grad = &prob.c * t + &loc.grad;
        let hess = loc.hess;
        let Some(dir) = newton_direction(&hess, &grad) else {
            return true;
        };
        let slope = grad.dot(&dir);
        let decrement = -slope;
        if decrement / 2.0 <= NEWTON_TOL || !(decrement > 0.0) {
            return true;
        }
        *steps += 1;
        // Changes are measured directly: the linear term t·c^T x is huge at
        // small μ and would swamp the comparison of absolute values.
        let lin_slope = t * prob.c.dot(&dir);
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-14 {
            let cand = &*x + &dir * step;
            if let Some(b) = prob.barrier_value(&cand) {
                let change = step * lin_slope + (b - loc.value);
                if change <= 0.25 * step * slope && change < 0.0 {
                    *x = cand;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            // Rounding floor: no representable descent left, so x is as
            // central as double precision allows.
            return true;
        }
    }
    false
}

/// Phase one: finds a strictly interior point of the constraints, or the
/// smallest achievable uniform violation when there is none.
///
/// Solves `min s` subject to every quadratic and the LMI relaxed by `s`,
/// plus `s >= -1` to keep the problem bounded. Constraints listed in `hard`
/// (by index) are kept unrelaxed and must hold strictly at `x0`.
pub(crate) fn phase_one(
    quads: &[Quad],
    hard: &[usize],
    lmi: Option<&Lmi>,
    x0: &DVector<f64>,
    tol: f64,
) -> PhaseOne {
    let n = x0.len();
    let mut lifted: Vec<Quad> = quads
        .iter()
        .enumerate()
        .map(|(i, q)| {
            if hard.contains(&i) {
                Quad {
                    p: q.p.as_ref().map(|p| p.clone().insert_row(n, 0.0).insert_column(n, 0.0)),
                    q: q.q.clone().insert_row(n, 0.0),
                    r: q.r,
                }
            } else {
                q.lifted()
            }
        })
        .collect();
    let mut floor = DVector::zeros(n + 1);
    floor[n] = -1.0;
    lifted.push(Quad { p: None, q: floor, r: -1.0 });
    let lmi = lmi.map(Lmi::lifted);

    let mut worst = quads
        .iter()
        .enumerate()
        .filter(|(i, _)| !hard.contains(i))
        .map(|(_, q)| q.value(x0))
        .fold(f64::NEG_INFINITY, f64::max);
    if let Some(l) = &lmi {
        let lam = crate::numerics::HermitianMatrix::symmetrized(l.f0.clone() + lmi_shift(l, x0))
            .lambda_min();
        worst = worst.max(-lam);
    }
    if !worst.is_finite() {
        worst = 0.0;
    }
    if worst < 0.0 {
        return PhaseOne::Feasible(x0.clone(), 0);
    }
    let s0 = worst + 1.0;
    let start = x0.clone().insert_row(n, s0);
    let prob = BarrierProblem {
        c: {
            let mut c = DVector::zeros(n + 1);
            c[n] = 1.0;
            c
        },
        quads: lifted,
        lmi,
    };
    let out = path_follow(&prob, start, tol, |y| y[n] < 0.0);
    let s = out.x[n];
    let x = out.x.rows(0, n).into_owned();
    match out.stop {
        Stop::Early => PhaseOne::Feasible(x, out.newton_steps),
        _ if s < 0.0 => PhaseOne::Feasible(x, out.newton_steps),
        Stop::Converged => PhaseOne::Infeasible { violation: s.max(0.0) },
        Stop::Budget => PhaseOne::Stalled,
    }
}

fn lmi_shift(l: &Lmi, x0: &DVector<f64>) -> ComplexMatrix {
    // F(x0) - F0 using only the original coordinates (the lifted LMI has one
    // extra coefficient for s).
    let mut s = ComplexMatrix::zeros(l.dim(), l.dim());
    for (k, f) in l.fk.iter().take(x0.len()).enumerate() {
        s += f * Complex64::new(x0[k], 0.0);
    }
    s
}

#[derive(Debug, Clone)]
pub(crate) enum PhaseOne {
    Feasible(DVector<f64>, usize),
    Infeasible { violation: f64 },
    Stalled,
}
