use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::barrier::{path_follow, phase_one, BarrierProblem, Lmi, PhaseOne, Quad, Stop};
use super::SolveError;
use crate::error::Error;
use crate::numerics::{ComplexMatrix, HermitianMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

/// `Tr(A W) (=|<=|>=) b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpConstraint {
    pub a: HermitianMatrix,
    pub rel: Relation,
    pub b: f64,
}

impl SdpConstraint {
    pub fn new(a: HermitianMatrix, rel: Relation, b: f64) -> Self {
        Self { a, rel, b }
    }

    /// Signed violation at `w` (positive means violated).
    pub fn violation(&self, w: &HermitianMatrix) -> f64 {
        let lhs = self.a.inner(w);
        match self.rel {
            Relation::Eq => (lhs - self.b).abs(),
            Relation::Le => lhs - self.b,
            Relation::Ge => self.b - lhs,
        }
    }
}

/// Maximize `Tr(C W)` over Hermitian `W ⪰ 0` and the listed constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub objective: HermitianMatrix,
    pub constraints: Vec<SdpConstraint>,
}

impl SdpProblem {
    pub fn dim(&self) -> usize {
        self.objective.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub w: HermitianMatrix,
    pub objective: f64,
    /// Upper bound on the optimum: an explicit Lagrangian bound when the only
    /// equality fixes the trace, otherwise the central-path estimate.
    pub dual_bound: f64,
    /// Largest constraint violation at `w` (equalities by absolute residual).
    pub max_violation: f64,
    pub newton_steps: usize,
}

/// Frobenius-orthonormal basis of `M x M` Hermitian matrices.
fn hermitian_basis(m: usize) -> Vec<ComplexMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        let mut e = ComplexMatrix::zeros(m, m);
        e[(i, i)] = Complex64::new(1.0, 0.0);
        out.push(e);
    }
    for i in 0..m {
        for j in i + 1..m {
            let mut e = ComplexMatrix::zeros(m, m);
            e[(i, j)] = Complex64::new(s, 0.0);
            e[(j, i)] = Complex64::new(s, 0.0);
            out.push(e);
            let mut e = ComplexMatrix::zeros(m, m);
            e[(i, j)] = Complex64::new(0.0, s);
            e[(j, i)] = Complex64::new(0.0, -s);
            out.push(e);
        }
    }
    out
}

fn coords(a: &ComplexMatrix, basis: &[ComplexMatrix]) -> DVector<f64> {
    DVector::from_iterator(
        basis.len(),
        basis.iter().map(|e| a.iter().zip(e.iter()).map(|(x, y)| (x.conj() * y).re).sum::<f64>()),
    )
}

fn assemble(w: &DVector<f64>, basis: &[ComplexMatrix]) -> ComplexMatrix {
    let m = basis[0].nrows();
    let mut out = ComplexMatrix::zeros(m, m);
    for (k, e) in basis.iter().enumerate() {
        if w[k] != 0.0 {
            out += e * Complex64::new(w[k], 0.0);
        }
    }
    out
}

/// Affine parameterization `w = w0 + N z` of the equality constraints.
struct Affine {
    w0: DVector<f64>,
    null: DMatrix<f64>,
}

fn eliminate(rows: &[DVector<f64>], rhs: &[f64], n: usize) -> Result<Affine, SolveError> {
    if rows.is_empty() {
        return Ok(Affine {
            w0: DVector::zeros(n),
            null: DMatrix::identity(n, n),
        });
    }
    // Pad to square so the SVD returns a complete right basis.
    let p = rows.len().max(n);
    let mut a = DMatrix::zeros(p, n);
    for (i, r) in rows.iter().enumerate() {
        a.set_row(i, &r.transpose());
    }
    let svd = a.clone().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let smax = svd.singular_values.max();
    let cut = 1e-12 * smax.max(1e-300);
    let mut b = DVector::zeros(p);
    for (i, v) in rhs.iter().enumerate() {
        b[i] = *v;
    }
    let mut w0 = DVector::zeros(n);
    let mut null_cols = Vec::new();
    for k in 0..svd.singular_values.len() {
        let s = svd.singular_values[k];
        let vk = vt.row(k).transpose();
        if s > cut {
            w0 += &vk * (u.column(k).dot(&b) / s);
        } else {
            null_cols.push(vk);
        }
    }
    let resid = (&a * &w0 - &b).norm();
    if resid > 1e-9 * (1.0 + b.norm()) {
        return Err(SolveError::Infeasible { violation: resid });
    }
    let null = if null_cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&null_cols)
    };
    Ok(Affine { w0, null })
}

/// Solves a small dense SDP by the barrier method on the real
/// parameterization of Hermitian matrices.
pub fn solve_small_sdp(p: &SdpProblem, tol: f64) -> Result<SdpSolution, SolveError> {
    let m = p.dim();
    if m == 0 {
        return Err(Error::Dimension("empty matrix variable".into()).into());
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParam(format!("tolerance {tol} must be positive")).into());
    }
    for (i, c) in p.constraints.iter().enumerate() {
        if c.a.dim() != m {
            return Err(Error::Dimension(format!("constraint {i} is {}x{0}, expected {m}x{m}", c.a.dim())).into());
        }
    }
    let basis = hermitian_basis(m);
    let n = basis.len();

    let mut eq_rows = Vec::new();
    let mut eq_rhs = Vec::new();
    for c in p.constraints.iter().filter(|c| c.rel == Relation::Eq) {
        let scale = c.a.frobenius_norm().max(c.b.abs()).max(1e-300);
        eq_rows.push(coords(c.a.matrix(), &basis) / scale);
        eq_rhs.push(c.b / scale);
    }
    let aff = eliminate(&eq_rows, &eq_rhs, n)?;
    let free = aff.null.ncols();
    let w0 = HermitianMatrix::symmetrized(assemble(&aff.w0, &basis));

    let mut quads = Vec::new();
    // (constraint index, sign/scale) of every inequality handed to the barrier.
    let mut kept = Vec::new();
    for (idx, c) in p.constraints.iter().enumerate().filter(|(_, c)| c.rel != Relation::Eq) {
        let sign = if c.rel == Relation::Le { 1.0 } else { -1.0 };
        let scale = c.a.frobenius_norm().max(c.b.abs()).max(1e-300);
        let va = coords(c.a.matrix(), &basis) * (sign / scale);
        let q = aff.null.transpose() * &va;
        let r = va.dot(&aff.w0) - sign * c.b / scale;
        if q.norm() <= 1e-13 {
            // Constant on the affine set: check it once and drop it.
            if r > tol {
                return Err(SolveError::Infeasible { violation: r });
            }
            continue;
        }
        quads.push(Quad { p: None, q, r });
        kept.push((idx, sign / scale));
    }

    let objective_of = |w: &HermitianMatrix| p.objective.inner(w);
    let max_violation_of = |w: &HermitianMatrix| {
        p.constraints
            .iter()
            .map(|c| c.violation(w))
            .fold(-w.lambda_min(), f64::max)
    };

    if free == 0 {
        let viol = max_violation_of(&w0);
        if viol > tol {
            return Err(SolveError::Infeasible { violation: viol });
        }
        let obj = objective_of(&w0);
        return Ok(SdpSolution {
            objective: obj,
            dual_bound: obj,
            max_violation: viol,
            newton_steps: 0,
            w: w0,
        });
    }

    let fk: Vec<ComplexMatrix> = (0..free)
        .map(|j| assemble(&aff.null.column(j).into_owned(), &basis))
        .collect();
    let lmi = Lmi {
        f0: w0.matrix().clone(),
        fk,
    };
    let c_raw = aff.null.transpose() * coords(p.objective.matrix(), &basis);
    let c_norm = c_raw.norm();
    let c = if c_norm > 1e-300 { -&c_raw / c_norm } else { DVector::zeros(free) };

    let z0 = DVector::zeros(free);
    let (start, p1_steps) = match phase_one(&quads, &[], Some(&lmi), &z0, tol) {
        PhaseOne::Feasible(z, k) => (z, k),
        PhaseOne::Infeasible { violation } => return Err(SolveError::Infeasible { violation }),
        PhaseOne::Stalled => return Err(SolveError::NotConverged { newton_steps: 0 }),
    };
    let prob = BarrierProblem {
        c,
        quads,
        lmi: Some(lmi),
    };
    let out = path_follow(&prob, start, tol, |_| false);
    let steps = out.newton_steps + p1_steps;
    if out.stop == Stop::Budget {
        return Err(SolveError::NotConverged { newton_steps: steps });
    }
    let w = HermitianMatrix::symmetrized(prob.lmi.as_ref().unwrap().at(&out.x));
    let objective = objective_of(&w);
    let estimate = objective + prob.order() as f64 * out.mu * c_norm;
    let dual_bound = trace_lagrangian_bound(p, &prob, &kept, &out.x, out.mu, c_norm).unwrap_or(estimate);
    Ok(SdpSolution {
        objective,
        dual_bound,
        max_violation: max_violation_of(&w),
        newton_steps: steps,
        w,
    })
}

/// When the only equality is `Tr(aI·W) = b`, the inequality multipliers `λ`
/// of the centered point give the bound
/// `(b/a)·λ_max(C - Σ λ_j A_j) + Σ λ_j b_j`, valid for any `λ >= 0`.
fn trace_lagrangian_bound(
    p: &SdpProblem,
    prob: &BarrierProblem,
    kept: &[(usize, f64)],
    z: &DVector<f64>,
    mu: f64,
    c_norm: f64,
) -> Option<f64> {
    let m = p.dim();
    let mut eqs = p.constraints.iter().filter(|c| c.rel == Relation::Eq);
    let (Some(eq), None) = (eqs.next(), eqs.next()) else {
        return None;
    };
    let a0 = eq.a.trace() / m as f64;
    if a0 <= 0.0 || eq.a.sub(&HermitianMatrix::identity(m).scaled(a0)).frobenius_norm() > 1e-12 * a0 {
        return None;
    }
    let mut lag = p.objective.clone();
    let mut constant = 0.0;
    for (q, &(idx, factor)) in prob.quads.iter().zip(kept) {
        let c = &p.constraints[idx];
        let lam = mu / -(q.q.dot(z) + q.r) * c_norm * factor;
        lag = lag.sub(&c.a.scaled(lam));
        constant += lam * c.b;
    }
    Some(eq.b / a0 * lag.lambda_max() + constant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn trace_one(m: usize) -> SdpConstraint {
        SdpConstraint::new(HermitianMatrix::identity(m), Relation::Eq, 1.0)
    }

    #[test]
    fn spectral_optimum() {
        let h = dvector![c(1.0, 0.5), c(-0.3, 0.2), c(0.0, 1.0)];
        let cm = HermitianMatrix::outer(&h).add(&HermitianMatrix::identity(3).scaled(0.2));
        let p = SdpProblem {
            objective: cm.clone(),
            constraints: vec![trace_one(3)],
        };
        let sol = solve_small_sdp(&p, 1e-8).unwrap();
        assert!((sol.objective - cm.lambda_max()).abs() < 1e-7);
        assert!(sol.dual_bound >= sol.objective - 1e-12);
        assert!(sol.dual_bound - sol.objective <= 1e-7);
        let eig = sol.w.eig();
        assert!(eig.values[1] < 1e-6);
    }

    #[test]
    fn identity_objective_is_flat() {
        let p = SdpProblem {
            objective: HermitianMatrix::identity(2),
            constraints: vec![trace_one(2)],
        };
        let sol = solve_small_sdp(&p, 1e-8).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!(sol.w.lambda_min() > -1e-9);
    }

    #[test]
    fn scalar_collapse_checks_constraints_directly() {
        let one = HermitianMatrix::identity(1);
        let ok = SdpProblem {
            objective: one.scaled(3.0),
            constraints: vec![trace_one(1), SdpConstraint::new(one.clone(), Relation::Ge, 0.5)],
        };
        assert!((solve_small_sdp(&ok, 1e-8).unwrap().objective - 3.0).abs() < 1e-12);
        let bad = SdpProblem {
            objective: one.clone(),
            constraints: vec![trace_one(1), SdpConstraint::new(one, Relation::Ge, 2.0)],
        };
        assert!(matches!(solve_small_sdp(&bad, 1e-8), Err(SolveError::Infeasible { .. })));
    }

    #[test]
    fn zero_constraint_matrices_are_constants() {
        let p = SdpProblem {
            objective: HermitianMatrix::outer(&dvector![c(1.0, 0.0), c(0.0, 1.0)]),
            constraints: vec![
                trace_one(2),
                SdpConstraint::new(HermitianMatrix::zeros(2), Relation::Le, 0.0),
            ],
        };
        assert!((solve_small_sdp(&p, 1e-8).unwrap().objective - 2.0).abs() < 1e-7);
    }

    #[test]
    fn inconsistent_equalities() {
        let p = SdpProblem {
            objective: HermitianMatrix::identity(2),
            constraints: vec![
                trace_one(2),
                SdpConstraint::new(HermitianMatrix::identity(2), Relation::Eq, 2.0),
            ],
        };
        assert!(matches!(solve_small_sdp(&p, 1e-8), Err(SolveError::Infeasible { .. })));
    }
}
