use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use super::barrier::{path_follow, phase_one, BarrierProblem, PhaseOne, Quad, Stop};
use super::SolveError;
use crate::error::Error;
use crate::numerics::{ComplexVector, HermitianMatrix};

/// `v^H A v + 2·Re(g^H v) <= b` with `A` Hermitian PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadConstraint {
    pub a: HermitianMatrix,
    pub g: ComplexVector,
    pub b: f64,
}

impl QuadConstraint {
    /// A purely quadratic constraint `v^H A v <= b`.
    pub fn quadratic(a: HermitianMatrix, b: f64) -> Self {
        let g = ComplexVector::zeros(a.dim());
        Self { a, g, b }
    }

    /// Left side minus right side at `v` (positive means violated).
    pub fn violation(&self, v: &ComplexVector) -> f64 {
        self.a.quad_form(v) + 2.0 * self.g.dotc(v).re - self.b
    }
}

/// Maximize `Re(c^H v)` over `‖v‖² <= r` and the listed constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct QcqpProblem {
    pub objective: ComplexVector,
    pub constraints: Vec<QuadConstraint>,
    pub ball_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcqpSolution {
    pub v: ComplexVector,
    pub objective: f64,
    /// Lagrangian upper bound on the optimum from the final multipliers.
    pub dual_bound: f64,
    /// Stationarity residual of the Lagrangian, relative to `‖c‖`.
    pub kkt_residual: f64,
    /// Largest constraint violation at `v` (nonpositive when strictly feasible).
    pub max_violation: f64,
    pub newton_steps: usize,
}

fn embed_matrix(a: &HermitianMatrix) -> DMatrix<f64> {
    let m = a.dim();
    let h = a.matrix();
    DMatrix::from_fn(2 * m, 2 * m, |i, j| {
        let z = h[(i % m, j % m)];
        match (i < m, j < m) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

fn embed_vector(v: &ComplexVector) -> DVector<f64> {
    let m = v.len();
    DVector::from_fn(2 * m, |i, _| if i < m { v[i].re } else { v[i - m].im })
}

fn unembed(x: &DVector<f64>) -> ComplexVector {
    let m = x.len() / 2;
    DVector::from_fn(m, |i, _| Complex64::new(x[i], x[i + m]))
}

/// Solves a ball-constrained convex QCQP by the barrier method.
pub fn solve_ball_qcqp(p: &QcqpProblem, tol: f64) -> Result<QcqpSolution, SolveError> {
    let m = p.objective.len();
    if m == 0 {
        return Err(Error::Dimension("empty decision vector".into()).into());
    }
    if !(p.ball_radius > 0.0 && p.ball_radius.is_finite()) {
        return Err(Error::InvalidParam(format!("ball radius {} must be positive", p.ball_radius)).into());
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParam(format!("tolerance {tol} must be positive")).into());
    }
    let r = p.ball_radius;
    let mut quads = Vec::with_capacity(p.constraints.len() + 1);
    for (i, c) in p.constraints.iter().enumerate() {
        if c.a.dim() != m || c.g.len() != m {
            return Err(Error::Dimension(format!("constraint {i} does not match dimension {m}")).into());
        }
        let size = c.a.frobenius_norm() * r + 2.0 * c.g.norm() * r.sqrt();
        let scale = size.max(c.b.abs());
        if size <= 1e-14 * scale || scale == 0.0 {
            // Constant constraint 0 <= b.
            if c.b < 0.0 {
                return Err(SolveError::Infeasible { violation: 1.0 });
            }
            continue;
        }
        let a = embed_matrix(&c.a) / scale;
        let g = embed_vector(&c.g) * (2.0 / scale);
        let psd = a.iter().any(|z| *z != 0.0);
        quads.push(Quad {
            p: psd.then_some(a),
            q: g,
            r: -c.b / scale,
        });
    }
    let ball = quads.len();
    quads.push(Quad {
        p: Some(DMatrix::identity(2 * m, 2 * m) / r),
        q: DVector::zeros(2 * m),
        r: -1.0,
    });

    let c_raw = embed_vector(&p.objective);
    let c_norm = c_raw.norm();
    let c = if c_norm > 0.0 { -&c_raw / c_norm } else { DVector::zeros(2 * m) };

    let x0 = DVector::zeros(2 * m);
    let (start, p1_steps) = match phase_one(&quads, &[ball], None, &x0, tol) {
        PhaseOne::Feasible(x, n) => (x, n),
        PhaseOne::Infeasible { violation } => return Err(SolveError::Infeasible { violation }),
        PhaseOne::Stalled => return Err(SolveError::NotConverged { newton_steps: 0 }),
    };
    let prob = BarrierProblem { c, quads, lmi: None };
    let out = path_follow(&prob, start, tol, |_| false);
    let steps = out.newton_steps + p1_steps;
    if out.stop == Stop::Budget {
        return Err(SolveError::NotConverged { newton_steps: steps });
    }
    let x = out.x;
    let v = unembed(&x);

    // Multipliers of the centered point and the Lagrangian bound they give.
    let n = 2 * m;
    let mut hess = DMatrix::<f64>::zeros(n, n);
    let mut lin = -&prob.c;
    let mut constant = 0.0;
    let mut stationarity = -&prob.c;
    for q in &prob.quads {
        let f = q.value(&x);
        let lam = out.mu / (-f);
        if let Some(pm) = &q.p {
            hess += pm * lam;
            stationarity -= pm * &x * (2.0 * lam);
        }
        lin -= &q.q * lam;
        stationarity -= &q.q * lam;
        constant -= lam * q.r;
    }
    let bound = Cholesky::new(hess)
        .map(|ch| lin.dot(&ch.solve(&lin)) / 4.0 + constant)
        .unwrap_or(f64::INFINITY);
    let max_violation = p
        .constraints
        .iter()
        .map(|c| c.violation(&v))
        .chain(std::iter::once(v.norm_squared() - r))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(QcqpSolution {
        objective: p.objective.dotc(&v).re,
        dual_bound: bound * c_norm,
        kkt_residual: stationarity.norm(),
        max_violation,
        newton_steps: steps,
        v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ball_only_gives_normalized_objective() {
        let obj = dvector![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0)];
        let p = QcqpProblem {
            objective: obj.clone(),
            constraints: vec![],
            ball_radius: 1.0,
        };
        let sol = solve_ball_qcqp(&p, 1e-8).unwrap();
        let want = &obj / c(obj.norm(), 0.0);
        assert!((&sol.v - want).norm() < 1e-6);
        assert!((sol.objective - obj.norm()).abs() < 1e-7);
        assert!(sol.dual_bound >= sol.objective - 1e-12);
        assert!(sol.dual_bound - sol.objective <= 1e-7);
    }

    #[test]
    fn inactive_constraint_changes_nothing() {
        let obj = dvector![c(1.0, 0.0), c(0.0, 1.0)];
        let a = HermitianMatrix::outer(&dvector![c(1.0, 0.0), c(0.0, -1.0)]);
        let p = QcqpProblem {
            objective: obj.clone(),
            constraints: vec![QuadConstraint::quadratic(a, 10.0)],
            ball_radius: 1.0,
        };
        let sol = solve_ball_qcqp(&p, 1e-8).unwrap();
        assert!((sol.objective - obj.norm()).abs() < 1e-7);
        assert!(sol.max_violation <= 1e-8);
    }

    #[test]
    fn disjoint_constraints_are_infeasible() {
        let e1 = dvector![c(1.0, 0.0), c(0.0, 0.0)];
        let p = QcqpProblem {
            objective: e1.clone(),
            constraints: vec![
                // Re(v1) >= 0.5 and Re(v1) <= -0.5.
                QuadConstraint { a: HermitianMatrix::zeros(2), g: -&e1, b: -1.0 },
                QuadConstraint { a: HermitianMatrix::zeros(2), g: e1.clone(), b: -1.0 },
            ],
            ball_radius: 1.0,
        };
        assert!(matches!(solve_ball_qcqp(&p, 1e-8), Err(SolveError::Infeasible { .. })));
    }

    #[test]
    fn constant_constraints() {
        let obj = dvector![c(1.0, 0.0)];
        let ok = QcqpProblem {
            objective: obj.clone(),
            constraints: vec![QuadConstraint::quadratic(HermitianMatrix::zeros(1), 0.0)],
            ball_radius: 4.0,
        };
        assert!((solve_ball_qcqp(&ok, 1e-8).unwrap().objective - 2.0).abs() < 1e-7);
        let bad = QcqpProblem {
            constraints: vec![QuadConstraint::quadratic(HermitianMatrix::zeros(1), -1.0)],
            ..ok
        };
        assert!(matches!(solve_ball_qcqp(&bad, 1e-8), Err(SolveError::Infeasible { .. })));
    }
}
