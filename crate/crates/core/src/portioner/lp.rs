use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Variable};

use super::constraints::{Polytope, Row};
use crate::scalar::Scalar;

fn add_rows<T: Scalar>(p: &mut Problem, vars: &[Variable], rows: &[&Row<T>]) {
    for r in rows {
        let mut expr = LinearExpr::empty();
        for (v, c) in vars.iter().zip(&r.coef) {
            if *c != T::zero() {
                expr.add(*v, c.f64());
            }
        }
        p.add_constraint(expr, ComparisonOp::Le, r.rhs.f64());
    }
}

/// Minimizes `g . x` over the polytope. `None` when infeasible.
pub(crate) fn minimize_linear<T: Scalar>(poly: &Polytope<T>, g: &[T]) -> Option<Vec<T>> {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Variable> = g.iter().map(|c| p.add_var(c.f64(), (0.0, f64::INFINITY))).collect();
    add_rows(&mut p, &vars, &poly.rows.iter().collect::<Vec<_>>());
    let sol = p.solve().ok()?;
    Some(vars.iter().map(|v| T::c(sol[*v])).collect())
}

/// Feasible point closest to `x0` in L1 distance.
pub(crate) fn nearest_feasible<T: Scalar>(poly: &Polytope<T>, x0: &[T]) -> Option<Vec<T>> {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Variable> = x0.iter().map(|_| p.add_var(0.0, (0.0, f64::INFINITY))).collect();
    for (v, x) in vars.iter().zip(x0) {
        let u = p.add_var(1.0, (0.0, f64::INFINITY));
        p.add_constraint([(u, 1.0), (*v, -1.0)], ComparisonOp::Ge, -x.f64());
        p.add_constraint([(u, 1.0), (*v, 1.0)], ComparisonOp::Ge, x.f64());
    }
    add_rows(&mut p, &vars, &poly.rows.iter().collect::<Vec<_>>());
    let sol = p.solve().ok()?;
    Some(vars.iter().map(|v| T::c(sol[*v])).collect())
}

fn feasible_without<T: Scalar>(poly: &Polytope<T>, n: usize, skip: Option<usize>) -> bool {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Variable> = (0..n).map(|_| p.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let rows: Vec<&Row<T>> = poly.rows.iter().enumerate().filter(|(i, _)| Some(*i) != skip).map(|(_, r)| r).collect();
    add_rows(&mut p, &vars, &rows);
    p.solve().is_ok()
}

/// Names of constraints whose removal alone restores feasibility. When no
/// single constraint is responsible, the constraints active at the
/// maximum-energy point (without the energy floor) are reported instead.
pub(crate) fn blocking_constraints<T: Scalar>(poly: &Polytope<T>, n: usize) -> Vec<String> {
    let single: Vec<String> = (0..poly.rows.len())
        .filter(|&i| feasible_without(poly, n, Some(i)))
        .map(|i| poly.rows[i].name.clone())
        .collect();
    if !single.is_empty() {
        return single;
    }
    let relaxed = Polytope { rows: poly.rows.iter().filter(|r| r.name != "energy_low").cloned().collect() };
    let energy = poly.rows.iter().find(|r| r.name == "energy_high").map(|r| r.coef.clone());
    if let Some(e) = energy {
        let neg: Vec<T> = e.iter().map(|v| -*v).collect();
        if let Some(x) = minimize_linear(&relaxed, &neg) {
            let mut names = vec!["energy_low".to_string()];
            names.extend(relaxed.binding(&x, T::c(1e-7)).into_iter().filter(|n| n != "energy_high"));
            return names;
        }
    }
    poly.rows.iter().map(|r| r.name.clone()).collect()
}
