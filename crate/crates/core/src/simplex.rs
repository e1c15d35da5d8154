//! Bounded-variable primal simplex on a dense tableau.
//!
//! Rows `a·x (≤|≥|=) b` get a slack `s` with `a·x + s = b`; rows whose slack
//! cannot start feasible get an artificial variable, removed by a phase-one
//! solve. Nonbasic variables sit at one of their bounds, so binary columns
//! never need explicit `x ≤ 1` rows.

use serde::Serialize;
use thiserror::Error;

use crate::model::{MilpModel, Sense};

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-7;
/// Reduced-cost optimality tolerance.
pub const OPT_TOL: f64 = 1e-9;
/// Smallest acceptable pivot magnitude.
pub const PIVOT_TOL: f64 = 1e-11;
/// Entries below this are treated as zero in the ratio test.
const RATIO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Includes the model's objective constant. Meaningful only when optimal.
    pub objective: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("column {0} has no finite bound")]
    FreeColumn(String),
}

pub fn solve_lp(model: &MilpModel) -> Result<LpSolution, LpError> {
    let lower: Vec<f64> = model.columns().iter().map(|c| c.lower).collect();
    let upper: Vec<f64> = model.columns().iter().map(|c| c.upper).collect();
    solve_lp_with_bounds(model, &lower, &upper)
}

/// Solves the relaxation with column bounds overridden by `lower`/`upper`.
pub fn solve_lp_with_bounds(model: &MilpModel, lower: &[f64], upper: &[f64]) -> Result<LpSolution, LpError> {
    let n_all = model.column_count();
    let infeasible = |iterations| LpSolution { status: LpStatus::Infeasible, objective: f64::NEG_INFINITY, x: Vec::new(), iterations };

    for j in 0..n_all {
        if lower[j] > upper[j] + FEAS_TOL {
            return Ok(infeasible(0));
        }
        if lower[j] == f64::NEG_INFINITY && upper[j] == f64::INFINITY {
            return Err(LpError::FreeColumn(model.columns()[j].name.clone()));
        }
    }

    // fixed columns become constants
    let mut local = vec![usize::MAX; n_all];
    let mut free_cols = Vec::new();
    for j in 0..n_all {
        if lower[j] < upper[j] {
            local[j] = free_cols.len();
            free_cols.push(j);
        }
    }
    let fixed_value = |j: usize| lower[j];

    let mut rows: Vec<(Vec<(usize, f64)>, Sense, f64)> = Vec::new();
    for row in model.rows() {
        let mut rhs = row.rhs;
        let mut coeffs = Vec::with_capacity(row.coeffs.len());
        for &(j, a) in &row.coeffs {
            if local[j] == usize::MAX {
                rhs -= a * fixed_value(j);
            } else {
                coeffs.push((local[j], a));
            }
        }
        if coeffs.is_empty() {
            let tol = FEAS_TOL * row.rhs.abs().max(1.0);
            let ok = match row.sense {
                Sense::Le => 0.0 <= rhs + tol,
                Sense::Ge => 0.0 >= rhs - tol,
                Sense::Eq => rhs.abs() <= tol,
            };
            if !ok {
                return Ok(infeasible(0));
            }
            continue;
        }
        rows.push((coeffs, row.sense, rhs));
    }

    let c_full = model.objective_dense();
    let c: Vec<f64> = free_cols.iter().map(|&j| c_full[j]).collect();
    let lo: Vec<f64> = free_cols.iter().map(|&j| lower[j]).collect();
    let hi: Vec<f64> = free_cols.iter().map(|&j| upper[j]).collect();

    let mut tableau = Tableau::new(&rows, &lo, &hi);
    let outcome = tableau.run(&c)?;
    let iterations = tableau.iterations;
    match outcome {
        Phase::Infeasible => return Ok(infeasible(iterations)),
        Phase::Unbounded => {
            return Ok(LpSolution { status: LpStatus::Unbounded, objective: f64::INFINITY, x: Vec::new(), iterations })
        }
        Phase::Optimal => {}
    }

    let local_x = tableau.structural_values();
    let mut x = vec![0.0; n_all];
    for j in 0..n_all {
        x[j] = if local[j] == usize::MAX { fixed_value(j) } else { local_x[local[j]].clamp(lower[j], upper[j]) };
    }

    for row in model.rows() {
        let act = row.activity(&x);
        if row.violation(act) > FEAS_TOL * row.rhs.abs().max(1.0) {
            return Err(LpError::NumericalBreakdown(format!(
                "row {} violated by {:e} after solve",
                row.name,
                row.violation(act)
            )));
        }
    }
    Ok(LpSolution { status: LpStatus::Optimal, objective: model.objective_value(&x), x, iterations })
}

enum Phase {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Dense tableau `B⁻¹[A | I | R]` over structural, slack and artificial columns.
struct Tableau {
    m: usize,
    n: usize,
    width: usize,
    t: Vec<f64>,
    /// `B⁻¹ b`, kept for refreshing basic values.
    rhs: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Current value of every column (basic ones mirror `xb`).
    value: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    artificials: Vec<usize>,
    /// Original (unreduced) column entries, used to refresh basic values.
    orig_cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    iterations: usize,
}

impl Tableau {
    fn new(rows: &[(Vec<(usize, f64)>, Sense, f64)], lo: &[f64], hi: &[f64]) -> Tableau {
        let m = rows.len();
        let n = lo.len();
        // initial nonbasic values: a finite bound, preferring the lower one
        let start: Vec<f64> = (0..n).map(|j| if lo[j].is_finite() { lo[j] } else { hi[j] }).collect();

        let mut needs_art = Vec::new();
        let mut slack_lo = Vec::with_capacity(m);
        let mut slack_hi = Vec::with_capacity(m);
        let mut residual = Vec::with_capacity(m);
        for (i, (coeffs, sense, rhs)) in rows.iter().enumerate() {
            let (sl, sh) = match sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            slack_lo.push(sl);
            slack_hi.push(sh);
            let r = rhs - coeffs.iter().map(|&(j, a)| a * start[j]).sum::<f64>();
            residual.push(r);
            if r < sl - FEAS_TOL || r > sh + FEAS_TOL {
                needs_art.push(i);
            }
        }
        let k = needs_art.len();
        let width = n + m + k;

        let mut orig_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); width];
        for (i, (coeffs, _, _)) in rows.iter().enumerate() {
            for &(j, a) in coeffs {
                orig_cols[j].push((i, a));
            }
            orig_cols[n + i].push((i, 1.0));
        }
        let mut art_sign = vec![0.0; m];
        for (a, &i) in needs_art.iter().enumerate() {
            // slack parks at 0; the artificial absorbs the residual
            let sign = if residual[i] > 0.0 { 1.0 } else { -1.0 };
            art_sign[i] = sign;
            orig_cols[n + m + a].push((i, sign));
        }

        let mut lo_all = lo.to_vec();
        let mut hi_all = hi.to_vec();
        lo_all.extend_from_slice(&slack_lo);
        hi_all.extend_from_slice(&slack_hi);
        lo_all.extend(std::iter::repeat_n(0.0, k));
        hi_all.extend(std::iter::repeat_n(f64::INFINITY, k));

        let mut value = start.clone();
        value.extend(std::iter::repeat_n(0.0, m + k));

        let mut t = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let mut is_basic = vec![false; width];
        let mut art_of_row = vec![usize::MAX; m];
        for (a, &i) in needs_art.iter().enumerate() {
            art_of_row[i] = n + m + a;
        }
        for (i, (coeffs, _, _)) in rows.iter().enumerate() {
            // basis element coefficient: 1 for the slack, ±1 for an artificial
            let scale = if art_of_row[i] == usize::MAX { 1.0 } else { art_sign[i] };
            let row = &mut t[i * width..(i + 1) * width];
            for &(j, a) in coeffs {
                row[j] = a / scale;
            }
            row[n + i] = 1.0 / scale;
            if art_of_row[i] == usize::MAX {
                basis[i] = n + i;
                value[n + i] = residual[i];
            } else {
                row[art_of_row[i]] = 1.0;
                basis[i] = art_of_row[i];
                value[art_of_row[i]] = residual[i].abs();
                value[n + i] = 0.0;
            }
            is_basic[basis[i]] = true;
        }

        Tableau {
            m,
            n,
            width,
            t,
            rhs: Vec::new(),
            lo: lo_all,
            hi: hi_all,
            value,
            basis,
            is_basic,
            artificials: (n + m..width).collect(),
            orig_cols,
            b: rows.iter().map(|r| r.2).collect(),
            iterations: 0,
        }
    }

    fn structural_values(&self) -> Vec<f64> {
        self.value[..self.n].to_vec()
    }

    fn run(&mut self, c: &[f64]) -> Result<Phase, LpError> {
        if !self.artificials.is_empty() {
            let mut phase_one = vec![0.0; self.width];
            for &a in &self.artificials {
                phase_one[a] = -1.0;
            }
            if let Phase::Unbounded = self.optimize(&phase_one)? {
                return Err(LpError::NumericalBreakdown("phase one reported unbounded".into()));
            }
            self.refresh_basic_values();
            let infeasibility: f64 = self.artificials.iter().map(|&a| self.value[a]).sum();
            if infeasibility > FEAS_TOL {
                return Ok(Phase::Infeasible);
            }
            for a in self.artificials.clone() {
                self.hi[a] = 0.0;
                self.value[a] = 0.0;
            }
            self.drive_out_artificials();
        }
        let mut full = vec![0.0; self.width];
        full[..c.len()].copy_from_slice(c);
        let outcome = self.optimize(&full)?;
        self.refresh_basic_values();
        Ok(outcome)
    }

    /// Replaces basic artificials (now at zero) by other columns where possible.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.m {
            if self.basis[r] < self.n + self.m {
                continue;
            }
            let row = &self.t[r * self.width..(r + 1) * self.width];
            let candidate = (0..self.n + self.m).filter(|&j| !self.is_basic[j]).max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()));
            if let Some(q) = candidate {
                if row[q].abs() > 1e-7 {
                    self.pivot(r, q, None);
                }
            }
        }
    }

    /// Recomputes basic values from `B⁻¹` (the slack columns of the tableau).
    fn refresh_basic_values(&mut self) {
        let mut resid = self.b.clone();
        for j in 0..self.width {
            if self.is_basic[j] || self.value[j] == 0.0 {
                continue;
            }
            for &(i, a) in &self.orig_cols[j] {
                resid[i] -= a * self.value[j];
            }
        }
        let mut xb = vec![0.0; self.m];
        for (r, slot) in xb.iter_mut().enumerate() {
            let row = &self.t[r * self.width..(r + 1) * self.width];
            *slot = (0..self.m).map(|i| row[self.n + i] * resid[i]).sum();
        }
        for r in 0..self.m {
            self.value[self.basis[r]] = xb[r];
        }
        self.rhs = xb;
    }

    fn optimize(&mut self, c: &[f64]) -> Result<Phase, LpError> {
        let (m, w) = (self.m, self.width);
        let mut d = c.to_vec();
        for r in 0..m {
            let cb = c[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * w..(r + 1) * w];
                for j in 0..w {
                    d[j] -= cb * row[j];
                }
            }
        }

        let degenerate_limit = 10 * (m + self.n);
        let iteration_limit = 100 * (m + w) + 10_000;
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut local_iters = 0usize;

        loop {
            // pricing
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..w {
                if self.is_basic[j] || self.lo[j] == self.hi[j] {
                    continue;
                }
                let at_upper = self.value[j] == self.hi[j] && self.hi[j] != self.lo[j] && self.value[j] != self.lo[j];
                let eligible = if at_upper { d[j] < -OPT_TOL } else { d[j] > OPT_TOL };
                if !eligible {
                    continue;
                }
                match entering {
                    None => entering = Some((j, d[j])),
                    Some((_, best)) if !bland && d[j].abs() > best.abs() => entering = Some((j, d[j])),
                    _ => {}
                }
                if bland {
                    break;
                }
            }
            let Some((q, dq)) = entering else {
                return Ok(Phase::Optimal);
            };
            let dir = if dq > 0.0 { 1.0 } else { -1.0 };

            // ratio test
            let mut step = self.hi[q] - self.lo[q];
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let alpha = self.t[r * w + q] * dir;
                if alpha.abs() <= RATIO_TOL {
                    continue;
                }
                let bvar = self.basis[r];
                let limit = if alpha > 0.0 {
                    if self.lo[bvar] == f64::NEG_INFINITY {
                        continue;
                    }
                    (self.value[bvar] - self.lo[bvar]) / alpha
                } else {
                    if self.hi[bvar] == f64::INFINITY {
                        continue;
                    }
                    (self.hi[bvar] - self.value[bvar]) / -alpha
                };
                let limit = limit.max(0.0);
                let better = match leave {
                    None => limit < step || (limit == step && step.is_finite() && false),
                    Some((lr, _)) => {
                        if limit < step - 1e-12 {
                            true
                        } else if limit <= step + 1e-12 {
                            if bland {
                                self.basis[r] < self.basis[lr]
                            } else {
                                alpha.abs() > self.t[lr * w + q].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    step = limit;
                    leave = Some((r, alpha));
                }
            }
            if step == f64::INFINITY {
                return Ok(Phase::Unbounded);
            }

            self.iterations += 1;
            local_iters += 1;
            if local_iters > iteration_limit {
                return Err(LpError::NumericalBreakdown("iteration limit reached".into()));
            }
            if step <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > degenerate_limit {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }

            // move basics along the edge
            if step > 0.0 {
                for r in 0..m {
                    let a = self.t[r * w + q];
                    if a != 0.0 {
                        let bvar = self.basis[r];
                        self.value[bvar] -= a * dir * step;
                    }
                }
            }
            match leave {
                None => {
                    // bound flip
                    self.value[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                }
                Some((r, alpha)) => {
                    let pivot = self.t[r * w + q];
                    if pivot.abs() < PIVOT_TOL {
                        return Err(LpError::NumericalBreakdown(format!("pivot {pivot:e} below tolerance")));
                    }
                    let leaving = self.basis[r];
                    let entering_value = self.value[q] + dir * step;
                    self.value[leaving] = if alpha > 0.0 { self.lo[leaving] } else { self.hi[leaving] };
                    self.value[q] = entering_value;
                    self.pivot(r, q, Some(&mut d));
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize, d: Option<&mut Vec<f64>>) {
        let w = self.width;
        let p = self.t[r * w + q];
        {
            let row = &mut self.t[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[q] = 1.0;
        }
        let pivot_row: Vec<(usize, f64)> =
            self.t[r * w..(r + 1) * w].iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (j, v)).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * w..(i + 1) * w];
            for &(j, v) in &pivot_row {
                row[j] -= f * v;
            }
            row[q] = 0.0;
        }
        if let Some(d) = d {
            let f = d[q];
            if f != 0.0 {
                for &(j, v) in &pivot_row {
                    d[j] -= f * v;
                }
            }
            d[q] = 0.0;
        }
        let leaving = self.basis[r];
        self.is_basic[leaving] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VarKind;

    fn one_var(rows: &[(Sense, f64)]) -> MilpModel {
        let mut m = MilpModel::new("one");
        let x = m.add_column("x", VarKind::Binary, 0.0, 1.0).unwrap();
        for (k, &(sense, rhs)) in rows.iter().enumerate() {
            m.add_row(format!("r{k}"), vec![(x, 1.0)], sense, rhs).unwrap();
        }
        m.set_objective(vec![(x, 1.0)], 0.0).unwrap();
        m
    }

    #[test]
    fn single_variable_bound() {
        let sol = solve_lp(&one_var(&[(Sense::Le, 0.5)])).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 0.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_pair() {
        let sol = solve_lp(&one_var(&[(Sense::Ge, 0.6), (Sense::Le, 0.4)])).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn bound_flip_only() {
        let sol = solve_lp(&one_var(&[])).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.objective, 1.0);
    }

    #[test]
    fn unbounded_detected() {
        let mut m = MilpModel::new("u");
        let x = m.add_column("x", VarKind::Continuous, 0.0, f64::INFINITY).unwrap();
        let y = m.add_column("y", VarKind::Continuous, 0.0, 1.0).unwrap();
        m.add_row("r", vec![(x, 1.0), (y, -1.0)], Sense::Ge, 0.0).unwrap();
        m.set_objective(vec![(x, 1.0)], 0.0).unwrap();
        assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn two_variable_knapsack() {
        // max 5a + 3b, a + b ≤ 1 → vertex (1, 0)
        let mut m = MilpModel::new("k");
        let a = m.add_column("a", VarKind::Binary, 0.0, 1.0).unwrap();
        let b = m.add_column("b", VarKind::Binary, 0.0, 1.0).unwrap();
        m.add_row("budget", vec![(a, 1.0), (b, 1.0)], Sense::Le, 1.0).unwrap();
        m.set_objective(vec![(a, 5.0), (b, 3.0)], 2.0).unwrap();
        let sol = solve_lp(&m).unwrap();
        assert_eq!(sol.objective, 7.0);
        assert_eq!(sol.x, vec![1.0, 0.0]);
    }

    #[test]
    fn equality_and_ge_rows_need_phase_one() {
        // max x + 2y + 3z s.t. x + y + z = 2, x − y ≥ 0.5, z ≤ 1 (via bounds), all in [0, 1]
        let mut m = MilpModel::new("p1");
        let x = m.add_column("x", VarKind::Continuous, 0.0, 1.0).unwrap();
        let y = m.add_column("y", VarKind::Continuous, 0.0, 1.0).unwrap();
        let z = m.add_column("z", VarKind::Continuous, 0.0, 1.0).unwrap();
        m.add_row("sum", vec![(x, 1.0), (y, 1.0), (z, 1.0)], Sense::Eq, 2.0).unwrap();
        m.add_row("diff", vec![(x, 1.0), (y, -1.0)], Sense::Ge, 0.5).unwrap();
        m.set_objective(vec![(x, 1.0), (y, 2.0), (z, 3.0)], 0.0).unwrap();
        let sol = solve_lp(&m).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        // z = 1, x + y = 1, x − y ≥ 0.5 → y = 0.25, x = 0.75: 0.75 + 0.5 + 3
        assert!((sol.objective - 4.25).abs() < 1e-9, "{}", sol.objective);
    }

    #[test]
    fn fractional_vertex() {
        // max x + y, 2x + y ≤ 2, x + 2y ≤ 2 → (2/3, 2/3)
        let mut m = MilpModel::new("f");
        let x = m.add_column("x", VarKind::Binary, 0.0, 1.0).unwrap();
        let y = m.add_column("y", VarKind::Binary, 0.0, 1.0).unwrap();
        m.add_row("a", vec![(x, 2.0), (y, 1.0)], Sense::Le, 2.0).unwrap();
        m.add_row("b", vec![(x, 1.0), (y, 2.0)], Sense::Le, 2.0).unwrap();
        m.set_objective(vec![(x, 1.0), (y, 1.0)], 0.0).unwrap();
        let sol = solve_lp(&m).unwrap();
        assert!((sol.objective - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_columns_are_constants() {
        let mut m = one_var(&[(Sense::Ge, 1.0)]);
        m.set_bounds(0, 0.0, 0.0).unwrap();
        assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Infeasible);
        m.set_bounds(0, 1.0, 1.0).unwrap();
        let sol = solve_lp(&m).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.objective, 1.0);
    }

    #[test]
    fn deterministic_iterations() {
        let mut m = MilpModel::new("d");
        let cols: Vec<usize> = (0..6).map(|k| m.add_column(format!("x{k}"), VarKind::Binary, 0.0, 1.0).unwrap()).collect();
        for k in 0..5 {
            m.add_row(format!("r{k}"), vec![(cols[k], 1.0), (cols[k + 1], 1.0)], Sense::Le, 1.0).unwrap();
        }
        m.set_objective(cols.iter().map(|&j| (j, 1.0 + j as f64 * 0.1)).collect(), 0.0).unwrap();
        let a = solve_lp(&m).unwrap();
        let b = solve_lp(&m).unwrap();
        assert_eq!(a, b);
    }
}
