//! Subsolution test, damped Newton, continuation in `t` and the `ε → 0` limit
//! for `F(A(u)) = t·h(x, u) + εu` with homogeneous Dirichlet data.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundReport};
use crate::discretize::{Frames, HessianKind, HessianMap};
use crate::eigen_ops::OperatorSpec;
use crate::error::{Category, Error, Result};
use crate::geometry;
use crate::grid::{GridDomain, HermitianField, PointClass, ScalarField};
use crate::linalg::{self, CMat};
use crate::par;
use crate::sparse::{self, CsrMatrix, GmresOptions, Ilu0};

/// `u`-dependence of the right-hand side: `h(x, u) = h0(x) + ρ(u)` with `ρ(0) = 0`, `ρ′ ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HuSpec {
    Zero,
    /// `ρ(u) = a·u`.
    Linear { a: f64 },
    /// Monotone cubic through `(u_k, ρ_k)`, shifted so that `ρ(0) = 0`.
    Tabulated { u: Vec<f64>, rho: Vec<f64> },
}

/// Shape-preserving piecewise cubic Hermite interpolant, linear beyond the knots.
#[derive(Debug, Clone)]
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() < 2 || x.len() != y.len() {
            return Err(Error::Argument("tabulated rho needs at least two matching knots".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Argument("tabulated rho knots must increase strictly".into()));
        }
        if y.windows(2).any(|w| w[1] < w[0]) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("tabulated rho must be non-decreasing".into()));
        }
        let m = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..m - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; m];
        d[0] = delta[0];
        d[m - 1] = delta[m - 2];
        for k in 1..m - 1 {
            if delta[k - 1] * delta[k] > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        Ok(Pchip {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
        })
    }

    fn eval(&self, t: f64) -> (f64, f64) {
        let m = self.x.len();
        if t <= self.x[0] {
            return (self.y[0] + self.d[0] * (t - self.x[0]), self.d[0]);
        }
        if t >= self.x[m - 1] {
            return (self.y[m - 1] + self.d[m - 1] * (t - self.x[m - 1]), self.d[m - 1]);
        }
        let k = self.x.partition_point(|&v| v <= t) - 1;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k], self.d[k + 1]);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let v = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dh00 = 6.0 * s * s - 6.0 * s;
        let dh10 = 3.0 * s * s - 4.0 * s + 1.0;
        let dh01 = -dh00;
        let dh11 = 3.0 * s * s - 2.0 * s;
        let dv = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
        (v, dv.max(0.0))
    }

    /// `inf ρ′` over the real line: per interval the derivative is a quadratic in `s`.
    fn min_slope(&self) -> f64 {
        let mut lo = self.d[0].min(self.d[self.d.len() - 1]);
        for k in 0..self.x.len() - 1 {
            let h = self.x[k + 1] - self.x[k];
            let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k], self.d[k + 1]);
            let a = 6.0 * (y0 - y1) / h + 3.0 * d0 + 3.0 * d1;
            let b = -6.0 * (y0 - y1) / h - 4.0 * d0 - 2.0 * d1;
            let quad = |s: f64| a * s * s + b * s + d0;
            lo = lo.min(quad(0.0)).min(quad(1.0));
            if a != 0.0 {
                let v = -b / (2.0 * a);
                if v > 0.0 && v < 1.0 {
                    lo = lo.min(quad(v));
                }
            }
        }
        lo.max(0.0)
    }
}

/// Right-hand side `h(x, u)` together with the perturbation weight `ε`.
#[derive(Debug, Clone)]
pub struct Rhs {
    pub h0: ScalarField,
    pub hu: HuSpec,
    pub eps: f64,
    table: Option<(Pchip, f64)>,
}

impl Rhs {
    pub fn new(h0: ScalarField, hu: HuSpec) -> Result<Self> {
        let table = match &hu {
            HuSpec::Zero => None,
            HuSpec::Linear { a } => {
                if !(*a > 0.0) || !a.is_finite() {
                    return Err(Error::Argument(format!("h_u constant must be positive, got {a}")));
                }
                None
            }
            HuSpec::Tabulated { u, rho } => {
                let p = Pchip::new(u, rho)?;
                let shift = p.eval(0.0).0;
                Some((p, shift))
            }
        };
        Ok(Rhs {
            h0,
            hu,
            eps: 0.0,
            table,
        })
    }

    /// `h(x, u) = h0(x)`.
    pub fn independent(h0: ScalarField) -> Self {
        Rhs {
            h0,
            hu: HuSpec::Zero,
            eps: 0.0,
            table: None,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::Argument(format!("epsilon must be >= 0, got {eps}")));
        }
        self.eps = eps;
        Ok(self)
    }

    pub fn rho(&self, u: f64) -> (f64, f64) {
        match (&self.hu, &self.table) {
            (HuSpec::Linear { a }, _) => (a * u, *a),
            (HuSpec::Tabulated { .. }, Some((p, shift))) => {
                let (v, d) = p.eval(u);
                (v - shift, d)
            }
            _ => (0.0, 0.0),
        }
    }

    pub fn eval(&self, idx: usize, u: f64) -> f64 {
        self.h0.values[idx] + self.rho(u).0
    }

    pub fn h_u(&self, u: f64) -> f64 {
        self.rho(u).1
    }

    pub fn depends_on_u(&self) -> bool {
        !matches!(self.hu, HuSpec::Zero)
    }

    /// The largest `a > 0` with `h_u ≥ a` everywhere, if there is one.
    pub fn strict_monotonicity(&self) -> Option<f64> {
        match (&self.hu, &self.table) {
            (HuSpec::Linear { a }, _) => Some(*a),
            (HuSpec::Tabulated { .. }, Some((p, _))) => Some(p.min_slope()).filter(|a| *a > 0.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsSchedule {
    pub eps0: f64,
    pub factor: f64,
    pub eps_min: f64,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        EpsSchedule {
            eps0: 1e-2,
            factor: 0.25,
            eps_min: 1e-8,
        }
    }
}

impl EpsSchedule {
    /// `ε₀, ε₀·factor, …` while `≥ ε_min`; a single `0` when `ε_min = 0`.
    pub fn values(&self) -> Vec<f64> {
        if self.eps_min == 0.0 {
            return vec![0.0];
        }
        let mut out = Vec::new();
        let mut e = self.eps0;
        while e >= self.eps_min * (1.0 - 1e-12) {
            out.push(e);
            e *= self.factor;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Sup-norm residual tolerance.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Initial continuation step in `t`.
    pub t_steps: f64,
    pub eps_schedule: EpsSchedule,
    /// Minimum normalized cone margin kept by every accepted iterate.
    pub cone_margin: f64,
    /// Relative residual required of each linear solve.
    pub linear_tol: f64,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-10,
            max_newton: 40,
            t_steps: 0.25,
            eps_schedule: EpsSchedule::default(),
            cone_margin: 1e-8,
            linear_tol: 1e-10,
            gmres_restart: 60,
            gmres_max_iter: 4000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("newton_tol", self.newton_tol),
            ("t_steps", self.t_steps),
            ("cone_margin", self.cone_margin),
            ("linear_tol", self.linear_tol),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        let e = &self.eps_schedule;
        if !(e.factor > 0.0 && e.factor < 1.0) {
            return Err(Error::Argument(format!("eps factor must lie in (0,1), got {}", e.factor)));
        }
        if !(e.eps_min >= 0.0) || !(e.eps0 >= e.eps_min) {
            return Err(Error::Argument("eps schedule needs eps0 >= eps_min >= 0".into()));
        }
        if self.max_newton == 0 || self.gmres_restart == 0 {
            return Err(Error::Argument("iteration limits must be positive".into()));
        }
        Ok(())
    }

    fn gmres(&self) -> GmresOptions {
        GmresOptions {
            rel_tol: self.linear_tol,
            restart: self.gmres_restart,
            max_iter: self.gmres_max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub t: f64,
    pub eps: f64,
    pub newton_iterations: usize,
    pub sup_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub u: ScalarField,
    pub operator: String,
    pub eps: f64,
    pub residual_history: Vec<HistoryEntry>,
    pub final_residual: f64,
    pub cone_margin_min: f64,
    pub equivalence_ratio: f64,
    pub sup_u: f64,
    /// `sup|u_{ε_{m+1}} − u_{ε_m}|` along the ε schedule.
    pub eps_increments: Vec<f64>,
    /// `Some(false)` flags increments that failed to decrease over the last three steps.
    pub increments_decreasing: Option<bool>,
    pub bound_diagnostics: Vec<BoundReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsolutionReport {
    pub passed: bool,
    pub failures: usize,
    pub worst_point: Option<usize>,
    pub worst_coords: Option<Vec<f64>>,
    pub worst_direction: Option<usize>,
    /// `min (limit − h)` over points and directions; `-inf` when a ray never enters the cone.
    pub worst_gap: f64,
    pub requires_infinite_limit: bool,
    pub detail: String,
}

/// Pointwise state of `Ψ` at some `u`.
struct State {
    residual: Vec<f64>,
    sup: f64,
    margin_min: f64,
    coeffs: Vec<Vec<f64>>,
    zeroth: Vec<f64>,
}

/// A discretized equation `F(L⁻¹(χ + ∇²u)L⁻*) = t·h(x,u) + εu`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub op: OperatorSpec,
    pub alpha: HermitianField,
    pub chi: HermitianField,
    pub rhs: Rhs,
    frames: Frames,
    map: HessianMap,
}

fn same_grid(a: &Arc<GridDomain>, b: &Arc<GridDomain>) -> bool {
    Arc::ptr_eq(a, b) || (a.shape() == b.shape() && a.classes() == b.classes())
}

impl Problem {
    pub fn new(op: OperatorSpec, alpha: HermitianField, chi: HermitianField, rhs: Rhs) -> Result<Self> {
        Self::with_kind(op, alpha, chi, rhs, HessianKind::Complex)
    }

    pub fn with_kind(
        op: OperatorSpec,
        alpha: HermitianField,
        chi: HermitianField,
        rhs: Rhs,
        kind: HessianKind,
    ) -> Result<Self> {
        let d = alpha.domain.clone();
        if !same_grid(&d, &chi.domain) || !same_grid(&d, &rhs.h0.domain) {
            return Err(Error::Argument("alpha, chi and h must share one grid".into()));
        }
        let map = HessianMap::new(&d, kind)?;
        if alpha.n() != map.n || chi.n() != map.n || op.n != map.n {
            return Err(Error::Argument(format!(
                "matrix size mismatch: operator {}, alpha {}, chi {}, grid {}",
                op.n,
                alpha.n(),
                chi.n(),
                map.n
            )));
        }
        let pts = d.interior();
        let bad = par::max_indexed(pts.len(), |k| {
            let m = &chi.values[pts[k]];
            linalg::hermitian_defect(m) / linalg::max_abs_entry(m).max(1.0)
        });
        if bad > 1e-12 {
            return Err(Error::Argument("chi is not Hermitian".into()));
        }
        let frames = Frames::new(&alpha)?;
        Ok(Problem {
            op,
            alpha,
            chi,
            rhs,
            frames,
            map,
        })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.alpha.domain
    }

    pub fn zero(&self) -> Vec<f64> {
        vec![0.0; self.domain().len()]
    }

    /// `χ + ∇²u` at interior point `idx`.
    pub fn metric_at(&self, u: &[f64], idx: usize) -> CMat {
        &self.chi.values[idx] + self.map.hessian_at(u, idx)
    }

    /// `A(u)` per interior slot.
    pub fn assemble(&self, u: &[f64]) -> Vec<CMat> {
        let pts = self.domain().interior();
        par::map_indexed(pts.len(), |k| self.frames.whiten(k, &self.metric_at(u, pts[k])))
    }

    /// `χ + ∇²u` on interior points and `α` elsewhere.
    pub fn metric_field(&self, u: &[f64]) -> HermitianField {
        let d = self.domain().clone();
        let values = par::map_indexed(d.len(), |idx| {
            if d.class(idx) == PointClass::Interior {
                self.metric_at(u, idx)
            } else {
                self.alpha.values[idx].clone()
            }
        });
        HermitianField {
            domain: d,
            values,
            positive_definite: None,
        }
    }

    fn evaluate(&self, u: &[f64], t: f64, eps: f64, linearize: bool) -> Result<State> {
        let d = self.domain();
        let pts = d.interior();
        let per_point = par::map_indexed(pts.len(), |k| {
            let idx = pts[k];
            let a = self.frames.whiten(k, &self.metric_at(u, idx));
            let (lam, vecs) = linalg::hermitian_eigen(&a);
            let margin = self.op.cone.normalized_margin(&lam);
            let (f, grad) = match self.op.eval_grad(&lam) {
                Ok(v) => v,
                Err(_) => return Err((idx, self.op.cone.margin(&lam))),
            };
            let r = f - t * self.rhs.eval(idx, u[idx]) - eps * u[idx];
            let (coeffs, zeroth) = if linearize {
                let g = self.frames.pull_back(k, &linalg::reassemble(&vecs, &grad));
                (self.map.coefficients(&g), -t * self.rhs.h_u(u[idx]) - eps)
            } else {
                (Vec::new(), 0.0)
            };
            Ok((r, margin, coeffs, zeroth))
        });
        let mut count = 0;
        let mut worst = (0usize, f64::INFINITY);
        for (idx, m) in per_point.iter().filter_map(|r| r.as_ref().err()) {
            count += 1;
            if *m < worst.1 {
                worst = (*idx, *m);
            }
        }
        if count > 0 {
            return Err(Error::Admissibility {
                count,
                worst_point: worst.0,
                worst_margin: worst.1,
            });
        }
        let mut residual: Vec<f64> = d
            .classes()
            .iter()
            .zip(u)
            .map(|(c, &v)| if *c == PointClass::Boundary { v } else { 0.0 })
            .collect();
        let mut coeffs = Vec::with_capacity(if linearize { pts.len() } else { 0 });
        let mut zeroth = Vec::with_capacity(coeffs.capacity());
        let mut margin_min = f64::INFINITY;
        for (k, res) in per_point.into_iter().enumerate() {
            let Ok((r, m, c, z)) = res else { unreachable!() };
            residual[pts[k]] = r;
            margin_min = margin_min.min(m);
            if linearize {
                coeffs.push(c);
                zeroth.push(z);
            }
        }
        let sup = par::max_indexed(pts.len(), |k| residual[pts[k]].abs()).max(0.0);
        Ok(State {
            residual,
            sup,
            margin_min,
            coeffs,
            zeroth,
        })
    }

    /// `Ψ(u, t) = F(A(u)) − t·h(x, u) − εu` on the interior, `u` on the boundary layer.
    pub fn residual(&self, u: &[f64], t: f64, eps: f64) -> Result<Vec<f64>> {
        Ok(self.evaluate(u, t, eps, false)?.residual)
    }

    /// Applies the derivative of [`Self::residual`] at `u` to `du`.
    pub fn linearized_apply(&self, u: &[f64], t: f64, eps: f64, du: &[f64]) -> Result<Vec<f64>> {
        let state = self.evaluate(u, t, eps, true)?;
        let d = self.domain();
        let pts = d.interior();
        let mut out: Vec<f64> = d
            .classes()
            .iter()
            .zip(du)
            .map(|(c, &v)| if *c == PointClass::Boundary { v } else { 0.0 })
            .collect();
        let vals = par::map_indexed(pts.len(), |k| {
            let idx = pts[k];
            let diffs = self.map.differences(du, idx);
            let s: f64 = state.coeffs[k].iter().zip(&diffs).map(|(c, d)| c * d).sum();
            s + state.zeroth[k] * du[idx]
        });
        for (k, v) in vals.into_iter().enumerate() {
            out[pts[k]] = v;
        }
        Ok(out)
    }

    /// Jacobian restricted to interior unknowns (boundary values are held at 0).
    fn jacobian(&self, state: &State) -> CsrMatrix {
        let d = self.domain();
        let pts = d.interior();
        let offsets: Vec<&[(isize, f64)]> = self.map.term_offsets().collect();
        let rows = par::map_indexed(pts.len(), |k| {
            let idx = pts[k] as isize;
            let mut row = vec![(k, state.zeroth[k])];
            for (t, offs) in offsets.iter().enumerate() {
                let c = state.coeffs[k][t];
                for &(o, w) in offs.iter() {
                    if let Some(col) = d.interior_slot((idx + o) as usize) {
                        row.push((col, c * w));
                    }
                }
            }
            row
        });
        CsrMatrix::from_rows(rows)
    }

    /// Damped Newton at fixed `(t, ε)` from `u0`. Boundary values of `u0` must be 0.
    pub fn newton(&self, u0: &[f64], t: f64, eps: f64, cfg: &SolverConfig) -> Result<(Vec<f64>, usize, f64)> {
        let d = self.domain();
        let pts = d.interior();
        let mut u = u0.to_vec();
        let mut state = self.evaluate(&u, t, eps, true)?;
        if state.margin_min < cfg.cone_margin {
            return Err(Error::Admissibility {
                count: 1,
                worst_point: 0,
                worst_margin: state.margin_min,
            });
        }
        let mut iterations = 0;
        while state.sup > cfg.newton_tol {
            if iterations >= cfg.max_newton {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: state.sup,
                });
            }
            let jac = self.jacobian(&state);
            let pc = Ilu0::new(&jac)?;
            let b: Vec<f64> = pts.iter().map(|&idx| -state.residual[idx]).collect();
            let mut x = vec![0.0; pts.len()];
            sparse::gmres(&jac, &pc, &b, &mut x, cfg.gmres())?;
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..=20 {
                let mut trial = u.clone();
                for (k, &idx) in pts.iter().enumerate() {
                    trial[idx] += step * x[k];
                }
                if let Ok(s) = self.evaluate(&trial, t, eps, true) {
                    if s.margin_min >= cfg.cone_margin && s.sup < state.sup {
                        accepted = Some((trial, s));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((trial, s)) = accepted else {
                return Err(Error::AdmissibilityStall { residual: state.sup });
            };
            u = trial;
            state = s;
            iterations += 1;
        }
        Ok((u, iterations, state.sup))
    }

    /// Continuation from `(u, t) = (start, 0)` to `t = 1` at fixed `ε`.
    pub fn continuation(&self, start: &[f64], eps: f64, cfg: &SolverConfig) -> Result<(Vec<f64>, Vec<HistoryEntry>)> {
        let floor = 2f64.powi(-16);
        let mut history = Vec::new();
        let (mut u, it0, r0) = self.newton(start, 0.0, eps, cfg)?;
        history.push(HistoryEntry {
            t: 0.0,
            eps,
            newton_iterations: it0,
            sup_residual: r0,
        });
        let mut t = 0.0;
        let mut dt = cfg.t_steps.min(1.0);
        let mut streak = 0;
        while t < 1.0 {
            let t_try = if t + dt >= 1.0 - 1e-14 { 1.0 } else { t + dt };
            match self.newton(&u, t_try, eps, cfg) {
                Ok((next, iters, res)) => {
                    u = next;
                    t = t_try;
                    history.push(HistoryEntry {
                        t,
                        eps,
                        newton_iterations: iters,
                        sup_residual: res,
                    });
                    streak += 1;
                    if streak >= 2 {
                        dt *= 2.0;
                        streak = 0;
                    }
                }
                Err(e) if e.category() == Category::Convergence => {
                    dt *= 0.5;
                    streak = 0;
                    if dt < floor {
                        return Err(Error::ContinuationFailure { last_t: t });
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Ok((u, history))
    }

    /// `sup|F(α⁻¹χ)|` over interior points.
    pub fn reference_value_sup(&self) -> Result<f64> {
        let r = self.residual(&self.zero(), 0.0, 0.0)?;
        let pts = self.domain().interior();
        Ok(par::max_indexed(pts.len(), |k| r[pts[k]].abs()).max(0.0))
    }

    fn check_start(&self) -> Result<()> {
        let sup = self.reference_value_sup()?;
        if sup > 1e-10 {
            return Err(Error::Precondition(format!(
                "the reference metric does not solve the homogeneous equation: sup|F| = {sup:.3e}"
            )));
        }
        let sub = self.check_subsolution()?;
        if !sub.passed {
            return Err(Error::Hypothesis(format!("subsolution test failed: {}", sub.detail)));
        }
        Ok(())
    }

    /// Per point and axis direction, compares `lim_{s→∞} f(λ + s e_i)` with `h`.
    pub fn check_subsolution(&self) -> Result<SubsolutionReport> {
        let d = self.domain();
        let pts = d.interior();
        let needs_inf = self.rhs.depends_on_u();
        let n = self.op.n;
        let zero = self.zero();
        let per_point = par::map_indexed(pts.len(), |k| {
            let idx = pts[k];
            let a = self.frames.whiten(k, &self.metric_at(&zero, idx));
            let lam = linalg::hermitian_eigenvalues(&a);
            let h = self.rhs.h0.values[idx];
            let mut worst = (f64::INFINITY, 0usize);
            for i in 0..n {
                let mut dir = vec![0.0; n];
                dir[i] = 1.0;
                let gap = match self.op.limit_along(&lam, &dir) {
                    Ok(l) if l == f64::INFINITY => f64::INFINITY,
                    Ok(_) if needs_inf => f64::NEG_INFINITY,
                    Ok(l) => l - h,
                    Err(_) => f64::NEG_INFINITY,
                };
                if gap < worst.0 {
                    worst = (gap, i);
                }
            }
            worst
        });
        let mut failures = 0;
        let mut worst: Option<(usize, usize, f64)> = None;
        for (k, &(gap, dir)) in per_point.iter().enumerate() {
            if !(gap > 0.0) {
                failures += 1;
            }
            if worst.is_none_or(|w| gap < w.2) {
                worst = Some((pts[k], dir, gap));
            }
        }
        let passed = failures == 0;
        let (wp, wd, wg) = worst.unwrap_or((0, 0, f64::INFINITY));
        let detail = if passed {
            "limits exceed h at every interior point".to_string()
        } else if wg == f64::NEG_INFINITY {
            format!(
                "{failures} point(s) fail; at point {wp} the limit along e_{} {}",
                wd + 1,
                if needs_inf {
                    "is finite or unreachable but h depends on u"
                } else {
                    "is unreachable (ray never enters the cone)"
                }
            )
        } else {
            format!("{failures} point(s) fail; worst gap limit - h = {wg:.6e} at point {wp} along e_{}", wd + 1)
        };
        Ok(SubsolutionReport {
            passed,
            failures,
            worst_point: worst.map(|w| w.0),
            worst_coords: worst.map(|w| d.coords(w.0)),
            worst_direction: worst.map(|w| w.1),
            worst_gap: wg,
            requires_infinite_limit: needs_inf,
            detail,
        })
    }

    fn report(&self, u: Vec<f64>, eps: f64, history: Vec<HistoryEntry>, increments: Vec<f64>) -> Result<SolveReport> {
        let d = self.domain().clone();
        let final_state = self.evaluate(&u, 1.0, eps, false)?;
        let g = self.metric_field(&u);
        let ratio = geometry::uniform_equivalence_ratio(&g, &self.alpha)?;
        let field = ScalarField {
            domain: d,
            values: u,
        };
        let decreasing = if increments.len() >= 3 {
            let l = increments.len();
            Some(increments[l - 3] > increments[l - 2] && increments[l - 2] > increments[l - 1])
        } else {
            None
        };
        let mut diagnostics = Vec::new();
        if let Some(a) = self.rhs.strict_monotonicity() {
            diagnostics.push(bounds::c0_bound_strict_hu(
                &self.op,
                &self.alpha,
                &self.chi,
                &self.rhs.h0,
                a,
                &field,
            )?);
        }
        Ok(SolveReport {
            operator: self.op.id(),
            eps,
            final_residual: final_state.sup,
            cone_margin_min: final_state.margin_min,
            equivalence_ratio: ratio,
            sup_u: field.interior_sup_abs(),
            u: field,
            residual_history: history,
            eps_increments: increments,
            increments_decreasing: decreasing,
            bound_diagnostics: diagnostics,
        })
    }

    /// Continuation to `t = 1` at `ε = rhs.eps`.
    pub fn continuity_solve(&self, cfg: &SolverConfig) -> Result<SolveReport> {
        cfg.validate()?;
        self.check_start()?;
        let eps = self.rhs.eps;
        let (u, history) = self.continuation(&self.zero(), eps, cfg)?;
        self.report(u, eps, history, Vec::new())
    }

    /// Damped Newton at `t = 1` from `u = 0`, for data where the homotopy start
    /// `F(α⁻¹χ) = 0` is unavailable (σ_k-type operators take positive values on their cone).
    pub fn direct_solve(&self, cfg: &SolverConfig) -> Result<SolveReport> {
        cfg.validate()?;
        let eps = self.rhs.eps;
        let (u, iters, res) = self.newton(&self.zero(), 1.0, eps, cfg)?;
        let history = vec![HistoryEntry {
            t: 1.0,
            eps,
            newton_iterations: iters,
            sup_residual: res,
        }];
        self.report(u, eps, history, Vec::new())
    }

    /// Runs the ε schedule, warm-starting each level from the previous solution.
    pub fn epsilon_limit_solve(&self, cfg: &SolverConfig) -> Result<SolveReport> {
        cfg.validate()?;
        self.check_start()?;
        let schedule = cfg.eps_schedule.values();
        let mut history = Vec::new();
        let mut increments = Vec::new();
        let mut u: Option<Vec<f64>> = None;
        for &eps in &schedule {
            let next = match &u {
                None => {
                    let (v, h) = self.continuation(&self.zero(), eps, cfg)?;
                    history.extend(h);
                    v
                }
                Some(prev) => match self.newton(prev, 1.0, eps, cfg) {
                    Ok((v, iters, res)) => {
                        history.push(HistoryEntry {
                            t: 1.0,
                            eps,
                            newton_iterations: iters,
                            sup_residual: res,
                        });
                        v
                    }
                    Err(e) if e.category() == Category::Convergence => {
                        let (v, h) = self.continuation(&self.zero(), eps, cfg)?;
                        history.extend(h);
                        v
                    }
                    Err(e) => return Err(e),
                },
            };
            if let Some(prev) = &u {
                let pts = self.domain().interior();
                increments.push(par::max_indexed(pts.len(), |k| (next[pts[k]] - prev[pts[k]]).abs()).max(0.0));
            }
            u = Some(next);
        }
        let eps = *schedule.last().unwrap_or(&0.0);
        self.report(u.unwrap_or_else(|| self.zero()), eps, history, increments)
    }
}

/// `h0 = F(A(u*))` by the same stencils as the solver, so that `u*` solves the discrete problem exactly.
pub fn manufactured_rhs(
    op: &OperatorSpec,
    alpha: &HermitianField,
    chi: &HermitianField,
    u_star: &ScalarField,
    kind: HessianKind,
) -> Result<ScalarField> {
    let zero = ScalarField::zeros(alpha.domain.clone());
    let p = Problem::with_kind(op.clone(), alpha.clone(), chi.clone(), Rhs::independent(zero), kind)?;
    let mut values = p.residual(&u_star.values, 0.0, 0.0)?;
    for (v, c) in values.iter_mut().zip(alpha.domain.classes()) {
        if *c != PointClass::Interior {
            *v = 0.0;
        }
    }
    ScalarField::from_values(alpha.domain.clone(), values)
}

pub fn check_subsolution(
    op: &OperatorSpec,
    alpha: &HermitianField,
    chi: &HermitianField,
    rhs: &Rhs,
) -> Result<SubsolutionReport> {
    Problem::new(op.clone(), alpha.clone(), chi.clone(), rhs.clone())?.check_subsolution()
}

/// Derivative of the residual at `u` applied to `du`, at homotopy parameter `t` and `ε = rhs.eps`.
pub fn linearized_apply(
    op: &OperatorSpec,
    u: &ScalarField,
    alpha: &HermitianField,
    chi: &HermitianField,
    rhs: &Rhs,
    t: f64,
    du: &ScalarField,
) -> Result<ScalarField> {
    let p = Problem::new(op.clone(), alpha.clone(), chi.clone(), rhs.clone())?;
    let v = p.linearized_apply(&u.values, t, rhs.eps, &du.values)?;
    ScalarField::from_values(u.domain.clone(), v)
}

pub fn newton_solve(
    op: &OperatorSpec,
    u0: &ScalarField,
    alpha: &HermitianField,
    chi: &HermitianField,
    rhs: &Rhs,
    t: f64,
    cfg: &SolverConfig,
) -> Result<(ScalarField, usize)> {
    cfg.validate()?;
    let p = Problem::new(op.clone(), alpha.clone(), chi.clone(), rhs.clone())?;
    let (u, it, _) = p.newton(&u0.values, t, rhs.eps, cfg)?;
    Ok((ScalarField::from_values(u0.domain.clone(), u)?, it))
}

pub fn continuity_solve(
    op: &OperatorSpec,
    alpha: &HermitianField,
    chi: &HermitianField,
    rhs: &Rhs,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    Problem::new(op.clone(), alpha.clone(), chi.clone(), rhs.clone())?.continuity_solve(cfg)
}

pub fn epsilon_limit_solve(
    op: &OperatorSpec,
    alpha: &HermitianField,
    chi: &HermitianField,
    rhs_base: &Rhs,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    Problem::new(op.clone(), alpha.clone(), chi.clone(), rhs_base.clone())?.epsilon_limit_solve(cfg)
}
