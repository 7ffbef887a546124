//! Peak-field QCQP:
//!
//! ```text
//! maximise  qᵀ A q
//! s.t.      qᵀ B₀ q = W₀,   qᵀ B_i q ≤ 0  (i = 1..k, k ≤ 2)
//! ```
//!
//! with `A ⪰ 0` and `B₀ ≻ 0`. Without inequalities the optimum is the top
//! generalized eigenvector of `(A, B₀)`. With inequalities the Lagrange dual
//! `g(κ) = W₀ λ_max(A, B₀ + Σ κ_i B_i)` is minimised over `κ ≥ 0`; its
//! partial derivatives have the sign of `−xᵀB_i x` at the top eigenvector
//! `x`, so each multiplier is found by a bracketing root search on that
//! residual. Zero duality gap is checked, not assumed.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator_assembly::quad;

/// Relative tolerance on `qᵀB₀q = W₀`.
pub const EQUALITY_TOL: f64 = 1e-9;
/// Complementary slackness and constraint tolerance, relative to `qᵀB₀q`.
pub const SLACKNESS_TOL: f64 = 1e-6;
/// Multiplier bracket width at which the search stops (relative).
pub const BRACKET_TOL: f64 = 1e-12;
/// Accepted relative gap between dual bound and primal value.
pub const GAP_TOL: f64 = 1e-6;
const MAX_BRACKET_DOUBLINGS: usize = 200;
const MAX_ROOT_STEPS: usize = 200;

#[derive(Debug, Clone)]
pub enum Objective {
    Dense(DMatrix<f64>),
    /// `A = FᵀF` with `F` of size `rows × n`; preferred when `rows` is small.
    Factor(DMatrix<f64>),
}

impl Objective {
    pub fn dim(&self) -> usize {
        match self {
            Objective::Dense(a) => a.ncols(),
            Objective::Factor(f) => f.ncols(),
        }
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        match self {
            Objective::Dense(a) => quad(a, q),
            Objective::Factor(f) => f
                .row_iter()
                .map(|r| {
                    let v: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
                    v * v
                })
                .sum(),
        }
    }
}

/// Linear terms of the general problem. Stored for completeness; the solve
/// paths reject non-zero linear terms.
#[derive(Debug, Clone, Default)]
pub struct LinearTerms {
    pub objective: Option<Vec<f64>>,
    pub constraints: Vec<Option<Vec<f64>>>,
}

impl LinearTerms {
    fn is_zero(&self) -> bool {
        let zero = |v: &Option<Vec<f64>>| v.as_ref().is_none_or(|v| v.iter().all(|&x| x == 0.0));
        zero(&self.objective) && self.constraints.iter().all(zero)
    }
}

#[derive(Debug, Clone)]
pub struct QcqpProblem {
    pub objective: Objective,
    pub b0: DMatrix<f64>,
    pub w0: f64,
    pub inequalities: Vec<DMatrix<f64>>,
    pub linear: LinearTerms,
}

impl QcqpProblem {
    pub fn new(objective: Objective, b0: DMatrix<f64>, w0: f64) -> Self {
        QcqpProblem {
            objective,
            b0,
            w0,
            inequalities: Vec::new(),
            linear: LinearTerms::default(),
        }
    }

    pub fn with_inequality(mut self, b: DMatrix<f64>) -> Self {
        self.inequalities.push(b);
        self
    }

    pub fn dim(&self) -> usize {
        self.b0.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::Problem("empty problem".into()));
        }
        let square = |m: &DMatrix<f64>, context| {
            if m.nrows() != n || m.ncols() != n {
                Err(Error::Dimension {
                    context,
                    expected: n,
                    actual: if m.nrows() != n { m.nrows() } else { m.ncols() },
                })
            } else {
                Ok(())
            }
        };
        square(&self.b0, "equality matrix")?;
        match &self.objective {
            Objective::Dense(a) => square(a, "objective matrix")?,
            Objective::Factor(f) => {
                if f.ncols() != n {
                    return Err(Error::Dimension {
                        context: "objective factor columns",
                        expected: n,
                        actual: f.ncols(),
                    });
                }
            }
        }
        for b in &self.inequalities {
            square(b, "inequality matrix")?;
        }
        if !(self.w0.is_finite() && self.w0 > 0.0) {
            return Err(Error::Problem(format!("energy level W0 must be positive, got {}", self.w0)));
        }
        if !self.linear.is_zero() {
            return Err(Error::Problem(
                "linear terms are experimental and not supported by the solvers".into(),
            ));
        }
        if Cholesky::new(self.b0.clone()).is_none() {
            return Err(Error::Problem("equality matrix B0 is not positive definite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certificate {
    EigenOptimal,
    DualBisectionOptimal,
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    /// `|qᵀB₀q − W₀| / W₀`
    pub equality: f64,
    /// `qᵀB_i q / qᵀB₀q`
    pub inequalities: Vec<f64>,
    /// `(dual bound − value) / value`
    pub duality_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct QcqpSolution {
    pub q: Vec<f64>,
    pub value: f64,
    pub dual_value: f64,
    pub multipliers: Vec<f64>,
    pub residuals: Residuals,
    pub certificate: Certificate,
}

impl QcqpSolution {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "value": self.value,
            "dual_value": self.dual_value,
            "q": self.q.iter().map(|&x| [x, 0.0]).collect::<Vec<_>>(),
            "multipliers": self.multipliers,
            "residuals": self.residuals,
            "certificate": self.certificate,
        })
    }
}

/// Top generalized eigenpair of `(A, B)`; `None` when `B` is not PD.
#[derive(Clone)]
struct Eigen {
    lambda: f64,
    x: DVector<f64>,
    /// Second eigenvector when the top eigenvalue is (nearly) repeated.
    twin: Option<DVector<f64>>,
}

fn top_generalized(objective: &Objective, b: &DMatrix<f64>) -> Option<Eigen> {
    let chol = Cholesky::new(b.clone())?;
    let l = chol.l();
    let (values, vectors) = match objective {
        Objective::Factor(f) => {
            // λ(FᵀF, LLᵀ) = λ(GᵀG) with G = L⁻¹Fᵀ
            let g = l.solve_lower_triangular(&f.transpose())?;
            let small = g.tr_mul(&g);
            let eig = SymmetricEigen::new(small);
            let vecs = &g * &eig.eigenvectors;
            (eig.eigenvalues, vecs)
        }
        Objective::Dense(a) => {
            let t = l.solve_lower_triangular(a)?;
            let c = l.solve_lower_triangular(&t.transpose())?;
            let c = (&c + c.transpose()) * 0.5;
            let eig = SymmetricEigen::new(c);
            (eig.eigenvalues, eig.eigenvectors)
        }
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    let top = order[0];
    let lambda = values[top].max(0.0);
    let back = |y: DVector<f64>| l.transpose().solve_upper_triangular(&y);
    let x = back(vectors.column(top).into_owned())?;
    let twin = order.get(1).and_then(|&s| {
        if lambda > 0.0 && (lambda - values[s]).abs() <= 1e-10 * lambda {
            back(vectors.column(s).into_owned())
        } else {
            None
        }
    });
    Some(Eigen { lambda, x, twin })
}

fn form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}

/// Scales to the energy shell and fixes the sign of the first non-zero
/// coefficient.
fn normalise(x: &DVector<f64>, b0: &DMatrix<f64>, w0: f64) -> DVector<f64> {
    let e = form(b0, x);
    let mut q = x * (w0 / e).sqrt();
    let peak = q.amax();
    if let Some(first) = q.iter().find(|v| v.abs() > 1e-12 * peak) {
        if *first < 0.0 {
            q = -q;
        }
    }
    q
}

fn finish(
    problem: &QcqpProblem,
    x: &DVector<f64>,
    dual_value: f64,
    multipliers: Vec<f64>,
    certificate: Certificate,
) -> QcqpSolution {
    let q = normalise(x, &problem.b0, problem.w0);
    let qs = q.as_slice();
    let value = problem.objective.value(qs);
    let energy = form(&problem.b0, &q);
    let inequalities = problem.inequalities.iter().map(|b| form(b, &q) / energy).collect();
    let gap = if value > 0.0 {
        (dual_value - value) / value
    } else {
        dual_value - value
    };
    QcqpSolution {
        q: qs.to_vec(),
        value,
        dual_value,
        multipliers,
        residuals: Residuals {
            equality: (energy - problem.w0).abs() / problem.w0,
            inequalities,
            duality_gap: gap,
        },
        certificate,
    }
}

/// Optimum without inequality constraints.
pub fn solve_unconstrained(problem: &QcqpProblem) -> Result<QcqpSolution> {
    problem.validate()?;
    if !problem.inequalities.is_empty() {
        return Err(Error::Problem("use solve_constrained for problems with inequalities".into()));
    }
    let eig = top_generalized(&problem.objective, &problem.b0)
        .ok_or_else(|| Error::Problem("equality matrix B0 is not positive definite".into()))?;
    Ok(finish(
        problem,
        &eig.x,
        problem.w0 * eig.lambda,
        Vec::new(),
        Certificate::EigenOptimal,
    ))
}

/// Dispatches on the number of inequalities.
pub fn solve(problem: &QcqpProblem) -> Result<QcqpSolution> {
    if problem.inequalities.is_empty() {
        solve_unconstrained(problem)
    } else {
        solve_constrained(problem)
    }
}

#[derive(Clone)]
struct DualPoint {
    kappa: Vec<f64>,
    eig: Eigen,
    /// `xᵀB_i x / xᵀB₀x`
    r: Vec<f64>,
}

struct Dual<'a> {
    problem: &'a QcqpProblem,
    evaluations: usize,
}

impl<'a> Dual<'a> {
    fn pencil(&self, kappa: &[f64]) -> DMatrix<f64> {
        let mut b = self.problem.b0.clone();
        for (k, bi) in kappa.iter().zip(&self.problem.inequalities) {
            if *k != 0.0 {
                b += bi * *k;
            }
        }
        b
    }

    fn eval(&mut self, kappa: &[f64]) -> Option<DualPoint> {
        self.evaluations += 1;
        let b = self.pencil(kappa);
        let eig = top_generalized(&self.problem.objective, &b)?;
        let energy = form(&self.problem.b0, &eig.x);
        if !(energy > 0.0) {
            return None;
        }
        let r = self.problem.inequalities.iter().map(|bi| form(bi, &eig.x) / energy).collect();
        Some(DualPoint {
            kappa: kappa.to_vec(),
            eig,
            r,
        })
    }

    fn dual_value(&self, p: &DualPoint) -> f64 {
        self.problem.w0 * p.eig.lambda
    }

    /// Minimises the dual along coordinate `i` with the other multipliers
    /// fixed. Returns the bracket end points `(lo, hi)` around the root of
    /// `r_i`; `hi` is `None` when the bracket closes on the PD boundary.
    fn search(&mut self, kappa: &[f64], i: usize) -> Result<(DualPoint, Option<DualPoint>)> {
        let mut k = kappa.to_vec();
        k[i] = 0.0;
        let start = self.eval(&k).ok_or_else(|| {
            Error::Numerical("dual pencil lost definiteness at zero multiplier".into())
        })?;
        if start.r[i] <= 0.0 {
            return Ok((start, None));
        }
        let scale = self.pencil(&k).amax() / self.problem.inequalities[i].amax().max(f64::MIN_POSITIVE);
        let mut lo = start;
        let mut hi_k = scale;
        let mut hi: Option<DualPoint>;
        let mut doublings = 0;
        loop {
            k[i] = hi_k;
            match self.eval(&k) {
                Some(p) if p.r[i] > 0.0 => {
                    lo = p;
                    hi_k *= 2.0;
                }
                other => {
                    hi = other;
                    break;
                }
            }
            doublings += 1;
            if doublings > MAX_BRACKET_DOUBLINGS {
                return Err(Error::Infeasible(format!(
                    "constraint {} stays violated for every multiplier",
                    i + 1
                )));
            }
        }
        // Bracketed root of r_i: Illinois steps while both ends are
        // evaluable, plain bisection otherwise.
        let mut hi_kappa = hi_k;
        let mut side = 0i8;
        let (mut f_lo, mut f_hi) = (lo.r[i], hi.as_ref().map(|p| p.r[i]));
        for _ in 0..MAX_ROOT_STEPS {
            let lo_kappa = lo.kappa[i];
            if hi_kappa - lo_kappa <= BRACKET_TOL * hi_kappa {
                break;
            }
            let mid = match f_hi {
                Some(fh) if fh < 0.0 => {
                    let t = lo_kappa + (hi_kappa - lo_kappa) * f_lo / (f_lo - fh);
                    let guard = 1e-3 * (hi_kappa - lo_kappa);
                    t.clamp(lo_kappa + guard, hi_kappa - guard)
                }
                _ => 0.5 * (lo_kappa + hi_kappa),
            };
            k[i] = mid;
            match self.eval(&k) {
                Some(p) if p.r[i] > 0.0 => {
                    f_lo = p.r[i];
                    lo = p;
                    if side == -1 {
                        f_hi = f_hi.map(|f| 0.5 * f);
                    }
                    side = -1;
                }
                Some(p) if p.r[i] == 0.0 => {
                    return Ok((p, None));
                }
                other => {
                    f_hi = other.as_ref().map(|p| p.r[i]);
                    hi = other;
                    hi_kappa = mid;
                    if side == 1 {
                        f_lo *= 0.5;
                    }
                    side = 1;
                }
            }
            if f_lo.abs() < 1e-14 {
                break;
            }
        }
        Ok((lo, hi))
    }
}

/// Best combination `cos θ·u + sin θ·v` with `r_i = 0` that keeps the other
/// residuals non-positive; maximises the objective among admissible roots.
fn combine(problem: &QcqpProblem, u: &DVector<f64>, v: &DVector<f64>, i: usize) -> Option<DVector<f64>> {
    let b = &problem.inequalities[i];
    let (a, c, bb) = (form(b, u), form(b, v), u.dot(&(b * v)));
    // a cos² + 2 bb cos sin + c sin² = 0
    let mut roots = Vec::new();
    if a.abs() < 1e-300 {
        roots.push(0.0);
    }
    let disc = bb * bb - a * c;
    if disc >= 0.0 && c.abs() > 1e-300 {
        // tan θ = (−bb ± √disc)/c
        for s in [-1.0, 1.0] {
            roots.push(((-bb + s * disc.sqrt()) / c).atan());
        }
    } else if disc >= 0.0 && bb.abs() > 1e-300 {
        roots.push((-a / (2.0 * bb)).atan());
    }
    let mut best: Option<(f64, DVector<f64>)> = None;
    for theta in roots {
        let z = u * theta.cos() + v * theta.sin();
        let e = form(&problem.b0, &z);
        if !(e > 0.0) {
            continue;
        }
        let ok = problem
            .inequalities
            .iter()
            .enumerate()
            .all(|(j, bj)| j == i || form(bj, &z) / e <= SLACKNESS_TOL);
        if !ok {
            continue;
        }
        let val = problem.objective.value(z.as_slice()) / e;
        if best.as_ref().is_none_or(|(bv, _)| val > *bv) {
            best = Some((val, z));
        }
    }
    best.map(|(_, z)| z)
}

/// Null direction of the pencil near the PD boundary: the smallest
/// generalized eigenvector of `(B(κ), B₀)`.
fn boundary_direction(problem: &QcqpProblem, b: &DMatrix<f64>) -> Option<DVector<f64>> {
    let chol = Cholesky::new(problem.b0.clone())?;
    let l = chol.l();
    let t = l.solve_lower_triangular(b)?;
    let c = l.solve_lower_triangular(&t.transpose())?;
    let eig = SymmetricEigen::new((&c + c.transpose()) * 0.5);
    let idx = eig.eigenvalues.imin();
    l.transpose().solve_upper_triangular(&eig.eigenvectors.column(idx).into_owned())
}

/// Optimum with one or two quadratic inequalities via dual search.
pub fn solve_constrained(problem: &QcqpProblem) -> Result<QcqpSolution> {
    problem.validate()?;
    let k = problem.inequalities.len();
    if k == 0 {
        return Err(Error::Problem("no inequalities; use solve_unconstrained".into()));
    }
    if k > 2 {
        return Err(Error::Problem(format!("at most two inequalities are supported, got {k}")));
    }
    let probe = feasibility_probe(problem)?;
    if !probe.feasible {
        return Err(Error::Infeasible(format!(
            "no excitation satisfies the inequalities (best max residual {:.3e})",
            probe.min_max_residual
        )));
    }
    let mut dual = Dual {
        problem,
        evaluations: 0,
    };
    let (lo, hi) = if k == 1 {
        dual.search(&[0.0], 0)?
    } else {
        search_two(&mut dual)?
    };
    let mut best_dual = dual.dual_value(&lo);
    if let Some(h) = &hi {
        best_dual = best_dual.min(dual.dual_value(h));
    }
    let violation = |r: &[f64]| r.iter().fold(0.0f64, |m, &x| m.max(x));
    let mut x = lo.eig.x.clone();
    let mut residual = violation(&lo.r);
    if let Some(h) = &hi {
        if violation(&h.r) < residual && h.r.iter().all(|v| *v <= SLACKNESS_TOL) {
            x = h.eig.x.clone();
            residual = violation(&h.r);
        }
    }
    if residual > SLACKNESS_TOL {
        // Hard case: mix the two bracket ends, a repeated eigenvector, or the
        // pencil's null direction to land exactly on the active constraint.
        let worst = lo
            .r
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut partners: Vec<DVector<f64>> = Vec::new();
        if let Some(h) = &hi {
            partners.push(h.eig.x.clone());
        }
        if let Some(t) = &lo.eig.twin {
            partners.push(t.clone());
        }
        if let Some(z) = boundary_direction(problem, &dual.pencil(&lo.kappa)) {
            partners.push(z);
        }
        let mut best: Option<(f64, DVector<f64>)> = None;
        for v in &partners {
            if let Some(z) = combine(problem, &lo.eig.x, v, worst) {
                let val = problem.objective.value(z.as_slice()) / form(&problem.b0, &z);
                if best.as_ref().is_none_or(|(b, _)| val > *b) {
                    best = Some((val, z));
                }
            }
        }
        match best {
            Some((_, z)) => x = z,
            None => {
                return Err(Error::IterationLimit {
                    iterations: dual.evaluations,
                    detail: format!(
                        "no primal point on the active constraint; best residual {residual:.3e}, dual bound {best_dual:.6e}"
                    ),
                })
            }
        }
    }
    let solution = finish(
        problem,
        &x,
        best_dual,
        lo.kappa.clone(),
        Certificate::DualBisectionOptimal,
    );
    let worst = solution.residuals.inequalities.iter().fold(f64::MIN, |m, &x| m.max(x));
    if solution.residuals.duality_gap.abs() > GAP_TOL || worst > SLACKNESS_TOL {
        return Err(Error::IterationLimit {
            iterations: dual.evaluations,
            detail: format!(
                "duality gap {:.3e}, worst inequality residual {worst:.3e}, best value {:.6e}",
                solution.residuals.duality_gap, solution.value
            ),
        });
    }
    Ok(solution)
}

/// Nested search for two multipliers: the outer coordinate `κ₂` follows the
/// sign of `r₂` at the inner optimum over `κ₁`.
fn search_two(dual: &mut Dual<'_>) -> Result<(DualPoint, Option<DualPoint>)> {
    let inner = |dual: &mut Dual<'_>, k2: f64| -> Result<Option<(DualPoint, Option<DualPoint>)>> {
        let b = dual.pencil(&[0.0, k2]);
        if Cholesky::new(b).is_none() {
            return Ok(None);
        }
        match dual.search(&[0.0, k2], 0) {
            Ok(pair) => Ok(Some(pair)),
            Err(Error::Infeasible(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let start = inner(dual, 0.0)?.ok_or_else(|| Error::Numerical("dual pencil singular at zero".into()))?;
    if start.0.r[1] <= 0.0 {
        return Ok(start);
    }
    let scale = dual.problem.b0.amax() / dual.problem.inequalities[1].amax().max(f64::MIN_POSITIVE);
    let mut lo = start;
    let mut lo_k = 0.0;
    let mut hi_k = scale;
    let mut hi: Option<(DualPoint, Option<DualPoint>)>;
    let mut doublings = 0;
    loop {
        match inner(dual, hi_k)? {
            Some(p) if p.0.r[1] > 0.0 => {
                lo = p;
                lo_k = hi_k;
                hi_k *= 2.0;
            }
            other => {
                hi = other;
                break;
            }
        }
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(Error::Infeasible("second constraint stays violated for every multiplier".into()));
        }
    }
    for _ in 0..MAX_ROOT_STEPS {
        if hi_k - lo_k <= BRACKET_TOL * hi_k {
            break;
        }
        let mid = 0.5 * (lo_k + hi_k);
        match inner(dual, mid)? {
            Some(p) if p.0.r[1] > 0.0 => {
                lo = p;
                lo_k = mid;
            }
            Some(p) if p.0.r[1] == 0.0 => return Ok(p),
            other => {
                hi = other;
                hi_k = mid;
            }
        }
    }
    // Prefer the end whose second residual is already within tolerance.
    match hi {
        Some(h) if h.0.r[1] >= -SLACKNESS_TOL && h.0.r.iter().all(|v| *v <= SLACKNESS_TOL) => Ok(h),
        Some(h) => Ok((lo.0, Some(h.0))),
        None => Ok(lo),
    }
}

/// Per-constraint spectrum of the pencil `(B_i, B₀)`.
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintSpectrum {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub negative_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub spectra: Vec<ConstraintSpectrum>,
    /// Smallest `max_i qᵀB_i q / qᵀB₀q` found over the candidates.
    pub min_max_residual: f64,
    /// Lower bound on that minimum from the eigenvalues of `Σ θ_i B_i`.
    pub lower_bound: f64,
    pub feasible: bool,
    /// Strictly feasible point scaled to the equality shell.
    pub witness: Option<Vec<f64>>,
}

fn generalized_spectrum(b: &DMatrix<f64>, b0: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let chol = Cholesky::<f64, Dyn>::new(b0.clone())
        .ok_or_else(|| Error::Problem("equality matrix B0 is not positive definite".into()))?;
    let l = chol.l();
    let t = l
        .solve_lower_triangular(b)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&t.transpose())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let eig = SymmetricEigen::new((&c + c.transpose()) * 0.5);
    let vecs = l
        .transpose()
        .solve_upper_triangular(&eig.eigenvectors)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    Ok((eig.eigenvalues, vecs))
}

/// Checks whether some `q` strictly satisfies every inequality.
pub fn feasibility_probe(problem: &QcqpProblem) -> Result<FeasibilityReport> {
    problem.validate()?;
    let b0 = &problem.b0;
    let mut spectra = Vec::new();
    for b in &problem.inequalities {
        let (vals, _) = generalized_spectrum(b, b0)?;
        spectra.push(ConstraintSpectrum {
            min_eigenvalue: vals.min(),
            max_eigenvalue: vals.max(),
            negative_count: vals.iter().filter(|v| **v < 0.0).count(),
        });
    }
    let residual_max = |x: &DVector<f64>| -> f64 {
        let e = form(b0, x);
        problem
            .inequalities
            .iter()
            .map(|b| form(b, x) / e)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    // Candidate directions: the most negative eigenvector of each convex
    // combination θ B₁ + (1−θ) B₂ on a grid refined by golden section.
    let mix = |theta: f64| -> DMatrix<f64> {
        match problem.inequalities.len() {
            0 => DMatrix::zeros(b0.nrows(), b0.ncols()),
            1 => problem.inequalities[0].clone(),
            _ => &problem.inequalities[0] * theta + &problem.inequalities[1] * (1.0 - theta),
        }
    };
    let lowest = |theta: f64| -> Result<(f64, DVector<f64>)> {
        let (vals, vecs) = generalized_spectrum(&mix(theta), b0)?;
        let i = vals.imin();
        Ok((vals[i], vecs.column(i).into_owned()))
    };
    let mut best_bound;
    let mut witness_dir: Option<(f64, DVector<f64>)> = None;
    let consider = |x: DVector<f64>, witness_dir: &mut Option<(f64, DVector<f64>)>| {
        let r = residual_max(&x);
        if witness_dir.as_ref().is_none_or(|(b, _)| r < *b) {
            *witness_dir = Some((r, x));
        }
    };
    if problem.inequalities.is_empty() {
        let x = DVector::from_element(b0.nrows(), 1.0);
        let q = normalise(&x, b0, problem.w0);
        return Ok(FeasibilityReport {
            spectra,
            min_max_residual: f64::NEG_INFINITY,
            lower_bound: f64::NEG_INFINITY,
            feasible: true,
            witness: Some(q.as_slice().to_vec()),
        });
    }
    if problem.inequalities.len() == 1 {
        let (v, x) = lowest(0.0)?;
        best_bound = v;
        consider(x, &mut witness_dir);
    } else {
        // g(θ) = λ_min(θB₁ + (1−θ)B₂, B₀) is concave; its maximum equals
        // min_q max(r₁, r₂).
        let grid = 8;
        let mut vals = Vec::with_capacity(grid + 1);
        for s in 0..=grid {
            let theta = s as f64 / grid as f64;
            let (v, x) = lowest(theta)?;
            consider(x, &mut witness_dir);
            vals.push(v);
        }
        let imax = (0..vals.len()).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
        let (mut a, mut b) = (
            imax.saturating_sub(1) as f64 / grid as f64,
            (imax + 1).min(grid) as f64 / grid as f64,
        );
        best_bound = vals[imax];
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..40 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            let (vc, xc) = lowest(c)?;
            let (vd, xd) = lowest(d)?;
            consider(xc, &mut witness_dir);
            consider(xd, &mut witness_dir);
            best_bound = best_bound.max(vc).max(vd);
            if vc > vd {
                b = d;
            } else {
                a = c;
            }
        }
        let theta = 0.5 * (a + b);
        let (_, x) = lowest(theta)?;
        // Mix eigenvectors from either side of the optimum.
        let (_, xa) = lowest((theta - 1e-3).max(0.0))?;
        let (_, xb) = lowest((theta + 1e-3).min(1.0))?;
        for (u, v) in [(&x, &xa), (&x, &xb), (&xa, &xb)] {
            for t in 0..16 {
                let ang = std::f64::consts::PI * t as f64 / 16.0;
                consider(u * ang.cos() + v * ang.sin(), &mut witness_dir);
            }
        }
        consider(x, &mut witness_dir);
    }
    let (witness_residual, witness) = match witness_dir {
        Some((r, x)) if r < 0.0 => (r, Some(normalise(&x, b0, problem.w0).as_slice().to_vec())),
        Some((r, _)) => (r, None),
        None => (f64::INFINITY, None),
    };
    let feasible = witness.is_some() || best_bound < 0.0;
    Ok(FeasibilityReport {
        spectra,
        min_max_residual: witness_residual,
        lower_bound: best_bound,
        feasible,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rank_one_matched_filter() {
        let f = DMatrix::from_row_slice(1, 4, &[3.0, -4.0, 0.0, 0.0]);
        let p = QcqpProblem::new(Objective::Factor(f), DMatrix::identity(4, 4), 2.0);
        let s = solve_unconstrained(&p).unwrap();
        assert_relative_eq!(s.value, 2.0 * 25.0, max_relative = 1e-12);
        let norm = 2f64.sqrt() / 5.0;
        assert_relative_eq!(s.q[0], 3.0 * norm, max_relative = 1e-12);
        assert_relative_eq!(s.q[1], -4.0 * norm, max_relative = 1e-12);
        assert_eq!(s.certificate, Certificate::EigenOptimal);
    }

    #[test]
    fn indefinite_b0_is_problem_error() {
        let f = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let p = QcqpProblem::new(Objective::Factor(f), b0, 1.0);
        assert!(matches!(solve_unconstrained(&p), Err(Error::Problem(_))));
    }

    #[test]
    fn nonzero_linear_terms_are_rejected() {
        let f = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let mut p = QcqpProblem::new(Objective::Factor(f), DMatrix::identity(2, 2), 1.0);
        p.linear.objective = Some(vec![1.0, 0.0]);
        assert!(matches!(solve(&p), Err(Error::Problem(_))));
    }

    #[test]
    fn trust_region_style_constraint() {
        // maximise (x0 + x1)² on |x|² = 1 with x0² ≤ 0.1 |x|²
        let f = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b1 = DMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.0, -0.1]);
        let p = QcqpProblem::new(Objective::Factor(f), DMatrix::identity(2, 2), 1.0).with_inequality(b1);
        let s = solve_constrained(&p).unwrap();
        let exact = (0.1f64.sqrt() + 0.9f64.sqrt()).powi(2);
        assert_relative_eq!(s.value, exact, max_relative = 1e-9);
        assert!(s.residuals.inequalities[0].abs() < 1e-6);
        assert!(s.multipliers[0] > 0.0);
    }

    #[test]
    fn positive_constraint_is_infeasible() {
        let f = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let p = QcqpProblem::new(Objective::Factor(f), DMatrix::identity(2, 2), 1.0)
            .with_inequality(DMatrix::identity(2, 2));
        let probe = feasibility_probe(&p).unwrap();
        assert!(!probe.feasible);
        assert!(matches!(solve(&p), Err(Error::Infeasible(_))));
    }

    #[test]
    fn negative_constraint_is_inactive() {
        let f = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 2.0]);
        let base = QcqpProblem::new(Objective::Factor(f), DMatrix::identity(3, 3), 1.0);
        let p = base.clone().with_inequality(-DMatrix::<f64>::identity(3, 3));
        let probe = feasibility_probe(&p).unwrap();
        assert!(probe.feasible && probe.witness.is_some());
        let a = solve_unconstrained(&base).unwrap();
        let b = solve(&p).unwrap();
        assert_eq!(b.multipliers, vec![0.0]);
        assert_relative_eq!(a.value, b.value, max_relative = 1e-12);
    }
}
