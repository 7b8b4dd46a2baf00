//! Gradient-field exports, gradient verification sweeps and the Helmholtz
//! inverse report, together with their JSON encodings.
//!
//! Every document carries a `schema` field of the form `name/major`; loaders
//! reject majors they do not know. Keys are emitted in sorted order and floats
//! in shortest round-trip form, so identical inputs give identical bytes.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjoint::GradientPath;
use crate::fdcheck::{fd_total_gradient, relative_error, FdConfig};
use crate::optimize::{minimize, GradientSource, OptimizerConfig, Termination};
use crate::problems::{
    applicable_paths, gradient_at_state, objective, Example1, Example2, HelmholtzGrid, HelmholtzProblem, Problem,
    HELMHOLTZ_K2,
};
use crate::wirtinger::{realify, to_real_coords, TangentSpaceKind};
use crate::Error;

pub const FIELD_SCHEMA: &str = "fieldexport/1";
pub const INVERSE_SCHEMA: &str = "inverse/1";
pub const CHECK_SCHEMA: &str = "check/1";

/// Adjoint-vs-FD tolerance used by [`run_check`].
pub const CHECK_FD_TOL: f64 = 1e-5;
/// Tolerance between gradient paths used by [`run_check`].
pub const CHECK_PATH_TOL: f64 = 1e-9;
/// Gradient norms below this are compared absolutely rather than relatively.
pub const CHECK_FLOOR: f64 = 1e-6;
/// Points where `A(p)` is this badly conditioned are skipped by the Example 2 sweep.
pub const EX2_CONDITION_LIMIT: f64 = 1e8;
/// Final cost an inverse run must reach to count as a success.
pub const INVERSE_COST_TARGET: f64 = 1e-6;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Ex1,
    Ex2,
    Helmholtz,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Ex1 => "ex1",
            ProblemKind::Ex2 => "ex2",
            ProblemKind::Helmholtz => "helmholtz",
        }
    }

    /// Box in the `(x, y)` plane from which parameters are drawn by default.
    pub fn default_domain(self) -> [f64; 2] {
        match self {
            ProblemKind::Ex1 | ProblemKind::Ex2 => [-0.5, 0.5],
            ProblemKind::Helmholtz => [-1.0, 1.0],
        }
    }

    /// `(p₁, p₂)` for Example 1, `x + iy` otherwise.
    pub fn param_at(self, x: f64, y: f64) -> Vec<Complex64> {
        match self {
            ProblemKind::Ex1 => vec![Complex64::new(x, 0.0), Complex64::new(y, 0.0)],
            _ => vec![Complex64::new(x, y)],
        }
    }

    pub fn build(self, helmholtz: &HelmholtzSetup) -> Result<Box<dyn Problem>, Error> {
        Ok(match self {
            ProblemKind::Ex1 => Box::new(Example1),
            ProblemKind::Ex2 => Box::new(Example2),
            ProblemKind::Helmholtz => Box::new(helmholtz.build()?),
        })
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "ex1" => Ok(ProblemKind::Ex1),
            "ex2" => Ok(ProblemKind::Ex2),
            "helmholtz" => Ok(ProblemKind::Helmholtz),
            other => Err(Error::InvalidConfig(format!("unknown problem `{other}` (expected ex1, ex2 or helmholtz)"))),
        }
    }
}

/// How the Helmholtz problem is instantiated: inversion grid, truth grid and
/// the parameter that generates the targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelmholtzSetup {
    pub n: usize,
    pub truth_n: usize,
    pub k2: f64,
    pub p_true: Complex64,
}

impl Default for HelmholtzSetup {
    fn default() -> Self {
        Self { n: 120, truth_n: 1000, k2: HELMHOLTZ_K2, p_true: Complex64::new(0.5, 0.5) }
    }
}

impl HelmholtzSetup {
    pub fn build(&self) -> Result<HelmholtzProblem, Error> {
        HelmholtzProblem::from_truth(HelmholtzGrid::new(self.n, self.k2)?, self.truth_n, self.p_true)
    }
}

/// A complex number as `{"re": …, "im": …}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JsonComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for JsonComplex {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<JsonComplex> for Complex64 {
    fn from(z: JsonComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self, Error> {
        if count == 0 || !(min.is_finite() && max.is_finite()) || (count > 1 && !(max > min)) {
            return Err(Error::InvalidConfig(format!("bad axis [{min}, {max}] with {count} points")));
        }
        Ok(Self { min, max, count })
    }

    pub fn value(&self, k: usize) -> f64 {
        if self.count == 1 {
            return self.min;
        }
        if k + 1 == self.count {
            return self.max;
        }
        self.min + (self.max - self.min) * k as f64 / (self.count - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.value(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axes {
    pub x: Axis,
    pub y: Axis,
}

/// Cost and gradient sampled on a rectangular grid. Row `r`, column `c`
/// corresponds to `(x_c, y_r)`. `grad_re`/`grad_im` hold the `x` and `y`
/// components of the realified gradient, which for a complex parameter are
/// `Re ∇f` and `Im ∇f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldExport {
    pub schema: String,
    pub problem: String,
    pub path: String,
    pub version: String,
    pub axes: Axes,
    pub cost: Vec<Vec<Option<f64>>>,
    pub grad_re: Vec<Vec<Option<f64>>>,
    pub grad_im: Vec<Vec<Option<f64>>>,
    pub nulls: Vec<[usize; 2]>,
}

impl FieldExport {
    pub fn grad_norm(&self, r: usize, c: usize) -> Option<f64> {
        Some(self.grad_re[r][c]?.hypot(self.grad_im[r][c]?))
    }

    pub fn to_json(&self) -> Result<String, Error> {
        to_sorted_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        from_versioned_json(text, FIELD_SCHEMA)
    }
}

/// Samples `problem` on `axes`, in parallel. Points where the state solve or
/// the gradient fails are recorded as nulls.
pub fn compute_field(
    kind: ProblemKind,
    problem: &dyn Problem,
    axes: Axes,
    path: Option<GradientPath>,
) -> FieldExport {
    let xs = axes.x.values();
    let ys = axes.y.values();
    let points: Vec<(usize, usize)> = (0..ys.len()).flat_map(|r| (0..xs.len()).map(move |c| (r, c))).collect();
    let values: Vec<Option<(f64, f64, f64)>> = points
        .par_iter()
        .map(|&(r, c)| {
            let p = kind.param_at(xs[c], ys[r]);
            let state = problem.solve_state(&p).ok()?;
            let report = gradient_at_state(problem, &state, &p, path).ok()?;
            let g = realify_xy(&report.grad, problem.tangent_kind());
            let f = problem.value(&state, &p);
            (f.is_finite() && g[0].is_finite() && g[1].is_finite()).then_some((f, g[0], g[1]))
        })
        .collect();

    let mut cost = vec![vec![None; xs.len()]; ys.len()];
    let mut grad_re = cost.clone();
    let mut grad_im = cost.clone();
    let mut nulls = Vec::new();
    for (&(r, c), v) in points.iter().zip(values) {
        match v {
            Some((f, gx, gy)) => {
                cost[r][c] = Some(f);
                grad_re[r][c] = Some(gx);
                grad_im[r][c] = Some(gy);
            }
            None => nulls.push([r, c]),
        }
    }
    let path_name = match path {
        Some(p) => p.name(),
        None => "preferred",
    };
    FieldExport {
        schema: FIELD_SCHEMA.to_owned(),
        problem: kind.name().to_owned(),
        path: path_name.to_owned(),
        version: VERSION.to_owned(),
        axes,
        cost,
        grad_re,
        grad_im,
        nulls,
    }
}

fn realify_xy(grad: &[Complex64], kind: TangentSpaceKind) -> [f64; 2] {
    match kind {
        TangentSpaceKind::RealHilbert => [grad[0].re, grad[1].re],
        TangentSpaceKind::ComplexHilbert => {
            let v = realify(grad);
            [v[0], v[1]]
        }
    }
}

/// Worst-case deviations found by [`run_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub schema: String,
    pub problem: String,
    pub samples: usize,
    pub seed: u64,
    pub max_fd_rel_error: f64,
    pub max_path_rel_error: f64,
    pub fd_tol: f64,
    pub path_tol: f64,
    pub passed: bool,
}

impl CheckSummary {
    pub fn to_json(&self) -> Result<String, Error> {
        to_sorted_json(self)
    }
}

/// Draws `samples` seeded points in the problem's default domain and compares
/// the preferred gradient against central differences and against every other
/// applicable path.
pub fn run_check(kind: ProblemKind, problem: &dyn Problem, samples: usize, seed: u64) -> Result<CheckSummary, Error> {
    if samples == 0 {
        return Err(Error::InvalidConfig("samples must be at least 1".into()));
    }
    let [lo, hi] = kind.default_domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_fd = 0.0f64;
    let mut max_path = 0.0f64;
    let mut drawn = 0;
    while drawn < samples {
        let p = kind.param_at(rng.gen_range(lo..=hi), rng.gen_range(lo..=hi));
        if kind == ProblemKind::Ex2 && Example2::condition(p[0]) > EX2_CONDITION_LIMIT {
            continue;
        }
        drawn += 1;
        let (fd_err, path_err) = check_point(problem, &p)?;
        log::debug!("check {} at {:?}: fd {fd_err:.3e}, paths {path_err:.3e}", kind, p);
        max_fd = max_fd.max(fd_err);
        max_path = max_path.max(path_err);
    }
    Ok(CheckSummary {
        schema: CHECK_SCHEMA.to_owned(),
        problem: kind.name().to_owned(),
        samples,
        seed,
        max_fd_rel_error: max_fd,
        max_path_rel_error: max_path,
        fd_tol: CHECK_FD_TOL,
        path_tol: CHECK_PATH_TOL,
        passed: max_fd <= CHECK_FD_TOL && max_path <= CHECK_PATH_TOL,
    })
}

/// `(adjoint vs FD, worst path vs general direct)` relative deviations at `p`.
pub fn check_point(problem: &dyn Problem, p: &[Complex64]) -> Result<(f64, f64), Error> {
    let kind = problem.tangent_kind();
    let x = problem.solve_state(p)?;
    let preferred = to_real_coords(&gradient_at_state(problem, &x, p, None)?.grad, kind);
    let fd = fd_total_gradient(|q| objective(problem, q), p, kind, &FdConfig::default())?;
    let fd_err = relative_error(&preferred, &fd, CHECK_FLOOR);

    let reference = to_real_coords(&gradient_at_state(problem, &x, p, Some(GradientPath::GeneralDirect))?.grad, kind);
    let mut path_err = 0.0f64;
    for path in applicable_paths(problem, &x, p) {
        let g = to_real_coords(&gradient_at_state(problem, &x, p, Some(path))?.grad, kind);
        path_err = path_err.max(relative_error(&g, &reference, CHECK_FLOOR));
    }
    Ok((fd_err, path_err))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseConfig {
    pub setup: HelmholtzSetup,
    pub p0: Complex64,
    pub methods: Vec<GradientSource>,
    pub optimizer: OptimizerConfig,
}

impl Default for InverseConfig {
    fn default() -> Self {
        Self {
            setup: HelmholtzSetup::default(),
            p0: Complex64::new(0.0, 0.0),
            methods: vec![GradientSource::Adjoint, GradientSource::FiniteDifference],
            optimizer: OptimizerConfig::default(),
        }
    }
}

pub fn method_name(source: GradientSource) -> &'static str {
    match source {
        GradientSource::Adjoint => "adjoint",
        GradientSource::FiniteDifference => "fd",
    }
}

pub fn parse_method(s: &str) -> Result<GradientSource, Error> {
    match s {
        "adjoint" => Ok(GradientSource::Adjoint),
        "fd" => Ok(GradientSource::FiniteDifference),
        other => Err(Error::InvalidConfig(format!("unknown method `{other}` (expected adjoint or fd)"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseRow {
    pub method: String,
    pub n_cost_evals: usize,
    pub n_grad_evals: usize,
    pub iterations: usize,
    pub final_p: JsonComplex,
    pub final_cost: f64,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseConfigEcho {
    pub n: usize,
    pub truth_n: usize,
    pub k2: f64,
    pub p0: JsonComplex,
    pub max_iters: usize,
    pub grad_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseReport {
    pub schema: String,
    pub version: String,
    pub truth_p: JsonComplex,
    pub targets: [JsonComplex; 2],
    pub config: InverseConfigEcho,
    pub rows: Vec<InverseRow>,
}

impl InverseReport {
    pub fn row(&self, method: &str) -> Option<&InverseRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Methods whose final cost misses [`INVERSE_COST_TARGET`].
    pub fn failed_methods(&self) -> Vec<&str> {
        self.rows
            .iter()
            .filter(|r| !(r.final_cost <= INVERSE_COST_TARGET))
            .map(|r| r.method.as_str())
            .collect()
    }

    pub fn to_json(&self) -> Result<String, Error> {
        to_sorted_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        from_versioned_json(text, INVERSE_SCHEMA)
    }
}

/// Generates targets on the truth grid and minimizes from `p0` with each method.
pub fn run_inverse(cfg: &InverseConfig) -> Result<InverseReport, Error> {
    let s = &cfg.setup;
    if s.n < 4 {
        return Err(Error::InvalidConfig(format!("n must be at least 4, got {}", s.n)));
    }
    if s.truth_n <= s.n {
        return Err(Error::InvalidConfig(format!("truth_n ({}) must exceed n ({})", s.truth_n, s.n)));
    }
    let problem = s.build()?;
    let mut rows = Vec::with_capacity(cfg.methods.len());
    for &source in &cfg.methods {
        let opt = OptimizerConfig { gradient_source: source, ..cfg.optimizer };
        let run = minimize(&problem, &[cfg.p0], &opt)?;
        log::info!(
            "{}: {} cost evaluations, final p {:.6}, final cost {:.3e}",
            method_name(source),
            run.n_cost_evals,
            run.final_p[0],
            run.final_cost
        );
        rows.push(InverseRow {
            method: method_name(source).to_owned(),
            n_cost_evals: run.n_cost_evals,
            n_grad_evals: run.n_grad_evals,
            iterations: run.iterations(),
            final_p: run.final_p[0].into(),
            final_cost: run.final_cost,
            termination: run.termination,
        });
    }
    Ok(InverseReport {
        schema: INVERSE_SCHEMA.to_owned(),
        version: VERSION.to_owned(),
        truth_p: s.p_true.into(),
        targets: [problem.target0.into(), problem.target1.into()],
        config: InverseConfigEcho {
            n: s.n,
            truth_n: s.truth_n,
            k2: s.k2,
            p0: cfg.p0.into(),
            max_iters: cfg.optimizer.max_iters,
            grad_tol: cfg.optimizer.grad_tol,
        },
        rows,
    })
}

fn to_sorted_json<T: Serialize>(value: &T) -> Result<String, Error> {
    let tree = serde_json::to_value(value)?;
    let mut text = serde_json::to_string_pretty(&tree)?;
    text.push('\n');
    Ok(text)
}

/// Splits `name/major[.minor]` and checks it against `expected`.
fn check_schema(found: &str, expected: &'static str) -> Result<(), Error> {
    let unsupported = || Error::UnsupportedSchema { found: found.to_owned(), expected };
    let (name, version) = found.split_once('/').ok_or_else(unsupported)?;
    let (want_name, want_major) = expected.split_once('/').expect("schema constants are well formed");
    let major = version.split('.').next().unwrap_or_default();
    if name == want_name && major == want_major {
        Ok(())
    } else {
        Err(unsupported())
    }
}

fn from_versioned_json<T: for<'de> Deserialize<'de>>(text: &str, expected: &'static str) -> Result<T, Error> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("");
    check_schema(found, expected)?;
    Ok(serde_json::from_value(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_axes(count: usize) -> Axes {
        let a = Axis::new(-0.5, 0.5, count).unwrap();
        Axes { x: a, y: a }
    }

    #[test]
    fn axis_endpoints_and_midpoint() {
        let a = Axis::new(-0.5, 0.5, 41).unwrap();
        assert_eq!(a.value(0), -0.5);
        assert_eq!(a.value(20), 0.0);
        assert_eq!(a.value(40), 0.5);
        assert!(Axis::new(0.5, -0.5, 3).is_err());
        assert!(Axis::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn ex2_field_finite_at_origin() {
        let field = compute_field(ProblemKind::Ex2, &Example2, small_axes(5), None);
        assert_eq!(field.cost[2][2], Some(0.5));
        assert!(field.nulls.is_empty());
        assert!(field.grad_norm(2, 2).unwrap().is_finite());
    }

    #[test]
    fn singular_points_become_nulls() {
        let setup = HelmholtzSetup { n: 8, truth_n: 16, k2: 4.0, p_true: Complex64::new(0.5, 0.5) };
        let problem = setup.build().unwrap();
        let field = compute_field(ProblemKind::Helmholtz, &problem, small_axes(3), None);
        assert!(field.nulls.is_empty());

        struct Broken;
        impl crate::problems::ConstraintProblem for Broken {
            fn state_dim(&self) -> usize {
                1
            }
            fn param_dim(&self) -> usize {
                1
            }
            fn constraint_dim(&self) -> usize {
                1
            }
            fn tangent_kind(&self) -> TangentSpaceKind {
                TangentSpaceKind::ComplexHilbert
            }
            fn solve_state(&self, p: &[Complex64]) -> Result<Vec<Complex64>, Error> {
                if p[0].re > 0.0 {
                    Err(crate::cxla::LinalgError::SingularMatrix { pivot: 0 }.into())
                } else {
                    Ok(vec![p[0]])
                }
            }
            fn residual(&self, x: &[Complex64], p: &[Complex64]) -> Vec<Complex64> {
                vec![x[0] - p[0]]
            }
            fn partials(&self, _x: &[Complex64], _p: &[Complex64]) -> crate::adjoint::WirtingerPartials {
                use crate::cxla::CMatrix;
                crate::adjoint::WirtingerPartials {
                    d1g: CMatrix::identity(1),
                    d1cg: CMatrix::zeros(1, 1),
                    d2g: CMatrix::identity(1).neg(),
                    d2cg: CMatrix::zeros(1, 1),
                }
            }
        }
        impl crate::problems::CostProblem for Broken {
            fn value(&self, x: &[Complex64], _p: &[Complex64]) -> f64 {
                x[0].norm_sqr()
            }
            fn gradients(&self, x: &[Complex64], _p: &[Complex64]) -> crate::adjoint::CostGradients {
                crate::adjoint::CostGradients { g1: vec![2.0 * x[0]], g2: vec![Complex64::new(0.0, 0.0)] }
            }
        }
        impl Problem for Broken {
            fn name(&self) -> &'static str {
                "broken"
            }
        }
        let field = compute_field(ProblemKind::Ex2, &Broken, small_axes(3), None);
        assert_eq!(field.nulls, vec![[0, 2], [1, 2], [2, 2]]);
        assert_eq!(field.cost[1][2], None);
        assert_eq!(field.cost[1][1], Some(0.0));
        let text = field.to_json().unwrap();
        assert!(text.contains("null"));
    }

    #[test]
    fn field_json_roundtrip_and_stability() {
        let a = compute_field(ProblemKind::Ex1, &Example1, small_axes(7), None);
        let b = compute_field(ProblemKind::Ex1, &Example1, small_axes(7), None);
        let text = a.to_json().unwrap();
        assert_eq!(text, b.to_json().unwrap());
        assert_eq!(FieldExport::from_json(&text).unwrap(), a);
        let keys: Vec<usize> = ["\"axes\"", "\"cost\"", "\"grad_im\"", "\"grad_re\"", "\"nulls\"", "\"schema\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn loaders_reject_unknown_major() {
        let field = compute_field(ProblemKind::Ex1, &Example1, small_axes(3), None);
        let text = field.to_json().unwrap().replace("fieldexport/1", "fieldexport/2");
        assert!(matches!(FieldExport::from_json(&text), Err(Error::UnsupportedSchema { .. })));
        let minor = field.to_json().unwrap().replace("fieldexport/1", "fieldexport/1.3");
        assert!(FieldExport::from_json(&minor).is_ok());
        assert!(matches!(InverseReport::from_json("{\"schema\":\"inverse/9\"}"), Err(Error::UnsupportedSchema { .. })));
        assert!(matches!(InverseReport::from_json("{}"), Err(Error::UnsupportedSchema { .. })));
    }

    #[test]
    fn check_passes_on_examples() {
        for (kind, problem) in [(ProblemKind::Ex1, &Example1 as &dyn Problem), (ProblemKind::Ex2, &Example2)] {
            let s = run_check(kind, problem, 20, 7).unwrap();
            assert!(s.passed, "{s:?}");
        }
        assert!(run_check(ProblemKind::Ex1, &Example1, 0, 7).is_err());
    }

    #[test]
    fn inverse_rejects_bad_grids() {
        let mut cfg = InverseConfig::default();
        cfg.setup.truth_n = cfg.setup.n;
        assert!(matches!(run_inverse(&cfg), Err(Error::InvalidConfig(_))));
        cfg.setup.n = 3;
        cfg.setup.truth_n = 10;
        assert!(matches!(run_inverse(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn problem_and_method_names() {
        for k in [ProblemKind::Ex1, ProblemKind::Ex2, ProblemKind::Helmholtz] {
            assert_eq!(k.name().parse::<ProblemKind>().unwrap(), k);
        }
        assert!("ex3".parse::<ProblemKind>().is_err());
        assert_eq!(parse_method("fd").unwrap(), GradientSource::FiniteDifference);
        assert!(parse_method("ga").is_err());
    }
}
