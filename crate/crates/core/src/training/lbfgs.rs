use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::TrainingError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LbfgsConfig {
    pub history: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Function evaluations allowed per line search.
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self { history: 10, c1: 1e-4, c2: 0.9, max_iterations: 2000, gradient_tolerance: 1e-8, max_line_search: 25 }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<(), TrainingError> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(TrainingError::Config(format!("need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}", self.c1, self.c2)));
        }
        if self.history == 0 || self.max_line_search == 0 {
            return Err(TrainingError::Config("history and line-search budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    /// No acceptable step could be found; carries the reason.
    LineSearchFailed(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LbfgsTrace {
    /// Objective after each accepted step (entry 0 is the start value).
    pub values: Vec<f64>,
    pub gradient_norms: Vec<f64>,
    pub evaluations: usize,
    pub termination: Option<Termination>,
}

impl LbfgsTrace {
    pub fn iterations(&self) -> usize {
        self.values.len().saturating_sub(1)
    }
}

/// Box constraints `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    fn project(&self, x: &mut [f64]) {
        for ((xi, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(*lo, *hi);
        }
    }

    /// Gradient with components that push against an active bound removed.
    fn projected_gradient(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(g)
            .zip(self.lower.iter().zip(&self.upper))
            .map(|((xi, gi), (lo, hi))| if (*xi <= *lo && *gi > 0.0) || (*xi >= *hi && *gi < 0.0) { 0.0 } else { *gi })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Memory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    capacity: usize,
}

impl Memory {
    fn new(capacity: usize) -> Self {
        Self { pairs: VecDeque::with_capacity(capacity), capacity }
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        if sy <= 1e-12 * norm(&s) * norm(&y) || sy <= 0.0 {
            return;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// Two-loop recursion: `-H g`, restricted to the components where `free` holds.
    fn direction(&self, g: &[f64], free: &[bool]) -> Vec<f64> {
        let mask = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(x, f)| if *f { *x } else { 0.0 }).collect() };
        let mut q = mask(g);
        let mut alpha = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(&mask(s), &q);
            for (qi, yi) in q.iter_mut().zip(&mask(y)) {
                *qi -= a * yi;
            }
            alpha.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let (s, y) = (mask(s), mask(y));
            let yy = dot(&y, &y);
            if yy > 0.0 {
                let gamma = dot(&s, &y) / yy;
                if gamma > 0.0 {
                    q.iter_mut().for_each(|v| *v *= gamma);
                }
            }
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alpha.iter().rev()) {
            let b = rho * dot(&mask(y), &q);
            for (qi, si) in q.iter_mut().zip(&mask(s)) {
                *qi += (a - b) * si;
            }
        }
        q.iter().map(|v| -v).collect()
    }
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

/// Evaluate the objective, mapping failures and non-finite results to `None`.
fn probe<F, E>(objective: &mut F, x: &[f64], evals: &mut usize) -> Option<(f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
{
    *evals += 1;
    match objective(x) {
        Ok((f, g)) if f.is_finite() && g.iter().all(|v| v.is_finite()) => Some((f, g)),
        _ => None,
    }
}

fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    t.is_finite().then_some(t)
}

/// Line search satisfying the strong Wolfe conditions.
fn strong_wolfe<F, E>(objective: &mut F, start: &Point, d: &[f64], alpha0: f64, cfg: &LbfgsConfig, evals: &mut usize) -> Result<Point, String>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
{
    let f0 = start.f;
    let dg0 = dot(&start.g, d);
    let at = |alpha: f64| -> Vec<f64> { start.x.iter().zip(d).map(|(x, di)| x + alpha * di).collect() };
    let mut budget = cfg.max_line_search;
    let mut eval = |alpha: f64, budget: &mut usize| -> Option<Point> {
        *budget = budget.saturating_sub(1);
        let x = at(alpha);
        probe(objective, &x, evals).map(|(f, g)| Point { x, f, g })
    };

    // bracketing phase
    let (mut lo, mut f_lo, mut d_lo) = (0.0, f0, dg0);
    let mut lo_point: Option<Point> = None;
    let mut alpha = alpha0;
    let (mut hi, mut f_hi, mut d_hi);
    let mut first = true;
    loop {
        if budget == 0 {
            return lo_point.ok_or_else(|| "line-search budget exhausted while bracketing".to_string());
        }
        match eval(alpha, &mut budget) {
            None => {
                // treat failures as an infinitely bad trial and shrink towards `lo`
                hi = alpha;
                f_hi = f64::INFINITY;
                d_hi = f64::NAN;
                break;
            }
            Some(p) => {
                let dg = dot(&p.g, d);
                if p.f > f0 + cfg.c1 * alpha * dg0 || (!first && p.f >= f_lo) {
                    hi = alpha;
                    f_hi = p.f;
                    d_hi = dg;
                    break;
                }
                if dg.abs() <= -cfg.c2 * dg0 {
                    return Ok(p);
                }
                if dg >= 0.0 {
                    hi = lo;
                    f_hi = f_lo;
                    d_hi = d_lo;
                    lo = alpha;
                    f_lo = p.f;
                    d_lo = dg;
                    lo_point = Some(p);
                    break;
                }
                lo = alpha;
                f_lo = p.f;
                d_lo = dg;
                lo_point = Some(p);
                alpha *= 2.0;
                first = false;
            }
        }
    }

    // zoom phase
    while budget > 0 {
        let (a, b) = (lo.min(hi), lo.max(hi));
        let width = b - a;
        if width <= 1e-16 * b.abs().max(1e-300) {
            break;
        }
        let trial = if f_hi.is_finite() && d_hi.is_finite() { cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi) } else { None };
        let alpha = match trial {
            Some(t) if t > a + 0.1 * width && t < b - 0.1 * width => t,
            _ => 0.5 * (lo + hi),
        };
        match eval(alpha, &mut budget) {
            None => {
                hi = alpha;
                f_hi = f64::INFINITY;
                d_hi = f64::NAN;
            }
            Some(p) => {
                let dg = dot(&p.g, d);
                if p.f > f0 + cfg.c1 * alpha * dg0 || p.f >= f_lo {
                    hi = alpha;
                    f_hi = p.f;
                    d_hi = dg;
                } else {
                    if dg.abs() <= -cfg.c2 * dg0 {
                        return Ok(p);
                    }
                    if dg * (hi - lo) >= 0.0 {
                        hi = lo;
                        f_hi = f_lo;
                        d_hi = d_lo;
                    }
                    lo = alpha;
                    f_lo = p.f;
                    d_lo = dg;
                    lo_point = Some(p);
                }
            }
        }
    }
    // fall back to the best sufficient-decrease point found
    lo_point.ok_or_else(|| "no step with sufficient decrease".to_string())
}

/// Progress report after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationInfo {
    pub iteration: usize,
    pub value: f64,
    pub gradient_norm: f64,
    pub evaluations: usize,
}

/// Unconstrained L-BFGS with a strong Wolfe line search.
pub fn lbfgs_minimize<F, E>(objective: F, x0: &[f64], cfg: &LbfgsConfig) -> Result<(Vec<f64>, LbfgsTrace), TrainingError>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
    E: std::fmt::Display,
{
    minimize(objective, x0, cfg, None, &mut |_| {})
}

/// Either variant, with a callback after every accepted step (and once for
/// the start point, as iteration 0).
pub fn lbfgs_minimize_observed<F, E>(
    objective: F,
    x0: &[f64],
    cfg: &LbfgsConfig,
    bounds: Option<&Bounds>,
    observer: &mut dyn FnMut(&IterationInfo),
) -> Result<(Vec<f64>, LbfgsTrace), TrainingError>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
    E: std::fmt::Display,
{
    minimize(objective, x0, cfg, bounds, observer)
}

/// Box-constrained variant: projected search directions with Armijo
/// backtracking along the projected path.
pub fn lbfgs_minimize_box<F, E>(objective: F, x0: &[f64], cfg: &LbfgsConfig, bounds: &Bounds) -> Result<(Vec<f64>, LbfgsTrace), TrainingError>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
    E: std::fmt::Display,
{
    minimize(objective, x0, cfg, Some(bounds), &mut |_| {})
}

fn minimize<F, E>(
    mut objective: F,
    x0: &[f64],
    cfg: &LbfgsConfig,
    bounds: Option<&Bounds>,
    observer: &mut dyn FnMut(&IterationInfo),
) -> Result<(Vec<f64>, LbfgsTrace), TrainingError>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
    E: std::fmt::Display,
{
    cfg.validate()?;
    let mut x = x0.to_vec();
    if let Some(b) = bounds {
        if b.lower.len() != x.len() || b.upper.len() != x.len() || b.lower.iter().zip(&b.upper).any(|(l, u)| !(l <= u)) {
            return Err(TrainingError::Config("bounds do not match the parameter vector".into()));
        }
        b.project(&mut x);
    }
    let mut trace = LbfgsTrace::default();
    trace.evaluations += 1;
    let (f, g) = objective(&x).map_err(|e| TrainingError::Numerical(format!("objective failed at the start point: {e}")))?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(TrainingError::Numerical("objective is not finite at the start point".into()));
    }
    let mut cur = Point { x, f, g };
    let mut memory = Memory::new(cfg.history);
    let pg = |p: &Point| bounds.map_or_else(|| p.g.clone(), |b| b.projected_gradient(&p.x, &p.g));
    let mut record = |trace: &mut LbfgsTrace, cur: &Point| {
        trace.values.push(cur.f);
        trace.gradient_norms.push(norm(&pg(cur)));
        observer(&IterationInfo {
            iteration: trace.values.len() - 1,
            value: cur.f,
            gradient_norm: *trace.gradient_norms.last().expect("just pushed"),
            evaluations: trace.evaluations,
        });
    };
    record(&mut trace, &cur);

    for _ in 0..cfg.max_iterations {
        let proj = pg(&cur);
        if norm(&proj) <= cfg.gradient_tolerance {
            trace.termination = Some(Termination::GradientTolerance);
            return Ok((cur.x, trace));
        }
        let free: Vec<bool> = proj.iter().zip(&cur.g).map(|(p, g)| *p != 0.0 || *g == 0.0).collect();
        let mut d = memory.direction(&cur.g, &free);
        if !(dot(&d, &cur.g) < 0.0) {
            memory.pairs.clear();
            d = proj.iter().map(|v| -v).collect();
        }
        let alpha0 = if memory.pairs.is_empty() { (1.0 / norm(&d)).min(1.0) } else { 1.0 };
        let next = match bounds {
            None => strong_wolfe(&mut objective, &cur, &d, alpha0, cfg, &mut trace.evaluations),
            Some(b) => projected_backtracking(&mut objective, &cur, &d, alpha0, cfg, b, &mut trace.evaluations),
        };
        let next = match next {
            Ok(p) => p,
            Err(reason) if !memory.pairs.is_empty() => {
                // retry once along steepest descent before giving up
                memory.pairs.clear();
                let d: Vec<f64> = proj.iter().map(|v| -v).collect();
                let alpha0 = (1.0 / norm(&d)).min(1.0);
                let retry = match bounds {
                    None => strong_wolfe(&mut objective, &cur, &d, alpha0, cfg, &mut trace.evaluations),
                    Some(b) => projected_backtracking(&mut objective, &cur, &d, alpha0, cfg, b, &mut trace.evaluations),
                };
                match retry {
                    Ok(p) => p,
                    Err(_) => {
                        trace.termination = Some(Termination::LineSearchFailed(reason));
                        return Ok((cur.x, trace));
                    }
                }
            }
            Err(reason) => {
                trace.termination = Some(Termination::LineSearchFailed(reason));
                return Ok((cur.x, trace));
            }
        };
        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        memory.push(s, y);
        cur = next;
        record(&mut trace, &cur);
    }
    let proj = pg(&cur);
    trace.termination =
        Some(if norm(&proj) <= cfg.gradient_tolerance { Termination::GradientTolerance } else { Termination::MaxIterations });
    Ok((cur.x, trace))
}

fn projected_backtracking<F, E>(
    objective: &mut F,
    start: &Point,
    d: &[f64],
    alpha0: f64,
    cfg: &LbfgsConfig,
    bounds: &Bounds,
    evals: &mut usize,
) -> Result<Point, String>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
{
    let mut alpha = alpha0;
    for _ in 0..cfg.max_line_search {
        let mut x: Vec<f64> = start.x.iter().zip(d).map(|(x, di)| x + alpha * di).collect();
        bounds.project(&mut x);
        let step: Vec<f64> = x.iter().zip(&start.x).map(|(a, b)| a - b).collect();
        let decrease = dot(&start.g, &step);
        if norm(&step) == 0.0 || decrease >= 0.0 {
            return Err("projected direction is not a descent direction".into());
        }
        if let Some((f, g)) = probe(objective, &x, evals) {
            if f <= start.f + cfg.c1 * decrease {
                return Ok(Point { x, f, g });
            }
        }
        alpha *= 0.5;
    }
    Err("projected backtracking exhausted its budget".into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn quadratic_converges_quickly() {
        let a = [1.0, -2.0, 3.5, 0.25];
        let obj = |x: &[f64]| -> Result<(f64, Vec<f64>), Infallible> {
            let g: Vec<f64> = x.iter().zip(&a).map(|(x, a)| x - a).collect();
            Ok((0.5 * dot(&g, &g), g))
        };
        let cfg = LbfgsConfig { gradient_tolerance: 1e-12, ..Default::default() };
        let (x, trace) = lbfgs_minimize(obj, &[0.0; 4], &cfg).unwrap();
        assert!(x.iter().zip(&a).all(|(x, a)| (x - a).abs() < 1e-10));
        assert!(trace.iterations() <= 5, "{}", trace.iterations());
    }

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>), Infallible> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        Ok((f, vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]))
    }

    #[test]
    fn rosenbrock_reaches_the_valley_floor() {
        let cfg = LbfgsConfig { gradient_tolerance: 1e-10, ..Default::default() };
        let (x, trace) = lbfgs_minimize(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x:?} {:?}", trace.termination);
        assert!(trace.values.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn active_bound_is_respected() {
        let obj = |x: &[f64]| -> Result<(f64, Vec<f64>), Infallible> { Ok(((x[0] - 2.0).powi(2), vec![2.0 * (x[0] - 2.0)])) };
        let bounds = Bounds { lower: vec![0.0], upper: vec![1.0] };
        let (x, trace) = lbfgs_minimize_box(obj, &[0.3], &LbfgsConfig::default(), &bounds).unwrap();
        assert_eq!(x, vec![1.0]);
        assert_eq!(trace.termination, Some(Termination::GradientTolerance));
    }

    #[test]
    fn box_variant_solves_interior_rosenbrock() {
        let bounds = Bounds { lower: vec![-2.0, -2.0], upper: vec![2.0, 2.0] };
        let cfg = LbfgsConfig { gradient_tolerance: 1e-9, ..Default::default() };
        let (x, _) = lbfgs_minimize_box(rosenbrock, &[-1.2, 1.0], &cfg, &bounds).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x:?}");
    }

    #[test]
    fn failing_region_is_avoided() {
        // the objective is undefined for x > 1.5; the minimizer of the
        // defined part sits at 1
        let obj = |x: &[f64]| -> Result<(f64, Vec<f64>), String> {
            if x[0] > 1.5 {
                return Err("outside".into());
            }
            Ok(((x[0] - 1.0).powi(2), vec![2.0 * (x[0] - 1.0)]))
        };
        let (x, _) = lbfgs_minimize(obj, &[-10.0], &LbfgsConfig::default()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn invalid_constants_are_rejected() {
        let cfg = LbfgsConfig { c1: 0.95, c2: 0.9, ..Default::default() };
        assert!(lbfgs_minimize(rosenbrock, &[0.0, 0.0], &cfg).is_err());
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let obj = |_: &[f64]| -> Result<(f64, Vec<f64>), Infallible> { Ok((f64::NAN, vec![0.0])) };
        assert!(matches!(lbfgs_minimize(obj, &[0.0], &LbfgsConfig::default()), Err(TrainingError::Numerical(_))));
    }
}
