//! Composite physics loss on a training set.
//!
//! Each term is `1/(2N) Σ ‖r‖²` over its points. The network is propagated in
//! batches of Taylor jets (value plus the spatial derivatives a term needs);
//! the per-point residual heads run on small forward-mode duals seeded on the
//! jet entries, which yields the adjoint that is pulled back through the
//! network in one reverse sweep.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::set::TrainingSet;
use super::TrainingError;
use crate::autodiff::{grad_params, AdError, Dual, Scalar, Var};
use crate::mechanics::{divergence_of_stress, seed_spatial, traction, BodyState, MaterialModel, MaterialParameters, MechanicsError};
use crate::network::jets::{jet_backward, jet_forward, JetSpec};
use crate::network::{ansatz_eval_generic, Ansatz, AnsatzConfig, FfnnConfig};

const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub pde: f64,
    pub neumann: f64,
    pub data: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { pde: 1.0, neumann: 1.0, data: 1e4 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), TrainingError> {
        let w = [self.pde, self.neumann, self.data];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || w.iter().all(|v| *v == 0.0) {
            return Err(TrainingError::Config(format!("loss weights must be non-negative and not all zero: {w:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossTerm {
    Pde,
    Neumann,
    Data,
}

impl std::fmt::Display for LossTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Pde => "pde",
            Self::Neumann => "neumann",
            Self::Data => "data",
        })
    }
}

/// Unweighted term values and the weighted total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub pde: f64,
    pub neumann: f64,
    pub data: f64,
    pub total: f64,
}

/// Network inputs for one batch of points of a single term.
#[derive(Debug, Clone)]
struct Chunk {
    term: LossTerm,
    start: usize,
    input: Array2<f64>,
}

/// Loss of a fixed training set as a function of the network parameters.
#[derive(Debug, Clone)]
pub struct PhysicsLoss {
    ffnn: FfnnConfig,
    ansatz: AnsatzConfig,
    model: MaterialModel,
    body: [f64; 2],
    weights: LossWeights,
    set: TrainingSet,
    chunks: Vec<Chunk>,
}

pub(crate) fn kappa_input(cfg: &AnsatzConfig, kappa: &MaterialParameters) -> Vec<f64> {
    if cfg.n_kappa() == 0 {
        Vec::new()
    } else {
        kappa.as_array().to_vec()
    }
}

fn build_chunks(cfg: &AnsatzConfig, term: LossTerm, points: &[([f64; 2], MaterialParameters)]) -> Vec<Chunk> {
    points
        .chunks(CHUNK)
        .enumerate()
        .map(|(c, pts)| {
            let xs: Vec<[f64; 2]> = pts.iter().map(|p| p.0).collect();
            let ks: Vec<Vec<f64>> = pts.iter().map(|p| kappa_input(cfg, &p.1)).collect();
            let kr: Vec<&[f64]> = ks.iter().map(Vec::as_slice).collect();
            Chunk { term, start: c * CHUNK, input: cfg.input_batch(&xs, &kr) }
        })
        .collect()
}

impl PhysicsLoss {
    pub fn new(
        ffnn: FfnnConfig,
        ansatz: AnsatzConfig,
        model: MaterialModel,
        body: &BodyState,
        weights: LossWeights,
        set: TrainingSet,
    ) -> Result<Self, TrainingError> {
        weights.validate()?;
        ansatz.validate().map_err(|e| TrainingError::Config(e.to_string()))?;
        ffnn.validate(ansatz.n_kappa()).map_err(|e| TrainingError::Config(e.to_string()))?;
        if set.collocation.is_empty() {
            return Err(TrainingError::Config("training set has no collocation points".into()));
        }
        let mut chunks = build_chunks(&ansatz, LossTerm::Pde, &set.collocation.iter().map(|p| (p.x, p.kappa)).collect::<Vec<_>>());
        chunks.extend(build_chunks(&ansatz, LossTerm::Neumann, &set.neumann.iter().map(|p| (p.x, p.kappa)).collect::<Vec<_>>()));
        chunks.extend(build_chunks(&ansatz, LossTerm::Data, &set.data.iter().map(|p| (p.x, p.kappa)).collect::<Vec<_>>()));
        Ok(Self { ffnn, ansatz, model, body: body.body_force(), weights, set, chunks })
    }

    pub fn n_params(&self) -> usize {
        self.ffnn.n_params()
    }

    pub fn training_set(&self) -> &TrainingSet {
        &self.set
    }

    pub fn weights(&self) -> LossWeights {
        self.weights
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<LossTerms, TrainingError> {
        self.run(theta, false).map(|(t, _)| t)
    }

    pub fn evaluate_with_gradient(&self, theta: &[f64]) -> Result<(LossTerms, Vec<f64>), TrainingError> {
        self.run(theta, true)
    }

    fn term_scale(&self, term: LossTerm) -> (f64, usize) {
        match term {
            LossTerm::Pde => (self.weights.pde, self.set.collocation.len()),
            LossTerm::Neumann => (self.weights.neumann, self.set.neumann.len()),
            LossTerm::Data => (self.weights.data, self.set.data.len()),
        }
    }

    fn run(&self, theta: &[f64], with_grad: bool) -> Result<(LossTerms, Vec<f64>), TrainingError> {
        if theta.len() != self.n_params() {
            return Err(TrainingError::Config(format!("expected {} parameters, got {}", self.n_params(), theta.len())));
        }
        let parts: Vec<(LossTerm, f64, Option<Vec<f64>>)> = self
            .chunks
            .par_iter()
            .map(|chunk| {
                let (sum, grad) = self.chunk(chunk, theta, with_grad)?;
                Ok((chunk.term, sum, grad))
            })
            .collect::<Result<_, TrainingError>>()?;
        let mut terms = LossTerms::default();
        let mut grad = vec![0.0; if with_grad { theta.len() } else { 0 }];
        for (term, sum, g) in parts {
            let (_, n) = self.term_scale(term);
            let value = sum / (2.0 * n as f64);
            match term {
                LossTerm::Pde => terms.pde += value,
                LossTerm::Neumann => terms.neumann += value,
                LossTerm::Data => terms.data += value,
            }
            if let Some(g) = g {
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
        }
        terms.total = self.weights.pde * terms.pde + self.weights.neumann * terms.neumann + self.weights.data * terms.data;
        if !terms.total.is_finite() {
            return Err(TrainingError::Numerical(format!("non-finite loss {terms:?}")));
        }
        Ok((terms, grad))
    }

    /// Sum of squared residual norms over a chunk and, optionally, the
    /// gradient of the chunk's weighted contribution.
    fn chunk(&self, chunk: &Chunk, theta: &[f64], with_grad: bool) -> Result<(f64, Option<Vec<f64>>), TrainingError> {
        let (spec, dirs) = match chunk.term {
            LossTerm::Pde => (JetSpec { n_dirs: 2, second_order: true }, self.ansatz.spatial_seeds()),
            LossTerm::Neumann => (JetSpec { n_dirs: 2, second_order: false }, self.ansatz.spatial_seeds()),
            LossTerm::Data => (JetSpec::VALUE, Vec::new()),
        };
        let (weight, n_total) = self.term_scale(chunk.term);
        let record = with_grad && weight != 0.0;
        let (out, trace) = jet_forward(&self.ffnn, theta, chunk.input.view(), &dirs, spec, record);
        let b = chunk.input.ncols();
        let mut out_bar = if record { Some(Array2::zeros(out.raw_dim())) } else { None };
        let scale = weight / n_total as f64;
        let mut sum = 0.0;
        for p in 0..b {
            let idx = chunk.start + p;
            let fail = |e: MechanicsError| TrainingError::Loss { term: chunk.term, index: idx, source: e };
            match (chunk.term, out_bar.as_mut()) {
                (LossTerm::Pde, None) => {
                    let jets = gather::<6>(&out, b, p);
                    let r = self.pde_head(idx, &jets).map_err(fail)?;
                    sum += r[0] * r[0] + r[1] * r[1];
                }
                (LossTerm::Pde, Some(bar)) => {
                    let jets = seeded::<6, 12>(&out, b, p);
                    let r = self.pde_head(idx, &jets).map_err(fail)?;
                    sum += scatter::<6, 12>(&r, b, p, scale, bar);
                }
                (LossTerm::Neumann, None) => {
                    let jets = gather::<3>(&out, b, p);
                    let r = self.neumann_head(idx, &jets).map_err(fail)?;
                    sum += r[0] * r[0] + r[1] * r[1];
                }
                (LossTerm::Neumann, Some(bar)) => {
                    let jets = seeded::<3, 6>(&out, b, p);
                    let r = self.neumann_head(idx, &jets).map_err(fail)?;
                    sum += scatter::<3, 6>(&r, b, p, scale, bar);
                }
                (LossTerm::Data, None) => {
                    let jets = gather::<1>(&out, b, p);
                    let r = self.data_head(idx, &jets);
                    sum += r[0] * r[0] + r[1] * r[1];
                }
                (LossTerm::Data, Some(bar)) => {
                    let jets = seeded::<1, 2>(&out, b, p);
                    let r = self.data_head(idx, &jets);
                    sum += scatter::<1, 2>(&r, b, p, scale, bar);
                }
            }
        }
        let grad = out_bar.map(|bar| {
            let mut g = vec![0.0; theta.len()];
            jet_backward(&self.ffnn, theta, &trace, spec, bar, &mut g);
            g
        });
        let grad = if with_grad && grad.is_none() { Some(vec![0.0; theta.len()]) } else { grad };
        Ok((sum, grad))
    }

    fn pde_head<S: Scalar>(&self, idx: usize, f: &[[S; 6]; 2]) -> Result<[S; 2], MechanicsError> {
        let pt = &self.set.collocation[idx];
        let xs = seed_spatial([S::cst(pt.x[0]), S::cst(pt.x[1])]);
        let jet = |j: &[S; 6]| Dual::new(Dual::new(j[0], [j[1], j[2]]), [Dual::new(j[1], [j[3], j[4]]), Dual::new(j[2], [j[4], j[5]])]);
        let u = self.ansatz.compose(xs, [jet(&f[0]), jet(&f[1])]);
        let grad_u = [[u[0].eps[0], u[0].eps[1]], [u[1].eps[0], u[1].eps[1]]];
        let div = divergence_of_stress(self.model, &grad_u, &pt.kappa)?;
        Ok([div[0] + self.body[0], div[1] + self.body[1]])
    }

    fn neumann_head<S: Scalar>(&self, idx: usize, f: &[[S; 3]; 2]) -> Result<[S; 2], MechanicsError> {
        let pt = &self.set.neumann[idx];
        let xs = [Dual::lifted_variable(S::cst(pt.x[0]), 0), Dual::lifted_variable(S::cst(pt.x[1]), 1)];
        let jet = |j: &[S; 3]| Dual::new(j[0], [j[1], j[2]]);
        let u = self.ansatz.compose(xs, [jet(&f[0]), jet(&f[1])]);
        let t = traction(self.model, &[u[0].eps, u[1].eps], &pt.kappa, pt.normal)?;
        let masked = |i: usize| if pt.mask[i] { t[i] - pt.t_bar[i] } else { S::zero() };
        Ok([masked(0), masked(1)])
    }

    fn data_head<S: Scalar>(&self, idx: usize, f: &[[S; 1]; 2]) -> [S; 2] {
        let pt = &self.set.data[idx];
        let u = self.ansatz.compose([S::cst(pt.x[0]), S::cst(pt.x[1])], [f[0][0], f[1][0]]);
        [u[0] - pt.u[0], u[1] - pt.u[1]]
    }
}

fn gather<const C: usize>(out: &Array2<f64>, b: usize, p: usize) -> [[f64; C]; 2] {
    std::array::from_fn(|i| std::array::from_fn(|ch| out[[i, ch * b + p]]))
}

/// Jet entries of one point as duals seeded on themselves; entry
/// `(i, ch)` gets direction `i * C + ch`.
fn seeded<const C: usize, const N: usize>(out: &Array2<f64>, b: usize, p: usize) -> [[Dual<f64, N>; C]; 2] {
    debug_assert_eq!(N, 2 * C);
    std::array::from_fn(|i| std::array::from_fn(|ch| Dual::variable(out[[i, ch * b + p]], i * C + ch)))
}

/// Write `scale * Σ_k r_k ∂r_k/∂f` into the output adjoint and return `‖r‖²`.
fn scatter<const C: usize, const N: usize>(r: &[Dual<f64, N>; 2], b: usize, p: usize, scale: f64, bar: &mut Array2<f64>) -> f64 {
    for i in 0..2 {
        for ch in 0..C {
            let dir = i * C + ch;
            bar[[i, ch * b + p]] = scale * (r[0].re * r[0].eps[dir] + r[1].re * r[1].eps[dir]);
        }
    }
    r[0].re * r[0].re + r[1].re * r[1].re
}

/// Total loss of an ansatz on a training set.
pub fn loss(ansatz: &Ansatz, model: MaterialModel, body: &BodyState, set: &TrainingSet, weights: LossWeights) -> Result<f64, TrainingError> {
    let l = PhysicsLoss::new(ansatz.ffnn.clone(), ansatz.config.clone(), model, body, weights, set.clone())?;
    Ok(l.evaluate(&ansatz.params.theta)?.total)
}

/// Value and gradient through the generic tape path, point by point.
/// Slow; intended for cross-checking [`PhysicsLoss`] on small problems.
pub fn reference_loss_gradient(loss: &PhysicsLoss, theta: &[f64]) -> Result<(f64, Vec<f64>), TrainingError> {
    let set = &loss.set;
    let cfg = &loss.ansatz;
    let w = loss.weights;
    let kappa_vars = |kappa: &MaterialParameters| kappa_input(cfg, kappa);
    let ad = |e: MechanicsError| match e {
        MechanicsError::Autodiff(a) => a,
        other => AdError::NonFinite { term: other.to_string() },
    };
    grad_params(
        |th: &[Var<'_>]| {
            let mut total = Var::cst(0.0);
            if !set.collocation.is_empty() {
                let lifted: Vec<Dual<Dual<Var<'_>, 2>, 2>> = th.iter().map(|t| Dual::lift(Dual::lift(*t))).collect();
                let mut acc = Var::cst(0.0);
                for pt in &set.collocation {
                    let xs = seed_spatial([Var::cst(pt.x[0]), Var::cst(pt.x[1])]);
                    let ks: Vec<_> = kappa_vars(&pt.kappa).into_iter().map(Scalar::cst).collect();
                    let u = ansatz_eval_generic(&loss.ffnn, cfg, &lifted, xs, &ks);
                    let grad_u = [[u[0].eps[0], u[0].eps[1]], [u[1].eps[0], u[1].eps[1]]];
                    let div = divergence_of_stress(loss.model, &grad_u, &pt.kappa).map_err(ad)?;
                    let r = [div[0] + loss.body[0], div[1] + loss.body[1]];
                    acc = acc + r[0] * r[0] + r[1] * r[1];
                }
                total = total + acc * (w.pde / (2.0 * set.collocation.len() as f64));
            }
            if !set.neumann.is_empty() {
                let lifted: Vec<Dual<Var<'_>, 2>> = th.iter().map(|t| Dual::lift(*t)).collect();
                let mut acc = Var::cst(0.0);
                for pt in &set.neumann {
                    let xs = [Dual::lifted_variable(Var::cst(pt.x[0]), 0), Dual::lifted_variable(Var::cst(pt.x[1]), 1)];
                    let ks: Vec<_> = kappa_vars(&pt.kappa).into_iter().map(Scalar::cst).collect();
                    let u = ansatz_eval_generic(&loss.ffnn, cfg, &lifted, xs, &ks);
                    let t = traction(loss.model, &[u[0].eps, u[1].eps], &pt.kappa, pt.normal).map_err(ad)?;
                    for i in 0..2 {
                        if pt.mask[i] {
                            let r = t[i] - pt.t_bar[i];
                            acc = acc + r * r;
                        }
                    }
                }
                total = total + acc * (w.neumann / (2.0 * set.neumann.len() as f64));
            }
            if !set.data.is_empty() {
                let mut acc = Var::cst(0.0);
                for pt in &set.data {
                    let ks: Vec<_> = kappa_vars(&pt.kappa).into_iter().map(Scalar::cst).collect();
                    let u = ansatz_eval_generic(&loss.ffnn, cfg, th, [Var::cst(pt.x[0]), Var::cst(pt.x[1])], &ks);
                    let r = [u[0] - pt.u[0], u[1] - pt.u[1]];
                    acc = acc + r[0] * r[0] + r[1] * r[1];
                }
                total = total + acc * (w.data / (2.0 * set.data.len() as f64));
            }
            Ok(total)
        },
        theta,
    )
    .map_err(|e| TrainingError::Numerical(e.to_string()))
}
