//! Batched propagation of truncated Taylor jets through a tanh network.
//!
//! A jet of a point carries the network value plus first (and optionally
//! second) directional derivatives along a fixed set of input directions.
//! All channels of a batch are stacked column-wise so that each dense layer is
//! one matrix product. Column `c * B + p` holds channel `c` of point `p`.
//!
//! Channel order: value, then one first derivative per direction, then the
//! upper-triangular second derivatives `(a, b)` with `a <= b`, row by row.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, ArrayViewMut2, Axis};

use super::ffnn::FfnnConfig;

const MAX_DIRS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JetSpec {
    pub n_dirs: usize,
    pub second_order: bool,
}

impl JetSpec {
    pub const VALUE: Self = Self { n_dirs: 0, second_order: false };

    pub fn channels(self) -> usize {
        let n = self.n_dirs;
        1 + n + if self.second_order { n * (n + 1) / 2 } else { 0 }
    }

    pub fn first(self, d: usize) -> usize {
        1 + d
    }

    pub fn second(self, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let n = self.n_dirs;
        1 + n + a * (2 * n - a + 1) / 2 + (b - a)
    }
}

/// Stored activations needed for the reverse sweep.
#[derive(Debug, Clone, Default)]
pub struct JetTrace {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    batch: usize,
}

/// Forward sweep of a batch of jets.
///
/// `x_hat` holds normalized inputs, one column per point; `dirs` are the seed
/// directions in normalized input space. Returns the output jets (`2 x C*B`)
/// and, when `record` is set, the trace for [`jet_backward`].
pub fn jet_forward(
    cfg: &FfnnConfig,
    theta: &[f64],
    x_hat: ArrayView2<'_, f64>,
    dirs: &[Vec<f64>],
    spec: JetSpec,
    record: bool,
) -> (Array2<f64>, JetTrace) {
    assert_eq!(dirs.len(), spec.n_dirs);
    assert!(spec.n_dirs <= MAX_DIRS);
    let b = x_hat.ncols();
    let c = spec.channels();
    let mut h = Array2::zeros((cfg.n_inputs(), c * b));
    h.slice_mut(s![.., 0..b]).assign(&x_hat);
    for (k, d) in dirs.iter().enumerate() {
        let ch = spec.first(k);
        for (r, v) in d.iter().enumerate() {
            h.slice_mut(s![r, ch * b..(ch + 1) * b]).fill(*v);
        }
    }

    let mut trace = JetTrace { batch: b, ..Default::default() };
    let last = cfg.n_layers() - 1;
    for l in 0..cfg.n_layers() {
        let (n_in, n_out) = (cfg.layer_sizes[l], cfg.layer_sizes[l + 1]);
        let (w_off, b_off) = cfg.layer_offsets(l);
        let w = ArrayView2::from_shape((n_out, n_in), &theta[w_off..b_off]).expect("layer shape");
        let mut z = Array2::zeros((n_out, c * b));
        general_mat_mul(1.0, &w, &h, 0.0, &mut z);
        for (i, mut row) in z.slice_mut(s![.., 0..b]).axis_iter_mut(Axis(0)).enumerate() {
            let bias = theta[b_off + i];
            row.mapv_inplace(|v| v + bias);
        }
        if l == last {
            if record {
                trace.inputs.push(h);
            }
            return (z, trace);
        }
        let a = tanh_forward(&z, spec, b);
        if record {
            trace.inputs.push(h);
            trace.pre.push(z);
        }
        h = a;
    }
    unreachable!("network has an output layer")
}

/// Reverse sweep: accumulate `d loss / d θ` into `grad` given the adjoint of
/// the output jets (same layout as the forward output).
pub fn jet_backward(cfg: &FfnnConfig, theta: &[f64], trace: &JetTrace, spec: JetSpec, out_bar: Array2<f64>, grad: &mut [f64]) {
    let b = trace.batch;
    let mut z_bar = out_bar;
    for l in (0..cfg.n_layers()).rev() {
        let (n_in, n_out) = (cfg.layer_sizes[l], cfg.layer_sizes[l + 1]);
        let (w_off, b_off) = cfg.layer_offsets(l);
        let h = &trace.inputs[l];
        {
            let mut gw = ArrayViewMut2::from_shape((n_out, n_in), &mut grad[w_off..b_off]).expect("layer shape");
            general_mat_mul(1.0, &z_bar, &h.t(), 1.0, &mut gw);
        }
        for (i, row) in z_bar.slice(s![.., 0..b]).axis_iter(Axis(0)).enumerate() {
            grad[b_off + i] += row.sum();
        }
        if l == 0 {
            break;
        }
        let w = ArrayView2::from_shape((n_out, n_in), &theta[w_off..b_off]).expect("layer shape");
        let mut h_bar = Array2::zeros((n_in, z_bar.ncols()));
        general_mat_mul(1.0, &w.t(), &z_bar, 0.0, &mut h_bar);
        z_bar = tanh_backward(&h_bar, h, &trace.pre[l - 1], spec, b);
    }
}

fn tanh_forward(z: &Array2<f64>, spec: JetSpec, b: usize) -> Array2<f64> {
    let n = spec.n_dirs;
    let mut a = Array2::zeros(z.raw_dim());
    for (zr, mut ar) in z.rows().into_iter().zip(a.rows_mut()) {
        let zr = zr.to_slice().expect("row-major");
        let ar = ar.as_slice_mut().expect("row-major");
        for p in 0..b {
            let t = zr[p].tanh();
            let d1 = 1.0 - t * t;
            ar[p] = t;
            for k in 0..n {
                let i = spec.first(k) * b + p;
                ar[i] = d1 * zr[i];
            }
            if spec.second_order {
                let d2 = -2.0 * t * d1;
                for u in 0..n {
                    for v in u..n {
                        let i = spec.second(u, v) * b + p;
                        ar[i] = d2 * zr[spec.first(u) * b + p] * zr[spec.first(v) * b + p] + d1 * zr[i];
                    }
                }
            }
        }
    }
    a
}

fn tanh_backward(a_bar: &Array2<f64>, h: &Array2<f64>, z: &Array2<f64>, spec: JetSpec, b: usize) -> Array2<f64> {
    let n = spec.n_dirs;
    let mut z_bar = Array2::zeros(a_bar.raw_dim());
    let rows = a_bar.rows().into_iter().zip(h.rows()).zip(z.rows()).zip(z_bar.rows_mut());
    for (((ab, hr), zr), mut zb) in rows {
        let ab = ab.to_slice().expect("row-major");
        let hr = hr.to_slice().expect("row-major");
        let zr = zr.to_slice().expect("row-major");
        let zb = zb.as_slice_mut().expect("row-major");
        for p in 0..b {
            let t = hr[p];
            let d1 = 1.0 - t * t;
            let d2 = -2.0 * t * d1;
            let mut acc0 = ab[p] * d1;
            let mut zd = [0.0; MAX_DIRS];
            let mut acc_d = [0.0; MAX_DIRS];
            for k in 0..n {
                let i = spec.first(k) * b + p;
                zd[k] = zr[i];
                acc0 += ab[i] * d2 * zd[k];
                acc_d[k] = ab[i] * d1;
            }
            if spec.second_order {
                let d3 = -2.0 * d1 * d1 + 4.0 * t * t * d1;
                for u in 0..n {
                    for v in u..n {
                        let i = spec.second(u, v) * b + p;
                        let g = ab[i];
                        acc0 += g * (d3 * zd[u] * zd[v] + d2 * zr[i]);
                        acc_d[u] += g * d2 * zd[v];
                        acc_d[v] += g * d2 * zd[u];
                        zb[i] = g * d1;
                    }
                }
            }
            zb[p] = acc0;
            for k in 0..n {
                zb[spec.first(k) * b + p] = acc_d[k];
            }
        }
    }
    z_bar
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Dual, Scalar};
    use crate::network::{forward_with_weights, glorot_init};

    #[test]
    fn channel_indices_are_dense() {
        for n in 0..=MAX_DIRS {
            let spec = JetSpec { n_dirs: n, second_order: true };
            let mut seen = vec![false; spec.channels()];
            seen[0] = true;
            for k in 0..n {
                seen[spec.first(k)] = true;
            }
            for u in 0..n {
                for v in u..n {
                    let i = spec.second(u, v);
                    assert!(!seen[i], "n={n} ({u},{v}) -> {i} reused");
                    seen[i] = true;
                    assert_eq!(i, spec.second(v, u));
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    type D2 = Dual<Dual<f64, 2>, 2>;

    #[test]
    fn jets_match_nested_duals() {
        let cfg = FfnnConfig::new(2, &[7, 5]).unwrap();
        let theta = glorot_init(&cfg, 11).theta;
        let pts = [[0.1, -0.4, 0.7, 0.2], [-0.9, 0.3, -0.1, 0.95]];
        let dirs = vec![vec![0.5, 0.0, 0.2, 0.0], vec![0.0, -1.5, 0.0, 0.3]];
        let mut x_hat = Array2::zeros((4, 2));
        for (p, pt) in pts.iter().enumerate() {
            for r in 0..4 {
                x_hat[[r, p]] = pt[r];
            }
        }
        let spec = JetSpec { n_dirs: 2, second_order: true };
        let (out, _) = jet_forward(&cfg, &theta, x_hat.view(), &dirs, spec, false);
        for (p, pt) in pts.iter().enumerate() {
            // input r = x_r + s * dirs[0][r] + t * dirs[1][r]
            let xs: Vec<D2> = (0..4)
                .map(|r| {
                    let inner = |d: f64| Dual::<f64, 2>::new(d, [0.0, 0.0]);
                    let mut v = D2::cst(pt[r]);
                    v.re.eps = [dirs[0][r], dirs[1][r]];
                    v.eps = [inner(dirs[0][r]), inner(dirs[1][r])];
                    v
                })
                .collect();
            let y = forward_with_weights(&cfg, &theta, &xs);
            for i in 0..2 {
                let close = |a: f64, b: f64| assert!((a - b).abs() < 1e-13, "{a} vs {b}");
                close(out[[i, p]], y[i].re.re);
                close(out[[i, spec.first(0) * 2 + p]], y[i].re.eps[0]);
                close(out[[i, spec.first(1) * 2 + p]], y[i].re.eps[1]);
                close(out[[i, spec.second(0, 0) * 2 + p]], y[i].eps[0].eps[0]);
                close(out[[i, spec.second(0, 1) * 2 + p]], y[i].eps[0].eps[1]);
                close(out[[i, spec.second(1, 1) * 2 + p]], y[i].eps[1].eps[1]);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let cfg = FfnnConfig::new(2, &[6, 4]).unwrap();
        let theta = glorot_init(&cfg, 5).theta;
        let x_hat = ndarray::arr2(&[[0.2, -0.6, 0.9], [0.4, 0.1, -0.3], [-0.5, 0.8, 0.0], [0.7, -0.2, 0.35]]);
        let dirs = vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 2.0, 0.0, 0.5]];
        let spec = JetSpec { n_dirs: 2, second_order: true };
        let cols = spec.channels() * 3;
        // fixed random-looking adjoint weights
        let weights = Array2::from_shape_fn((2, cols), |(i, j)| ((i * 31 + j * 17) % 13) as f64 / 13.0 - 0.4);
        let objective = |th: &[f64]| -> f64 {
            let (out, _) = jet_forward(&cfg, th, x_hat.view(), &dirs, spec, false);
            (&out * &weights).sum()
        };
        let (_, trace) = jet_forward(&cfg, &theta, x_hat.view(), &dirs, spec, true);
        let mut grad = vec![0.0; theta.len()];
        jet_backward(&cfg, &theta, &trace, spec, weights.clone(), &mut grad);
        let h = 1e-6;
        for k in 0..theta.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[k] += h;
            tm[k] -= h;
            let fd = (objective(&tp) - objective(&tm)) / (2.0 * h);
            assert!((grad[k] - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "param {k}: {} vs {fd}", grad[k]);
        }
    }
}
