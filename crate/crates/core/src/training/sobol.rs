//! Unscrambled Sobol sequence, Gray-code ordering, Joe-Kuo direction numbers.
//!
//! Point 0 is the origin; `skip` drops that many leading points.

const BITS: usize = 32;

/// `(a, m_1..m_s)` for dimensions 2..=8; dimension 1 is the van der Corput sequence.
const DIRECTIONS: [(u32, &[u32]); 7] = [
    (0, &[1]),
    (1, &[1, 3]),
    (1, &[1, 3, 1]),
    (2, &[1, 1, 1]),
    (1, &[1, 1, 3, 3]),
    (4, &[1, 3, 5, 13]),
    (2, &[1, 1, 5, 5, 17]),
];

pub const MAX_DIM: usize = DIRECTIONS.len() + 1;

fn direction_vectors(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (BITS - 1 - k);
        }
        return v;
    }
    let (a, m) = DIRECTIONS[dim - 1];
    let s = m.len();
    for k in 0..BITS {
        v[k] = if k < s {
            m[k] << (BITS - 1 - k)
        } else {
            let mut x = v[k - s] ^ (v[k - s] >> s);
            for j in 1..s {
                if (a >> (s - 1 - j)) & 1 == 1 {
                    x ^= v[k - j];
                }
            }
            x
        };
    }
    v
}

/// Endless Sobol stream in `[0, 1)^dim`.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    dirs: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl SobolSequence {
    pub fn new(dim: usize, skip: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "Sobol dimension must lie in 1..={MAX_DIM}");
        let mut seq = Self { dirs: (0..dim).map(direction_vectors).collect(), state: vec![0; dim], index: 0 };
        for _ in 0..skip {
            seq.advance();
        }
        seq
    }

    fn advance(&mut self) {
        let c = self.index.trailing_ones() as usize;
        assert!(c < BITS, "Sobol sequence exhausted");
        for (s, d) in self.state.iter_mut().zip(&self.dirs) {
            *s ^= d[c];
        }
        self.index += 1;
    }
}

impl Iterator for SobolSequence {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let scale = 1.0 / (1u64 << BITS) as f64;
        let out = self.state.iter().map(|&s| s as f64 * scale).collect();
        self.advance();
        Some(out)
    }
}

/// `n` Sobol points in `[0, 1)^dim` after skipping `skip` points.
pub fn sobol_sample(dim: usize, n: usize, skip: usize) -> Vec<Vec<f64>> {
    assert!(n + skip <= 1 << 31, "too many Sobol points");
    SobolSequence::new(dim, skip).take(n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_points_in_one_dimension() {
        let x: Vec<f64> = sobol_sample(1, 4, 0).into_iter().map(|p| p[0]).collect();
        assert_eq!(x, vec![0.0, 0.5, 0.75, 0.25]);
    }

    #[test]
    fn matches_reference_table() {
        // independently generated reference (unscrambled, Joe-Kuo numbers)
        let reference: [[f64; 8]; 6] = [
            [0.375, 0.375, 0.625, 0.875, 0.375, 0.125, 0.375, 0.875],
            [0.875, 0.875, 0.125, 0.375, 0.875, 0.625, 0.875, 0.375],
            [0.625, 0.125, 0.875, 0.625, 0.625, 0.875, 0.125, 0.125],
            [0.125, 0.625, 0.375, 0.125, 0.125, 0.375, 0.625, 0.625],
            [0.1875, 0.3125, 0.9375, 0.4375, 0.5625, 0.3125, 0.4375, 0.9375],
            [0.6875, 0.8125, 0.4375, 0.9375, 0.0625, 0.8125, 0.9375, 0.4375],
        ];
        let pts = sobol_sample(8, 6, 4);
        for (p, r) in pts.iter().zip(&reference) {
            assert_eq!(p.as_slice(), r.as_slice());
        }
        let late = &sobol_sample(8, 16, 0)[15];
        assert_eq!(late.as_slice(), &[0.0625, 0.9375, 0.5625, 0.3125, 0.6875, 0.1875, 0.8125, 0.3125]);
    }

    /// Warnock's closed form of the L2 star discrepancy.
    fn l2_star(points: &[Vec<f64>]) -> f64 {
        let n = points.len() as f64;
        let d = points[0].len() as i32;
        let t2: f64 = points.iter().map(|p| p.iter().map(|x| 1.0 - x * x).product::<f64>()).sum();
        let mut t3 = 0.0;
        for p in points {
            for q in points {
                t3 += p.iter().zip(q).map(|(a, b)| 1.0 - a.max(*b)).product::<f64>();
            }
        }
        (3f64.powi(-d) - 2f64.powi(1 - d) / n * t2 + t3 / (n * n)).sqrt()
    }

    #[test]
    fn discrepancy_beats_pseudo_random() {
        let sobol = sobol_sample(2, 1024, 0);
        let d_sobol = l2_star(&sobol);
        assert!((d_sobol - 8.679282638502286e-4).abs() < 1e-12, "{d_sobol}");
        let mut random: Vec<f64> = (0..20)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let pts: Vec<Vec<f64>> = (0..1024).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
                l2_star(&pts)
            })
            .collect();
        random.sort_by(f64::total_cmp);
        assert!(d_sobol < random[10]);
    }

    #[test]
    fn stream_matches_batch() {
        let mut seq = SobolSequence::new(3, 5);
        let batch = sobol_sample(3, 40, 5);
        assert!(batch.iter().all(|p| seq.next().as_ref() == Some(p)));
    }

    #[test]
    fn points_lie_in_unit_cube() {
        assert!(sobol_sample(8, 4096, 1).iter().flatten().all(|&x| (0.0..1.0).contains(&x)));
    }
}
