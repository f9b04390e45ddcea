//! Masked autoencoder over bit strings (MADE) with one hidden ReLU layer.
//!
//! The network maps `x` to conditionals `x̂_i = p(x_i = 1 | x_<i)`. Hidden unit
//! `h` carries a connectivity label `c(h)` in `1..n-1`; it reads inputs
//! `x_j` with `j < c(h)` and feeds outputs `i` with `c(h) <= i` (0-based site
//! indices). Output 0 is therefore a pure bias, and `p(x)` is normalized by
//! construction.
//!
//! Labels cycle through `1..n-1` over the hidden units so the model is fully
//! determined by its shape and weights.

use rand::Rng;

use crate::bits::BitString;
use crate::checkpoint::{ArrayFile, NamedArray};
use crate::error::{Error, Result};

/// Conditionals are clamped to `[EPS, 1 - EPS]`.
pub const EPS: f64 = 1e-7;

/// Hidden width used for the 3x3 benchmarks.
pub const DEFAULT_HIDDEN: usize = 500;

const CHECKPOINT_FORMAT: &str = "betavqe-made";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BitSample {
    pub bits: BitString,
    pub log_prob: f64,
}

/// Flat parameter layout: `[W1 (hidden x n) | b1 | W2 (n x hidden) | b2]`,
/// both matrices row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MadeModel {
    n_sites: usize,
    hidden: usize,
    labels: Vec<usize>,
    params: Vec<f64>,
    mask: Vec<bool>,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit_eps() -> f64 {
    (EPS / (1.0 - EPS)).ln()
}

/// `ln p(x_i = bit)` from the logit, honoring the clamp.
fn log_conditional(logit: f64, bit: bool) -> f64 {
    let lo = logit_eps();
    if logit < lo {
        if bit {
            EPS.ln()
        } else {
            (-EPS).ln_1p()
        }
    } else if logit > -lo {
        if bit {
            (-EPS).ln_1p()
        } else {
            EPS.ln()
        }
    } else if bit {
        -softplus(-logit)
    } else {
        -softplus(logit)
    }
}

/// `d ln p(x_i = bit) / d logit`; zero inside the clamped region.
fn dlog_conditional(logit: f64, bit: bool) -> f64 {
    let lo = logit_eps();
    if logit < lo || logit > -lo {
        0.0
    } else {
        bit as u8 as f64 - sigmoid(logit)
    }
}

impl MadeModel {
    /// All weights and biases zero: the uniform distribution.
    pub fn cold(n_sites: usize, hidden: usize) -> Self {
        assert!(n_sites >= 1, "model needs at least one site");
        let labels: Vec<usize> =
            if n_sites == 1 { vec![1; hidden] } else { (0..hidden).map(|h| 1 + h % (n_sites - 1)).collect() };
        let total = 2 * hidden * n_sites + hidden + n_sites;
        let mut mask = vec![true; total];
        for h in 0..hidden {
            for j in 0..n_sites {
                mask[h * n_sites + j] = j < labels[h];
            }
        }
        let w2 = hidden * n_sites + hidden;
        for i in 0..n_sites {
            for h in 0..hidden {
                mask[w2 + i * hidden + h] = labels[h] <= i;
            }
        }
        MadeModel { n_sites, hidden, labels, params: vec![0.0; total], mask }
    }

    /// Weights uniform in `±1/sqrt(fan_in)` on unmasked entries, biases zero.
    pub fn random<R: Rng + ?Sized>(n_sites: usize, hidden: usize, rng: &mut R) -> Self {
        let mut m = Self::cold(n_sites, hidden);
        let s1 = 1.0 / (n_sites as f64).sqrt();
        let s2 = 1.0 / (hidden.max(1) as f64).sqrt();
        let (w1, w2) = (m.w1_range(), m.w2_range());
        for k in w1 {
            if m.mask[k] {
                m.params[k] = rng.gen_range(-s1..=s1);
            }
        }
        for k in w2 {
            if m.mask[k] {
                m.params[k] = rng.gen_range(-s2..=s2);
            }
        }
        m
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access to the flat parameters. Masked entries are ignored by
    /// the network whatever their value.
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `true` where a parameter is live, `false` for masked weight entries.
    pub fn param_mask(&self) -> &[bool] {
        &self.mask
    }

    fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.hidden * self.n_sites
    }

    fn b1_offset(&self) -> usize {
        self.hidden * self.n_sites
    }

    fn w2_range(&self) -> std::ops::Range<usize> {
        let start = self.b1_offset() + self.hidden;
        start..start + self.n_sites * self.hidden
    }

    fn b2_offset(&self) -> usize {
        self.w2_range().end
    }

    fn check(&self, x: BitString) -> Result<()> {
        if x.len() != self.n_sites {
            return Err(Error::BitLength { expected: self.n_sites, got: x.len() });
        }
        Ok(())
    }

    fn w1(&self, h: usize, j: usize) -> f64 {
        self.params[h * self.n_sites + j]
    }

    fn w2(&self, i: usize, h: usize) -> f64 {
        self.params[self.w2_range().start + i * self.hidden + h]
    }

    fn hidden_preactivation(&self, x: BitString) -> Vec<f64> {
        let b1 = self.b1_offset();
        (0..self.hidden)
            .map(|h| {
                let mut a = self.params[b1 + h];
                for j in 0..self.labels[h].min(self.n_sites) {
                    if x.get(j) {
                        a += self.w1(h, j);
                    }
                }
                a
            })
            .collect()
    }

    fn output_logit(&self, i: usize, activations: &[f64]) -> f64 {
        let mut o = self.params[self.b2_offset() + i];
        for (h, &act) in activations.iter().enumerate() {
            if self.labels[h] <= i && act > 0.0 {
                o += self.w2(i, h) * act;
            }
        }
        o
    }

    fn logits(&self, x: BitString) -> (Vec<f64>, Vec<f64>) {
        let pre = self.hidden_preactivation(x);
        let act: Vec<f64> = pre.iter().map(|a| a.max(0.0)).collect();
        let logits = (0..self.n_sites).map(|i| self.output_logit(i, &act)).collect();
        (pre, logits)
    }

    /// Conditionals `x̂_i = p(x_i = 1 | x_<i)`, clamped to `[EPS, 1 - EPS]`.
    pub fn forward(&self, x: BitString) -> Result<Vec<f64>> {
        self.check(x)?;
        let (_, logits) = self.logits(x);
        Ok(logits.into_iter().map(|o| sigmoid(o).clamp(EPS, 1.0 - EPS)).collect())
    }

    pub fn log_prob(&self, x: BitString) -> Result<f64> {
        self.check(x)?;
        let (_, logits) = self.logits(x);
        Ok(logits.iter().enumerate().map(|(i, &o)| log_conditional(o, x.get(i))).sum())
    }

    /// Draws one string by ancestral sampling.
    ///
    /// Hidden pre-activations are accumulated as bits are fixed, which gives
    /// bit-for-bit the same numbers as a fresh forward pass on the result.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> BitSample {
        let mut pre: Vec<f64> = self.params[self.b1_offset()..self.b1_offset() + self.hidden].to_vec();
        let mut act: Vec<f64> = pre.iter().map(|a| a.max(0.0)).collect();
        let mut bits = BitString::zeros(self.n_sites);
        let mut log_prob = 0.0;
        for i in 0..self.n_sites {
            let logit = self.output_logit(i, &act);
            let p1 = sigmoid(logit).clamp(EPS, 1.0 - EPS);
            let bit = rng.gen::<f64>() < p1;
            log_prob += log_conditional(logit, bit);
            if bit {
                bits.set(i, true);
                for h in 0..self.hidden {
                    if i < self.labels[h] {
                        pre[h] += self.w1(h, i);
                        act[h] = pre[h].max(0.0);
                    }
                }
            }
        }
        BitSample { bits, log_prob }
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<BitSample>> {
        if batch == 0 {
            return Err(Error::EmptyBatch);
        }
        Ok((0..batch).map(|_| self.sample_one(rng)).collect())
    }

    /// `ln p(x)` and its gradient over the flat parameters.
    pub fn log_prob_and_grad(&self, x: BitString) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let lp = self.accumulate_grad_log_prob(x, 1.0, &mut grad)?;
        Ok((lp, grad))
    }

    pub fn grad_log_prob(&self, x: BitString) -> Result<Vec<f64>> {
        self.log_prob_and_grad(x).map(|(_, g)| g)
    }

    /// Adds `scale * grad ln p(x)` into `grad` and returns `ln p(x)`.
    pub fn accumulate_grad_log_prob(&self, x: BitString, scale: f64, grad: &mut [f64]) -> Result<f64> {
        self.check(x)?;
        if grad.len() != self.params.len() {
            return Err(Error::ParameterCount { expected: self.params.len(), got: grad.len() });
        }
        let (n, hid) = (self.n_sites, self.hidden);
        let (pre, logits) = self.logits(x);
        let mut lp = 0.0;
        let delta_out: Vec<f64> = logits
            .iter()
            .enumerate()
            .map(|(i, &o)| {
                lp += log_conditional(o, x.get(i));
                scale * dlog_conditional(o, x.get(i))
            })
            .collect();
        let b2 = self.b2_offset();
        let w2 = self.w2_range().start;
        let b1 = self.b1_offset();
        for i in 0..n {
            grad[b2 + i] += delta_out[i];
        }
        for h in 0..hid {
            if pre[h] <= 0.0 {
                continue;
            }
            let mut back = 0.0;
            for i in self.labels[h]..n {
                grad[w2 + i * hid + h] += delta_out[i] * pre[h];
                back += self.params[w2 + i * hid + h] * delta_out[i];
            }
            grad[b1 + h] += back;
            for j in 0..self.labels[h].min(n) {
                if x.get(j) {
                    grad[h * n + j] += back;
                }
            }
        }
        Ok(lp)
    }

    pub fn to_checkpoint(&self) -> ArrayFile {
        let (n, h) = (self.n_sites, self.hidden);
        let slice = |r: std::ops::Range<usize>| self.params[r].to_vec();
        let mask = |r: std::ops::Range<usize>| self.mask[r].iter().map(|&m| m as u8 as f64).collect();
        let b1 = self.b1_offset();
        let mut file = ArrayFile::new(CHECKPOINT_FORMAT, CHECKPOINT_VERSION);
        file.header.insert("n_sites".into(), n as f64);
        file.header.insert("hidden".into(), h as f64);
        file.push(NamedArray::new("W1", vec![h, n], slice(self.w1_range())));
        file.push(NamedArray::new("b1", vec![h], slice(b1..b1 + h)));
        file.push(NamedArray::new("W2", vec![n, h], slice(self.w2_range())));
        file.push(NamedArray::new("b2", vec![n], slice(self.b2_offset()..self.b2_offset() + n)));
        file.push(NamedArray::new("M1", vec![h, n], mask(self.w1_range())));
        file.push(NamedArray::new("M2", vec![n, h], mask(self.w2_range())));
        file
    }

    pub fn from_checkpoint(file: &ArrayFile) -> Result<Self> {
        file.expect_format(CHECKPOINT_FORMAT, CHECKPOINT_VERSION)?;
        let n = file.header_usize("n_sites")?;
        let h = file.header_usize("hidden")?;
        if n == 0 {
            return Err(Error::Checkpoint("n_sites must be positive".into()));
        }
        let mut m = MadeModel::cold(n, h);
        let b1 = m.b1_offset();
        let b2 = m.b2_offset();
        let targets = [
            ("W1", vec![h, n], m.w1_range()),
            ("b1", vec![h], b1..b1 + h),
            ("W2", vec![n, h], m.w2_range()),
            ("b2", vec![n], b2..b2 + n),
        ];
        for (name, shape, range) in targets {
            let a = file.array(name, &shape)?;
            m.params[range].copy_from_slice(&a.data);
        }
        for (name, shape, range) in [("M1", vec![h, n], m.w1_range()), ("M2", vec![n, h], m.w2_range())] {
            let a = file.array(name, &shape)?;
            let stored = a.data.iter().map(|&v| v != 0.0);
            if !stored.eq(m.mask[range].iter().copied()) {
                return Err(Error::Checkpoint(format!("mask {name} does not match the cyclic label assignment")));
            }
        }
        Ok(m)
    }
}

/// Sample estimates of the entropy `E[-ln p]` and purity `E[p]`.
pub fn entropy_and_purity_estimates(samples: &[BitSample]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = samples.len() as f64;
    let entropy = samples.iter().map(|s| -s.log_prob).sum::<f64>() / n;
    let purity = samples.iter().map(|s| s.log_prob.exp()).sum::<f64>() / n;
    Ok((entropy, purity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_model(n: usize, hidden: usize, seed: u64) -> MadeModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = MadeModel::random(n, hidden, &mut rng);
        for p in m.params_mut() {
            *p += rng.gen_range(-0.5..0.5);
        }
        m
    }

    #[test]
    fn cold_model_is_uniform() {
        let m = MadeModel::cold(9, 20);
        for idx in [0u64, 5, 511] {
            let x = BitString::from_index(idx, 9).unwrap();
            assert!(m.forward(x).unwrap().iter().all(|&p| p == 0.5));
            assert_abs_diff_eq!(m.log_prob(x).unwrap(), -9.0 * 2f64.ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn single_bernoulli() {
        let mut m = MadeModel::cold(1, 4);
        let b2 = m.b2_offset();
        m.params_mut()[b2] = (0.9f64 / 0.1).ln();
        let x = BitString::from_bits(&[1]).unwrap();
        assert_abs_diff_eq!(m.log_prob(x).unwrap(), 0.9f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn first_conditional_ignores_inputs() {
        let m = random_model(5, 16, 3);
        let first = m.forward(BitString::zeros(5)).unwrap()[0];
        for x in BitString::all(5) {
            assert_eq!(m.forward(x).unwrap()[0], first);
        }
    }

    #[test]
    fn later_inputs_do_not_leak() {
        let m = random_model(6, 24, 7);
        for x in BitString::all(6) {
            let base = m.forward(x).unwrap();
            for j in 0..6 {
                let mut y = x;
                y.set(j, !x.get(j));
                let moved = m.forward(y).unwrap();
                for i in 0..=j {
                    assert_eq!(base[i], moved[i], "output {i} moved when flipping input {j}");
                }
            }
        }
    }

    #[test]
    fn each_conditional_sees_its_predecessor() {
        // with cyclic labels every output i >= 1 is wired to input i - 1
        let m = random_model(5, 40, 11);
        for i in 1..5 {
            let mut flipped = BitString::zeros(5);
            flipped.set(i - 1, true);
            let a = m.forward(BitString::zeros(5)).unwrap()[i];
            let b = m.forward(flipped).unwrap()[i];
            assert_ne!(a, b);
        }
    }

    #[test]
    fn normalized_by_enumeration() {
        let m = random_model(4, 12, 1);
        let total: f64 = BitString::all(4).map(|x| m.log_prob(x).unwrap().exp()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn sampled_log_prob_matches_recomputation() {
        let m = random_model(7, 30, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for s in m.sample(200, &mut rng).unwrap() {
            assert_abs_diff_eq!(s.log_prob, m.log_prob(s.bits).unwrap(), epsilon = 1e-12);
            assert!(s.log_prob <= 0.0);
        }
        assert!(matches!(m.sample(0, &mut rng), Err(Error::EmptyBatch)));
    }

    #[test]
    fn near_deterministic_bias() {
        let mut m = MadeModel::cold(3, 8);
        let b2 = m.b2_offset();
        for i in 0..3 {
            m.params_mut()[b2 + i] = (0.999f64 / 0.001).ln();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples = m.sample(10_000, &mut rng).unwrap();
        let ones: usize = samples.iter().map(|s| s.bits.index().count_ones() as usize).sum();
        assert!(ones as f64 / 30_000.0 >= 0.99);
    }

    #[test]
    fn masked_weights_get_zero_gradient() {
        let m = random_model(5, 20, 4);
        for x in BitString::all(5) {
            let g = m.grad_log_prob(x).unwrap();
            for (k, live) in m.param_mask().iter().enumerate() {
                if !live {
                    assert_eq!(g[k], 0.0);
                }
            }
        }
    }

    #[test]
    fn entropy_purity_of_uniform_model() {
        let m = MadeModel::cold(9, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = m.sample(17, &mut rng).unwrap();
        let (h, p) = entropy_and_purity_estimates(&s).unwrap();
        assert_abs_diff_eq!(h, 9.0 * 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(p, 2f64.powi(-9), epsilon = 1e-15);
        assert!(entropy_and_purity_estimates(&[]).is_err());
    }

    #[test]
    fn saturated_model_has_zero_entropy() {
        let mut m = MadeModel::cold(4, 8);
        let b2 = m.b2_offset();
        for i in 0..4 {
            m.params_mut()[b2 + i] = 50.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = m.sample(50, &mut rng).unwrap();
        let (h, p) = entropy_and_purity_estimates(&s).unwrap();
        assert!(h < 1e-5);
        assert!((p - 1.0).abs() < 1e-5);
        // saturated logits sit in the clamp: no gradient flows
        assert!(m.grad_log_prob(s[0].bits).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = random_model(4, 10, 8);
        let back = MadeModel::from_checkpoint(&m.to_checkpoint()).unwrap();
        assert_eq!(back, m);
        let mut file = m.to_checkpoint();
        file.arrays[4].data[0] = 1.0 - file.arrays[4].data[0];
        assert!(MadeModel::from_checkpoint(&file).is_err());
    }
}
