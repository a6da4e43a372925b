//! A small f64 multilayer perceptron with exactly what the pipeline needs:
//! forward, reverse-mode gradients (including input gradients, so one net
//! can feed another), Adam, a finite-difference gradient checker, and a
//! binary checkpoint format.
//!
//! Hidden layers use the swish activation `x·σ(x)`; the output layer is
//! linear. Parameters live in one flat `Vec<f64>` (row-major weights, then
//! biases, layer by layer) so the optimizer, the gradient checker, and the
//! checkpoint writer all operate on a single slice.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

fn swish(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// d/dx swish(x) = σ(x) (1 + x (1 - σ(x)))
fn swish_grad(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// Fully connected network with swish hidden activations and linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

impl Mlp {
    /// He-style initialization: weights `N(0, 2/fan_in)`, biases zero.
    pub fn new(sizes: &[usize], seed: u64) -> Mlp {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        assert!(sizes.iter().all(|&n| n > 0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(sizes));
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let scale = (2.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                let g: f64 = StandardNormal.sample(&mut rng);
                params.push(scale * g);
            }
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Mlp { sizes: sizes.to_vec(), params }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.params.len());
        self.params.copy_from_slice(p);
    }

    /// Offset of layer `l`'s weights and biases in the flat parameter vector.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for k in 0..l {
            off += self.sizes[k] * self.sizes[k + 1] + self.sizes[k + 1];
        }
        (off, off + self.sizes[l] * self.sizes[l + 1])
    }

    /// Plain forward pass.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim(), "input length");
        let mut act = x.to_vec();
        let last = self.sizes.len() - 2;
        for l in 0..=last {
            let (w_off, b_off) = self.layer_offsets(l);
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut next = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &self.params[w_off + o * n_in..w_off + (o + 1) * n_in];
                let mut z = self.params[b_off + o];
                for (wi, xi) in row.iter().zip(act.iter()) {
                    z += wi * xi;
                }
                next[o] = if l == last { z } else { swish(z) };
            }
            act = next;
        }
        act
    }

    /// Forward pass that checks the output for NaN/inf, with `where_` used
    /// in the error message. Training loops call this to fail loudly instead
    /// of silently propagating divergence.
    pub fn forward_checked(&self, x: &[f64], where_: &str) -> Result<Vec<f64>> {
        let y = self.forward(x);
        if let Some((i, v)) = y.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{where_}: output[{i}] = {v}")));
        }
        Ok(y)
    }

    /// Forward + reverse pass for one sample. `upstream` is `∂L/∂output`;
    /// the gradient w.r.t. every parameter is *added into* `grad` (length
    /// `n_params`), and the gradient w.r.t. the input is returned so that a
    /// preceding network can continue the chain.
    pub fn forward_backward(&self, x: &[f64], upstream: &[f64], grad: &mut [f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim());
        assert_eq!(upstream.len(), self.output_dim());
        assert_eq!(grad.len(), self.params.len());
        let last = self.sizes.len() - 2;

        // Cache inputs and pre-activations for each layer.
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(last + 1);
        let mut preacts: Vec<Vec<f64>> = Vec::with_capacity(last + 1);
        let mut act = x.to_vec();
        for l in 0..=last {
            let (w_off, b_off) = self.layer_offsets(l);
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut z = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &self.params[w_off + o * n_in..w_off + (o + 1) * n_in];
                let mut acc = self.params[b_off + o];
                for (wi, xi) in row.iter().zip(act.iter()) {
                    acc += wi * xi;
                }
                z[o] = acc;
            }
            inputs.push(act);
            act = if l == last { z.clone() } else { z.iter().map(|&v| swish(v)).collect() };
            preacts.push(z);
        }

        // Backward.
        let mut delta = upstream.to_vec();
        for l in (0..=last).rev() {
            let (w_off, b_off) = self.layer_offsets(l);
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if l != last {
                for o in 0..n_out {
                    delta[o] *= swish_grad(preacts[l][o]);
                }
            }
            let input = &inputs[l];
            let mut next_delta = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                grad[b_off + o] += d;
                let row_off = w_off + o * n_in;
                for i in 0..n_in {
                    grad[row_off + i] += d * input[i];
                    next_delta[i] += d * self.params[row_off + i];
                }
            }
            delta = next_delta;
        }
        delta
    }

    /// Write parameters as a binary checkpoint:
    /// magic `MLPF64\n`, a little-endian tag `0x01020304u32`, the layer
    /// count, the layer sizes (u64 each), then the flat parameters as f64,
    /// all little-endian.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::with_capacity(32 + 8 * self.params.len());
        buf.extend_from_slice(b"MLPF64\n");
        buf.extend_from_slice(&0x0102_0304u32.to_le_bytes());
        buf.extend_from_slice(&(self.sizes.len() as u64).to_le_bytes());
        for &s in &self.sizes {
            buf.extend_from_slice(&(s as u64).to_le_bytes());
        }
        for &p in &self.params {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Mlp> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let fail = |msg: &str| Error::Checkpoint(format!("{}: {msg}", path.display()));
        if bytes.len() < 19 || &bytes[..7] != b"MLPF64\n" {
            return Err(fail("bad magic"));
        }
        let mut off = 7;
        let mut take = |n: usize| -> Result<&[u8]> {
            if off + n > bytes.len() {
                return Err(fail("truncated"));
            }
            let s = &bytes[off..off + n];
            off += n;
            Ok(s)
        };
        let tag = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if tag != 0x0102_0304 {
            return Err(fail("endianness tag mismatch"));
        }
        let n_sizes = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        if n_sizes < 2 || n_sizes > 64 {
            return Err(fail("implausible layer count"));
        }
        let mut sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            sizes.push(u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize);
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(fail("zero layer size"));
        }
        let n_params = param_count(&sizes);
        let mut params = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            params.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        }
        if off != bytes.len() {
            return Err(fail("trailing bytes"));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(fail("non-finite parameter"));
        }
        Ok(Mlp { sizes, params })
    }
}

fn param_count(sizes: &[usize]) -> usize {
    (0..sizes.len() - 1).map(|l| sizes[l] * sizes[l + 1] + sizes[l + 1]).sum()
}

/// Adam with the usual bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Adam {
        assert!(lr > 0.0);
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    /// Apply one update in place. Returns an error if the gradient contains
    /// a non-finite entry, so training loops can attribute divergence to a
    /// step index.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        if let Some((i, g)) = grad.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient[{i}] = {g}")));
        }
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub checked: usize,
}

/// Compare an analytic gradient against central differences of `loss`.
///
/// `loss` is evaluated at perturbed copies of `params` (step `h`); the
/// relative error at coordinate `i` is `|num - ana| / max(|num|, 1e-8)`.
/// At most `max_coords` coordinates are checked; when fewer than the full
/// parameter count, a deterministic stride covers the vector evenly.
pub fn gradient_check(
    params: &[f64],
    analytic: &[f64],
    h: f64,
    max_coords: usize,
    mut loss: impl FnMut(&[f64]) -> f64,
) -> GradCheck {
    assert_eq!(params.len(), analytic.len());
    assert!(h > 0.0 && max_coords > 0);
    let n = params.len();
    let stride = n.div_ceil(max_coords).max(1);
    let mut work = params.to_vec();
    let mut max_rel_err: f64 = 0.0;
    let mut worst_index = 0;
    let mut checked = 0;
    let mut i = 0;
    while i < n {
        let orig = work[i];
        work[i] = orig + h;
        let up = loss(&work);
        work[i] = orig - h;
        let down = loss(&work);
        work[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let rel = (numeric - analytic[i]).abs() / numeric.abs().max(1e-8);
        if rel > max_rel_err {
            max_rel_err = rel;
            worst_index = i;
        }
        checked += 1;
        i += stride;
    }
    GradCheck { max_rel_err, worst_index, checked }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_matches_hand_computation_on_tiny_net() {
        // 1-2-1 net, parameters set by hand.
        let mut net = Mlp::new(&[1, 2, 1], 0);
        // layer 0: w = [[2],[−1]], b = [0.5, 0.0]; layer 1: w = [[1, 3]], b = [−0.25]
        net.set_params(&[2.0, -1.0, 0.5, 0.0, 1.0, 3.0, -0.25]);
        let x = 0.7;
        let z0 = 2.0 * x + 0.5;
        let z1 = -x;
        let h0 = z0 / (1.0 + (-z0 as f64).exp());
        let h1 = z1 / (1.0 + (-z1 as f64).exp());
        let expect = h0 + 3.0 * h1 - 0.25;
        let y = net.forward(&[x]);
        assert!((y[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let net = Mlp::new(&[3, 8, 8, 2], 42);
        let x = [0.3, -1.2, 0.85];
        // Loss: ½‖y − target‖².
        let target = [0.1, -0.4];
        let loss_of = |net: &Mlp| {
            let y = net.forward(&x);
            0.5 * y.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        };
        let y = net.forward(&x);
        let upstream: Vec<f64> = y.iter().zip(&target).map(|(a, b)| a - b).collect();
        let mut grad = vec![0.0; net.n_params()];
        net.forward_backward(&x, &upstream, &mut grad);
        let mut probe = net.clone();
        let check = gradient_check(net.params(), &grad, 1e-5, 200, |p| {
            probe.set_params(p);
            loss_of(&probe)
        });
        assert!(check.max_rel_err < 1e-6, "max rel err {}", check.max_rel_err);
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let net = Mlp::new(&[4, 6, 3], 7);
        let x = vec![0.2, -0.1, 0.9, -1.5];
        let upstream = vec![1.0, -2.0, 0.5];
        let mut grad = vec![0.0; net.n_params()];
        let dx = net.forward_backward(&x, &upstream, &mut grad);
        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += h;
            let up: f64 = net.forward(&xp).iter().zip(&upstream).map(|(y, u)| y * u).sum();
            xp[i] -= 2.0 * h;
            let down: f64 = net.forward(&xp).iter().zip(&upstream).map(|(y, u)| y * u).sum();
            let numeric = (up - down) / (2.0 * h);
            assert!((numeric - dx[i]).abs() < 1e-6, "coord {i}: {numeric} vs {}", dx[i]);
        }
    }

    #[test]
    fn gradient_check_flags_corrupted_gradient() {
        let net = Mlp::new(&[2, 4, 1], 3);
        let x = [0.5, -0.7];
        let loss_of = |net: &Mlp| net.forward(&x)[0];
        let mut grad = vec![0.0; net.n_params()];
        net.forward_backward(&x, &[1.0], &mut grad);
        // Corrupt by doubling: relative error should report ≈ 1.
        let corrupted: Vec<f64> = grad.iter().map(|g| 2.0 * g).collect();
        let mut probe = net.clone();
        let check = gradient_check(net.params(), &corrupted, 1e-5, net.n_params(), |p| {
            probe.set_params(p);
            loss_of(&probe)
        });
        assert!((check.max_rel_err - 1.0).abs() < 0.05, "rel err {}", check.max_rel_err);
    }

    #[test]
    fn adam_first_step_has_lr_magnitude() {
        // With fresh moments the first Adam step is lr·g/(|g|+ε) ≈ lr·sign(g).
        let mut opt = Adam::new(3, 0.001);
        let mut params = vec![1.0, 2.0, 3.0];
        let grad = vec![0.5, -2.0, 1e-3];
        opt.step(&mut params, &grad).unwrap();
        assert!((params[0] - (1.0 - 0.001)).abs() < 1e-9);
        assert!((params[1] - (2.0 + 0.001)).abs() < 1e-9);
        assert!((params[2] - (3.0 - 0.001)).abs() < 1e-6);
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let mut opt = Adam::new(2, 0.01);
        let mut params = vec![0.0, 0.0];
        let err = opt.step(&mut params, &[f64::NAN, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn adam_converges_on_quadratic() {
        let mut opt = Adam::new(2, 0.05);
        let mut p = vec![3.0, -2.0];
        for _ in 0..2000 {
            let grad = vec![2.0 * (p[0] - 1.0), 2.0 * (p[1] + 4.0)];
            opt.step(&mut p, &grad).unwrap();
        }
        assert!((p[0] - 1.0).abs() < 1e-3 && (p[1] + 4.0).abs() < 1e-3, "{p:?}");
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.mlp");
        let net = Mlp::new(&[5, 16, 16, 3], 99);
        net.save(&path).unwrap();
        let back = Mlp::load(&path).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.mlp");
        let net = Mlp::new(&[2, 3, 1], 1);
        net.save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 4);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(Mlp::load(&path), Err(Error::Checkpoint(_))));
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(matches!(Mlp::load(&path), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn deterministic_init_from_seed() {
        assert_eq!(Mlp::new(&[3, 4, 2], 5), Mlp::new(&[3, 4, 2], 5));
        assert_ne!(Mlp::new(&[3, 4, 2], 5), Mlp::new(&[3, 4, 2], 6));
    }
}
