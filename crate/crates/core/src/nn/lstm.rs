//! Single-layer bidirectional LSTM over token sequences, predicting each
//! position from the forward state before it and the backward state after
//! it.

use rand::RngCore;

use super::tensor::{axpy, dot};
use super::{NnError, Tensor};

// tensor order: forward wx, wh, b; backward wx, wh, b; output w, b
const FWX: usize = 0;
const FWH: usize = 1;
const BWX: usize = 3;
const BWH: usize = 4;
const WO: usize = 6;
const BO: usize = 7;

#[derive(Clone, Debug, PartialEq)]
pub struct BiLstm {
    vocab: usize,
    hidden: usize,
    params: Vec<Tensor>,
}

/// Per-step values of one direction, indexed in processing order.
#[derive(Clone, Debug)]
struct DirCache {
    tokens: Vec<usize>,
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    /// Post-activation gates `[i, f, g, o]`, each `hidden` wide.
    gates: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct LstmTrace {
    fwd: DirCache,
    bwd: DirCache,
    /// Output distribution at each position.
    pub probs: Vec<Vec<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn softmax(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    logits.iter_mut().for_each(|v| *v /= sum);
}

impl BiLstm {
    pub fn param_shapes(vocab: usize, hidden: usize) -> Vec<Vec<usize>> {
        let g = 4 * hidden;
        vec![
            vec![vocab, g],
            vec![hidden, g],
            vec![g],
            vec![vocab, g],
            vec![hidden, g],
            vec![g],
            vec![2 * hidden, vocab],
            vec![vocab],
        ]
    }

    pub fn new(vocab: usize, hidden: usize, rng: &mut dyn RngCore) -> Self {
        let g = 4 * hidden;
        let params = Self::param_shapes(vocab, hidden)
            .into_iter()
            .enumerate()
            .map(|(i, s)| match i {
                FWX | BWX => Tensor::glorot(&s, vocab, g, rng),
                FWH | BWH => Tensor::glorot(&s, hidden, g, rng),
                WO => Tensor::glorot(&s, 2 * hidden, vocab, rng),
                _ => Tensor::zeros(&s),
            })
            .collect();
        BiLstm { vocab, hidden, params }
    }

    pub fn from_params(vocab: usize, hidden: usize, params: Vec<Tensor>) -> Result<Self, NnError> {
        let shapes = Self::param_shapes(vocab, hidden);
        if params.len() != shapes.len() || params.iter().zip(&shapes).any(|(p, s)| p.shape() != s.as_slice()) {
            return Err(NnError::Shape(format!("lstm: parameters do not fit vocab {vocab}, hidden {hidden}")));
        }
        Ok(BiLstm { vocab, hidden, params })
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    fn check(&self, seq: &[usize]) -> Result<(), NnError> {
        if seq.is_empty() {
            return Err(NnError::Empty("lstm sequence".into()));
        }
        if let Some(t) = seq.iter().find(|&&t| t >= self.vocab) {
            return Err(NnError::Shape(format!("token {t} outside vocabulary of {}", self.vocab)));
        }
        Ok(())
    }

    fn run(&self, base: usize, tokens: Vec<usize>) -> DirCache {
        let h_n = self.hidden;
        let (wx, wh, b) = (self.params[base].data(), self.params[base + 1].data(), self.params[base + 2].data());
        let mut cache = DirCache { h: Vec::with_capacity(tokens.len()), c: Vec::new(), gates: Vec::new(), tokens };
        let mut h = vec![0.0; h_n];
        let mut c = vec![0.0; h_n];
        for &tok in &cache.tokens {
            let mut a = b.to_vec();
            axpy(1.0, &wx[tok * 4 * h_n..(tok + 1) * 4 * h_n], &mut a);
            for (j, &hj) in h.iter().enumerate() {
                if hj != 0.0 {
                    axpy(hj, &wh[j * 4 * h_n..(j + 1) * 4 * h_n], &mut a);
                }
            }
            for j in 0..h_n {
                let i = sigmoid(a[j]);
                let f = sigmoid(a[h_n + j]);
                let g = a[2 * h_n + j].tanh();
                let o = sigmoid(a[3 * h_n + j]);
                c[j] = f * c[j] + i * g;
                h[j] = o * c[j].tanh();
                a[j] = i;
                a[h_n + j] = f;
                a[2 * h_n + j] = g;
                a[3 * h_n + j] = o;
            }
            cache.gates.push(a);
            cache.h.push(h.clone());
            cache.c.push(c.clone());
        }
        cache
    }

    fn context(&self, trace_f: &DirCache, trace_b: &DirCache, i: usize) -> Vec<f64> {
        let n = trace_f.tokens.len();
        let mut ctx = vec![0.0; 2 * self.hidden];
        if i > 0 {
            ctx[..self.hidden].copy_from_slice(&trace_f.h[i - 1]);
        }
        if i + 1 < n {
            ctx[self.hidden..].copy_from_slice(&trace_b.h[n - 2 - i]);
        }
        ctx
    }

    /// Per position `(forward state after it, backward state after it)`.
    pub fn encode(&self, seq: &[usize]) -> Result<Vec<(Vec<f64>, Vec<f64>)>, NnError> {
        self.check(seq)?;
        let f = self.run(FWX, seq.to_vec());
        let b = self.run(BWX, seq.iter().rev().copied().collect());
        let n = seq.len();
        Ok((0..n).map(|t| (f.h[t].clone(), b.h[n - 1 - t].clone())).collect())
    }

    /// Distribution over the vocabulary from the forward state preceding a
    /// position and the backward state following it.
    pub fn predict_token(&self, forward_prev: &[f64], backward_next: &[f64]) -> Vec<f64> {
        let mut ctx = forward_prev.to_vec();
        ctx.extend_from_slice(backward_next);
        self.output(&ctx)
    }

    fn output(&self, ctx: &[f64]) -> Vec<f64> {
        let v = self.vocab;
        let wo = self.params[WO].data();
        let mut logits = self.params[BO].data().to_vec();
        for (j, &x) in ctx.iter().enumerate() {
            if x != 0.0 {
                axpy(x, &wo[j * v..(j + 1) * v], &mut logits);
            }
        }
        softmax(&mut logits);
        logits
    }

    pub fn forward(&self, seq: &[usize]) -> Result<LstmTrace, NnError> {
        self.check(seq)?;
        let fwd = self.run(FWX, seq.to_vec());
        let bwd = self.run(BWX, seq.iter().rev().copied().collect());
        let probs = (0..seq.len()).map(|i| self.output(&self.context(&fwd, &bwd, i))).collect();
        Ok(LstmTrace { fwd, bwd, probs })
    }

    /// Mean cross-entropy of predicting `targets[i]` at every position.
    pub fn loss(&self, seq: &[usize], targets: &[usize]) -> Result<f64, NnError> {
        let trace = self.forward(seq)?;
        cross_entropy(&trace.probs, targets)
    }

    pub fn loss_and_grad(&self, seq: &[usize], targets: &[usize]) -> Result<(f64, Vec<Tensor>), NnError> {
        let trace = self.forward(seq)?;
        let loss = cross_entropy(&trace.probs, targets)?;
        let n = seq.len();
        let (h_n, v) = (self.hidden, self.vocab);
        let mut grads: Vec<Tensor> = self.params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        let mut dhf = vec![vec![0.0; h_n]; n];
        let mut dhb = vec![vec![0.0; h_n]; n];
        let wo = self.params[WO].data();
        for i in 0..n {
            let mut dlogits = trace.probs[i].clone();
            dlogits[targets[i]] -= 1.0;
            dlogits.iter_mut().for_each(|d| *d /= n as f64);
            let ctx = self.context(&trace.fwd, &trace.bwd, i);
            axpy(1.0, &dlogits, grads[BO].data_mut());
            let gwo = grads[WO].data_mut();
            for (j, &x) in ctx.iter().enumerate() {
                if x != 0.0 {
                    axpy(x, &dlogits, &mut gwo[j * v..(j + 1) * v]);
                }
            }
            if i > 0 {
                for j in 0..h_n {
                    dhf[i - 1][j] += dot(&wo[j * v..(j + 1) * v], &dlogits);
                }
            }
            if i + 1 < n {
                for j in 0..h_n {
                    dhb[n - 2 - i][j] += dot(&wo[(h_n + j) * v..(h_n + j + 1) * v], &dlogits);
                }
            }
        }
        self.backprop_dir(FWX, &trace.fwd, dhf, &mut grads);
        self.backprop_dir(BWX, &trace.bwd, dhb, &mut grads);
        Ok((loss, grads))
    }

    fn backprop_dir(&self, base: usize, cache: &DirCache, dh_out: Vec<Vec<f64>>, grads: &mut [Tensor]) {
        let h_n = self.hidden;
        let g4 = 4 * h_n;
        let wh = self.params[base + 1].data();
        let (gwx, rest) = grads[base..base + 3].split_at_mut(1);
        let (gwh, gb) = rest.split_at_mut(1);
        let (gwx, gwh, gb) = (gwx[0].data_mut(), gwh[0].data_mut(), gb[0].data_mut());
        let zeros = vec![0.0; h_n];
        let mut dh_next = vec![0.0; h_n];
        let mut dc_next = vec![0.0; h_n];
        let mut da = vec![0.0; g4];
        for k in (0..cache.tokens.len()).rev() {
            let gates = &cache.gates[k];
            let c_prev = if k > 0 { &cache.c[k - 1] } else { &zeros };
            let h_prev = if k > 0 { &cache.h[k - 1] } else { &zeros };
            for j in 0..h_n {
                let (i, f, g, o) = (gates[j], gates[h_n + j], gates[2 * h_n + j], gates[3 * h_n + j]);
                let dh = dh_out[k][j] + dh_next[j];
                let tc = cache.c[k][j].tanh();
                let dc = dc_next[j] + dh * o * (1.0 - tc * tc);
                da[j] = dc * g * i * (1.0 - i);
                da[h_n + j] = dc * c_prev[j] * f * (1.0 - f);
                da[2 * h_n + j] = dc * i * (1.0 - g * g);
                da[3 * h_n + j] = dh * tc * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            axpy(1.0, &da, gb);
            let tok = cache.tokens[k];
            axpy(1.0, &da, &mut gwx[tok * g4..(tok + 1) * g4]);
            for j in 0..h_n {
                if h_prev[j] != 0.0 {
                    axpy(h_prev[j], &da, &mut gwh[j * g4..(j + 1) * g4]);
                }
                dh_next[j] = dot(&wh[j * g4..(j + 1) * g4], &da);
            }
        }
    }
}

fn cross_entropy(probs: &[Vec<f64>], targets: &[usize]) -> Result<f64, NnError> {
    if probs.len() != targets.len() {
        return Err(NnError::Shape(format!("{} targets for {} positions", targets.len(), probs.len())));
    }
    let mut total = 0.0;
    for (p, &t) in probs.iter().zip(targets) {
        let pt = *p.get(t).ok_or_else(|| NnError::Shape(format!("target {t} outside vocabulary")))?;
        total -= pt.max(1e-300).ln();
    }
    let loss = total / targets.len() as f64;
    if !loss.is_finite() {
        return Err(NnError::Numeric("lstm loss is not finite".into()));
    }
    Ok(loss)
}
