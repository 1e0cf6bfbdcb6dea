//! LSTM cells and bidirectional encoders.
//!
//! Two cell variants are supported. The peephole cell lets the gates read
//! the cell state directly:
//!
//! ```text
//! i = σ(Wᵢx + Uᵢh + pᵢ⊙c + bᵢ)
//! f = σ(W_f x + U_f h + p_f⊙c + b_f)
//! c' = f⊙c + i⊙tanh(W_g x + U_g h + b_g)
//! o = σ(W_o x + U_o h + p_o⊙c' + b_o)
//! h' = o⊙tanh(c')
//! ```
//!
//! The coupled input-forget cell has no peepholes and ties the forget gate
//! to the input gate, `f = 1 - i`.

use rand::Rng;

use super::graph::{Graph, Var};
use super::init::{glorot_uniform, orthogonal};
use super::params::{ParamId, ParamStore};
use super::tensor::{Float, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LstmVariant {
    Peephole,
    CoupledInputForget,
}

impl LstmVariant {
    fn gates(self) -> usize {
        match self {
            LstmVariant::Peephole => 4,
            LstmVariant::CoupledInputForget => 3,
        }
    }
}

/// Nodes produced by one traced step.
#[derive(Clone, Copy, Debug)]
pub struct LstmStep {
    pub h: Var,
    pub c: Var,
    pub input_gate: Var,
    pub forget_gate: Var,
}

#[derive(Clone, Debug)]
pub struct LstmCell {
    pub variant: LstmVariant,
    pub input_dim: usize,
    pub hidden: usize,
    /// Input-to-gate weights, `[gates·H, input_dim]`.
    pub w: ParamId,
    /// Hidden-to-gate weights, `[gates·H, H]`.
    pub u: ParamId,
    pub b: ParamId,
    /// Peephole weights for the input, forget and output gates, `[3·H]`.
    pub peep: Option<ParamId>,
}

impl LstmCell {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        variant: LstmVariant,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let gates = variant.gates();
        let w = store.add(
            format!("{prefix}/w"),
            glorot_uniform(gates * hidden, input_dim, rng),
            true,
        );
        let mut u_data = Vec::with_capacity(gates * hidden * hidden);
        for _ in 0..gates {
            u_data.extend_from_slice(orthogonal(hidden, hidden, rng).data());
        }
        let u = store.add(
            format!("{prefix}/u"),
            Tensor::new(vec![gates * hidden, hidden], u_data).unwrap(),
            true,
        );
        let b = store.add(format!("{prefix}/b"), Tensor::zeros(&[gates * hidden]), true);
        let peep = (variant == LstmVariant::Peephole)
            .then(|| store.add(format!("{prefix}/peep"), Tensor::zeros(&[3 * hidden]), true));
        LstmCell {
            variant,
            input_dim,
            hidden,
            w,
            u,
            b,
            peep,
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut v = vec![self.w, self.u, self.b];
        v.extend(self.peep);
        v
    }

    /// One recurrence step on the tape. Returns `(h, c)`.
    pub fn step(&self, g: &mut Graph, x: Var, h: Var, c: Var) -> (Var, Var) {
        let s = self.step_traced(g, x, h, c);
        (s.h, s.c)
    }

    /// Like [`LstmCell::step`], also exposing the input and forget gates.
    pub fn step_traced(&self, g: &mut Graph, x: Var, h: Var, c: Var) -> LstmStep {
        let hd = self.hidden;
        let w = g.param(self.w);
        let u = g.param(self.u);
        let b = g.param(self.b);
        let wx = g.matvec(w, x);
        let uh = g.matvec(u, h);
        let pre = g.sum(&[wx, uh, b]);
        match self.variant {
            LstmVariant::Peephole => {
                let peep = g.param(self.peep.expect("peephole cell without peepholes"));
                let (pi, pf, po) = (g.slice(peep, 0, hd), g.slice(peep, hd, hd), g.slice(peep, 2 * hd, hd));
                let zi = g.slice(pre, 0, hd);
                let zf = g.slice(pre, hd, hd);
                let zg = g.slice(pre, 2 * hd, hd);
                let zo = g.slice(pre, 3 * hd, hd);
                let ci = g.mul(pi, c);
                let cf = g.mul(pf, c);
                let ai = g.add(zi, ci);
                let af = g.add(zf, cf);
                let i = g.sigmoid(ai);
                let f = g.sigmoid(af);
                let cand = g.tanh(zg);
                let keep = g.mul(f, c);
                let write = g.mul(i, cand);
                let c_new = g.add(keep, write);
                let co = g.mul(po, c_new);
                let ao = g.add(zo, co);
                let o = g.sigmoid(ao);
                let tc = g.tanh(c_new);
                let h_new = g.mul(o, tc);
                LstmStep {
                    h: h_new,
                    c: c_new,
                    input_gate: i,
                    forget_gate: f,
                }
            }
            LstmVariant::CoupledInputForget => {
                let zi = g.slice(pre, 0, hd);
                let zg = g.slice(pre, hd, hd);
                let zo = g.slice(pre, 2 * hd, hd);
                let i = g.sigmoid(zi);
                let f = g.one_minus(i);
                let cand = g.tanh(zg);
                let keep = g.mul(f, c);
                let write = g.mul(i, cand);
                let c_new = g.add(keep, write);
                let o = g.sigmoid(zo);
                let tc = g.tanh(c_new);
                let h_new = g.mul(o, tc);
                LstmStep {
                    h: h_new,
                    c: c_new,
                    input_gate: i,
                    forget_gate: f,
                }
            }
        }
    }

    /// Runs the cell over `inputs` (in the given order) from a zero state.
    pub fn run(&self, g: &mut Graph, inputs: &[Var]) -> Vec<Var> {
        let mut h = g.constant(Tensor::zeros(&[self.hidden]));
        let mut c = g.constant(Tensor::zeros(&[self.hidden]));
        let mut out = Vec::with_capacity(inputs.len());
        for &x in inputs {
            let (h2, c2) = self.step(g, x, h, c);
            out.push(h2);
            h = h2;
            c = c2;
        }
        out
    }

    fn check_dims(&self, store: &ParamStore, x: usize, h: usize, c: usize) -> Result<()> {
        let expect_w = [self.variant.gates() * self.hidden, self.input_dim];
        if store.get(self.w).shape() != expect_w {
            return Err(Error::shape("input weights disagree with cell dimensions"));
        }
        if x != self.input_dim || h != self.hidden || c != self.hidden {
            return Err(Error::shape(format!(
                "cell expects x[{}], h[{}], c[{}]; got x[{x}], h[{h}], c[{c}]",
                self.input_dim, self.hidden, self.hidden
            )));
        }
        Ok(())
    }
}

/// One LSTM step on plain vectors.
pub fn lstm_step(
    cell: &LstmCell,
    store: &ParamStore,
    x: &[Float],
    h_prev: &[Float],
    c_prev: &[Float],
) -> Result<(Vec<Float>, Vec<Float>)> {
    cell.check_dims(store, x.len(), h_prev.len(), c_prev.len())?;
    let mut g = Graph::new(store);
    let xv = g.input(x.to_vec());
    let hv = g.input(h_prev.to_vec());
    let cv = g.input(c_prev.to_vec());
    let (h, c) = cell.step(&mut g, xv, hv, cv);
    g.check_finite()?;
    Ok((g.value(h).data().to_vec(), g.value(c).data().to_vec()))
}

#[derive(Clone, Debug)]
pub struct BiLstmLayer {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

/// Multi-layer bidirectional LSTM. Layer `k + 1` reads the concatenated
/// outputs of layer `k`.
#[derive(Clone, Debug)]
pub struct BiLstm {
    pub layers: Vec<BiLstmLayer>,
}

impl BiLstm {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        variant: LstmVariant,
        input_dim: usize,
        hidden: usize,
        layers: usize,
        rng: &mut R,
    ) -> Self {
        let layers = (0..layers)
            .map(|k| {
                let dim = if k == 0 { input_dim } else { 2 * hidden };
                BiLstmLayer {
                    forward: LstmCell::new(store, &format!("{prefix}/l{k}/fw"), variant, dim, hidden, rng),
                    backward: LstmCell::new(store, &format!("{prefix}/l{k}/bw"), variant, dim, hidden, rng),
                }
            })
            .collect();
        BiLstm { layers }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| 2 * l.forward.hidden)
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers
            .iter()
            .flat_map(|l| l.forward.params().into_iter().chain(l.backward.params()))
            .collect()
    }

    /// Encodes a sequence; each layer's outputs pass through inverted
    /// dropout when `rng` is given.
    pub fn encode<R: Rng>(
        &self,
        g: &mut Graph,
        inputs: &[Var],
        dropout: Float,
        mut rng: Option<&mut R>,
    ) -> Vec<Var> {
        let mut xs = inputs.to_vec();
        for layer in &self.layers {
            xs = encode_layer(g, &layer.forward, &layer.backward, &xs);
            xs = xs
                .into_iter()
                .map(|v| g.dropout(v, dropout, rng.as_deref_mut()))
                .collect();
        }
        xs
    }
}

fn encode_layer(g: &mut Graph, fw: &LstmCell, bw: &LstmCell, xs: &[Var]) -> Vec<Var> {
    let forward = fw.run(g, xs);
    let reversed: Vec<Var> = xs.iter().rev().copied().collect();
    let mut backward = bw.run(g, &reversed);
    backward.reverse();
    forward
        .into_iter()
        .zip(backward)
        .map(|(f, b)| g.concat(&[f, b]))
        .collect()
}

/// Bidirectional encoding of plain vectors with explicit `(forward,
/// backward)` cell pairs.
pub fn bilstm_encode(
    layers: &[(LstmCell, LstmCell)],
    store: &ParamStore,
    inputs: &[Vec<Float>],
) -> Result<Vec<Vec<Float>>> {
    if inputs.is_empty() {
        return Err(Error::Empty("input sequence"));
    }
    let mut expected = layers.first().map_or(0, |(f, _)| f.input_dim);
    for (f, b) in layers {
        if f.input_dim != expected || b.input_dim != expected {
            return Err(Error::shape("layer input dimensions do not chain"));
        }
        expected = f.hidden + b.hidden;
    }
    if let Some(bad) = inputs.iter().find(|x| Some(x.len()) != layers.first().map(|l| l.0.input_dim)) {
        return Err(Error::shape(format!("input of length {}", bad.len())));
    }
    let mut g = Graph::new(store);
    let mut xs: Vec<Var> = inputs.iter().map(|x| g.input(x.clone())).collect();
    for (f, b) in layers {
        xs = encode_layer(&mut g, f, b, &xs);
    }
    g.check_finite()?;
    Ok(xs.iter().map(|&v| g.value(v).data().to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::tensor::sigmoid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn randomize(store: &mut ParamStore, ids: &[ParamId], rng: &mut ChaCha8Rng) {
        for &id in ids {
            store
                .get_mut(id)
                .data_mut()
                .iter_mut()
                .for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
    }

    /// Scalar-by-scalar reference implementation of both variants.
    fn reference_step(cell: &LstmCell, s: &ParamStore, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hd = cell.hidden;
        let (w, u, b) = (s.get(cell.w), s.get(cell.u), s.get(cell.b));
        let pre = |row: usize| -> f64 {
            let mut z = b.data()[row];
            for j in 0..x.len() {
                z += w.get(row, j) * x[j];
            }
            for j in 0..hd {
                z += u.get(row, j) * h[j];
            }
            z
        };
        let mut h2 = vec![0.0; hd];
        let mut c2 = vec![0.0; hd];
        for k in 0..hd {
            match cell.variant {
                LstmVariant::Peephole => {
                    let p = s.get(cell.peep.unwrap()).data();
                    let i = sigmoid(pre(k) + p[k] * c[k]);
                    let f = sigmoid(pre(hd + k) + p[hd + k] * c[k]);
                    let g = pre(2 * hd + k).tanh();
                    c2[k] = f * c[k] + i * g;
                    let o = sigmoid(pre(3 * hd + k) + p[2 * hd + k] * c2[k]);
                    h2[k] = o * c2[k].tanh();
                }
                LstmVariant::CoupledInputForget => {
                    let i = sigmoid(pre(k));
                    let g = pre(hd + k).tanh();
                    c2[k] = (1.0 - i) * c[k] + i * g;
                    let o = sigmoid(pre(2 * hd + k));
                    h2[k] = o * c2[k].tanh();
                }
            }
        }
        (h2, c2)
    }

    #[test]
    fn zero_weights_give_zero_hidden() {
        for variant in [LstmVariant::Peephole, LstmVariant::CoupledInputForget] {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut s = ParamStore::new();
            let cell = LstmCell::new(&mut s, "c", variant, 3, 2, &mut rng);
            for id in cell.params() {
                s.get_mut(id).fill(0.0);
            }
            let (h, _) = lstm_step(&cell, &s, &[0.5, -1.0, 2.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap();
            assert_eq!(h, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn coupled_saturated_input_gate_overwrites_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = ParamStore::new();
        let cell = LstmCell::new(&mut s, "c", LstmVariant::CoupledInputForget, 2, 2, &mut rng);
        // Input gate bias large: i ≈ 1, f ≈ 0.
        s.get_mut(cell.b).data_mut()[0..2].copy_from_slice(&[40.0, 40.0]);
        let x = [0.3, -0.2];
        let h = [0.1, 0.4];
        let (_, c) = lstm_step(&cell, &s, &x, &h, &[5.0, -5.0]).unwrap();
        let (w, u, b) = (s.get(cell.w), s.get(cell.u), s.get(cell.b));
        for k in 0..2 {
            let z = b.data()[2 + k]
                + (0..2).map(|j| w.get(2 + k, j) * x[j] + u.get(2 + k, j) * h[j]).sum::<f64>();
            assert!((c[k] - z.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_scalar_reference() {
        for variant in [LstmVariant::Peephole, LstmVariant::CoupledInputForget] {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut s = ParamStore::new();
            let cell = LstmCell::new(&mut s, "c", variant, 2, 2, &mut rng);
            randomize(&mut s, &cell.params(), &mut rng);
            let (x, h, c) = ([0.7, -0.4], [0.2, -0.9], [1.1, -0.3]);
            let (h1, c1) = lstm_step(&cell, &s, &x, &h, &c).unwrap();
            let (h2, c2) = reference_step(&cell, &s, &x, &h, &c);
            for k in 0..2 {
                assert!((h1[k] - h2[k]).abs() < 1e-12);
                assert!((c1[k] - c2[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn step_rejects_wrong_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = ParamStore::new();
        let cell = LstmCell::new(&mut s, "c", LstmVariant::Peephole, 3, 2, &mut rng);
        assert!(lstm_step(&cell, &s, &[0.0; 2], &[0.0; 2], &[0.0; 2]).is_err());
    }

    #[test]
    fn single_step_sequence_runs_both_directions_on_same_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = ParamStore::new();
        let f = LstmCell::new(&mut s, "f", LstmVariant::Peephole, 2, 3, &mut rng);
        let b = LstmCell::new(&mut s, "b", LstmVariant::Peephole, 2, 3, &mut rng);
        let x = vec![0.5, -0.5];
        let out = bilstm_encode(&[(f.clone(), b.clone())], &s, &[x.clone()]).unwrap();
        let (hf, _) = lstm_step(&f, &s, &x, &[0.0; 3], &[0.0; 3]).unwrap();
        let (hb, _) = lstm_step(&b, &s, &x, &[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(out[0], [hf, hb].concat());
    }

    #[test]
    fn palindrome_output_is_self_mirror() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = ParamStore::new();
        let cell = LstmCell::new(&mut s, "c", LstmVariant::CoupledInputForget, 2, 2, &mut rng);
        let xs = vec![vec![0.1, 0.2], vec![-0.5, 0.3], vec![0.9, -0.1], vec![-0.5, 0.3], vec![0.1, 0.2]];
        let out = bilstm_encode(&[(cell.clone(), cell)], &s, &xs).unwrap();
        let n = out.len();
        for t in 0..n {
            let mirrored = &out[n - 1 - t];
            let swapped = [&mirrored[2..], &mirrored[..2]].concat();
            for (a, b) in out[t].iter().zip(&swapped) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_layers_equal_composition_of_single_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = ParamStore::new();
        let l0 = (
            LstmCell::new(&mut s, "a", LstmVariant::Peephole, 2, 2, &mut rng),
            LstmCell::new(&mut s, "b", LstmVariant::Peephole, 2, 2, &mut rng),
        );
        let l1 = (
            LstmCell::new(&mut s, "c", LstmVariant::Peephole, 4, 3, &mut rng),
            LstmCell::new(&mut s, "d", LstmVariant::Peephole, 4, 3, &mut rng),
        );
        let xs = vec![vec![0.1, 0.2], vec![0.3, -0.4], vec![-0.2, 0.6]];
        let both = bilstm_encode(&[l0.clone(), l1.clone()], &s, &xs).unwrap();
        let first = bilstm_encode(&[l0], &s, &xs).unwrap();
        let second = bilstm_encode(&[l1], &s, &first).unwrap();
        assert_eq!(both, second);
    }

    #[test]
    fn coupled_gates_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = ParamStore::new();
        let cell = LstmCell::new(&mut s, "c", LstmVariant::CoupledInputForget, 2, 2, &mut rng);
        randomize(&mut s, &cell.params(), &mut rng);
        let mut g = Graph::new(&s);
        let mut h = g.input(vec![0.0, 0.0]);
        let mut c = g.input(vec![0.0, 0.0]);
        for t in 0..6 {
            let x = g.input(vec![0.3 * t as f64, -0.1]);
            let st = cell.step_traced(&mut g, x, h, c);
            let (i, f) = (g.value(st.input_gate).data(), g.value(st.forget_gate).data());
            for k in 0..2 {
                assert!(i[k] > 0.0 && i[k] < 1.0);
                assert!((i[k] + f[k] - 1.0).abs() <= f64::EPSILON);
            }
            h = st.h;
            c = st.c;
        }
    }
}
