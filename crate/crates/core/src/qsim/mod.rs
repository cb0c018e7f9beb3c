//! Dense state-vector simulator over named registers.
//!
//! Registers are laid out most-significant first: for a layout `[a, b]` the
//! basis index of `|x>_a |y>_b` is `x * 2^{|b|} + y`.

mod phase;

pub use phase::{
    median_of_repeats, pe_kernel, phase_estimate, phase_estimate_distribution, unitary_powers,
    PePolicy, PhaseEstimationConfig, MAX_PHASE_BITS,
};

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{unitarity_defect, CMatrix};
use crate::tensor::Tensor;

/// Qubit budget when `TQSVD_QUBIT_CAP` is unset.
pub const DEFAULT_QUBIT_CAP: usize = 22;

/// Probability below which a postselection is refused.
pub const POSTSELECT_MIN_PROBABILITY: f64 = 1e-14;

/// Minimum purity of a register's reduced state for it to be discarded.
pub const DISCARD_PURITY_TOL: f64 = 1e-10;

/// Active qubit cap (`TQSVD_QUBIT_CAP` or the default).
pub fn qubit_cap() -> usize {
    std::env::var("TQSVD_QUBIT_CAP")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_QUBIT_CAP)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub qubits: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegisterLayout {
    registers: Vec<Register>,
}

impl RegisterLayout {
    /// Layout checked against [`qubit_cap`].
    pub fn new(registers: &[(&str, usize)]) -> Result<Self> {
        Self::with_cap(registers, qubit_cap())
    }

    pub fn with_cap(registers: &[(&str, usize)], cap: usize) -> Result<Self> {
        let layout = Self {
            registers: registers
                .iter()
                .map(|&(n, q)| Register {
                    name: n.to_string(),
                    qubits: q,
                })
                .collect(),
        };
        layout.validate(cap)?;
        Ok(layout)
    }

    fn validate(&self, cap: usize) -> Result<()> {
        for (i, r) in self.registers.iter().enumerate() {
            if self.registers[..i].iter().any(|o| o.name == r.name) {
                return Err(invalid(format!("duplicate register name `{}`", r.name)));
            }
        }
        let total = self.total_qubits();
        if total > cap {
            return Err(Error::QubitCapExceeded {
                requested: total,
                cap,
                hint: "use oracle mode or a smaller instance".into(),
            });
        }
        Ok(())
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn total_qubits(&self) -> usize {
        self.registers.iter().map(|r| r.qubits).sum()
    }

    pub fn dim(&self) -> usize {
        1 << self.total_qubits()
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.registers
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| invalid(format!("unknown register `{name}`")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.registers.iter().any(|r| r.name == name)
    }

    /// Number of basis values of a register.
    pub fn size(&self, name: &str) -> Result<usize> {
        Ok(1 << self.registers[self.position(name)?].qubits)
    }

    fn stride_at(&self, pos: usize) -> usize {
        1 << self.registers[pos + 1..]
            .iter()
            .map(|r| r.qubits)
            .sum::<usize>()
    }

    fn size_at(&self, pos: usize) -> usize {
        1 << self.registers[pos].qubits
    }

    /// Register values of a basis index, in layout order.
    pub fn decode(&self, index: usize) -> Vec<usize> {
        (0..self.registers.len())
            .map(|p| (index / self.stride_at(p)) % self.size_at(p))
            .collect()
    }

    /// Basis index of register values given in layout order.
    pub fn encode(&self, values: &[usize]) -> usize {
        values
            .iter()
            .enumerate()
            .map(|(p, &v)| v * self.stride_at(p))
            .sum()
    }

    /// Offsets spanned by the target registers (first target most
    /// significant) and base indices spanned by everything else.
    fn blocks(&self, targets: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let span = |positions: &[usize]| {
            let mut idx = vec![0usize];
            for &p in positions {
                let (stride, size) = (self.stride_at(p), self.size_at(p));
                idx = idx
                    .iter()
                    .flat_map(|&b| (0..size).map(move |v| b + v * stride))
                    .collect();
            }
            idx
        };
        let rest: Vec<usize> = (0..self.registers.len())
            .filter(|p| !targets.contains(p))
            .collect();
        (span(targets), span(&rest))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: RegisterLayout,
    amps: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct StateDump {
    layout: RegisterLayout,
    amplitudes: Vec<f64>,
}

impl StateVector {
    /// Computational basis state with the given register values.
    pub fn basis(layout: RegisterLayout, values: &[usize]) -> Result<Self> {
        if values.len() != layout.registers.len() {
            return Err(invalid("one value per register required"));
        }
        for (p, &v) in values.iter().enumerate() {
            if v >= layout.size_at(p) {
                return Err(invalid(format!(
                    "value {v} does not fit register `{}`",
                    layout.registers[p].name
                )));
            }
        }
        let mut amps = vec![Complex64::default(); layout.dim()];
        amps[layout.encode(values)] = Complex64::new(1.0, 0.0);
        Ok(Self { layout, amps })
    }

    /// State from explicit amplitudes, which must be normalized to 1e-10.
    pub fn from_amplitudes(layout: RegisterLayout, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != layout.dim() {
            return Err(invalid(format!(
                "{} amplitudes for a {}-dimensional layout",
                amps.len(),
                layout.dim()
            )));
        }
        let s = Self { layout, amps };
        if (s.norm() - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("state norm {} is not 1", s.norm())));
        }
        Ok(s)
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, values: &[usize]) -> Complex64 {
        self.amps[self.layout.encode(values)]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Adds a register in state `|0>` at layout position `at`.
    pub fn add_register(&mut self, name: &str, qubits: usize, at: usize) -> Result<()> {
        if at > self.layout.registers.len() {
            return Err(invalid("register position out of range"));
        }
        let mut regs = self.layout.registers.clone();
        regs.insert(
            at,
            Register {
                name: name.to_string(),
                qubits,
            },
        );
        let layout = RegisterLayout { registers: regs };
        layout.validate(qubit_cap())?;
        let (stride, size) = (layout.stride_at(at), layout.size_at(at));
        let mut amps = vec![Complex64::default(); layout.dim()];
        for (i, a) in self.amps.iter().enumerate() {
            if *a != Complex64::default() {
                let (hi, lo) = (i / stride, i % stride);
                amps[hi * stride * size + lo] = *a;
            }
        }
        self.layout = layout;
        self.amps = amps;
        Ok(())
    }

    /// Quantum Fourier transform `|x> -> N^{-1/2} sum_y e^{2 pi i xy/N} |y>`
    /// on one register (`inverse` applies the adjoint).
    pub fn apply_qft(&mut self, register: &str, inverse: bool) -> Result<()> {
        let pos = self.layout.position(register)?;
        let n = self.layout.size_at(pos);
        if n == 1 {
            return Ok(());
        }
        let dir = if inverse {
            FftDirection::Forward
        } else {
            FftDirection::Inverse
        };
        let fft = FftPlanner::<f64>::new().plan_fft(n, dir);
        let scale = 1.0 / (n as f64).sqrt();
        let (offsets, bases) = self.layout.blocks(&[pos]);
        let mut buf = vec![Complex64::default(); n];
        for b in bases {
            for (x, &o) in buf.iter_mut().zip(&offsets) {
                *x = self.amps[b + o];
            }
            if buf.iter().all(|z| *z == Complex64::default()) {
                continue;
            }
            fft.process(&mut buf);
            for (x, &o) in buf.iter().zip(&offsets) {
                self.amps[b + o] = x * scale;
            }
        }
        Ok(())
    }

    /// Applies `u` to the joint index of `registers` (first listed most
    /// significant), optionally only where `control.0` holds value `control.1`.
    pub fn apply_unitary(
        &mut self,
        u: &CMatrix,
        registers: &[&str],
        control: Option<(&str, usize)>,
    ) -> Result<()> {
        let defect = if u.is_square() { unitarity_defect(u) } else { f64::INFINITY };
        if defect > 1e-10 {
            return Err(invalid(format!("matrix is not unitary (defect {defect:e})")));
        }
        let targets = self.target_positions(registers)?;
        let dim: usize = targets.iter().map(|&p| self.layout.size_at(p)).product();
        if u.nrows() != dim {
            return Err(invalid(format!(
                "{}x{} matrix on a {dim}-dimensional target",
                u.nrows(),
                u.ncols()
            )));
        }
        let ctrl = match control {
            Some((name, value)) => {
                let p = self.layout.position(name)?;
                if targets.contains(&p) {
                    return Err(invalid("control register is also a target"));
                }
                if value >= self.layout.size_at(p) {
                    return Err(invalid("control value out of range"));
                }
                Some((p, value))
            }
            None => None,
        };
        let (offsets, bases) = self.layout.blocks(&targets);
        let mut buf = vec![Complex64::default(); dim];
        for b in bases {
            if let Some((p, v)) = ctrl {
                if (b / self.layout.stride_at(p)) % self.layout.size_at(p) != v {
                    continue;
                }
            }
            self.apply_block(u, b, &offsets, &mut buf);
        }
        Ok(())
    }

    /// Applies `unitary_for(y)` to the targets on the branch where `control`
    /// holds `y`; `None` means identity on that branch. Matrices are trusted to
    /// be unitary (callers build them from verified factors).
    ///
    /// `gate`, if given, additionally restricts the operation to branches where
    /// that register holds that value.
    pub fn apply_multiplexed<'a>(
        &mut self,
        control: &str,
        registers: &[&str],
        gate: Option<(&str, usize)>,
        unitary_for: impl Fn(usize) -> Option<&'a CMatrix>,
    ) -> Result<()> {
        let targets = self.target_positions(registers)?;
        let cp = self.layout.position(control)?;
        if targets.contains(&cp) {
            return Err(invalid("control register is also a target"));
        }
        let gate = match gate {
            Some((name, v)) => {
                let p = self.layout.position(name)?;
                if targets.contains(&p) || p == cp {
                    return Err(invalid("gate register overlaps control or targets"));
                }
                Some((self.layout.stride_at(p), self.layout.size_at(p), v))
            }
            None => None,
        };
        let dim: usize = targets.iter().map(|&p| self.layout.size_at(p)).product();
        let (offsets, bases) = self.layout.blocks(&targets);
        let (cs, cn) = (self.layout.stride_at(cp), self.layout.size_at(cp));
        let mut buf = vec![Complex64::default(); dim];
        for b in bases {
            if let Some((gs, gn, gv)) = gate {
                if (b / gs) % gn != gv {
                    continue;
                }
            }
            let y = (b / cs) % cn;
            if let Some(u) = unitary_for(y) {
                if u.nrows() != dim || u.ncols() != dim {
                    return Err(invalid(format!(
                        "branch {y}: {}x{} matrix on a {dim}-dimensional target",
                        u.nrows(),
                        u.ncols()
                    )));
                }
                self.apply_block(u, b, &offsets, &mut buf);
            }
        }
        Ok(())
    }

    /// Applies an arbitrary linear map to each block of `registers` (first
    /// listed most significant). `f(input, output)` must fill `output`; blocks
    /// that are entirely zero are skipped. `gate` restricts the map to branches
    /// where that register holds that value.
    pub fn apply_block_map(
        &mut self,
        registers: &[&str],
        gate: Option<(&str, usize)>,
        mut f: impl FnMut(&[Complex64], &mut [Complex64]),
    ) -> Result<()> {
        let targets = self.target_positions(registers)?;
        let gate = match gate {
            Some((name, v)) => {
                let p = self.layout.position(name)?;
                if targets.contains(&p) {
                    return Err(invalid("gate register is also a target"));
                }
                Some((self.layout.stride_at(p), self.layout.size_at(p), v))
            }
            None => None,
        };
        let (offsets, bases) = self.layout.blocks(&targets);
        let mut input = vec![Complex64::default(); offsets.len()];
        let mut output = vec![Complex64::default(); offsets.len()];
        for b in bases {
            if let Some((gs, gn, gv)) = gate {
                if (b / gs) % gn != gv {
                    continue;
                }
            }
            let mut any = false;
            for (x, &o) in input.iter_mut().zip(&offsets) {
                *x = self.amps[b + o];
                any |= *x != Complex64::default();
            }
            if !any {
                continue;
            }
            f(&input, &mut output);
            for (y, &o) in output.iter().zip(&offsets) {
                self.amps[b + o] = *y;
            }
        }
        Ok(())
    }

    /// Total probability of the branches where `register` holds `value`.
    pub fn branch_weight(&self, register: &str, value: usize) -> Result<f64> {
        let m = self.marginal(&[register])?;
        m.get(value)
            .copied()
            .ok_or_else(|| invalid("branch value out of range"))
    }

    fn apply_block(&mut self, u: &CMatrix, base: usize, offsets: &[usize], buf: &mut [Complex64]) {
        let mut any = false;
        for (x, &o) in buf.iter_mut().zip(offsets) {
            *x = self.amps[base + o];
            any |= *x != Complex64::default();
        }
        if !any {
            return;
        }
        for (r, &o) in offsets.iter().enumerate() {
            let mut acc = Complex64::default();
            for (c, x) in buf.iter().enumerate() {
                acc += u[(r, c)] * x;
            }
            self.amps[base + o] = acc;
        }
    }

    /// Applies a classical reversible map to the values of `registers`; `f`
    /// receives and returns values in the order listed. Fails if `f` is not a
    /// bijection on the touched basis states.
    pub fn apply_permutation(
        &mut self,
        registers: &[&str],
        f: impl Fn(&[usize]) -> Vec<usize>,
    ) -> Result<()> {
        let targets = self.target_positions(registers)?;
        let sizes: Vec<usize> = targets.iter().map(|&p| self.layout.size_at(p)).collect();
        let dim: usize = sizes.iter().product();
        let mut table = vec![usize::MAX; dim];
        let mut hit = vec![false; dim];
        let mut vals = vec![0; sizes.len()];
        for (x, slot) in table.iter_mut().enumerate() {
            let mut rem = x;
            for (v, &s) in vals.iter_mut().zip(&sizes).rev() {
                *v = rem % s;
                rem /= s;
            }
            let out = f(&vals);
            if out.len() != sizes.len() || out.iter().zip(&sizes).any(|(v, s)| v >= s) {
                return Err(invalid("permutation output does not fit the registers"));
            }
            let y = out.iter().zip(&sizes).fold(0, |acc, (v, s)| acc * s + v);
            if hit[y] {
                return Err(invalid("map is not a bijection"));
            }
            hit[y] = true;
            *slot = y;
        }
        let (offsets, bases) = self.layout.blocks(&targets);
        let mut buf = vec![Complex64::default(); dim];
        for b in bases {
            for (x, &o) in buf.iter_mut().zip(&offsets) {
                *x = self.amps[b + o];
            }
            for (x, &y) in table.iter().enumerate() {
                self.amps[b + offsets[y]] = buf[x];
            }
        }
        Ok(())
    }

    /// Probability of each joint value of `registers` (first listed most significant).
    pub fn marginal(&self, registers: &[&str]) -> Result<Vec<f64>> {
        let targets = self.target_positions(registers)?;
        let (offsets, bases) = self.layout.blocks(&targets);
        let mut probs = vec![0.0; offsets.len()];
        for b in bases {
            for (p, &o) in probs.iter_mut().zip(&offsets) {
                *p += self.amps[b + o].norm_sqr();
            }
        }
        Ok(probs)
    }

    /// Samples `shots` outcomes of `registers`; deterministic for a given seed.
    pub fn measure(
        &self,
        registers: &[&str],
        shots: usize,
        seed: u64,
    ) -> Result<BTreeMap<usize, usize>> {
        if shots == 0 {
            return Err(invalid("shots must be at least 1"));
        }
        let probs = self.marginal(registers)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let dist = rand::distr::weighted::WeightedIndex::new(&probs)
            .map_err(|e| invalid(format!("cannot sample: {e}")))?;
        let mut counts = BTreeMap::new();
        for _ in 0..shots {
            let k = rand::distr::Distribution::sample(&dist, &mut rng);
            *counts.entry(k).or_insert(0) += 1;
        }
        Ok(counts)
    }

    /// Projects `register` onto `value`, renormalizes, removes the register
    /// and returns the outcome probability.
    pub fn postselect(&mut self, register: &str, value: usize) -> Result<f64> {
        let pos = self.layout.position(register)?;
        let (stride, size) = (self.layout.stride_at(pos), self.layout.size_at(pos));
        if value >= size {
            return Err(invalid("postselection value out of range"));
        }
        let mut kept = Vec::with_capacity(self.amps.len() / size);
        let mut prob = 0.0;
        for hi in 0..self.amps.len() / (stride * size) {
            let base = hi * stride * size + value * stride;
            for lo in 0..stride {
                let a = self.amps[base + lo];
                prob += a.norm_sqr();
                kept.push(a);
            }
        }
        if prob < POSTSELECT_MIN_PROBABILITY {
            return Err(Error::PostselectionImpossible { probability: prob });
        }
        let s = 1.0 / prob.sqrt();
        kept.iter_mut().for_each(|a| *a *= s);
        self.layout.registers.remove(pos);
        self.amps = kept;
        Ok(prob)
    }

    /// Contracts `register` with `<v|`, removes it and renormalizes. Returns
    /// the squared norm of the projection (the weight of `v`).
    pub fn project_onto(&mut self, register: &str, v: &[Complex64]) -> Result<f64> {
        let pos = self.layout.position(register)?;
        if v.len() != self.layout.size_at(pos) {
            return Err(invalid("projection vector has the wrong length"));
        }
        let m = self.split(register)?;
        let cols = m[0].len();
        let mut rest = vec![Complex64::default(); cols];
        for (row, c) in m.iter().zip(v) {
            let cc = c.conj();
            for (r, a) in rest.iter_mut().zip(row) {
                *r += cc * a;
            }
        }
        let w: f64 = rest.iter().map(|a| a.norm_sqr()).sum();
        if w < POSTSELECT_MIN_PROBABILITY {
            return Err(Error::PostselectionImpossible { probability: w });
        }
        let s = 1.0 / w.sqrt();
        rest.iter_mut().for_each(|a| *a *= s);
        self.layout.registers.remove(pos);
        self.amps = rest;
        Ok(w)
    }

    /// Purity `tr(rho^2)` of the reduced state of `register`.
    pub fn register_purity(&self, register: &str) -> Result<f64> {
        let m = self.split(register)?;
        Ok(purity(&m))
    }

    /// Removes a register whose reduced state is pure (product with the rest)
    /// and returns its purity; an entangled register is an error.
    pub fn discard(&mut self, register: &str) -> Result<f64> {
        let pos = self.layout.position(register)?;
        let m = self.split(register)?;
        let p = purity(&m);
        if p < 1.0 - DISCARD_PURITY_TOL {
            return Err(Error::RegisterEntangled {
                register: register.to_string(),
                purity: p,
            });
        }
        // Product form: every row of `m` is a multiple of the remaining state.
        let row = (0..m.len())
            .max_by(|&a, &b| row_norm(&m[a]).total_cmp(&row_norm(&m[b])))
            .expect("register has at least one value");
        let n = row_norm(&m[row]);
        let rest: Vec<Complex64> = m[row].iter().map(|a| a / n).collect();
        self.layout.registers.remove(pos);
        self.amps = rest;
        Ok(p)
    }

    /// Amplitudes regrouped as rows indexed by the register's value.
    fn split(&self, register: &str) -> Result<Vec<Vec<Complex64>>> {
        let pos = self.layout.position(register)?;
        let (offsets, bases) = self.layout.blocks(&[pos]);
        Ok(offsets
            .iter()
            .map(|&o| bases.iter().map(|&b| self.amps[b + o]).collect())
            .collect())
    }

    fn target_positions(&self, registers: &[&str]) -> Result<Vec<usize>> {
        let targets = registers
            .iter()
            .map(|r| self.layout.position(r))
            .collect::<Result<Vec<_>>>()?;
        for (i, t) in targets.iter().enumerate() {
            if targets[..i].contains(t) {
                return Err(invalid("register listed twice"));
            }
        }
        Ok(targets)
    }

    pub fn to_json(&self) -> Result<String> {
        let dump = StateDump {
            layout: self.layout.clone(),
            amplitudes: self.amps.iter().flat_map(|a| [a.re, a.im]).collect(),
        };
        Ok(serde_json::to_string(&dump)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: StateDump = serde_json::from_str(text)?;
        dump.layout.validate(usize::MAX)?;
        if dump.amplitudes.len() != 2 * dump.layout.dim() {
            return Err(Error::Format("amplitude count does not match layout".into()));
        }
        let amps = dump
            .amplitudes
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        Ok(Self {
            layout: dump.layout,
            amps,
        })
    }
}

fn row_norm(r: &[Complex64]) -> f64 {
    r.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// `tr(rho^2)` for `rho = M M^H`, using whichever Gram matrix is smaller.
fn purity(m: &[Vec<Complex64>]) -> f64 {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let total: f64 = m.iter().map(|r| row_norm(r).powi(2)).sum();
    let mut acc = 0.0;
    if rows <= cols {
        for i in 0..rows {
            for j in 0..rows {
                let g: Complex64 = m[i].iter().zip(&m[j]).map(|(a, b)| a * b.conj()).sum();
                acc += g.norm_sqr();
            }
        }
    } else {
        for i in 0..cols {
            for j in 0..cols {
                let g: Complex64 = m.iter().map(|r| r[i].conj() * r[j]).sum();
                acc += g.norm_sqr();
            }
        }
    }
    acc / (total * total)
}

fn log2_exact(n: usize) -> Result<usize> {
    if n.is_power_of_two() {
        Ok(n.trailing_zeros() as usize)
    } else {
        Err(invalid(format!("dimension {n} is not a power of two")))
    }
}

/// Amplitude encoding `|A> = sum A(i,j,k,..)/||A||_F |i>|j>|k>..` with one
/// register per mode, named by `names`.
pub fn prepare_tensor_state<T>(a: &Tensor<T>, names: &[&str]) -> Result<StateVector>
where
    T: crate::tensor::Scalar + Into<Complex64>,
{
    if names.len() != a.order() {
        return Err(invalid("one register name per tensor mode required"));
    }
    let regs = names
        .iter()
        .zip(a.dims())
        .map(|(&n, &d)| Ok((n, log2_exact(d)?)))
        .collect::<Result<Vec<_>>>()?;
    let layout = RegisterLayout::new(&regs)?;
    let norm = a.frobenius_norm();
    if norm == 0.0 {
        return Err(invalid("cannot encode the zero tensor"));
    }
    let mut amps = vec![Complex64::default(); layout.dim()];
    let dims = a.dims();
    let mut idx = vec![0usize; dims.len()];
    for &v in a.values() {
        amps[layout.encode(&idx)] = v.into() / norm;
        for (k, d) in idx.iter_mut().zip(dims) {
            *k += 1;
            if *k < *d {
                break;
            }
            *k = 0;
        }
    }
    StateVector::from_amplitudes(layout, amps)
}

/// Number of qubits needed for a power-of-two dimension.
pub fn qubits_for(n: usize) -> Result<usize> {
    log2_exact(n)
}
