//! Slice-controlled estimation and the quantum t-svd state preparation.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::circuit::{ancilla_zero_probability, readout_modal_estimates, WalkCircuit};
use super::{decode_estimate, QsveConfig, QsveMode, SliceQsve};
use crate::error::{invalid, Error, Result};
use crate::linalg::CMatrix;
use crate::qsim::{prepare_tensor_state, qubits_for, StateVector, POSTSELECT_MIN_PROBABILITY};
use crate::tensor::{qft_trailing_modes, DenseTensor};

/// Applies the estimation map of `slices[m]` on the branch `control == m`.
///
/// Zero slices are skipped when their branch carries no weight and rejected
/// otherwise. In circuit mode the ancilla registers `w` (before `input`) and
/// `ph` (at the end) are added if missing and left in the state.
pub fn controlled_qsve(
    state: &mut StateVector,
    slices: &[CMatrix],
    control: &str,
    input: &str,
    estimate: &str,
    cfg: &QsveConfig,
) -> Result<Vec<Option<SliceQsve>>> {
    cfg.validate()?;
    let n = state.layout().size(control)?;
    if slices.len() != n {
        return Err(invalid(format!(
            "{} slices for a control register of size {n}",
            slices.len()
        )));
    }
    let weights = state.marginal(&[control])?;
    let oracle_cfg = QsveConfig {
        mode: QsveMode::Oracle,
        ..*cfg
    };
    let mut out = Vec::with_capacity(n);
    for (m, a) in slices.iter().enumerate() {
        if a.norm() == 0.0 {
            if weights[m] > POSTSELECT_MIN_PROBABILITY {
                return Err(Error::ZeroSlice {
                    slice: m,
                    weight: weights[m],
                });
            }
            out.push(None);
            continue;
        }
        let q = SliceQsve::new(a, &oracle_cfg)?;
        match cfg.mode {
            QsveMode::Oracle => q.apply(state, input, estimate, Some((control, m)))?,
            QsveMode::Circuit => {
                if estimate != "b" || input != "d" {
                    return Err(invalid("circuit mode expects registers `d` and `b`"));
                }
                if !state.layout().contains("w") {
                    let at = state.layout().position(input)?;
                    state.add_register("w", qubits_for(a.nrows())?, at)?;
                }
                if !state.layout().contains("ph") {
                    let end = state.layout().registers().len();
                    state.add_register("ph", cfg.bits, end)?;
                }
                if weights[m] > 0.0 {
                    WalkCircuit::new(a, cfg.bits)?.apply(state, Some((control, m)))?;
                }
            }
        }
        out.push(Some(q));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct QuantumTsvdRun {
    /// Output state over `c`, `d`, `e`, `b`.
    pub phi: StateVector,
    /// Per-slice estimation data in register order (`None` for zero slices).
    pub slices: Vec<Option<SliceQsve>>,
    /// Unitary-convention Fourier-domain slices.
    pub hat_slices: Vec<CMatrix>,
    pub bits: usize,
    /// Circuit mode: probability that the ancillas returned to `|0>` (they are
    /// then postselected). Always 1 in oracle mode.
    pub ancilla_success: f64,
}

/// Encodes `A`, transforms the context register, writes per-slice singular
/// value estimates into `b` under control of `e`, and transforms back.
pub fn quantum_tsvd(a: &DenseTensor, cfg: &QsveConfig) -> Result<QuantumTsvdRun> {
    a.require_order(3, "quantum t-svd")?;
    let mut s = prepare_tensor_state(a, &["c", "d", "e"])?;
    s.apply_qft("e", false)?;
    let hat = qft_trailing_modes(&a.to_complex(), 3, false)?;
    let hat_slices = hat.frontal_slices();
    s.add_register("b", cfg.bits, 3)?;
    let slices = controlled_qsve(&mut s, &hat_slices, "e", "d", "b", cfg)?;
    let mut ancilla_success = 1.0;
    if cfg.mode == QsveMode::Circuit {
        ancilla_success = ancilla_zero_probability(&s, &["w", "ph"])?;
        s.postselect("w", 0)?;
        s.postselect("ph", 0)?;
    }
    s.apply_qft("e", true)?;
    Ok(QuantumTsvdRun {
        phi: s,
        slices,
        hat_slices,
        bits: cfg.bits,
        ancilla_success,
    })
}

#[derive(Debug, Clone)]
pub struct QuantumTsvdReadout {
    /// `sigma_bar[m][l]`: decoded modal estimate (unitary convention), `None`
    /// where the component has no weight.
    pub sigma_bar: Vec<Vec<Option<f64>>>,
    /// `||A_hat^(m)||_F` (unitary convention).
    pub slice_norms: Vec<f64>,
}

impl QuantumTsvdReadout {
    /// `(1/sqrt(N3)) sum_m w^{-km} sigma_bar_l^(m)` with `w = e^{2 pi i / N3}`,
    /// indexed `[k][l]`; missing estimates count as zero.
    pub fn ifft_combination(&self) -> Vec<Vec<Complex64>> {
        let n3 = self.sigma_bar.len();
        let r = self.sigma_bar.first().map_or(0, Vec::len);
        (0..n3)
            .map(|k| {
                (0..r)
                    .map(|l| {
                        (0..n3)
                            .map(|m| {
                                let s = self.sigma_bar[m][l].unwrap_or(0.0);
                                Complex64::from_polar(s, -2.0 * PI * (k * m) as f64 / n3 as f64)
                            })
                            .sum::<Complex64>()
                            / (n3 as f64).sqrt()
                    })
                    .collect()
            })
            .collect()
    }
}

/// Reads the estimate register of `phi` slice by slice: undo the context
/// transform, condition on `e = m` and on the row register holding each left
/// singular vector, and take the modal value of `b`.
pub fn quantum_tsvd_readout(run: &QuantumTsvdRun) -> Result<QuantumTsvdReadout> {
    let mut psi = run.phi.clone();
    psi.apply_qft("e", false)?;
    let n3 = run.hat_slices.len();
    let mut sigma_bar = Vec::with_capacity(n3);
    let mut slice_norms = Vec::with_capacity(n3);
    for m in 0..n3 {
        let a = &run.hat_slices[m];
        let r = a.nrows().min(a.ncols());
        slice_norms.push(a.norm());
        let Some(q) = &run.slices[m] else {
            sigma_bar.push(vec![None; r]);
            continue;
        };
        let mut branch = psi.clone();
        match branch.postselect("e", m) {
            Ok(_) => {}
            Err(Error::PostselectionImpossible { .. }) => {
                sigma_bar.push(vec![None; r]);
                continue;
            }
            Err(e) => return Err(e),
        }
        let vectors: Vec<Vec<Complex64>> = (0..r).map(|l| q.left_vector(l)).collect();
        let modal = readout_modal_estimates(&branch, "c", &vectors, "b")?;
        sigma_bar.push(
            modal
                .into_iter()
                .map(|k| k.map(|k| decode_estimate(k, q.norm(), run.bits)))
                .collect(),
        );
    }
    Ok(QuantumTsvdReadout {
        sigma_bar,
        slice_norms,
    })
}
