//! Full circuit simulation of singular value estimation:
//! `U_Q`, phase estimation of the walk operator, `b ^= fold(ph)`, uncompute.

use num_complex::Complex64;

use super::walk::{build_isometries, build_walk_operator, IsometrySet, WalkOperator};
use super::{fold_phase, QsveConfig, QsveMode};
use crate::error::{invalid, Error, Result};
use crate::linalg::CMatrix;
use crate::qsim::{qubits_for, unitary_powers, StateVector};

/// Largest walk space (`N1 * N2`) simulated in circuit mode.
pub const CIRCUIT_MAX_WALK_DIM: usize = 256;

#[derive(Debug, Clone)]
pub struct CircuitRun {
    /// Input registers with `w` inserted before `d`, then `ph` and `b` appended.
    pub state: StateVector,
    /// Probability that the ancillas `w`, `ph` returned to `|0>`.
    pub success_probability: f64,
    pub isometries: IsometrySet,
    pub walk: WalkOperator,
}

impl CircuitRun {
    /// The output with `w` and `ph` postselected on `|0>`.
    pub fn cleaned(&self) -> Result<StateVector> {
        let mut s = self.state.clone();
        s.postselect("w", 0)?;
        s.postselect("ph", 0)?;
        Ok(s)
    }
}

/// Prepared walk data shared by every application on one slice.
pub(crate) struct WalkCircuit {
    pub iso: IsometrySet,
    pub walk: WalkOperator,
    row_unitary: CMatrix,
    powers: Vec<CMatrix>,
    inverse_powers: Vec<CMatrix>,
    bits: usize,
}

impl WalkCircuit {
    pub fn new(a: &CMatrix, bits: usize) -> Result<Self> {
        let (n1, n2) = a.shape();
        if n1 * n2 > CIRCUIT_MAX_WALK_DIM {
            return Err(invalid(format!(
                "circuit mode supports N1*N2 <= {CIRCUIT_MAX_WALK_DIM}, got {}; use oracle mode",
                n1 * n2
            )));
        }
        qubits_for(n1)?;
        qubits_for(n2)?;
        let iso = build_isometries(a)?;
        let walk = build_walk_operator(&iso)?;
        let powers = unitary_powers(&walk.w, 1 << bits);
        let inverse_powers = powers.iter().map(|p| p.adjoint()).collect();
        Ok(Self {
            row_unitary: iso.row_norm_unitary(),
            iso,
            walk,
            powers,
            inverse_powers,
            bits,
        })
    }

    /// Runs the estimation circuit on registers `w`, `d`, `ph`, `b`, where
    /// `w` and `ph` start in `|0>`. `gate` restricts every step to one branch
    /// of a control register.
    pub fn apply(&self, s: &mut StateVector, gate: Option<(&str, usize)>) -> Result<()> {
        let bits = self.bits;
        s.apply_unitary(&self.row_unitary, &["w"], gate)?;
        s.apply_qft("ph", false)?;
        s.apply_multiplexed("ph", &["w", "d"], gate, |y| Some(&self.powers[y]))?;
        s.apply_qft("ph", true)?;
        match gate {
            None => s.apply_permutation(&["ph", "b"], |v| vec![v[0], v[1] ^ fold_phase(v[0], bits)])?,
            Some((g, gv)) => s.apply_permutation(&[g, "ph", "b"], |v| {
                let add = if v[0] == gv { fold_phase(v[1], bits) } else { 0 };
                vec![v[0], v[1], v[2] ^ add]
            })?,
        }
        s.apply_qft("ph", false)?;
        s.apply_multiplexed("ph", &["w", "d"], gate, |y| Some(&self.inverse_powers[y]))?;
        s.apply_qft("ph", true)?;
        s.apply_unitary(&self.row_unitary.adjoint(), &["w"], gate)?;
        Ok(())
    }
}

/// Circuit-mode estimation of one slice. `input` must contain a register `d`
/// over the slice columns; other registers are spectators.
pub fn qsve_circuit(a: &CMatrix, input: &StateVector, cfg: &QsveConfig) -> Result<CircuitRun> {
    cfg.validate()?;
    if cfg.mode != QsveMode::Circuit {
        return Err(invalid("qsve_circuit needs a circuit-mode config"));
    }
    if a.norm() == 0.0 {
        return Err(invalid("cannot estimate singular values of a zero slice"));
    }
    let circuit = WalkCircuit::new(a, cfg.bits)?;
    let mut s = input.clone();
    let d_pos = s.layout().position("d")?;
    if s.layout().size("d")? != a.ncols() {
        return Err(invalid("register `d` does not match the slice columns"));
    }
    s.add_register("w", qubits_for(a.nrows())?, d_pos)?;
    let end = s.layout().registers().len();
    s.add_register("ph", cfg.bits, end)?;
    s.add_register("b", cfg.bits, end + 1)?;
    circuit.apply(&mut s, None)?;
    let success_probability = ancilla_zero_probability(&s, &["w", "ph"])?;
    Ok(CircuitRun {
        state: s,
        success_probability,
        isometries: circuit.iso,
        walk: circuit.walk,
    })
}

pub(crate) fn ancilla_zero_probability(s: &StateVector, regs: &[&str]) -> Result<f64> {
    Ok(s.marginal(regs)?[0])
}

/// Modal estimate-register value conditioned on `spectator` being each of
/// `vectors`; `None` where that vector carries no weight.
pub fn readout_modal_estimates(
    state: &StateVector,
    spectator: &str,
    vectors: &[Vec<Complex64>],
    estimate: &str,
) -> Result<Vec<Option<usize>>> {
    vectors
        .iter()
        .map(|v| {
            let mut s = state.clone();
            match s.project_onto(spectator, v) {
                Ok(_) => {
                    let m = s.marginal(&[estimate])?;
                    Ok(m.iter()
                        .enumerate()
                        .max_by(|a, b| a.1.total_cmp(b.1))
                        .map(|(k, _)| k))
                }
                Err(Error::PostselectionImpossible { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::RegisterLayout;
    use crate::qsve::{grid_index, SliceQsve};
    use std::f64::consts::PI;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn on_grid_slice_is_exact() {
        // Singular value ratios cos(pi 3/16) and sin(pi 3/16) both sit on the t=4 grid.
        let (x, y) = ((PI * 3.0 / 16.0).cos(), (PI * 3.0 / 16.0).sin());
        let a = CMatrix::from_row_slice(2, 2, &[c(x), c(0.0), c(0.0), c(y)]);
        let cfg = QsveConfig::circuit(4).unwrap();
        let oracle = SliceQsve::new(&a, &QsveConfig::oracle(4).unwrap()).unwrap();
        assert_eq!(oracle.estimate_indices(), &[3, 5]);
        for l in 0..2 {
            let layout = RegisterLayout::new(&[("d", 1)]).unwrap();
            let input = StateVector::from_amplitudes(layout, oracle.input_vector(l)).unwrap();
            let run = qsve_circuit(&a, &input, &cfg).unwrap();
            assert!((run.success_probability - 1.0).abs() < 1e-10);
            let out = run.cleaned().unwrap();
            let m = out.marginal(&["b"]).unwrap();
            assert!((m[oracle.estimate_indices()[l]] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_one_gives_theta_zero() {
        let a = CMatrix::from_fn(2, 2, |i, j| c((1 + i) as f64 * (2 - j) as f64));
        let cfg = QsveConfig::circuit(3).unwrap();
        let oracle = SliceQsve::new(&a, &QsveConfig::oracle(3).unwrap()).unwrap();
        let layout = RegisterLayout::new(&[("d", 1)]).unwrap();
        let input = StateVector::from_amplitudes(layout, oracle.input_vector(0)).unwrap();
        let out = qsve_circuit(&a, &input, &cfg).unwrap().cleaned().unwrap();
        assert!((out.marginal(&["b"]).unwrap()[0] - 1.0).abs() < 1e-10);
        assert_eq!(grid_index(1.0, 3), 0);
    }

    #[test]
    fn size_cap() {
        let a = CMatrix::from_element(32, 16, c(1.0));
        let layout = RegisterLayout::new(&[("d", 4)]).unwrap();
        let input = StateVector::basis(layout, &[0]).unwrap();
        assert!(qsve_circuit(&a, &input, &QsveConfig::circuit(2).unwrap()).is_err());
    }
}
