//! The recommendation pipeline: the classical reference and its simulation.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use super::unitary_slices;
use crate::error::{invalid, Error, Result};
use crate::linalg::CMatrix;
use crate::qsim::{qubits_for, RegisterLayout, StateVector, POSTSELECT_MIN_PROBABILITY};
use crate::qsve::{controlled_qsve, decode_estimate, QsveConfig, QsveMode, SliceQsve};
use crate::tensor::{qft_trailing_modes, DenseTensor};

/// `T_>=sigma(i,:,:)` computed directly.
#[derive(Debug, Clone)]
pub struct ReferenceOutput {
    pub user: usize,
    /// `N2 x N3` matrix `T_>=sigma(i, j, t)`; real up to rounding for
    /// conjugate-symmetric thresholds.
    pub matrix: CMatrix,
    /// `P(j, t)` at index `j * N3 + t`.
    pub joint: Vec<f64>,
    /// Kept singular value indices per Fourier slice.
    pub kept: Vec<Vec<usize>>,
    /// `||T_>=sigma(i,:,:)||^2 / ||T(i,:,:)||^2`.
    pub retained_fraction: f64,
}

impl ReferenceOutput {
    /// `P(j | t)`, or `None` when context `t` carries no mass.
    pub fn conditional(&self, t: usize) -> Option<Vec<f64>> {
        let (n2, n3) = self.matrix.shape();
        let col: Vec<f64> = (0..n2).map(|j| self.joint[j * n3 + t]).collect();
        let mass: f64 = col.iter().sum();
        (mass > POSTSELECT_MIN_PROBABILITY).then(|| col.iter().map(|p| p / mass).collect())
    }
}

/// Projects row `user` of every unitary Fourier slice onto the right singular
/// vectors with `sigma >= thresholds[m]` and transforms back along the
/// context mode.
pub fn classical_reference_pipeline(
    t: &DenseTensor,
    thresholds: &[f64],
    user: usize,
) -> Result<ReferenceOutput> {
    let set = unitary_slices(t)?;
    let (n1, n2, n3) = (t.dims()[0], t.dims()[1], t.dims()[2]);
    if user >= n1 {
        return Err(invalid(format!("user {user} out of range for {n1} users")));
    }
    if thresholds.len() != n3 {
        return Err(invalid(format!("{} thresholds for {n3} slices", thresholds.len())));
    }
    let hat = qft_trailing_modes(&t.to_complex(), 3, false)?;
    let mut x = CMatrix::zeros(n2, n3);
    let mut kept = Vec::with_capacity(n3);
    for m in 0..n3 {
        let f = set.slice(m);
        let keep: Vec<usize> = (0..f.sigma.len())
            .filter(|&l| f.sigma[l] >= thresholds[m])
            .collect();
        let row: Vec<Complex64> = (0..n2).map(|j| hat.get(&[user, j, m])).collect();
        for &l in &keep {
            let v = f.v.column(l);
            let c: Complex64 = row.iter().zip(v.iter()).map(|(r, vj)| r * vj).sum();
            for j in 0..n2 {
                x[(j, m)] += c * v[j].conj();
            }
        }
        kept.push(keep);
    }
    let scale = 1.0 / (n3 as f64).sqrt();
    let matrix = CMatrix::from_fn(n2, n3, |j, tt| {
        (0..n3)
            .map(|m| {
                let ang = -2.0 * std::f64::consts::PI * (tt * m) as f64 / n3 as f64;
                x[(j, m)] * Complex64::from_polar(1.0, ang)
            })
            .sum::<Complex64>()
            * scale
    });
    let row_sq: f64 = (0..n2)
        .flat_map(|j| (0..n3).map(move |tt| (j, tt)))
        .map(|(j, tt)| t.get(&[user, j, tt]).powi(2))
        .sum();
    let kept_sq = matrix.norm_squared();
    if kept_sq <= POSTSELECT_MIN_PROBABILITY * row_sq.max(f64::MIN_POSITIVE) {
        return Err(Error::EmptyRecommendation { user });
    }
    let joint = (0..n2)
        .flat_map(|j| (0..n3).map(move |tt| (j, tt)))
        .map(|(j, tt)| matrix[(j, tt)].norm_sqr() / kept_sq)
        .collect();
    Ok(ReferenceOutput {
        user,
        matrix,
        joint,
        kept,
        retained_fraction: kept_sq / row_sq,
    })
}

/// Options of [`algorithm4`].
#[derive(Debug, Clone)]
pub struct Algorithm4Config {
    pub qsve: QsveConfig,
    /// Context to postselect on, if any.
    pub context: Option<usize>,
    /// Product measurements taken after postselecting `context`.
    pub shots: usize,
    pub seed: u64,
    /// Keep the intermediate states in the trace.
    pub keep_states: bool,
}

impl Algorithm4Config {
    pub fn oracle(bits: usize) -> Result<Self> {
        Ok(Self {
            qsve: QsveConfig::oracle(bits)?,
            context: None,
            shots: 0,
            seed: 0,
            keep_states: false,
        })
    }
}

/// Bookkeeping of one run of the simulated pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineTrace {
    pub thresholds: Vec<f64>,
    /// Exact singular values per slice, padded with zeros to `N2`.
    pub exact: Vec<Vec<f64>>,
    /// Decoded estimates per slice, one per input-basis vector.
    pub estimates: Vec<Vec<f64>>,
    /// Indices with `sigma_bar >= threshold`.
    pub kept_estimated: Vec<Vec<usize>>,
    /// Indices with `sigma >= threshold`.
    pub kept_exact: Vec<Vec<usize>>,
    /// Basis vectors whose kept/discarded decision differs between the two.
    pub flips: usize,
    /// Flips on vectors that carry weight in the user's row.
    pub weighted_flips: usize,
    /// `beta[m][l]`: coefficient of the normalized Fourier row on basis vector `l`.
    #[serde(skip)]
    pub beta: Vec<Vec<Complex64>>,
    /// `||T_hat(i,:,m)||`.
    pub row_hat_norms: Vec<f64>,
    /// `alpha^2 = sum_m ||T_hat(i,:,m)||^2 sum_{l kept} |beta_l|^2 / ||T(i,:,:)||^2`.
    pub alpha: f64,
    /// Purities of the discarded registers.
    pub discard_purity: Vec<(String, f64)>,
    /// Intermediate states: after the context transform, the first
    /// estimation, the flag, the uncompute, and the final state.
    #[serde(skip)]
    pub states: Vec<(String, StateVector)>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub user: usize,
    /// `P(j, t)` at index `j * N3 + t`.
    pub joint: Vec<f64>,
    /// Probability of the flag returning `|0>`.
    pub postselection_probability: f64,
    /// Probability of the requested context, and the product distribution given it.
    pub context_probability: Option<f64>,
    pub conditional: Option<Vec<f64>>,
    /// Sampled products (`shots > 0` and a context requested).
    pub counts: BTreeMap<usize, usize>,
    /// Final state over `d`, `e`.
    pub state: StateVector,
    pub trace: PipelineTrace,
}

/// Simulated recommendation for `user` of the (subsampled) tensor `t` with
/// per-slice `thresholds`.
///
/// Registers `c` (user), `d` (product), `b` (estimate), `a` (flag) and `e`
/// (context). The row state of the user is prepared on `d, e`, `e` is
/// Fourier transformed, slice-controlled estimation writes `sigma_bar` into
/// `b`, `a` is flipped where `sigma_bar < sigma^(m)`, the estimation is
/// undone, `b` and `c` are discarded, `a = 0` is postselected and `e` is
/// transformed back.
pub fn algorithm4(
    t: &DenseTensor,
    thresholds: &[f64],
    user: usize,
    cfg: &Algorithm4Config,
) -> Result<PipelineOutcome> {
    t.require_order(3, "recommendation")?;
    cfg.qsve.validate()?;
    let (n1, n2, n3) = (t.dims()[0], t.dims()[1], t.dims()[2]);
    if user >= n1 {
        return Err(invalid(format!("user {user} out of range for {n1} users")));
    }
    if thresholds.len() != n3 {
        return Err(invalid(format!("{} thresholds for {n3} slices", thresholds.len())));
    }
    if thresholds.iter().any(|v| !(*v >= 0.0)) {
        return Err(invalid("thresholds must be non-negative"));
    }
    if let Some(c) = cfg.context {
        if c >= n3 {
            return Err(invalid(format!("context {c} out of range for {n3} contexts")));
        }
    }
    let bits = cfg.qsve.bits;
    let (qc, qd, qe) = (qubits_for(n1)?, qubits_for(n2)?, qubits_for(n3)?);
    let row_sq: f64 = (0..n2)
        .flat_map(|j| (0..n3).map(move |tt| (j, tt)))
        .map(|(j, tt)| t.get(&[user, j, tt]).powi(2))
        .sum();
    if row_sq == 0.0 {
        return Err(invalid(format!("user {user} has an all-zero row")));
    }

    let layout = RegisterLayout::new(&[("c", qc), ("d", qd), ("e", qe)])?;
    let mut amps = vec![Complex64::default(); layout.dim()];
    let norm = row_sq.sqrt();
    for j in 0..n2 {
        for tt in 0..n3 {
            amps[layout.encode(&[user, j, tt])] = Complex64::new(t.get(&[user, j, tt]) / norm, 0.0);
        }
    }
    let mut s = StateVector::from_amplitudes(layout, amps)?;
    let mut states = Vec::new();
    let mut keep = |name: &str, s: &StateVector| {
        if cfg.keep_states {
            states.push((name.to_string(), s.clone()));
        }
    };

    s.apply_qft("e", false)?;
    keep("xi1", &s);
    let hat = qft_trailing_modes(&t.to_complex(), 3, false)?;
    let hat_slices = hat.frontal_slices();
    s.add_register("b", bits, 2)?;
    s.add_register("a", 1, 3)?;
    let slices = controlled_qsve(&mut s, &hat_slices, "e", "d", "b", &cfg.qsve)?;
    keep("xi2", &s);

    let flag: Vec<Vec<bool>> = slices
        .iter()
        .enumerate()
        .map(|(m, q)| {
            (0..1usize << bits)
                .map(|b| match q {
                    Some(q) => decode_estimate(b, q.norm(), bits) < thresholds[m],
                    None => false,
                })
                .collect()
        })
        .collect();
    s.apply_permutation(&["e", "b", "a"], |v| {
        vec![v[0], v[1], v[2] ^ usize::from(flag[v[0]][v[1]])]
    })?;
    keep("xi3", &s);

    // The estimation map is its own inverse in oracle mode; in circuit mode
    // the walk circuit is rerun with the ancillas still present.
    controlled_qsve(&mut s, &hat_slices, "e", "d", "b", &cfg.qsve)?;
    if cfg.qsve.mode == QsveMode::Circuit {
        s.postselect("w", 0)?;
        s.postselect("ph", 0)?;
    }
    keep("xi4", &s);
    let discard_purity = vec![
        ("b".to_string(), s.discard("b")?),
        ("c".to_string(), s.discard("c")?),
    ];
    let postselection_probability = match s.postselect("a", 0) {
        Ok(p) => p,
        Err(Error::PostselectionImpossible { .. }) => {
            return Err(Error::EmptyRecommendation { user })
        }
        Err(e) => return Err(e),
    };
    s.apply_qft("e", true)?;
    keep("xi5", &s);

    let joint = s.marginal(&["d", "e"])?;
    let (mut context_probability, mut conditional, mut counts) = (None, None, BTreeMap::new());
    if let Some(c) = cfg.context {
        let mut sc = s.clone();
        match sc.postselect("e", c) {
            Ok(p) => {
                context_probability = Some(p);
                conditional = Some(sc.marginal(&["d"])?);
                if cfg.shots > 0 {
                    counts = sc.measure(&["d"], cfg.shots, cfg.seed)?;
                }
            }
            Err(Error::PostselectionImpossible { probability }) => {
                context_probability = Some(probability);
            }
            Err(e) => return Err(e),
        }
    }

    let trace = build_trace(
        &hat_slices,
        &slices,
        thresholds,
        user,
        row_sq,
        discard_purity,
        std::mem::take(&mut states),
    );
    Ok(PipelineOutcome {
        user,
        joint,
        postselection_probability,
        context_probability,
        conditional,
        counts,
        state: s,
        trace,
    })
}

fn build_trace(
    hat_slices: &[CMatrix],
    slices: &[Option<SliceQsve>],
    thresholds: &[f64],
    user: usize,
    row_sq: f64,
    discard_purity: Vec<(String, f64)>,
    states: Vec<(String, StateVector)>,
) -> PipelineTrace {
    let n2 = hat_slices[0].ncols();
    let mut tr = PipelineTrace {
        thresholds: thresholds.to_vec(),
        exact: Vec::new(),
        estimates: Vec::new(),
        kept_estimated: Vec::new(),
        kept_exact: Vec::new(),
        flips: 0,
        weighted_flips: 0,
        beta: Vec::new(),
        row_hat_norms: Vec::new(),
        alpha: 0.0,
        discard_purity,
        states,
    };
    let mut alpha_sq = 0.0;
    for (m, (a, q)) in hat_slices.iter().zip(slices).enumerate() {
        let row: Vec<Complex64> = (0..n2).map(|j| a[(user, j)]).collect();
        let rn = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        tr.row_hat_norms.push(rn);
        let Some(q) = q else {
            tr.exact.push(vec![0.0; n2]);
            tr.estimates.push(vec![0.0; n2]);
            tr.kept_estimated.push(Vec::new());
            tr.kept_exact.push(Vec::new());
            tr.beta.push(vec![Complex64::default(); n2]);
            continue;
        };
        let mut exact = q.singular_values().to_vec();
        exact.resize(n2, 0.0);
        let est: Vec<f64> = q
            .estimate_indices()
            .iter()
            .map(|&k| decode_estimate(k, q.norm(), q.bits()))
            .collect();
        let beta: Vec<Complex64> = (0..n2)
            .map(|l| {
                if rn == 0.0 {
                    return Complex64::default();
                }
                let y = q.input_vector(l);
                y.iter().zip(&row).map(|(yj, r)| yj.conj() * r).sum::<Complex64>() / rn
            })
            .collect();
        let ke: Vec<usize> = (0..n2).filter(|&l| est[l] >= thresholds[m]).collect();
        let kx: Vec<usize> = (0..n2).filter(|&l| exact[l] >= thresholds[m]).collect();
        for l in 0..n2 {
            if ke.contains(&l) != kx.contains(&l) {
                tr.flips += 1;
                if beta[l].norm_sqr() > 1e-20 {
                    tr.weighted_flips += 1;
                }
            }
        }
        alpha_sq += rn * rn * ke.iter().map(|&l| beta[l].norm_sqr()).sum::<f64>();
        tr.exact.push(exact);
        tr.estimates.push(est);
        tr.kept_estimated.push(ke);
        tr.kept_exact.push(kx);
        tr.beta.push(beta);
    }
    tr.alpha = (alpha_sq / row_sq).sqrt();
    tr
}

/// The pipeline with one global threshold `sigma` on every Fourier slice.
pub fn completion_variant(
    t: &DenseTensor,
    sigma: f64,
    user: usize,
    cfg: &Algorithm4Config,
) -> Result<PipelineOutcome> {
    let n3 = t.dims().get(2).copied().unwrap_or(0);
    algorithm4(t, &vec![sigma; n3], user, cfg)
}

/// Total variation distance `0.5 sum |p - q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd_complex;
    use crate::recsys::TruncationPolicy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_binary(dims: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(dims, |_| f64::from(rng.random_bool(0.5))).unwrap()
    }

    #[test]
    fn row_projection_matches_row_of_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = CMatrix::from_fn(4, 4, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let f = svd_complex(&a).unwrap();
        let thr = f.sigma[1] * 0.999;
        let trunc = f.reconstruct_where(|_, s| s >= thr);
        for i in 0..4 {
            let mut out = vec![Complex64::default(); 4];
            for l in 0..2 {
                let c: Complex64 = (0..4).map(|j| a[(i, j)] * f.v[(j, l)]).sum();
                for j in 0..4 {
                    out[j] += c * f.v[(j, l)].conj();
                }
            }
            for j in 0..4 {
                assert!((out[j] - trunc[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_thresholds_reproduce_the_row() {
        let t = random_binary(&[4, 4, 4], 1);
        let r = classical_reference_pipeline(&t, &[0.0; 4], 2).unwrap();
        for j in 0..4 {
            for tt in 0..4 {
                assert!((r.matrix[(j, tt)] - Complex64::new(t.get(&[2, j, tt]), 0.0)).norm() < 1e-12);
            }
        }
        assert!((r.retained_fraction - 1.0).abs() < 1e-12);
    }

    #[test]
    fn huge_thresholds_are_empty() {
        let t = random_binary(&[4, 4, 4], 2);
        let err = classical_reference_pipeline(&t, &[1e6; 4], 0).unwrap_err();
        assert!(matches!(err, Error::EmptyRecommendation { user: 0 }));
        let cfg = Algorithm4Config::oracle(6).unwrap();
        let err = algorithm4(&t, &[1e6; 4], 0, &cfg).unwrap_err();
        assert!(matches!(err, Error::EmptyRecommendation { user: 0 }));
    }

    #[test]
    fn simulation_matches_reference_without_flips() {
        let t = random_binary(&[4, 4, 4], 3);
        let thr = TruncationPolicy::PerSliceBestRank { k: 2 }.thresholds(&t).unwrap();
        let mut cfg = Algorithm4Config::oracle(10).unwrap();
        cfg.context = Some(1);
        cfg.shots = 100;
        cfg.keep_states = true;
        for user in 0..4 {
            let q = algorithm4(&t, &thr, user, &cfg).unwrap();
            let r = classical_reference_pipeline(&t, &thr, user).unwrap();
            assert_eq!(q.trace.states.len(), 5);
            assert!(q.trace.discard_purity.iter().all(|(_, p)| *p > 1.0 - 1e-10));
            if q.trace.weighted_flips == 0 {
                assert!(total_variation(&q.joint, &r.joint) < 1e-10);
                assert!((q.postselection_probability - r.retained_fraction).abs() < 1e-10);
            }
            assert!((q.trace.alpha.powi(2) - q.postselection_probability).abs() < 1e-10);
            if let Some(c) = &q.conditional {
                assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                assert_eq!(q.counts.values().sum::<usize>(), 100);
            }
        }
    }

    #[test]
    fn completion_variant_uses_one_threshold() {
        let t = random_binary(&[4, 2, 2], 9);
        let cfg = Algorithm4Config::oracle(8).unwrap();
        let q = completion_variant(&t, 0.0, 1, &cfg).unwrap();
        assert_eq!(q.trace.thresholds, vec![0.0, 0.0]);
    }
}
