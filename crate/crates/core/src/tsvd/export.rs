use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FftConvention, TSvdFactors};
use crate::error::Result;
use crate::tensor::io::save_tns1;

/// Sidecar written next to the `U`, `S`, `V` factor files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorManifest {
    pub input_dims: Vec<usize>,
    pub k: usize,
    pub convention: FftConvention,
    pub files: FactorFiles,
    pub u_dims: Vec<usize>,
    pub s_dims: Vec<usize>,
    pub v_dims: Vec<usize>,
    /// `||A - U*S*V^T||_F / ||A||_F` for the written (possibly truncated) factors.
    pub relative_residual: f64,
    pub orthogonality_tol: f64,
    pub real_residue_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorFiles {
    pub u: String,
    pub s: String,
    pub v: String,
}

/// Writes `U.tns`, `S.tns`, `V.tns` and `manifest.json` into `dir`.
pub fn write_factors(
    dir: impl AsRef<Path>,
    input_dims: &[usize],
    factors: &TSvdFactors,
    relative_residual: f64,
) -> Result<FactorManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let files = FactorFiles {
        u: "U.tns".into(),
        s: "S.tns".into(),
        v: "V.tns".into(),
    };
    save_tns1(dir.join(&files.u), &factors.u)?;
    save_tns1(dir.join(&files.s), &factors.s)?;
    save_tns1(dir.join(&files.v), &factors.v)?;
    let manifest = FactorManifest {
        input_dims: input_dims.to_vec(),
        k: factors.s.dims()[0],
        convention: FftConvention::Unnormalized,
        files,
        u_dims: factors.u.dims().to_vec(),
        s_dims: factors.s.dims().to_vec(),
        v_dims: factors.v.dims().to_vec(),
        relative_residual,
        orthogonality_tol: 1e-8,
        real_residue_tol: crate::tensor::REAL_RESIDUE_TOL,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::io::load_tns1;
    use crate::tsvd::tsvd;
    use crate::DenseTensor;

    #[test]
    fn writes_loadable_factors() {
        let a = DenseTensor::from_fn(&[3, 2, 2], |i| (i[0] * 2 + i[1]) as f64 - i[2] as f64).unwrap();
        let f = tsvd(&a).unwrap().truncated(1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = write_factors(dir.path(), a.dims(), &f, 0.5).unwrap();
        assert_eq!(m.k, 1);
        assert_eq!(load_tns1(dir.path().join("U.tns")).unwrap(), f.u);
        let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let back: FactorManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
