use std::f64::consts::PI;

use crate::linalg::CMatrix;
use crate::{Error, Result, C64};

/// Terms `(e^{−iθ_k}/N, X + e^{iθ_k}·Y)`, `θ_k = 2πk/N`, whose weighted sum
/// `Σ w_k·Z_k†·M·Z_k` equals `X†·M·Y` for every `M`.
pub fn polarization_decompose(x: &CMatrix, y: &CMatrix, n: usize) -> Result<Vec<(C64, CMatrix)>> {
    if n < 3 {
        return Err(Error::invalid("polarization order", "must be at least 3"));
    }
    if x.rows() != y.rows() || x.cols() != y.cols() {
        return Err(Error::Dimension {
            op: "polarization_decompose",
            expected: x.rows(),
            found: y.rows(),
        });
    }
    Ok((0..n)
        .map(|k| {
            let phase = C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
            let weight = phase.conj() / n as f64;
            (weight, x + &y.scale(phase))
        })
        .collect())
}

/// `Σ w_k·Z_k·ρ·Z_k†`: the superoperator form used to split `Y·ρ·X†`.
pub fn polarization_sandwich(terms: &[(C64, CMatrix)], rho: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(rho.rows(), rho.cols());
    for (w, z) in terms {
        out += &(&(z * rho) * &z.adjoint()).scale(*w);
    }
    out
}
