//! Static matrix elements of cos V, sin V and powers of V on a truncated
//! multi-mode Fock space, V = Σ_p η_p (a_p + a_p†).

use nalgebra::DMatrix;

use super::{PhononScheme, DENSE_DIM_CAP};
use crate::error::{Error, Result};
use crate::C64;

/// Generalized Laguerre polynomial L_n^{(α)}(x) by the three-term recurrence.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    let mut l0 = 1.0;
    if n == 0 {
        return l0;
    }
    let mut l1 = 1.0 + alpha - x;
    for k in 1..n {
        let k = k as f64;
        let l2 = ((2.0 * k + 1.0 + alpha - x) * l1 - (k + alpha) * l0) / (k + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

/// e^{−η²/2} √(min!/max!) η^{|n−m|} L_min^{(|n−m|)}(η²), the real magnitude
/// shared by ⟨n|e^{±iη(a+a†)}|m⟩ = (±i)^{|n−m|} × this.
fn magnitude(eta: f64, n: usize, m: usize) -> f64 {
    let (lo, hi) = (n.min(m), n.max(m));
    let delta = hi - lo;
    let ratio: f64 = ((lo + 1)..=hi).map(|k| 1.0 / (k as f64).sqrt()).product();
    let x = eta * eta;
    (-0.5 * x).exp() * ratio * eta.powi(delta as i32) * laguerre(lo, delta as f64, x)
}

/// ⟨n|e^{iη(a+a†)}|m⟩ for n, m < d: the exact elements of the untruncated
/// operator restricted to the first d levels.
pub fn single_mode_displacement(eta: f64, d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |n, m| {
        let delta = n.abs_diff(m);
        magnitude(eta, n, m) * C64::new(0.0, 1.0).powi(delta as i32)
    })
}

/// Static (t = 0) elements of cos V and sin V on the scheme's phonon space.
pub fn displacement_elements(eta: &[f64], scheme: &PhononScheme) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    displacement_elements_with(eta, scheme, None)
}

/// As [`displacement_elements`], zeroing elements whose total occupation
/// change Σ_p|n_p − m_p| exceeds `max_jump`.
pub fn displacement_elements_with(
    eta: &[f64],
    scheme: &PhononScheme,
    max_jump: Option<usize>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_modes(eta, scheme)?;
    let d = dense_dim(scheme)?;
    let dims = scheme.dims();
    let mags: Vec<DMatrix<f64>> = eta
        .iter()
        .zip(&dims)
        .map(|(&e, &dp)| DMatrix::from_fn(dp, dp, |n, m| magnitude(e, n, m)))
        .collect();
    let occ: Vec<Vec<u32>> = (0..d).map(|i| scheme.occupations(i)).collect();
    let mut c = DMatrix::zeros(d, d);
    let mut s = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut a = 1.0;
            let mut sigma = 0usize;
            for (p, mag) in mags.iter().enumerate() {
                let (n, m) = (occ[i][p] as usize, occ[j][p] as usize);
                a *= mag[(n, m)];
                sigma += n.abs_diff(m);
            }
            if max_jump.is_some_and(|k| sigma > k) {
                continue;
            }
            // (i^σ + (−i)^σ)/2 and (i^σ − (−i)^σ)/2i
            match sigma % 4 {
                0 => c[(i, j)] = a,
                1 => s[(i, j)] = a,
                2 => c[(i, j)] = -a,
                _ => s[(i, j)] = -a,
            }
        }
    }
    Ok((c, s))
}

/// V^power on the truncated space, products taken after truncation.
pub fn v_power_elements(eta: &[f64], scheme: &PhononScheme, power: u32) -> Result<DMatrix<f64>> {
    check_modes(eta, scheme)?;
    if power > 5 {
        return Err(Error::InvalidArgument(format!("V power {power} > 5")));
    }
    let d = dense_dim(scheme)?;
    let strides = scheme.strides();
    let dims = scheme.dims();
    let mut v = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let occ = scheme.occupations(i);
        for p in 0..eta.len() {
            let n = occ[p] as usize;
            if n + 1 < dims[p] {
                let j = i + strides[p];
                let x = eta[p] * ((n + 1) as f64).sqrt();
                v[(j, i)] += x;
                v[(i, j)] += x;
            }
        }
    }
    let mut out = DMatrix::<f64>::identity(d, d);
    for _ in 0..power {
        out = &v * out;
    }
    Ok(out)
}

fn check_modes(eta: &[f64], scheme: &PhononScheme) -> Result<()> {
    if eta.len() != scheme.n_modes() {
        return Err(Error::Dimension(format!("{} η values for {} modes", eta.len(), scheme.n_modes())));
    }
    Ok(())
}

fn dense_dim(scheme: &PhononScheme) -> Result<usize> {
    let d = scheme.dim();
    if d > DENSE_DIM_CAP {
        return Err(Error::DimensionCap { dim: d, cap: DENSE_DIM_CAP });
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn laguerre_low_orders() {
        let (a, x) = (1.5, 0.3);
        assert_eq!(laguerre(0, a, x), 1.0);
        assert_abs_diff_eq!(laguerre(1, a, x), 1.0 + a - x, epsilon = 1e-15);
        let l2 = 0.5 * (x * x - 2.0 * (a + 2.0) * x + (a + 1.0) * (a + 2.0));
        assert_abs_diff_eq!(laguerre(2, a, x), l2, epsilon = 1e-14);
    }

    #[test]
    fn zero_eta_is_identity() {
        let s = PhononScheme::parse("213").unwrap();
        let (c, sn) = displacement_elements(&[0.0; 3], &s).unwrap();
        assert_eq!(c, DMatrix::identity(s.dim(), s.dim()));
        assert_eq!(sn.amax(), 0.0);
        assert_eq!(v_power_elements(&[0.0; 3], &s, 2).unwrap().amax(), 0.0);
    }

    #[test]
    fn single_mode_reference_values() {
        let s = PhononScheme::parse("4").unwrap();
        let (c, sn) = displacement_elements(&[0.1], &s).unwrap();
        assert_abs_diff_eq!(c[(0, 0)], (-0.005f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(c[(0, 0)], 0.995012479, epsilon = 1e-9);
        assert_abs_diff_eq!(sn[(1, 0)], 0.1 * (-0.005f64).exp(), epsilon = 1e-15);
        assert!((&c - c.transpose()).amax() == 0.0);
    }

    #[test]
    fn v_first_power_is_ladder() {
        let s = PhononScheme::parse("3").unwrap();
        let v = v_power_elements(&[0.2], &s, 1).unwrap();
        for n in 0..3 {
            assert_abs_diff_eq!(v[(n + 1, n)], 0.2 * ((n + 1) as f64).sqrt(), epsilon = 1e-15);
            assert_eq!(v[(n, n)], 0.0);
        }
        assert_eq!(v[(3, 0)], 0.0);
    }

    #[test]
    fn dense_cap_enforced() {
        let s = PhononScheme::uniform(4, 9).unwrap();
        assert!(matches!(displacement_elements(&[0.1; 4], &s), Err(Error::DimensionCap { .. })));
    }
}
