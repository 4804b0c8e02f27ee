//! Matrix exponential by scaling and squaring with a diagonal Padé
//! approximant (degree 3, 5, 7, 9 or 13), following Higham's 2005 selection
//! of degrees and thresholds for double precision.

use ndarray::Array2;

use super::{linalg, C64};
use crate::error::{Error, Result};

const THETA: [(usize, f64); 4] =
    [(3, 1.495585217958292e-2), (5, 2.53939833006323e-1), (7, 9.504178996162932e-1), (9, 2.097847961257068)];
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] =
    [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &Array2<C64>) -> f64 {
    a.columns().into_iter().map(|col| col.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn axpy(acc: &mut Array2<C64>, coef: f64, x: &Array2<C64>) {
    acc.zip_mut_with(x, |a, &b| *a += b * coef);
}

fn add_diag(acc: &mut Array2<C64>, value: f64) {
    for k in 0..acc.nrows() {
        acc[[k, k]] += value;
    }
}

/// Returns (U, V) such that exp(A) ≈ (V - U)^{-1} (V + U).
fn pade_low(a: &Array2<C64>, b: &[f64]) -> (Array2<C64>, Array2<C64>) {
    let n = a.nrows();
    let a2 = a.dot(a);
    let mut powers = vec![a2.clone()];
    while powers.len() < (b.len() - 2) / 2 {
        let next = powers.last().unwrap().dot(&a2);
        powers.push(next);
    }
    let mut u_inner = Array2::<C64>::zeros((n, n));
    let mut v = Array2::<C64>::zeros((n, n));
    add_diag(&mut u_inner, b[1]);
    add_diag(&mut v, b[0]);
    for (k, p) in powers.iter().enumerate() {
        axpy(&mut u_inner, b[2 * k + 3], p);
        axpy(&mut v, b[2 * k + 2], p);
    }
    (a.dot(&u_inner), v)
}

fn pade13(a: &Array2<C64>) -> (Array2<C64>, Array2<C64>) {
    let b = &B13;
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);

    let mut w1 = &a6 * C64::new(b[13], 0.0);
    axpy(&mut w1, b[11], &a4);
    axpy(&mut w1, b[9], &a2);
    let mut w = a6.dot(&w1);
    axpy(&mut w, b[7], &a6);
    axpy(&mut w, b[5], &a4);
    axpy(&mut w, b[3], &a2);
    add_diag(&mut w, b[1]);
    let u = a.dot(&w);

    let mut z1 = &a6 * C64::new(b[12], 0.0);
    axpy(&mut z1, b[10], &a4);
    axpy(&mut z1, b[8], &a2);
    let mut v = a6.dot(&z1);
    axpy(&mut v, b[6], &a6);
    axpy(&mut v, b[4], &a4);
    axpy(&mut v, b[2], &a2);
    add_diag(&mut v, b[0]);
    (u, v)
}

/// `exp(A)` for a square complex matrix.
pub fn expm_array(a: &Array2<C64>) -> Result<Array2<C64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch { left: vec![a.nrows()], right: vec![a.ncols()] });
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::Numeric("expm of a matrix with non-finite entries".into()));
    }

    let (u, v, squarings) = if let Some(&(m, _)) = THETA.iter().find(|(_, t)| norm <= *t) {
        let b: &[f64] = match m {
            3 => &B3,
            5 => &B5,
            7 => &B7,
            _ => &B9,
        };
        let (u, v) = pade_low(a, b);
        (u, v, 0)
    } else {
        let s = ((norm / THETA_13).log2().ceil()).max(0.0) as i32;
        let scaled = a * C64::new(2f64.powi(-s), 0.0);
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };

    let p = &v + &u;
    let q = &v - &u;
    let mut r = linalg::solve(&q, &p).ok_or_else(|| Error::Numeric("singular Padé denominator".into()))?;
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("matrix exponential overflowed".into()));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Truncated Taylor series with many terms, valid for small norms.
    fn taylor(a: &Array2<C64>) -> Array2<C64> {
        let n = a.nrows();
        let mut term = Array2::<C64>::eye(n);
        let mut sum = term.clone();
        for k in 1..60 {
            term = term.dot(a) / C64::new(k as f64, 0.0);
            sum += &term;
        }
        sum
    }

    #[test]
    fn every_pade_degree_matches_taylor() {
        let base = Array2::from_shape_fn((4, 4), |(i, j)| {
            C64::new((i as f64 - j as f64 * 0.5).sin(), (i * j) as f64 * 0.1 - 0.2)
        });
        let base_norm = one_norm(&base);
        for target in [0.01, 0.2, 0.9, 2.0, 4.0] {
            let a = &base * C64::new(target / base_norm, 0.0);
            let err = (&expm_array(&a).unwrap() - &taylor(&a)).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            assert!(err < 1e-13, "norm {target}: {err}");
        }
    }

    #[test]
    fn squaring_branch_matches_group_property() {
        let a = Array2::from_shape_fn((5, 5), |(i, j)| {
            C64::new(((i + 2 * j) as f64).cos() * 3.0, (i as f64 - j as f64) * 0.8)
        });
        let full = expm_array(&a).unwrap();
        let half = expm_array(&(&a * C64::new(0.5, 0.0))).unwrap();
        let sq = half.dot(&half);
        let scale = full.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let err = (&full - &sq).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(err / scale < 1e-12, "{}", err / scale);
    }
}
