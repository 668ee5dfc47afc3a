//! Dense complex matrix exponential: degree-13 Padé approximant with
//! scaling and squaring (Higham 2005).

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};

const PADE13: [f64; 14] = [
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

const THETA13: f64 = 5.371920351148152;

pub fn norm_1(a: &Array2<Complex64>) -> f64 {
    a.axis_iter(Axis(1)).map(|col| col.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// In-place LU factorisation with partial pivoting.
struct Lu {
    lu: Array2<Complex64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Array2<Complex64>) -> Result<Self> {
        let n = a.nrows();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, best) = (k..n).map(|r| (r, a[[r, k]].norm())).fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular);
            }
            if p != k {
                for c in 0..n {
                    a.swap([k, c], [p, c]);
                }
                perm.swap(k, p);
            }
            let pivot = a[[k, k]];
            for r in k + 1..n {
                let f = a[[r, k]] / pivot;
                a[[r, k]] = f;
                if f != Complex64::new(0.0, 0.0) {
                    for c in k + 1..n {
                        let v = a[[k, c]];
                        a[[r, c]] -= f * v;
                    }
                }
            }
        }
        Ok(Lu { lu: a, perm })
    }

    /// Solves `A X = B` column by column.
    fn solve(&self, b: &Array2<Complex64>) -> Array2<Complex64> {
        let n = self.lu.nrows();
        let mut x = Array2::zeros(b.raw_dim());
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for col in 0..b.ncols() {
            for r in 0..n {
                let mut s = b[[self.perm[r], col]];
                for c in 0..r {
                    s -= self.lu[[r, c]] * y[c];
                }
                y[r] = s;
            }
            for r in (0..n).rev() {
                let mut s = y[r];
                for c in r + 1..n {
                    s -= self.lu[[r, c]] * y[c];
                }
                y[r] = s / self.lu[[r, r]];
            }
            for r in 0..n {
                x[[r, col]] = y[r];
            }
        }
        x
    }
}

/// `exp(A)`.
pub fn expm(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidParameter("expm needs a square matrix".into()));
    }
    let norm = norm_1(a);
    if !norm.is_finite() {
        return Err(Error::InvalidParameter("expm input has non-finite entries".into()));
    }
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a.mapv(|z| z * 0.5f64.powi(s));
    let id = Array2::<Complex64>::eye(n);
    let b = PADE13.map(|x| Complex64::new(x, 0.0));
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let u_inner = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a.dot(&(a6.dot(&u_inner) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]));
    let v_inner = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = a6.dot(&v_inner) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let lu = Lu::factor(&v - &u)?;
    let mut r = lu.solve(&(&v + &u));
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

/// Propagator `exp(−i·2π·H·t)` for H in h·MHz and t in µs.
pub fn propagator(h: &Array2<Complex64>, t_us: f64) -> Result<Array2<Complex64>> {
    let scale = Complex64::new(0.0, -std::f64::consts::TAU * t_us);
    expm(&h.mapv(|z| z * scale))
}

pub fn apply(u: &Array2<Complex64>, psi: &Array1<Complex64>) -> Array1<Complex64> {
    u.dot(psi)
}
