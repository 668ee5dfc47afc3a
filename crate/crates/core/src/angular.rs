//! Clebsch–Gordan coefficients and Wigner 3j/6j symbols.
//!
//! All angular momenta are passed doubled (`2j`, `2m`) so half-integers are
//! exact. Racah's closed forms are summed in double precision, which is exact
//! to rounding for the small momenta used here (j ≤ 10).

const MAX_FACT: usize = 100;

fn factorial(n: i32) -> f64 {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[f64; MAX_FACT + 1]> = OnceLock::new();
    let t = TABLE.get_or_init(|| {
        let mut t = [1.0; MAX_FACT + 1];
        for i in 1..=MAX_FACT {
            t[i] = t[i - 1] * i as f64;
        }
        t
    });
    debug_assert!(n >= 0 && (n as usize) <= MAX_FACT);
    t[n as usize]
}

fn sign(k: i32) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Triangle condition on doubled momenta, including integer total.
fn triangle(a: i32, b: i32, c: i32) -> bool {
    a >= 0 && b >= 0 && c >= 0 && c <= a + b && c >= (a - b).abs() && (a + b + c) % 2 == 0
}

/// Δ(abc) with doubled arguments (assumes the triangle holds).
fn delta(a: i32, b: i32, c: i32) -> f64 {
    (factorial((a + b - c) / 2) * factorial((a - b + c) / 2) * factorial((-a + b + c) / 2)
        / factorial((a + b + c) / 2 + 1))
        .sqrt()
}

fn projection_ok(j: i32, m: i32) -> bool {
    m.abs() <= j && (j + m) % 2 == 0
}

/// Wigner 3j symbol `(j1 j2 j3; m1 m2 m3)` with doubled arguments.
pub fn wigner_3j(j1: i32, j2: i32, j3: i32, m1: i32, m2: i32, m3: i32) -> f64 {
    if m1 + m2 + m3 != 0 || !triangle(j1, j2, j3) {
        return 0.0;
    }
    if !(projection_ok(j1, m1) && projection_ok(j2, m2) && projection_ok(j3, m3)) {
        return 0.0;
    }
    let (a, b, c) = ((j1 + j2 - j3) / 2, (j1 - m1) / 2, (j2 + m2) / 2);
    let (d, e) = ((j3 - j2 + m1) / 2, (j3 - j1 - m2) / 2);
    let kmin = 0.max(-d).max(-e);
    let kmax = a.min(b).min(c);
    let mut sum = 0.0;
    for k in kmin..=kmax {
        sum += sign(k)
            / (factorial(k)
                * factorial(a - k)
                * factorial(b - k)
                * factorial(c - k)
                * factorial(d + k)
                * factorial(e + k));
    }
    let pre = (factorial((j1 + m1) / 2)
        * factorial((j1 - m1) / 2)
        * factorial((j2 + m2) / 2)
        * factorial((j2 - m2) / 2)
        * factorial((j3 + m3) / 2)
        * factorial((j3 - m3) / 2))
        .sqrt();
    sign((j1 - j2 - m3) / 2) * delta(j1, j2, j3) * pre * sum
}

/// Wigner 6j symbol `{j1 j2 j3; j4 j5 j6}` with doubled arguments.
pub fn wigner_6j(j1: i32, j2: i32, j3: i32, j4: i32, j5: i32, j6: i32) -> f64 {
    if !(triangle(j1, j2, j3) && triangle(j1, j5, j6) && triangle(j4, j2, j6) && triangle(j4, j5, j3)) {
        return 0.0;
    }
    let a = [(j1 + j2 + j3) / 2, (j1 + j5 + j6) / 2, (j4 + j2 + j6) / 2, (j4 + j5 + j3) / 2];
    let b = [(j1 + j2 + j4 + j5) / 2, (j2 + j3 + j5 + j6) / 2, (j3 + j1 + j6 + j4) / 2];
    let tmin = *a.iter().max().unwrap();
    let tmax = *b.iter().min().unwrap();
    let mut sum = 0.0;
    for t in tmin..=tmax {
        let den: f64 = a.iter().map(|&x| factorial(t - x)).product::<f64>()
            * b.iter().map(|&x| factorial(x - t)).product::<f64>();
        sum += sign(t) * factorial(t + 1) / den;
    }
    delta(j1, j2, j3) * delta(j1, j5, j6) * delta(j4, j2, j6) * delta(j4, j5, j3) * sum
}

/// Clebsch–Gordan coefficient `⟨j1 m1; j2 m2 | J M⟩` with doubled arguments.
///
/// Returns 0 whenever the triangle rule or `M = m1 + m2` fails.
pub fn cg(j1: i32, m1: i32, j2: i32, m2: i32, j: i32, m: i32) -> f64 {
    if m1 + m2 != m {
        return 0.0;
    }
    sign((j1 - j2 + m) / 2) * ((j + 1) as f64).sqrt() * wigner_3j(j1, j2, j, m1, m2, -m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_forms() {
        assert!((cg(2, 0, 2, 0, 4, 0) - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((cg(2, 2, 2, -2, 4, 0) - (1.0f64 / 6.0).sqrt()).abs() < 1e-15);
        assert!((cg(2, -2, 2, 2, 4, 0) - (1.0f64 / 6.0).sqrt()).abs() < 1e-15);
        // ⟨1/2 1/2; 1/2 -1/2 | 0 0⟩ = 1/√2
        assert!((cg(1, 1, 1, -1, 0, 0) - 0.5f64.sqrt()).abs() < 1e-15);
        // (1 1 1; 0 0 0) vanishes by parity
        assert_eq!(wigner_3j(2, 2, 2, 0, 0, 0), 0.0);
        // {1/2 1/2 1; 1/2 1/2 0} = 1/2
        assert!((wigner_6j(1, 1, 2, 1, 1, 0) - 0.5).abs() < 1e-15);
        // {1 1 1; 1 1 1} = 1/6
        assert!((wigner_6j(2, 2, 2, 2, 2, 2) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn out_of_domain_is_zero() {
        assert_eq!(cg(2, 0, 2, 0, 4, 2), 0.0);
        assert_eq!(cg(2, 0, 2, 0, 6, 0), 0.0);
        assert_eq!(cg(1, 3, 1, -1, 2, 2), 0.0);
        assert_eq!(cg(2, 1, 2, -1, 4, 0), 0.0);
    }

    #[test]
    fn orthogonality_grid() {
        for j1 in 0i32..=8 {
            for j2 in 0..=8 {
                let js: Vec<i32> = ((j1 - j2).abs()..=j1 + j2).step_by(2).collect();
                for &ja in &js {
                    for &jb in &js {
                        for ma in (-ja..=ja).step_by(2) {
                            for mb in (-jb..=jb).step_by(2) {
                                let mut s = 0.0;
                                for m1 in (-j1..=j1).step_by(2) {
                                    for m2 in (-j2..=j2).step_by(2) {
                                        s += cg(j1, m1, j2, m2, ja, ma) * cg(j1, m1, j2, m2, jb, mb);
                                    }
                                }
                                let expect = if ja == jb && ma == mb { 1.0 } else { 0.0 };
                                assert!((s - expect).abs() < 1e-12, "{j1} {j2} {ja} {ma} {jb} {mb}: {s}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn six_j_orthogonality() {
        // Σ_x (2x+1)(2c+1) {a b x; c d p}{a b x; c d q} = δ_pq
        let (a, b, c, d) = (3, 2, 3, 4);
        for p in 0..=10 {
            for q in 0..=10 {
                let mut s = 0.0;
                for x in 0..=10 {
                    s += (x + 1) as f64 * (p + 1) as f64 * wigner_6j(a, b, x, c, d, p) * wigner_6j(a, b, x, c, d, q);
                }
                let expect = if p == q && triangle(a, d, p) && triangle(b, c, p) { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-12, "{p} {q} {s}");
            }
        }
    }

    proptest! {
        #[test]
        fn exchange_symmetry(j1 in 0i32..=8, j2 in 0i32..=8, jsel in 0usize..9, m1s in 0i32..9, m2s in 0i32..9) {
            let js: Vec<i32> = ((j1 - j2).abs()..=j1 + j2).step_by(2).collect();
            let j = js[jsel % js.len()];
            let m1 = -j1 + 2 * (m1s % (j1 + 1));
            let m2 = -j2 + 2 * (m2s % (j2 + 1));
            let m = m1 + m2;
            let lhs = cg(j1, m1, j2, m2, j, m);
            let rhs = sign((j1 + j2 - j) / 2) * cg(j2, m2, j1, m1, j, m);
            prop_assert!((lhs - rhs).abs() < 1e-14);
        }

        #[test]
        fn three_j_column_permutation(j1 in 0i32..=6, j2 in 0i32..=6, jsel in 0usize..7, m1s in 0i32..7, m2s in 0i32..7) {
            let js: Vec<i32> = ((j1 - j2).abs()..=j1 + j2).step_by(2).collect();
            let j3 = js[jsel % js.len()];
            let m1 = -j1 + 2 * (m1s % (j1 + 1));
            let m2 = -j2 + 2 * (m2s % (j2 + 1));
            let m3 = -m1 - m2;
            let a = wigner_3j(j1, j2, j3, m1, m2, m3);
            let cyc = wigner_3j(j2, j3, j1, m2, m3, m1);
            let odd = wigner_3j(j2, j1, j3, m2, m1, m3) * sign((j1 + j2 + j3) / 2);
            prop_assert!((a - cyc).abs() < 1e-14);
            prop_assert!((a - odd).abs() < 1e-14);
        }
    }
}
