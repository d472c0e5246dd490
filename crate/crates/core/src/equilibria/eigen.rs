//! Eigenvalues of small dense real matrices: stabilized elementary
//! similarity reduction to upper Hessenberg form, then Francis double-shift
//! QR with the classic exceptional shifts at iterations 10 and 20. The
//! exceptional shifts break the symmetric-cycling stalls that plain shift
//! strategies hit on block-structured matrices (exactly the Jacobians this
//! crate produces), which is why this does not delegate to a library Schur
//! routine. Eigenvalues only, no vectors.

use nalgebra::DMatrix;
use num_complex::Complex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct QrStalled;

pub(crate) fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>, QrStalled> {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    let mut a = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = m[(i, j)];
        }
    }
    hessenberg(&mut a);
    hqr(a)
}

/// In-place similarity reduction to upper Hessenberg form by stabilized
/// elementary transformations (pivoted Gaussian similarity).
fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    if n < 3 {
        return;
    }
    for m in 1..n - 1 {
        let mut piv = m;
        for i in m + 1..n {
            if a[i][m - 1].abs() > a[piv][m - 1].abs() {
                piv = i;
            }
        }
        if piv != m {
            a.swap(piv, m);
            for row in a.iter_mut() {
                row.swap(piv, m);
            }
        }
        let x = a[m][m - 1];
        if x != 0.0 {
            for i in m + 1..n {
                let y = a[i][m - 1] / x;
                if y != 0.0 {
                    a[i][m - 1] = 0.0;
                    for j in m..n {
                        a[i][j] -= y * a[m][j];
                    }
                    for k in 0..n {
                        a[k][m] += y * a[k][i];
                    }
                }
            }
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix; the standard
/// sequential-deflation formulation with exceptional shifts.
fn hqr(mut a: Vec<Vec<f64>>) -> Result<Vec<Complex<f64>>, QrStalled> {
    let n = a.len();
    let mut eig = vec![Complex::new(0.0, 0.0); n];
    if n == 0 {
        return Ok(eig);
    }
    let mut anorm = 0.0f64;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(eig);
    }
    let eps = f64::EPSILON;
    let mut t = 0.0f64;
    let mut nn: isize = n as isize - 1;
    while nn >= 0 {
        let mut its = 0u32;
        loop {
            // Look for a negligible subdiagonal entry to split the block.
            let mut l = nn;
            while l >= 1 {
                let (lu, lm) = (l as usize, (l - 1) as usize);
                let mut s = a[lm][lm].abs() + a[lu][lu].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[lu][lm].abs() <= eps * s {
                    a[lu][lm] = 0.0;
                    break;
                }
                l -= 1;
            }
            let nnu = nn as usize;
            let mut x = a[nnu][nnu];
            if l == nn {
                eig[nnu] = Complex::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            let n1 = (nn - 1) as usize;
            let mut y = a[n1][n1];
            let mut w = a[nnu][n1] * a[n1][nnu];
            if l == nn - 1 {
                // 2x2 block: quadratic formula, stable variant.
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let xs = x + t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    let e1 = xs + z;
                    let e2 = if z != 0.0 { xs - w / z } else { e1 };
                    eig[n1] = Complex::new(e1, 0.0);
                    eig[nnu] = Complex::new(e2, 0.0);
                } else {
                    eig[n1] = Complex::new(xs + p, z);
                    eig[nnu] = Complex::new(xs + p, -z);
                }
                nn -= 2;
                break;
            }
            if its == 30 {
                return Err(QrStalled);
            }
            if its == 10 || its == 20 {
                // Exceptional shift: ad-hoc values that break shift cycling.
                t += x;
                for i in 0..=nnu {
                    a[i][i] -= x;
                }
                let s = a[nnu][n1].abs() + a[n1][(nn - 2) as usize].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            // First column of (H - s1)(H - s2) at trial positions, walking up
            // until two consecutive subdiagonals are small.
            let mut m = nn - 2;
            let (mut p, mut q, mut r) = (0.0f64, 0.0f64, 0.0f64);
            while m >= l {
                let mu = m as usize;
                let z = a[mu][mu];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[mu + 1][mu] + a[mu][mu + 1];
                q = a[mu + 1][mu + 1] - z - rr - ss;
                r = a[mu + 2][mu + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[mu][mu - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[mu - 1][mu - 1].abs() + z.abs() + a[mu + 1][mu + 1].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a[i as usize][(i - 2) as usize] = 0.0;
            }
            for i in m + 3..=nn {
                a[i as usize][(i - 3) as usize] = 0.0;
            }
            // Double QR sweep restoring Hessenberg form on rows l..=nn.
            for k in m..nn {
                let ku = k as usize;
                let notlast = k != nn - 1;
                let mut norm = 0.0f64;
                if k != m {
                    p = a[ku][ku - 1];
                    q = a[ku + 1][ku - 1];
                    r = if notlast { a[ku + 2][ku - 1] } else { 0.0 };
                    norm = p.abs() + q.abs() + r.abs();
                    if norm == 0.0 {
                        continue;
                    }
                    p /= norm;
                    q /= norm;
                    r /= norm;
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        a[ku][ku - 1] = -a[ku][ku - 1];
                    }
                } else {
                    a[ku][ku - 1] = -s * norm;
                }
                p += s;
                let hx = p / s;
                let hy = q / s;
                let hz = r / s;
                q /= p;
                r /= p;
                for j in ku..=nnu {
                    let mut pp = a[ku][j] + q * a[ku + 1][j];
                    if notlast {
                        pp += r * a[ku + 2][j];
                        a[ku + 2][j] -= pp * hz;
                    }
                    a[ku + 1][j] -= pp * hy;
                    a[ku][j] -= pp * hx;
                }
                let last = nnu.min(ku + 3);
                for i in l as usize..=last {
                    let mut pp = hx * a[i][ku] + hy * a[i][ku + 1];
                    if notlast {
                        pp += hz * a[i][ku + 2];
                        a[i][ku + 2] -= pp * r;
                    }
                    a[i][ku + 1] -= pp * q;
                    a[i][ku] -= pp;
                }
            }
        }
    }
    Ok(eig)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sort_key(z: &Complex<f64>) -> (f64, f64) {
        (z.re, z.im)
    }

    fn assert_same_spectrum(mut a: Vec<Complex<f64>>, mut b: Vec<Complex<f64>>, tol: f64) {
        a.sort_by(|x, y| sort_key(x).partial_cmp(&sort_key(y)).unwrap());
        b.sort_by(|x, y| sort_key(x).partial_cmp(&sort_key(y)).unwrap());
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!(
                (x.re - y.re).abs() <= tol && (x.im - y.im).abs() <= tol,
                "{x} vs {y}"
            );
        }
    }

    #[test]
    fn fixed_small_cases() {
        // Rotation: pure imaginary pair.
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let eig = eigenvalues(&m).unwrap();
        assert_same_spectrum(
            eig,
            vec![Complex::new(0.0, 1.0), Complex::new(0.0, -1.0)],
            1e-12,
        );
        // Upper triangular: diagonal entries.
        let m = DMatrix::from_row_slice(3, 3, &[3.0, 1.0, 2.0, 0.0, -1.0, 5.0, 0.0, 0.0, 0.5]);
        let eig = eigenvalues(&m).unwrap();
        assert_same_spectrum(
            eig,
            vec![
                Complex::new(3.0, 0.0),
                Complex::new(-1.0, 0.0),
                Complex::new(0.5, 0.0),
            ],
            1e-12,
        );
        // 1x1 and empty.
        assert_eq!(
            eigenvalues(&DMatrix::from_row_slice(1, 1, &[4.25])).unwrap()[0].re,
            4.25
        );
        assert!(eigenvalues(&DMatrix::<f64>::zeros(0, 0))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn rank_one_plus_diagonal_structure() {
        // c I + d 11^T has eigenvalues c + nd (once) and c (n-1 times).
        for n in [3usize, 5, 8] {
            let (c, d) = (-0.4, 0.17);
            let mut m = DMatrix::<f64>::from_element(n, n, d);
            for i in 0..n {
                m[(i, i)] += c;
            }
            let eig = eigenvalues(&m).unwrap();
            let mut expect = vec![Complex::new(c, 0.0); n - 1];
            expect.push(Complex::new(c + n as f64 * d, 0.0));
            assert_same_spectrum(eig, expect, 1e-10);
        }
    }

    #[test]
    fn circulant_spectrum() {
        // Circulant with first row (b, c, 0, ..., 0, c): eigenvalues
        // b + 2 c cos(2 pi j / n).
        let n = 7;
        let (b, c) = (0.25, -0.5);
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = b;
            m[(i, (i + 1) % n)] = c;
            m[(i, (i + n - 1) % n)] = c;
        }
        let eig = eigenvalues(&m).unwrap();
        let expect: Vec<Complex<f64>> = (0..n)
            .map(|j| {
                Complex::new(
                    b + 2.0 * c * (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos(),
                    0.0,
                )
            })
            .collect();
        assert_same_spectrum(eig, expect, 1e-9);
    }

    #[test]
    fn agrees_with_library_on_random_matrices() {
        let mut state = 0x5bd1e995u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for n in 1..=12usize {
            for _ in 0..20 {
                let m = DMatrix::<f64>::from_fn(n, n, |_, _| next());
                let ours = eigenvalues(&m).unwrap();
                let lib: Vec<Complex<f64>> =
                    m.clone().complex_eigenvalues().iter().copied().collect();
                assert_same_spectrum(ours, lib, 1e-7 * (1.0 + m.amax()));
            }
        }
    }

    #[test]
    fn survives_perturbed_structured_matrices() {
        // Tiny generic perturbations of block-symmetric matrices stall the
        // unshifted library QR; exceptional shifts must get through them.
        let base = DMatrix::<f64>::from_fn(6, 6, |i, j| if i == j { -0.58 } else { -0.07 });
        let mut lcg: u64 = 12345;
        for scale in [1e-13f64, 1e-12, 1e-11, 1e-10] {
            let mut m = base.clone();
            for i in 0..6 {
                for j in 0..6 {
                    lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1);
                    m[(i, j)] += scale * ((lcg >> 11) as f64 / (1u64 << 53) as f64 - 0.5);
                }
            }
            let eig = eigenvalues(&m).unwrap();
            // Spectrum stays within scale of the exact one: -0.58 - (-0.07)
            // = -0.51 five times, -0.58 + 5(-0.07) = -0.93 once.
            let mut re: Vec<f64> = eig.iter().map(|z| z.re).collect();
            re.sort_by(f64::total_cmp);
            assert!((re[0] + 0.93).abs() < 1e-8);
            for r in &re[1..] {
                assert!((r + 0.51).abs() < 1e-8);
            }
        }
    }
}
