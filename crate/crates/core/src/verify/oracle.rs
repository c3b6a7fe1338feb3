//! Reference computations used by the verification suite.
//!
//! Every routine here follows a different algorithmic path from the
//! production code it checks: Bessel functions by power series in
//! double-double arithmetic (or the Hankel asymptotic expansion for large
//! arguments), window transforms by compensated direct summation, Tikhonov
//! solutions by Gaussian elimination on the normal equations.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Unevaluated sum `hi + lo` carrying roughly 32 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const LN2: Dd = Dd {
        hi: 0.693_147_180_559_945_3,
        lo: 2.319_046_813_846_299_6e-17,
    };
    pub const EULER_GAMMA: Dd = Dd {
        hi: 0.577_215_664_901_532_9,
        lo: -4.942_915_152_430_645e-18,
    };

    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        self.mul(Dd::from_f64(b))
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul_f64(q1));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul_f64(q2));
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from_f64(q3))
    }

    pub fn div_f64(self, b: f64) -> Dd {
        self.div(Dd::from_f64(b))
    }

    /// `exp` by argument reduction `x = n ln2 + r`, `r/256` Taylor, squaring.
    pub fn exp(self) -> Dd {
        let n = (self.hi / Dd::LN2.hi).round();
        let r = self.sub(Dd::LN2.mul_f64(n)).div_f64(256.0);
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for k in 1..30 {
            term = term.mul(r).div_f64(k as f64);
            sum = sum.add(term);
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..8 {
            sum = sum.mul(sum);
        }
        let scale = 2f64.powi(n as i32);
        Dd {
            hi: sum.hi * scale,
            lo: sum.lo * scale,
        }
    }

    /// Natural logarithm by two Newton steps on `exp`.
    pub fn ln(self) -> Dd {
        let mut y = Dd::from_f64(self.hi.ln());
        for _ in 0..2 {
            let e = y.exp();
            y = y.add(self.sub(e).div(e));
        }
        y
    }
}

/// `(J0(x), Y0(x))` from independent reference formulas.
///
/// For `x ≤ 25` the ascending series are summed in double-double precision;
/// above that the Hankel asymptotic expansion is summed to its smallest term.
pub fn bessel_j0_y0(x: f64) -> (f64, f64) {
    assert!(x > 0.0);
    if x <= 25.0 {
        let q = Dd::from_f64(x).mul(Dd::from_f64(x)).div_f64(4.0);
        let mut term = Dd::ONE; // (x²/4)^k / (k!)²
        let mut j0 = Dd::ONE;
        let mut harmonic = Dd::ZERO;
        let mut ysum = Dd::ZERO;
        let mut k = 1;
        loop {
            let kf = k as f64;
            term = term.mul(q).div_f64(kf * kf);
            harmonic = harmonic.add(Dd::ONE.div_f64(kf));
            let signed = if k % 2 == 1 { term } else { term.neg() };
            j0 = j0.sub(signed);
            ysum = ysum.add(signed.mul(harmonic));
            if term.hi.abs() < 1e-40 && k > 5 {
                break;
            }
            k += 1;
        }
        let log_term = Dd::from_f64(x / 2.0).ln().add(Dd::EULER_GAMMA);
        let y0 = log_term.mul(j0).add(ysum).mul_f64(2.0 / PI);
        (j0.to_f64(), y0.to_f64())
    } else {
        let h = hankel0_asymptotic(x);
        (h.re, h.im)
    }
}

fn hankel0_asymptotic(x: f64) -> Complex64 {
    // Σ i^k a_k / x^k, a_k = Π_{j≤k} (-(2j-1)²) / (k! 8^k)
    let mut sum = Complex64::new(1.0, 0.0);
    let mut coeff = 1.0;
    let mut ik = Complex64::new(1.0, 0.0);
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        coeff *= -odd * odd / (kf * 8.0 * x);
        ik *= Complex64::new(0.0, 1.0);
        if coeff.abs() > prev || coeff.abs() < 1e-18 {
            break;
        }
        prev = coeff.abs();
        sum += ik * coeff;
    }
    let (s, c) = x.sin_cos();
    let phase = Complex64::new((c + s) / 2f64.sqrt(), (s - c) / 2f64.sqrt());
    phase * sum * (2.0 / (PI * x)).sqrt()
}

/// `K0(x)` from the ascending series (double-double, `x ≤ 20`) or the
/// asymptotic expansion.
pub fn bessel_k0(x: f64) -> f64 {
    assert!(x > 0.0);
    if x <= 20.0 {
        let q = Dd::from_f64(x).mul(Dd::from_f64(x)).div_f64(4.0);
        let mut term = Dd::ONE;
        let mut i0 = Dd::ONE;
        let mut harmonic = Dd::ZERO;
        let mut ksum = Dd::ZERO;
        let mut k = 1;
        loop {
            let kf = k as f64;
            term = term.mul(q).div_f64(kf * kf);
            harmonic = harmonic.add(Dd::ONE.div_f64(kf));
            i0 = i0.add(term);
            ksum = ksum.add(term.mul(harmonic));
            if term.hi < 1e-36 * i0.hi && k > 5 {
                break;
            }
            k += 1;
        }
        let log_term = Dd::from_f64(x / 2.0).ln().add(Dd::EULER_GAMMA);
        ksum.sub(log_term.mul(i0)).to_f64()
    } else {
        let mut sum = 1.0;
        let mut coeff = 1.0;
        let mut prev = f64::INFINITY;
        for k in 1..200 {
            let kf = k as f64;
            let odd = 2.0 * kf - 1.0;
            coeff *= -odd * odd / (kf * 8.0 * x);
            if coeff.abs() > prev || coeff.abs() < 1e-18 {
                break;
            }
            prev = coeff.abs();
            sum += coeff;
        }
        (PI / (2.0 * x)).sqrt() * (-x).exp() * sum
    }
}

/// Modified Bessel `I0(x)` by its ascending series (small arguments).
pub fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Compensated complex sum (Neumaier) used for brute-force transforms.
#[derive(Default)]
pub struct CompensatedSum {
    re: (f64, f64),
    im: (f64, f64),
}

impl CompensatedSum {
    pub fn add(&mut self, z: Complex64) {
        fn step(acc: &mut (f64, f64), v: f64) {
            let (s, e) = two_sum(acc.0, v);
            acc.0 = s;
            acc.1 += e;
        }
        step(&mut self.re, z.re);
        step(&mut self.im, z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

/// Direct evaluation of `Σ g[t_n] e^{iω t_n}`.
pub fn dtft_bruteforce(samples: &[f64], first_time: f64, fs: f64, omega: f64) -> Complex64 {
    let mut acc = CompensatedSum::default();
    for (k, &g) in samples.iter().enumerate() {
        let t = first_time + k as f64 / fs;
        acc.add(Complex64::from_polar(g, omega * t));
    }
    acc.value()
}

/// Retarded time by bisection on `c (t - τ) - ‖x_r - x_s(τ)‖ = 0`.
pub fn retarded_time_bisection(
    receiver: [f64; 3],
    source_at_zero: [f64; 3],
    speed: f64,
    c: f64,
    t: f64,
) -> f64 {
    let residual = |tau: f64| {
        let dx = receiver[0] - (source_at_zero[0] + speed * tau);
        let dy = receiver[1] - source_at_zero[1];
        let dz = receiver[2] - source_at_zero[2];
        c * (t - tau) - (dx * dx + dy * dy + dz * dz).sqrt()
    };
    // residual(t) ≤ 0 and residual → +∞ as τ → -∞ for subsonic motion
    let mut hi = t;
    let mut width = 1.0;
    let mut lo = t - width;
    while residual(lo) < 0.0 {
        width *= 2.0;
        lo = t - width;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solve `(HᴴH + λI) a = Hᴴ p` by Gaussian elimination with partial pivoting.
pub fn normal_equation_solve(
    h: &[Vec<Complex64>],
    p: &[Complex64],
    lambda: f64,
) -> Vec<Complex64> {
    let rows = h.len();
    let cols = h[0].len();
    let mut a = vec![vec![Complex64::new(0.0, 0.0); cols + 1]; cols];
    for i in 0..cols {
        for j in 0..cols {
            let mut s = Complex64::new(0.0, 0.0);
            for r in 0..rows {
                s += h[r][i].conj() * h[r][j];
            }
            a[i][j] = s;
        }
        a[i][i] += lambda;
        let mut s = Complex64::new(0.0, 0.0);
        for r in 0..rows {
            s += h[r][i].conj() * p[r];
        }
        a[i][cols] = s;
    }
    for col in 0..cols {
        let pivot = (col..cols)
            .max_by(|&x, &y| a[x][col].norm().total_cmp(&a[y][col].norm()))
            .unwrap();
        a.swap(col, pivot);
        let d = a[col][col];
        for r in col + 1..cols {
            let f = a[r][col] / d;
            if f.norm() == 0.0 {
                continue;
            }
            for k in col..=cols {
                let v = a[col][k];
                a[r][k] -= f * v;
            }
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); cols];
    for i in (0..cols).rev() {
        let mut s = a[i][cols];
        for k in i + 1..cols {
            s -= a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    x
}

/// Discrepancy-principle λ for a diagonal system `diag(σ) a = b`:
/// the λ at which `‖diag(σ) a_λ − b‖ = noise_norm`, located by bisection in
/// `log λ`.
pub fn discrepancy_lambda(sigma: &[f64], b: &[Complex64], noise_norm: f64) -> f64 {
    let residual = |lambda: f64| -> f64 {
        sigma
            .iter()
            .zip(b)
            .map(|(&s, bi)| (lambda / (s * s + lambda)).powi(2) * bi.norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid.exp()) < noise_norm {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dd_exp_ln_roundtrip() {
        for &x in &[1e-6, 0.3, 1.0, 2.5, 12.5, 700.0] {
            let l = Dd::from_f64(x).ln();
            let back = l.exp();
            assert!((back.sub(Dd::from_f64(x))).to_f64().abs() < 1e-29 * x);
            assert!((l.to_f64() - x.ln()).abs() < 1e-15 * x.ln().abs().max(1.0));
        }
    }

    #[test]
    fn oracle_reference_points() {
        let (j, y) = bessel_j0_y0(1.0);
        assert!((j - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((y - 0.088_256_964_215_676_96).abs() < 1e-15);
        assert!((bessel_k0(1.0) - 0.421_024_438_240_708_3).abs() < 1e-15);
    }

    #[test]
    fn series_and_asymptotic_agree_at_switch() {
        let x = 25.0;
        let (j, y) = bessel_j0_y0(x);
        let h = hankel0_asymptotic(x);
        assert!((j - h.re).abs() < 1e-14 && (y - h.im).abs() < 1e-14);
    }

    #[test]
    fn normal_equations_identity() {
        let h = vec![
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        ];
        let p = vec![Complex64::new(2.0, 1.0), Complex64::new(-1.0, 0.5)];
        let a = normal_equation_solve(&h, &p, 1.0);
        assert!((a[0] - p[0] / 2.0).norm() < 1e-15);
        assert!((a[1] - p[1] / 2.0).norm() < 1e-15);
    }
}
