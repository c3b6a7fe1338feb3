//! Globally adaptive Gauss–Kronrod (7/15) quadrature for vector-valued
//! complex integrands.
//!
//! All components share one panel subdivision. The panel with the largest
//! error estimate is bisected until the summed estimate meets
//! `max(abs_tol, rel_tol · max_k |I_k|)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

#[derive(Debug, Clone)]
pub struct QuadOutcome {
    pub values: Vec<Complex64>,
    /// Summed panel error estimate (max over components per panel).
    pub error: f64,
    pub evaluations: usize,
    pub subdivisions: usize,
}

struct Panel {
    a: f64,
    b: f64,
    values: Vec<Complex64>,
    error: f64,
}

#[derive(PartialEq)]
struct Key {
    error: f64,
    id: usize,
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Rule<'f, F> {
    f: &'f mut F,
    dim: usize,
    fx: Vec<Vec<Complex64>>,
    evaluations: usize,
}

impl<F: FnMut(f64, &mut [Complex64])> Rule<'_, F> {
    fn panel(&mut self, a: f64, b: f64) -> Panel {
        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        // nodes: 0..7 at center - half*x, 7 at center, 8..15 at center + half*x
        for i in 0..7 {
            let dx = half * XGK[i];
            (self.f)(center - dx, &mut self.fx[i]);
            (self.f)(center + dx, &mut self.fx[8 + i]);
        }
        (self.f)(center, &mut self.fx[7]);
        self.evaluations += 15;
        let mut values = vec![Complex64::new(0.0, 0.0); self.dim];
        let mut error = 0.0f64;
        for k in 0..self.dim {
            let mut kron = self.fx[7][k] * WGK[7];
            let mut gauss = self.fx[7][k] * WG[3];
            for i in 0..7 {
                let pair = self.fx[i][k] + self.fx[8 + i][k];
                kron += pair * WGK[i];
                if i % 2 == 1 {
                    gauss += pair * WG[i / 2];
                }
            }
            let mean = kron * 0.5;
            let mut asc = (self.fx[7][k] - mean).norm() * WGK[7];
            let mut abs = self.fx[7][k].norm() * WGK[7];
            for i in 0..7 {
                asc += ((self.fx[i][k] - mean).norm() + (self.fx[8 + i][k] - mean).norm()) * WGK[i];
                abs += (self.fx[i][k].norm() + self.fx[8 + i][k].norm()) * WGK[i];
            }
            let mut err = ((kron - gauss) * half).norm();
            let asc = asc * half.abs();
            if asc != 0.0 && err != 0.0 {
                err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
            }
            let floor = 50.0 * f64::EPSILON * abs * half.abs();
            if floor > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
                err = err.max(floor);
            }
            values[k] = kron * half;
            error = error.max(err);
        }
        Panel { a, b, values, error }
    }
}

/// Integrate `f` over `[breakpoints[0], breakpoints[last]]`, starting from the
/// panels delimited by `breakpoints` (sorted, at least two).
///
/// `f(x, out)` writes the `dim` integrand components at `x` into `out`.
pub fn integrate<F>(mut f: F, breakpoints: &[f64], dim: usize, settings: &QuadSettings) -> Result<QuadOutcome>
where
    F: FnMut(f64, &mut [Complex64]),
{
    if breakpoints.len() < 2 {
        return Err(Error::Numerical("quadrature needs at least two breakpoints".into()));
    }
    let mut rule = Rule {
        f: &mut f,
        dim,
        fx: vec![vec![Complex64::new(0.0, 0.0); dim]; 15],
        evaluations: 0,
    };
    let mut panels: Vec<Panel> = Vec::new();
    let mut heap = BinaryHeap::new();
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            let p = rule.panel(w[0], w[1]);
            heap.push(Key {
                error: p.error,
                id: panels.len(),
            });
            panels.push(p);
        }
    }
    let mut alive = vec![true; panels.len()];
    let mut subdivisions = 0usize;
    let totals = |panels: &[Panel], alive: &[bool]| {
        let mut values = vec![Complex64::new(0.0, 0.0); dim];
        let mut error = 0.0;
        for (p, _) in panels.iter().zip(alive).filter(|(_, &a)| a) {
            for (v, pv) in values.iter_mut().zip(&p.values) {
                *v += pv;
            }
            error += p.error;
        }
        (values, error)
    };
    // Running totals are updated incrementally and recomputed exactly on exit.
    let (mut values, mut error) = totals(&panels, &alive);
    loop {
        let scale = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let target = settings.abs_tol.max(settings.rel_tol * scale);
        if error <= target {
            let (values, error) = totals(&panels, &alive);
            return Ok(QuadOutcome {
                values,
                error,
                evaluations: rule.evaluations,
                subdivisions,
            });
        }
        let Some(Key { id, .. }) = heap.pop() else {
            return Err(Error::Quadrature {
                subdivisions,
                estimate: error,
                target,
            });
        };
        if subdivisions >= settings.max_subdivisions {
            return Err(Error::Quadrature {
                subdivisions,
                estimate: error,
                target,
            });
        }
        let (a, b) = (panels[id].a, panels[id].b);
        let mid = 0.5 * (a + b);
        if !(mid > a && mid < b) || (b - a) < 1e-13 * a.abs().max(b.abs()) {
            // Cannot resolve further in floating point; keep the panel as is.
            continue;
        }
        alive[id] = false;
        subdivisions += 1;
        error -= panels[id].error;
        for (v, pv) in values.iter_mut().zip(&panels[id].values) {
            *v -= pv;
        }
        for (lo, hi) in [(a, mid), (mid, b)] {
            let p = rule.panel(lo, hi);
            error += p.error;
            for (v, pv) in values.iter_mut().zip(&p.values) {
                *v += pv;
            }
            heap.push(Key {
                error: p.error,
                id: panels.len(),
            });
            panels.push(p);
            alive.push(true);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn settings(rel: f64) -> QuadSettings {
        QuadSettings {
            rel_tol: rel,
            abs_tol: 1e-300,
            max_subdivisions: 2000,
        }
    }

    #[test]
    fn polynomial_exact() {
        let out = integrate(
            |x, o| o[0] = Complex64::new(x.powi(20), -x.powi(3)),
            &[0.0, 1.0],
            1,
            &settings(1e-12),
        )
        .unwrap();
        assert!((out.values[0] - Complex64::new(1.0 / 21.0, -0.25)).norm() < 1e-15);
    }

    #[test]
    fn log_singularity_at_endpoints() {
        // ∫0^1 ln x dx = -1, ∫0^1 ln(1-x) dx = -1
        let out = integrate(
            |x, o| {
                o[0] = Complex64::new(x.ln(), 0.0);
                o[1] = Complex64::new(0.0, (1.0 - x).ln());
            },
            &[0.0, 1.0],
            2,
            &settings(1e-10),
        )
        .unwrap();
        assert!((out.values[0].re + 1.0).abs() < 1e-9);
        assert!((out.values[1].im + 1.0).abs() < 1e-9);
    }

    #[test]
    fn oscillatory_vector() {
        let ks = [1.0, 10.0, 50.0];
        let out = integrate(
            |x, o| {
                for (v, &k) in o.iter_mut().zip(&ks) {
                    *v = Complex64::from_polar(1.0, k * x);
                }
            },
            &[0.0, 1.0, PI],
            3,
            &settings(1e-12),
        )
        .unwrap();
        for (v, &k) in out.values.iter().zip(&ks) {
            let exact = (Complex64::from_polar(1.0, k * PI) - 1.0) / Complex64::new(0.0, k);
            assert!((v - exact).norm() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn reports_nonconvergence() {
        let tight = QuadSettings {
            rel_tol: 1e-14,
            abs_tol: 0.0,
            max_subdivisions: 3,
        };
        let r = integrate(
            |x, o| o[0] = Complex64::new((200.0 * x).sin() / x.sqrt(), 0.0),
            &[0.0, 10.0],
            1,
            &tight,
        );
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn deterministic() {
        let f = |x: f64, o: &mut [Complex64]| o[0] = Complex64::new((x * x).cos(), x.sqrt());
        let a = integrate(f, &[0.0, 7.0], 1, &settings(1e-12)).unwrap();
        let b = integrate(f, &[0.0, 7.0], 1, &settings(1e-12)).unwrap();
        assert_eq!(a.values, b.values);
    }
}
