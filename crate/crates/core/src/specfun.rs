//! Bessel-family kernels for the 2D Helmholtz problem.
//!
//! The 2D free-field solution with outgoing convention `e^{-iωt}` is
//! `q(k2) = (i/4) H0⁽¹⁾(k2 r2)`. For imaginary wavenumbers `k2 = iκ` the
//! Hankel function continues to `H0⁽¹⁾(iκr) = (2/(iπ)) K0(κr)`, which
//! decays exponentially.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `H0⁽¹⁾(x) = J0(x) + i Y0(x)` for real `x > 0`.
pub fn hankel0_h1(x: f64) -> Result<Complex64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("H0(1) needs a positive finite argument, got {x}")));
    }
    Ok(Complex64::new(libm::j0(x), libm::y0(x)))
}

/// First derivative pair `(J0'(x), Y0'(x)) = (-J1(x), -Y1(x))`.
pub fn bessel01_derivatives(x: f64) -> (f64, f64) {
    (-libm::j1(x), -libm::y1(x))
}

/// Modified Bessel function of the second kind, order zero, for `x > 0`.
///
/// Evaluated from `K0(x) = ∫₀^∞ exp(-x cosh t) dt` with the trapezoidal rule,
/// which converges geometrically for this analytic, doubly decaying integrand.
/// The step shrinks like `x^{-1/2}` so the discretization error stays below
/// `1e-16` relative for all arguments.
pub fn bessel_k0(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x > 700.0 {
        return 0.0;
    }
    let h = (0.5 / x.sqrt()).min(0.25);
    // e^{-x} is factored out so the summand is exp(-x (cosh t - 1)).
    let mut sum = 0.5;
    let mut k = 1usize;
    loop {
        let t = k as f64 * h;
        // cosh t - 1 = 2 sinh²(t/2), exact for small t
        let s = (0.5 * t).sinh();
        let arg = 2.0 * x * s * s;
        if arg > 45.0 {
            break;
        }
        sum += (-arg).exp();
        k += 1;
    }
    h * sum * (-x).exp()
}

/// `H0⁽¹⁾(iκ r2)` for the evanescent regime, `κ > 0`, `r2 > 0`.
pub fn evanescent_kernel(kappa: f64, r2: f64) -> Complex64 {
    let k0 = bessel_k0(kappa * r2);
    // 2/(iπ) = -2i/π
    Complex64::new(0.0, -2.0 * k0 / PI)
}

/// Singular-collar control signal for [`Kernel2D::q2d`].
///
/// Raised when `|k2²|` falls inside the collar around the branch point, where
/// the caller decides how to evaluate (the quadrature clamps to the collar
/// edge on the same side).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularCollar {
    pub k2_squared: f64,
    pub collar: f64,
}

/// 2D cross-section model that produces the field `q(y_s, z_s, y_r, z_r, k2)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel2D {
    FreeField,
    /// Fully reflecting plane `z = z_plane`, modelled by an image source.
    HalfPlane { z_plane: f64 },
}

impl Kernel2D {
    /// The 2D radii that contribute for this source/receiver pair, in `(y, z)`.
    pub fn radii(&self, source_yz: [f64; 2], receiver_yz: [f64; 2]) -> Radii {
        let dy = receiver_yz[0] - source_yz[0];
        let direct = dy.hypot(receiver_yz[1] - source_yz[1]);
        match *self {
            Kernel2D::FreeField => Radii { direct, image: None },
            Kernel2D::HalfPlane { z_plane } => {
                let mirrored_z = 2.0 * z_plane - source_yz[1];
                Radii {
                    direct,
                    image: Some(dy.hypot(receiver_yz[1] - mirrored_z)),
                }
            }
        }
    }

    /// 2D field for a squared wavenumber `k2_squared`.
    ///
    /// Positive `k2²` uses the propagating Hankel branch, negative uses the
    /// evanescent `K0` branch (`√` of a negative number maps to `+iκ`).
    pub fn q2d(
        &self,
        source_yz: [f64; 2],
        receiver_yz: [f64; 2],
        k2_squared: f64,
        collar: f64,
    ) -> Result<std::result::Result<Complex64, SingularCollar>> {
        let radii = self.radii(source_yz, receiver_yz);
        radii.validate()?;
        if k2_squared.abs() < collar {
            return Ok(Err(SingularCollar { k2_squared, collar }));
        }
        Ok(Ok(radii.field(k2_squared)))
    }
}

/// Direct and optional image radii of one source/receiver pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radii {
    pub direct: f64,
    pub image: Option<f64>,
}

impl Radii {
    pub fn validate(&self) -> Result<()> {
        if !(self.direct > 0.0) {
            return Err(Error::Domain("source and receiver share the same (y, z) position".into()));
        }
        if let Some(r) = self.image {
            if !(r > 0.0) {
                return Err(Error::Domain("receiver lies on the image source line".into()));
            }
        }
        Ok(())
    }

    /// Smallest radius; governs the slowest evanescent decay.
    pub fn min(&self) -> f64 {
        self.image.map_or(self.direct, |r| r.min(self.direct))
    }

    /// `q = (i/4) Σ H0⁽¹⁾(k2 r)` over the contributing radii. `k2_squared` must
    /// be nonzero.
    #[inline]
    pub fn field(&self, k2_squared: f64) -> Complex64 {
        let single = |r: f64| -> Complex64 {
            if k2_squared > 0.0 {
                let x = k2_squared.sqrt() * r;
                Complex64::new(-0.25 * libm::y0(x), 0.25 * libm::j0(x))
            } else {
                let x = (-k2_squared).sqrt() * r;
                Complex64::new(bessel_k0(x) / (2.0 * PI), 0.0)
            }
        };
        match self.image {
            None => single(self.direct),
            Some(r) => single(self.direct) + single(r),
        }
    }
}

/// Leading asymptotic modulus `√(2/(πx))` of `H0⁽¹⁾`.
pub fn hankel0_asymptotic_modulus(x: f64) -> f64 {
    (1.0 / (FRAC_PI_2 * x)).sqrt()
}
