//! The 2D kernels: propagating Hankel branch, evanescent K0 branch and the
//! mirror-source half-plane kernel.

use std::f64::consts::PI;

use moving_source::specfun::{bessel_k0, hankel0_h1, Kernel2D};

fn main() -> moving_source::Result<()> {
    for x in [0.01, 0.1, 1.0, 10.0, 100.0] {
        let h = hankel0_h1(x)?;
        println!("x = {x:>6}: H0(1) = {:+.15e} {:+.15e}i   K0 = {:.15e}", h.re, h.im, bessel_k0(x));
    }
    let k = 2.0 * PI * 1000.0 / 343.0;
    let free = Kernel2D::FreeField;
    let ground = Kernel2D::HalfPlane { z_plane: -1.0 };
    for k2sq in [k * k, 0.25 * k * k, -k * k] {
        let a = free.radii([0.0, 2.0], [4.0, 2.0]).field(k2sq);
        let b = ground.radii([0.0, 2.0], [4.0, 2.0]).field(k2sq);
        println!("k2² = {k2sq:+10.2}: free {a:.4e}, half-plane {b:.4e}");
    }
    Ok(())
}
