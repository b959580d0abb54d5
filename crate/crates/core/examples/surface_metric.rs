//! Metric, inverse square root and geometric drift on the built-in surfaces.

use surfdk::geometry::{precompute_grid, HeightSurface};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let point = [0.7, 2.2];
    for surface in [
        HeightSurface::flat(),
        HeightSurface::sinusoidal(3.0),
        HeightSurface::four_peak(4.0),
    ] {
        let m = surface.metric_at(point)?;
        let grid = precompute_grid(&surface, 64, 64)?;
        println!("{:?}", surface.kind());
        println!("  slopes      ({:+.5}, {:+.5})", m.p, m.q);
        println!("  sqrt|G|     {:.6}", m.sqrt_det);
        println!(
            "  G^-1        [{:.5} {:+.5}; {:+.5} {:.5}]",
            m.g_inv.xx, m.g_inv.xy, m.g_inv.xy, m.g_inv.yy
        );
        println!("  drift       ({:+.5}, {:+.5})", m.drift[0], m.drift[1]);
        println!("  area (64^2) {:.6}", grid.surface_area());
    }
    Ok(())
}
