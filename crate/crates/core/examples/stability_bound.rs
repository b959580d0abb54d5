//! Largest stable explicit step for each surface, from power iteration.

use surfdk::fvm::spectral_radius;
use surfdk::geometry::{precompute_grid, HeightSurface};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 32;
    let h = 2.0 * std::f64::consts::PI / n as f64;
    println!("flat bound h^2/4 = {:.6e}", h * h / 4.0);
    for surface in [
        HeightSurface::flat(),
        HeightSurface::sinusoidal(3.0),
        HeightSurface::four_peak(4.0),
    ] {
        let grid = precompute_grid(&surface, n, n)?;
        let est = spectral_radius(&grid)?;
        println!(
            "{:?}: lambda_max {:.4} after {} iterations, dt_max {:.6e}",
            surface.kind(),
            est.lambda_max,
            est.iterations,
            2.0 / est.lambda_max
        );
    }
    Ok(())
}
