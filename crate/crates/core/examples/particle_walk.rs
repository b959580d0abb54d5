//! Overdamped particles on a bumpy surface, binned onto the grid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use surfdk::geometry::{precompute_grid, HeightSurface};
use surfdk::noise::StreamKey;
use surfdk::particles::{bin_to_grid, em_step, sample_initial, ParticleNoise};
use surfdk::potential::{ExternalPotential, PotentialSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let surface = HeightSurface::sinusoidal(3.0);
    let grid = precompute_grid(&surface, 8, 8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ensemble = sample_initial(&grid, 50, &mut rng);
    let mut noise = ParticleNoise::streams(&StreamKey::derive(7, "particle-noise"), ensemble.len());
    let potentials = PotentialSpec::external(ExternalPotential::SinSquared { v0: 2.0 });

    for _ in 0..2000 {
        em_step(&mut ensemble, &surface, &potentials, 1e-3, &mut noise)?;
    }
    let counts = bin_to_grid(&ensemble, grid.mesh());
    println!("t = {:.2}, {} particles", ensemble.time(), ensemble.len());
    for row in counts.chunks(grid.nx()).rev() {
        let line: Vec<String> = row.iter().map(|c| format!("{c:4}")).collect();
        println!("{}", line.join(""));
    }
    Ok(())
}
