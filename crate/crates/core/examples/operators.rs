//! Encoding operators: SENSE with exact and gridded non-uniform transforms, the
//! sketched operator and the shared coil-transform counter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sketchrecon::linop::{adjoint_mismatch, max_eig_power, random_vector, GriddingParams, LinOp, Normal};
use sketchrecon::sense::{build_sense_with, radial_density_weights, FourierMode};
use sketchrecon::simulate::{make_coil_maps, radial_traj};
use sketchrecon::sketch::{build_sketched_operator, gen_sketch_matrix, SketchConfig};
use sketchrecon::{vecops, GridShape, Result};

fn main() -> Result<()> {
    let shape = GridShape::new(&[64, 64])?;
    let maps = make_coil_maps(8, &shape, 0)?;
    let traj = radial_traj(&shape, 48, 128, true)?;
    let w = radial_density_weights(&traj);

    let exact = build_sense_with(&maps, &traj, Some(&w), FourierMode::Direct)?;
    let gridded = build_sense_with(&maps, &traj, Some(&w), FourierMode::Gridded(GriddingParams::default()))?;
    println!("A: {} -> {} ({} coils x {} samples)", exact.in_dim(), exact.out_dim(), exact.ncoils(), exact.nsamples());
    println!("adjoint mismatch: exact {:.1e}, gridded {:.1e}", adjoint_mismatch(&exact, 1), adjoint_mismatch(&gridded, 1));

    let x = random_vector(shape.size(), &mut ChaCha8Rng::seed_from_u64(0));
    println!("gridding error vs exact: {:.1e}", vecops::rel_diff(&gridded.forward(&x), &exact.forward(&x)));

    let sk = gen_sketch_matrix(&SketchConfig::recommended(4, 7), 8)?;
    let sketched = build_sketched_operator(&gridded, &sk)?;
    let before = gridded.coil_transforms();
    sketched.forward(&x);
    println!(
        "sketched forward: {} coils, counter +{} (shared with the source operator)",
        sketched.ncoils(),
        gridded.coil_transforms() - before
    );

    let l = max_eig_power(&Normal { op: &gridded, shift: 0.0 }, 30, 0);
    let ls = max_eig_power(&Normal { op: &sketched, shift: 0.0 }, 30, 0);
    println!("lambda_max(A^H A) = {l:.4}, sketched = {ls:.4}");
    Ok(())
}
