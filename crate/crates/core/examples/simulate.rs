//! Builds the 2D radial testbed and writes it as NPY arrays and a PGM preview.

use std::path::PathBuf;

use sketchrecon::cli::io::{write_npy, write_pgm, NpyArray};
use sketchrecon::experiment::{build_testbed, TestbedSpec};
use sketchrecon::sense::CoilCompression;
use sketchrecon::Result;

fn main() -> Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/simulate".into()));
    std::fs::create_dir_all(&out)?;
    let spec = TestbedSpec {
        spokes: 24,
        ..TestbedSpec::radial_2d(64, 8)
    };
    let tb = build_testbed(&spec)?;
    println!("R = {:.2}, noise sigma = {:.3e}", tb.realized_r, tb.noise_sigma);

    let cc = CoilCompression::from_data(&tb.problem.data, tb.problem.ncoils())?;
    let total: f64 = cc.singular_values.iter().map(|s| s * s).sum();
    let energy: Vec<String> = cc.singular_values.iter().map(|s| format!("{:.3}", s * s / total)).collect();
    println!("virtual-coil energy: {}", energy.join(" "));

    let dims = tb.shape().dims().to_vec();
    write_npy(&out.join("phantom.npy"), &NpyArray::complex(dims.clone(), tb.truth.values.clone()))?;
    let kspace = &tb.problem.data;
    write_npy(
        &out.join("kspace.npy"),
        &NpyArray::complex(vec![kspace.ncoils(), kspace.traj.len()], kspace.stacked()),
    )?;
    write_pgm(&out.join("phantom.pgm"), &tb.truth.magnitude(), dims[0], dims[1])?;
    println!("wrote {}", out.display());
    Ok(())
}
