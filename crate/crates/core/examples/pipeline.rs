//! Drives the command-line front-end from a TOML config: simulate, reconstruct
//! and benchmark into one output directory.

use sketchrecon::cli::{main_with_args, RunConfig};

fn main() {
    let config = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/radial_wavelet.toml").into());
    let out = std::env::args().nth(2).unwrap_or_else(|| "out/pipeline".into());
    match RunConfig::load(config.as_ref()) {
        Ok(cfg) => println!("method {}, testbed {:?} with {} coils", cfg.method, cfg.testbed.shape, cfg.testbed.coils),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    }
    for cmd in ["simulate", "recon", "bench"] {
        let code = main_with_args(["sketchrecon", cmd, "--config", &config, "--out", &out]);
        println!("{cmd}: exit {code}");
        if code != 0 {
            std::process::exit(code);
        }
    }
}
