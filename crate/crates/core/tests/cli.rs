use std::path::Path;
use std::process::{Command, Output};

use sketchrecon::cli::io::{read_npy, NpyArray};
use sketchrecon::cli::RunConfig;
use sketchrecon::experiment::build_testbed;

const SMALL: &str = "seed = 5\n[testbed]\nshape = [16, 16]\ncoils = 3\nspokes = 8\nreadout = 32\n\
                     [params]\nlambda = 0.002\niters = 10\nc_hat = 2\nouter_iters = 2\ninner_iters = 3\n[ablate]\nv_values = [1]\n";

fn bin(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sketchrecon"));
    cmd.args(args).env_remove("SKETCHRECON_SEED");
    if let Some(s) = env_seed {
        cmd.env("SKETCHRECON_SEED", s);
    }
    cmd.output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn simulate(cfg: &str, out: &Path, extra: &[&str], env_seed: Option<&str>) -> Output {
    let mut args = vec!["simulate", "--config", cfg, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    bin(&args, env_seed)
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let unknown = write_config(tmp.path(), "unknown.toml", "[params]\nlamda = 0.1\n");
    assert_eq!(code(&simulate(&unknown, &out, &[], None)), 2);
    let good = write_config(tmp.path(), "good.toml", SMALL);
    assert_eq!(code(&simulate(&good, &out, &["--method", "magic"], None)), 2);
    assert_eq!(code(&simulate(&good, &out, &[], Some("not-a-number"))), 2);
    let missing = tmp.path().join("missing.toml");
    assert_eq!(code(&simulate(missing.to_str().unwrap(), &out, &[], None)), 2);
    assert_eq!(code(&bin(&["frobnicate"], None)), 2);
}

#[test]
fn io_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SMALL);
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    assert_eq!(code(&simulate(&cfg, &blocker, &[], None)), 3);

    let out = tmp.path().join("sim");
    assert_eq!(code(&simulate(&cfg, &out, &[], None)), 0);
    std::fs::write(out.join("kspace.npy"), b"garbage").unwrap();
    let recon = bin(&["recon", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&recon), 3);
}

#[test]
fn truncated_sketch_divergence_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let mut text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/ablate_wavelet.toml")).unwrap();
    text = text.replace("inner_iters = 20", "inner_iters = 20\nv = 4");
    let cfg = write_config(tmp.path(), "div.toml", &text);
    let out = tmp.path().join("div");
    let recon = bin(&["recon", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "0"], None);
    assert_eq!(code(&recon), 4, "{}", String::from_utf8_lossy(&recon.stderr));
}

#[test]
fn env_seed_matches_flag_and_changes_data() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SMALL);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert_eq!(code(&simulate(&cfg, &a, &["--seed", "11"], None)), 0);
    assert_eq!(code(&simulate(&cfg, &b, &[], Some("11"))), 0);
    assert_eq!(code(&simulate(&cfg, &c, &[], Some("12"))), 0);
    let k = |d: &Path| std::fs::read(d.join("kspace.npy")).unwrap();
    assert_eq!(k(&a), k(&b));
    assert_ne!(k(&a), k(&c));
    let d = tmp.path().join("d");
    assert_eq!(code(&simulate(&cfg, &d, &["--seed", "11"], Some("12"))), 0);
    assert_eq!(k(&a), k(&d));
}

#[test]
fn simulate_writes_bit_exact_npy_and_pgm() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SMALL);
    let out = tmp.path().join("sim");
    assert_eq!(code(&simulate(&cfg, &out, &[], None)), 0);

    let mut rc = RunConfig::parse(SMALL).unwrap();
    rc.resolve_seed(None, None).unwrap();
    let tb = build_testbed(&rc.testbed).unwrap();

    let phantom = read_npy(&out.join("phantom.npy")).unwrap();
    assert_eq!(phantom.shape, vec![16, 16]);
    let got = phantom.into_complex().unwrap();
    assert!(got.iter().zip(&tb.truth.values).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));

    let bytes = std::fs::read(out.join("kspace.npy")).unwrap();
    let p = &tb.problem.data;
    let expected = NpyArray::complex(vec![p.coils.len(), p.traj.len()], p.coils.concat());
    assert_eq!(bytes, expected.to_bytes().unwrap());
    assert_eq!(&bytes[..8], b"\x93NUMPY\x01\x00");
    let header = String::from_utf8_lossy(&bytes[10..(10 + u16::from_le_bytes([bytes[8], bytes[9]]) as usize)]).to_string();
    assert!(header.contains("'descr': '<c16'"), "{header}");
    assert_eq!((10 + header.len()) % 64, 0);

    let pgm = std::fs::read(out.join("phantom.pgm")).unwrap();
    let head = b"P5\n16 16\n65535\n";
    assert_eq!(&pgm[..head.len()], head);
    assert_eq!(pgm.len(), head.len() + 2 * 256);
}
