//! Loads a JSON experiment config and runs it as the CLI would, writing
//! report.json, CSV tables and manifest.json.
//!
//! `cargo run --example run_config -- [config.json] [out_dir]`

use std::path::PathBuf;

use qergo::cli::{load_experiment, numerical_failures, run_experiment};

fn main() {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/identity.json"));
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("qergo-run-config"));

    let (exp, text) = match load_experiment(&config, None, None) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    let (report, manifest) = run_experiment(&exp, &text, &out, 1).expect("run");
    println!("{} sizes, outputs in {}", report.per_size.len(), out.display());
    for f in &manifest.files {
        println!("  {:<24} {:>8} bytes  {}", f.file, f.bytes, &f.sha256[..16]);
    }
    for msg in numerical_failures(&report) {
        println!("numerical failure: {msg}");
    }
}
