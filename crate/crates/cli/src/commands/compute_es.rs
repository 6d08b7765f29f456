use std::fs;

use h2meta_core::effect_size::{compute_effect_sizes, read_correlations_csv, write_effect_sizes_csv};

use crate::args::ComputeEsArgs;
use crate::error::{CliError, CliResult, INPUT_ERROR};
use crate::manifest::{digest_inputs, verify_against_previous, write_manifest, Manifest};

pub fn run_compute_es(args: &ComputeEsArgs) -> CliResult<()> {
    let out_dir = args.out.resolve();
    super::ensure_out_dir(&out_dir)?;
    let inputs = digest_inputs(&[&args.input])?;
    verify_against_previous(&out_dir, "compute-es", &inputs)?;

    let file = fs::File::open(&args.input).map_err(|e| {
        CliError::new(
            INPUT_ERROR,
            format!("cannot open {}: {e}", args.input.display()),
        )
    })?;
    let rows = read_correlations_csv(file)?;
    let effect_sizes = compute_effect_sizes(&rows, args.pool)?;

    let out_csv = out_dir.join("effect_sizes.csv");
    let writer = fs::File::create(&out_csv)?;
    write_effect_sizes_csv(writer, &effect_sizes)?;

    write_manifest(
        &out_dir,
        &Manifest {
            command: "compute-es".into(),
            version: h2meta_core::VERSION.into(),
            inputs,
            params: serde_json::json!({ "pool": args.pool }),
            outputs: vec!["effect_sizes.csv".into()],
        },
    )?;
    eprintln!(
        "wrote {} rows to {}",
        effect_sizes.len(),
        out_csv.display()
    );
    Ok(())
}
