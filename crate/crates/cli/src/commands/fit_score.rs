use std::fs;

use h2meta_core::dataset::{load_dataset, standardize, ModeratorSchema};
use h2meta_core::predictive::fit_score;

use crate::args::FitScoreArgs;
use crate::error::{CliError, CliResult, INPUT_ERROR, MISMATCH_ERROR};
use crate::manifest::{digest_inputs, sha256_file, verify_against_previous, write_manifest, Manifest};

pub fn run_fit_score(args: &FitScoreArgs) -> CliResult<()> {
    let out_dir = args.out.resolve();
    super::ensure_out_dir(&out_dir)?;
    let inputs = digest_inputs(&[
        args.dataset.as_path(),
        &args.chain.join(format!("{}.csv", args.stem)),
    ])?;
    verify_against_previous(&out_dir, "fit-score", &inputs)?;
    let chain = super::load_chain_checked(&args.chain, &args.stem)?;

    let digest = sha256_file(&args.dataset)?;
    if let Some(recorded) = &chain.dataset_digest {
        if *recorded != digest {
            return Err(CliError::new(
                MISMATCH_ERROR,
                format!(
                    "dataset {} does not match the one the chain was fitted to",
                    args.dataset.display()
                ),
            ));
        }
    }
    let schema = ModeratorSchema::canonical();
    let records = load_dataset(&args.dataset, &schema)?;
    let dataset = standardize(&records, &schema)?;
    if dataset.standardization != chain.standardization {
        return Err(CliError::new(
            MISMATCH_ERROR,
            "dataset standardization differs from the chain's".to_string(),
        ));
    }

    let score = fit_score(&chain, &dataset)?;
    fs::write(
        out_dir.join("fit_score.json"),
        serde_json::to_string_pretty(&score)
            .map_err(|e| CliError::new(INPUT_ERROR, e.to_string()))?,
    )?;

    write_manifest(
        &out_dir,
        &Manifest {
            command: "fit-score".into(),
            version: h2meta_core::VERSION.into(),
            inputs,
            params: serde_json::json!({}),
            outputs: vec!["fit_score.json".into()],
        },
    )?;
    eprintln!(
        "fit score {:.6} over {} observations",
        score.total,
        score.per_obs.len()
    );
    Ok(())
}
