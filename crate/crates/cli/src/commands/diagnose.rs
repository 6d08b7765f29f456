use std::fs;

use h2meta_core::mcmc::summarize;

use crate::args::DiagnoseArgs;
use crate::error::{CliError, CliResult, INPUT_ERROR};
use crate::manifest::{digest_inputs, verify_against_previous, write_manifest, Manifest};

pub fn run_diagnose(args: &DiagnoseArgs) -> CliResult<()> {
    let out_dir = args.out.resolve();
    super::ensure_out_dir(&out_dir)?;
    let stems = super::chain_stems(&args.chain)?;
    let input_paths: Vec<_> = stems
        .iter()
        .map(|s| args.chain.join(format!("{s}.csv")))
        .collect();
    let inputs = digest_inputs(&input_paths.iter().map(|p| p.as_path()).collect::<Vec<_>>())?;
    verify_against_previous(&out_dir, "diagnose", &inputs)?;
    let chains: Vec<_> = stems
        .iter()
        .map(|stem| super::load_chain_checked(&args.chain, stem))
        .collect::<CliResult<_>>()?;
    let batch_count = args
        .batch_count
        .unwrap_or_else(|| chains[0].config.batch_count);
    let summary = summarize(&chains, batch_count)?;

    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::new(INPUT_ERROR, e.to_string()))?,
    )?;
    let mut lines = String::new();
    lines.push_str(&format!(
        "chains: {}   retained draws: {}   batch count: {batch_count}\n",
        summary.chains, summary.retained
    ));
    lines.push_str("parameter            mean          sd            mc_half_width\n");
    for p in &summary.parameters {
        lines.push_str(&format!(
            "{:<20} {:<13.6} {:<13.6} {}\n",
            p.name,
            p.mean,
            p.sd,
            p.mc_half_width
                .map(|h| format!("{h:.6}"))
                .unwrap_or_else(|| "-".into()),
        ));
    }
    for (name, r) in &summary.rhat {
        lines.push_str(&format!("rhat {name:<15} {r:.4}\n"));
    }
    fs::write(out_dir.join("diagnostics.txt"), &lines)?;
    print!("{lines}");

    write_manifest(
        &out_dir,
        &Manifest {
            command: "diagnose".into(),
            version: h2meta_core::VERSION.into(),
            inputs,
            params: serde_json::json!({ "batch_count": batch_count }),
            outputs: vec!["summary.json".into(), "diagnostics.txt".into()],
        },
    )?;
    Ok(())
}
