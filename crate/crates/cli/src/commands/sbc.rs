use std::fs;

use h2meta_core::mcmc::{sbc_check, McmcConfig, SbcSetup, WindowPolicy};
use h2meta_core::model::PriorConfig;

use crate::args::SbcArgs;
use crate::error::{CliError, CliResult, INPUT_ERROR};
use crate::manifest::{write_manifest, Manifest};

/// Calibration runs use a reduced prior: unit-scale coefficient variances
/// keep the truncation window small so hundreds of replications stay cheap.
fn reduced_prior() -> PriorConfig {
    PriorConfig {
        beta0_var: 1.0,
        slope_var: 1.0,
        beta_omega_var: 0.5,
        sigma_mu2_upper: 1.0,
        ..Default::default()
    }
}

pub fn run_sbc(args: &SbcArgs) -> CliResult<()> {
    let out_dir = args.out.resolve();
    super::ensure_out_dir(&out_dir)?;

    let mut prior_lines = String::new();
    for (key, value) in super::parse_kv_pairs(&args.prior)? {
        prior_lines.push_str(&format!("{key} = {value}\n"));
    }
    let prior = if prior_lines.is_empty() {
        reduced_prior()
    } else {
        let mut base = reduced_prior().to_kv();
        base.push_str(&prior_lines);
        PriorConfig::from_kv(&base)?
    };

    let config = McmcConfig {
        iterations: args.iterations,
        burn_in: args.burn_in,
        thin: args.thin,
        seed: args.seed,
        batch_count: 10,
        chains: 1,
        window: WindowPolicy::default(),
        skip_updates: Vec::new(),
    };
    let setup = SbcSetup {
        n_obs: args.n_obs,
        n_moderators: args.n_moderators,
        bins: args.bins,
        ..Default::default()
    };
    let report = sbc_check(&prior, &config, args.replications, &setup)?;

    println!(
        "simulation-based calibration: {} replications, {} rank levels",
        report.replications, report.rank_levels
    );
    for p in &report.parameters {
        println!(
            "{:<12} chi-square {:>8.2}  p {:.4}{}",
            p.name,
            p.chi_square,
            p.p_value,
            if p.flagged { "  FLAGGED" } else { "" }
        );
    }
    fs::write(
        out_dir.join("sbc_report.json"),
        serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::new(INPUT_ERROR, e.to_string()))?,
    )?;

    write_manifest(
        &out_dir,
        &Manifest {
            command: "sbc".into(),
            version: h2meta_core::VERSION.into(),
            inputs: Vec::new(),
            params: serde_json::json!({
                "replications": args.replications,
                "mcmc": config,
                "prior": prior,
                "setup": setup,
            }),
            outputs: vec!["sbc_report.json".into()],
        },
    )?;
    Ok(())
}
