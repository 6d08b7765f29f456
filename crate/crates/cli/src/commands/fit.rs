use std::fs;
use std::path::Path;

use h2meta_core::dataset::{load_dataset, standardize, ModeratorSchema};
use h2meta_core::mcmc::{run_chains, save_chain, summarize, ChainSummary, McmcConfig, WindowPolicy};
use h2meta_core::model::PriorConfig;
use h2meta_core::Error as CoreError;

use crate::args::FitArgs;
use crate::error::{CliError, CliResult, INPUT_ERROR, SAMPLER_ERROR};
use crate::manifest::{digest_inputs, sha256_file, verify_against_previous, write_manifest, Manifest};

/// Effective fit configuration, resolved as defaults < config file < flags.
fn resolve_config(args: &FitArgs) -> CliResult<(McmcConfig, PriorConfig)> {
    let mut mcmc = McmcConfig::default();
    let mut prior_lines = String::new();

    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::new(INPUT_ERROR, format!("cannot read {}: {e}", path.display()))
        })?;
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::new(
                    INPUT_ERROR,
                    format!("{}:{}: expected key = value", path.display(), line_no + 1),
                )
            })?;
            let key = key.trim();
            let value = value.trim();
            if let Some(prior_key) = key.strip_prefix("prior.") {
                prior_lines.push_str(&format!("{prior_key} = {value}\n"));
                continue;
            }
            apply_mcmc_key(&mut mcmc, key, value).map_err(|msg| {
                CliError::new(
                    INPUT_ERROR,
                    format!("{}:{}: {msg}", path.display(), line_no + 1),
                )
            })?;
        }
    }

    // flags override file entries
    if let Some(v) = args.iterations {
        mcmc.iterations = v;
    }
    if let Some(v) = args.burn_in {
        mcmc.burn_in = v;
    }
    if let Some(v) = args.thin {
        mcmc.thin = v;
    }
    if let Some(v) = args.seed {
        mcmc.seed = v;
    }
    if let Some(v) = args.chains {
        mcmc.chains = v;
    }
    if let Some(v) = args.batch_count {
        mcmc.batch_count = v;
    }
    if let Some(v) = args.tail_mass_tol {
        mcmc.window = WindowPolicy::Adaptive { tail_mass_tol: v };
    }
    if let Some(spec) = &args.fixed_window {
        mcmc.window = parse_fixed_window(spec)?;
    }

    for (key, value) in super::parse_kv_pairs(&args.prior)? {
        prior_lines.push_str(&format!("{key} = {value}\n"));
    }
    let prior = PriorConfig::from_kv(&prior_lines)?;
    mcmc.validate()?;
    Ok((mcmc, prior))
}

fn apply_mcmc_key(cfg: &mut McmcConfig, key: &str, value: &str) -> Result<(), String> {
    let bad = |v: &str| format!("`{v}` is not valid for `{key}`");
    match key {
        "iterations" => cfg.iterations = value.parse().map_err(|_| bad(value))?,
        "burn_in" => cfg.burn_in = value.parse().map_err(|_| bad(value))?,
        "thin" => cfg.thin = value.parse().map_err(|_| bad(value))?,
        "seed" => cfg.seed = value.parse().map_err(|_| bad(value))?,
        "chains" => cfg.chains = value.parse().map_err(|_| bad(value))?,
        "batch_count" => cfg.batch_count = value.parse().map_err(|_| bad(value))?,
        "tail_mass_tol" => {
            cfg.window = WindowPolicy::Adaptive {
                tail_mass_tol: value.parse().map_err(|_| bad(value))?,
            }
        }
        "fixed_window" => cfg.window = parse_fixed_window(value).map_err(|e| e.message)?,
        other => return Err(format!("unknown key `{other}`")),
    }
    Ok(())
}

fn parse_fixed_window(spec: &str) -> CliResult<WindowPolicy> {
    let parse = || -> Option<WindowPolicy> {
        let (lo, hi) = spec.split_once(':')?;
        Some(WindowPolicy::Fixed {
            j_min: lo.trim().parse().ok()?,
            j_max: hi.trim().parse().ok()?,
        })
    };
    parse().ok_or_else(|| {
        CliError::new(
            INPUT_ERROR,
            format!("fixed window must be MIN:MAX, got `{spec}`"),
        )
    })
}

fn write_diagnostics_report(path: &Path, summary: &ChainSummary) -> CliResult<()> {
    let mut text = String::new();
    text.push_str(&format!(
        "retained draws: {} across {} chain(s)\n\n",
        summary.retained, summary.chains
    ));
    text.push_str("parameter            mean          sd            2.5%          97.5%         mc_half_width\n");
    for p in &summary.parameters {
        text.push_str(&format!(
            "{:<20} {:<13.6} {:<13.6} {:<13.6} {:<13.6} {}\n",
            p.name,
            p.mean,
            p.sd,
            p.q025,
            p.q975,
            p.mc_half_width
                .map(|h| format!("{h:.6}"))
                .unwrap_or_else(|| "-".into()),
        ));
    }
    if !summary.rhat.is_empty() {
        text.push_str("\nsplit potential scale reduction:\n");
        for (name, r) in &summary.rhat {
            text.push_str(&format!("{name:<20} {r:.4}\n"));
        }
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn run_fit(args: &FitArgs) -> CliResult<()> {
    let out_dir = args.out.resolve();
    super::ensure_out_dir(&out_dir)?;
    let (mcmc, prior) = resolve_config(args)?;
    let inputs = digest_inputs(&[&args.dataset])?;
    verify_against_previous(&out_dir, "fit", &inputs)?;

    let schema = ModeratorSchema::canonical();
    let records = load_dataset(&args.dataset, &schema)?;
    eprintln!("loaded {} records", records.len());
    let dataset = standardize(&records, &schema)?;
    let digest = sha256_file(&args.dataset)?;

    let mut chains = match run_chains(&dataset, &prior, &mcmc) {
        Ok(chains) => chains,
        Err(CoreError::Sampler(message)) => {
            let dump = out_dir.join("state_dump.txt");
            fs::write(&dump, &message)?;
            return Err(CliError::new(
                SAMPLER_ERROR,
                format!("sampler aborted; state dump at {}", dump.display()),
            ));
        }
        Err(e) => return Err(e.into()),
    };
    for chain in &mut chains {
        chain.dataset_digest = Some(digest.clone());
    }

    let mut outputs = Vec::new();
    for chain in &chains {
        let stem = format!("chain_{}", chain.chain_index);
        save_chain(chain, &out_dir, &stem)?;
        outputs.push(format!("{stem}.csv"));
        outputs.push(format!("{stem}.json"));
    }
    let summary = summarize(&chains, mcmc.batch_count)?;
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::new(INPUT_ERROR, e.to_string()))?,
    )?;
    write_diagnostics_report(&out_dir.join("diagnostics.txt"), &summary)?;
    outputs.push("summary.json".into());
    outputs.push("diagnostics.txt".into());

    write_manifest(
        &out_dir,
        &Manifest {
            command: "fit".into(),
            version: h2meta_core::VERSION.into(),
            inputs,
            params: serde_json::json!({
                "mcmc": mcmc,
                "prior": prior,
            }),
            outputs,
        },
    )?;
    eprintln!(
        "fit complete: {} chain(s), {} retained draws each",
        chains.len(),
        chains[0].len()
    );
    Ok(())
}
