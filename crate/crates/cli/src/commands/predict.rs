use std::fs;

use h2meta_core::predictive::{predictive_density, write_density_csv, GridSpec, PredictiveQuery};

use crate::args::PredictArgs;
use crate::error::{CliError, CliResult, INPUT_ERROR};
use crate::manifest::{digest_inputs, verify_against_previous, write_manifest, Manifest};

fn parse_grid(spec: &str) -> CliResult<GridSpec> {
    let parts: Vec<&str> = spec.split(':').collect();
    let parse = || -> Option<GridSpec> {
        if parts.len() != 3 {
            return None;
        }
        Some(GridSpec {
            y_min: parts[0].trim().parse().ok()?,
            y_max: parts[1].trim().parse().ok()?,
            points: parts[2].trim().parse().ok()?,
        })
    };
    parse().ok_or_else(|| {
        CliError::new(
            INPUT_ERROR,
            format!("grid must be MIN:MAX:POINTS, got `{spec}`"),
        )
    })
}

pub fn run_predict(args: &PredictArgs) -> CliResult<()> {
    let out_dir = args.out.resolve();
    super::ensure_out_dir(&out_dir)?;
    let inputs = digest_inputs(&[
        &args.chain.join(format!("{}.csv", args.stem)),
        &args.chain.join(format!("{}.json", args.stem)),
    ])?;
    verify_against_previous(&out_dir, "predict", &inputs)?;
    let chain = super::load_chain_checked(&args.chain, &args.stem)?;
    let standardization = chain.standardization.clone();

    // start at standardized zero and apply original-scale overrides
    let mut x = standardization.centers.clone();
    for (name, value) in super::parse_kv_pairs(&args.x)? {
        let idx = standardization
            .names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| {
                CliError::new(INPUT_ERROR, format!("unknown moderator `{name}`"))
            })?;
        x[idx] = value
            .parse()
            .map_err(|_| CliError::new(INPUT_ERROR, format!("`{value}` is not a number")))?;
    }
    let query = PredictiveQuery {
        x,
        var_condition: args.var_condition,
        grid: match &args.grid {
            Some(spec) => parse_grid(spec)?,
            None => GridSpec::default(),
        },
    };
    let estimate = predictive_density(&chain, &query, &standardization)?;

    let csv_path = out_dir.join("density.csv");
    write_density_csv(fs::File::create(&csv_path)?, &estimate)?;
    let summary = serde_json::json!({
        "query": query,
        "mean": estimate.mean,
        "median": estimate.median,
        "variance": estimate.variance,
        "skewness": estimate.skewness,
        "kurtosis": estimate.kurtosis,
        "modes": estimate.modes,
        "quartiles": estimate.quartiles,
        "raw_mass": estimate.raw_mass,
        "grid_extended": estimate.grid_extended,
    });
    fs::write(
        out_dir.join("density_summary.json"),
        serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::new(INPUT_ERROR, e.to_string()))?,
    )?;

    write_manifest(
        &out_dir,
        &Manifest {
            command: "predict".into(),
            version: h2meta_core::VERSION.into(),
            inputs,
            params: serde_json::json!({ "query": query }),
            outputs: vec!["density.csv".into(), "density_summary.json".into()],
        },
    )?;
    eprintln!(
        "density over {} grid points written to {}",
        estimate.grid.len(),
        csv_path.display()
    );
    Ok(())
}
