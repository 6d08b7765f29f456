use std::fs;
use std::io::Write;

use h2meta_core::predictive::{profile_curve, Informant};

use crate::args::ProfileArgs;
use crate::error::{CliError, CliResult};
use crate::manifest::{digest_inputs, verify_against_previous, write_manifest, Manifest};

pub fn run_profile(args: &ProfileArgs) -> CliResult<()> {
    let out_dir = args.out.resolve();
    super::ensure_out_dir(&out_dir)?;
    let inputs = digest_inputs(&[
        &args.chain.join(format!("{}.csv", args.stem)),
        &args.chain.join(format!("{}.json", args.stem)),
    ])?;
    verify_against_previous(&out_dir, "profile", &inputs)?;
    let chain = super::load_chain_checked(&args.chain, &args.stem)?;
    let standardization = chain.standardization.clone();

    let informants: Vec<Informant> = if args.informants.is_empty() {
        Informant::ALL.to_vec()
    } else {
        args.informants
            .iter()
            .map(|name| Informant::parse(name).map_err(CliError::from))
            .collect::<CliResult<_>>()?
    };

    let csv_path = out_dir.join("profile.csv");
    let mut file = fs::File::create(&csv_path)?;
    writeln!(file, "informant,age,median,q25,q75")?;
    for informant in &informants {
        let points = profile_curve(&chain, *informant, &args.ages, &standardization)?;
        for p in points {
            writeln!(
                file,
                "{},{},{},{},{}",
                informant.column(),
                p.age,
                p.median,
                p.q25,
                p.q75
            )?;
        }
    }
    file.flush()?;

    write_manifest(
        &out_dir,
        &Manifest {
            command: "profile".into(),
            version: h2meta_core::VERSION.into(),
            inputs,
            params: serde_json::json!({
                "ages": args.ages,
                "informants": informants.iter().map(|i| i.column()).collect::<Vec<_>>(),
            }),
            outputs: vec!["profile.csv".into()],
        },
    )?;
    eprintln!(
        "profile over {} informants x {} ages written to {}",
        informants.len(),
        args.ages.len(),
        csv_path.display()
    );
    Ok(())
}
