use jointcast_core::rng::stream;

use crate::manifest::{current_argv, Manifest};
use crate::{CliError, CliResult, PredictArgs};

use super::{load_dataset_for_model, load_model, log, parse_z_pairs, write_draws_csv};

pub fn run(args: &PredictArgs, verbose: u8) -> CliResult<()> {
    if args.n_gen == 0 || args.n_gen_each == 0 {
        return Err(CliError::usage("--n-gen and --n-gen-each must be positive"));
    }
    let model = load_model(&args.model)?;
    let mut rng = stream(args.seed);

    let (samples, with_block, meta) = match (&args.z, &args.covariate_file) {
        (Some(z), None) => {
            let pairs = parse_z_pairs(z)?;
            let row = model
                .encode_covariates(&pairs)
                .map_err(|e| CliError::usage(format!("{e}")))?;
            let sample = model.predict_distribution(&row, args.n_gen, &mut rng)?;
            let meta = serde_json::json!({
                "model_id": model.model_id(),
                "z": z,
                "seed": args.seed,
                "n_gen": args.n_gen,
            });
            (vec![sample], false, meta)
        }
        (None, Some(path)) => {
            let ds = load_dataset_for_model(&model, path)?;
            let samples = model.batch_predict(ds.covariates(), args.n_gen_each, &mut rng)?;
            let meta = serde_json::json!({
                "model_id": model.model_id(),
                "covariate_file": path,
                "seed": args.seed,
                "n_gen_each": args.n_gen_each,
                "blocks": samples.len(),
            });
            (samples, true, meta)
        }
        _ => {
            return Err(CliError::usage(
                "give exactly one of --z or --covariate-file",
            ))
        }
    };

    write_draws_csv(&args.out, &samples, with_block)?;
    std::fs::write(
        format!("{}.meta.json", args.out),
        serde_json::to_string_pretty(&meta).map_err(anyhow::Error::new)?,
    )?;
    Manifest::new("predict", current_argv(), args.seed)
        .with_outputs(&[&args.out])
        .with_info(meta)
        .write_next_to(&args.out)?;
    log(verbose, format!("samples written to {}", args.out));
    Ok(())
}
